#include "floxels/flow_grid.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

namespace floxels {

namespace {

size_t corners_for_extent(double extent, double cell) {
    // Enough corners so (n-1)*cell covers the extent; at least one cell.
    const size_t cells =
        std::max<size_t>(1, static_cast<size_t>(std::ceil(extent / cell - 1e-12)));
    return cells + 1;
}

}  // namespace

FlowGrid::FlowGrid(const Aabb& scene_bounds, double cell_size, double margin) {
    if (cell_size <= 0.0) throw InvalidConfig("cell_size must be positive");
    if (!scene_bounds.valid()) throw InvalidConfig("empty scene bounds");
    const Aabb b = scene_bounds.expanded(margin);
    if (!b.valid() || !b.min.finite() || !b.max.finite())
        throw InvalidConfig("degenerate grid bounds");
    origin_ = b.min;
    cell_size_ = cell_size;
    const Vec3 ext = b.extent();
    if (ext.x <= 0.0 && ext.y <= 0.0 && ext.z <= 0.0 && margin <= 0.0)
        throw InvalidConfig("degenerate grid bounds");
    nx_ = corners_for_extent(ext.x, cell_size);
    ny_ = corners_for_extent(ext.y, cell_size);
    nz_ = corners_for_extent(ext.z, cell_size);
    params_.assign(3 * nx_ * ny_ * nz_, 0.0);
}

Vec3 FlowGrid::corner_position(size_t flat) const {
    const size_t i = flat % nx_;
    const size_t j = (flat / nx_) % ny_;
    const size_t k = flat / (nx_ * ny_);
    return origin_ + Vec3(static_cast<double>(i), static_cast<double>(j),
                          static_cast<double>(k)) *
                         cell_size_;
}

Aabb FlowGrid::grid_bounds() const {
    return {origin_,
            origin_ + Vec3(static_cast<double>(nx_ - 1),
                           static_cast<double>(ny_ - 1),
                           static_cast<double>(nz_ - 1)) *
                          cell_size_};
}

TrilinearStencil FlowGrid::stencil(const Point3& p) const {
    // Local lattice coordinates, clamped to the grid.
    auto local = [&](double v, double o, size_t n) {
        double u = (v - o) / cell_size_;
        return std::clamp(u, 0.0, static_cast<double>(n - 1));
    };
    const double ux = local(p.x, origin_.x, nx_);
    const double uy = local(p.y, origin_.y, ny_);
    const double uz = local(p.z, origin_.z, nz_);

    auto cell_of = [](double u, size_t n) {
        size_t c = static_cast<size_t>(std::floor(u));
        return std::min(c, n - 2);
    };
    const size_t i0 = cell_of(ux, nx_);
    const size_t j0 = cell_of(uy, ny_);
    const size_t k0 = cell_of(uz, nz_);
    const double fx = ux - static_cast<double>(i0);
    const double fy = uy - static_cast<double>(j0);
    const double fz = uz - static_cast<double>(k0);

    const double wx[2] = {1.0 - fx, fx};
    const double wy[2] = {1.0 - fy, fy};
    const double wz[2] = {1.0 - fz, fz};

    TrilinearStencil s;
    int idx = 0;
    for (int dk = 0; dk < 2; ++dk)
        for (int dj = 0; dj < 2; ++dj)
            for (int di = 0; di < 2; ++di) {
                s.corner[idx] = corner_index(i0 + di, j0 + dj, k0 + dk);
                s.weight[idx] = wx[di] * wy[dj] * wz[dk];
                ++idx;
            }
    return s;
}

Vec3 FlowGrid::query_flow(const Point3& p) const {
    const TrilinearStencil s = stencil(p);
    Vec3 out;
    for (int i = 0; i < 8; ++i) out += corner_value(s.corner[i]) * s.weight[i];
    return out;
}

void FlowGrid::scatter_grad(const Point3& p, const Vec3& upstream,
                            std::vector<double>& grad_accum) const {
    const TrilinearStencil s = stencil(p);
    for (int i = 0; i < 8; ++i) {
        const size_t base = 3 * s.corner[i];
        grad_accum[base] += upstream.x * s.weight[i];
        grad_accum[base + 1] += upstream.y * s.weight[i];
        grad_accum[base + 2] += upstream.z * s.weight[i];
    }
}

Mat3 FlowGrid::query_flow_spatial_jacobian(const Point3& p) const {
    const double u[3] = {(p.x - origin_.x) / cell_size_,
                         (p.y - origin_.y) / cell_size_,
                         (p.z - origin_.z) / cell_size_};
    const size_t n[3] = {nx_, ny_, nz_};
    size_t c[3];
    double f[3];
    for (int a = 0; a < 3; ++a) {
        if (u[a] <= 0.0 || u[a] >= static_cast<double>(n[a] - 1))
            throw OnCellBoundary("query position outside grid interior");
        c[a] = static_cast<size_t>(std::floor(u[a]));
        f[a] = u[a] - static_cast<double>(c[a]);
        if (f[a] == 0.0)
            throw OnCellBoundary("query position on a cell face");
    }

    const double w[3][2] = {{1.0 - f[0], f[0]},
                            {1.0 - f[1], f[1]},
                            {1.0 - f[2], f[2]}};
    // d(weight)/d(lattice coord); chain rule adds a 1/cell_size factor.
    const double dw[2] = {-1.0, 1.0};

    Mat3 J{};
    for (int dk = 0; dk < 2; ++dk)
        for (int dj = 0; dj < 2; ++dj)
            for (int di = 0; di < 2; ++di) {
                const Vec3 v =
                    corner_value(corner_index(c[0] + di, c[1] + dj, c[2] + dk));
                const double gx = dw[di] * w[1][dj] * w[2][dk] / cell_size_;
                const double gy = w[0][di] * dw[dj] * w[2][dk] / cell_size_;
                const double gz = w[0][di] * w[1][dj] * dw[dk] / cell_size_;
                J[0][0] += v.x * gx;
                J[0][1] += v.x * gy;
                J[0][2] += v.x * gz;
                J[1][0] += v.y * gx;
                J[1][1] += v.y * gy;
                J[1][2] += v.y * gz;
                J[2][0] += v.z * gx;
                J[2][1] += v.z * gy;
                J[2][2] += v.z * gz;
            }
    return J;
}

void FlowGrid::save_checkpoint(const std::string& path) const {
    nlohmann::json header;
    header["origin"] = {origin_.x, origin_.y, origin_.z};
    header["cell_size"] = cell_size_;
    header["dims"] = {nx_, ny_, nz_};
    if (auto dir = std::filesystem::path(path).parent_path(); !dir.empty())
        std::filesystem::create_directories(dir);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path);
    out << header.dump() << "\n";
    std::vector<float> raw(params_.begin(), params_.end());
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size() * sizeof(float)));
    if (!out) throw IoError("checkpoint write failed: " + path);
}

FlowGrid FlowGrid::load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    std::string header_line;
    if (!std::getline(in, header_line))
        throw ParseError(path + ": missing checkpoint header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_line);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": bad checkpoint header: " + e.what());
    }
    FlowGrid g;
    try {
        const auto o = header.at("origin");
        g.origin_ = {o.at(0).get<double>(), o.at(1).get<double>(),
                     o.at(2).get<double>()};
        g.cell_size_ = header.at("cell_size").get<double>();
        const auto d = header.at("dims");
        g.nx_ = d.at(0).get<size_t>();
        g.ny_ = d.at(1).get<size_t>();
        g.nz_ = d.at(2).get<size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": bad checkpoint header: " + e.what());
    }
    if (g.cell_size_ <= 0.0 || g.nx_ < 2 || g.ny_ < 2 || g.nz_ < 2)
        throw ParseError(path + ": invalid checkpoint geometry");
    const size_t count = 3 * g.nx_ * g.ny_ * g.nz_;
    std::vector<float> raw(count);
    in.read(reinterpret_cast<char*>(raw.data()),
            static_cast<std::streamsize>(count * sizeof(float)));
    if (static_cast<size_t>(in.gcount()) != count * sizeof(float))
        throw ParseError(path + ": truncated parameter block");
    g.params_.assign(raw.begin(), raw.end());
    return g;
}

}  // namespace floxels
