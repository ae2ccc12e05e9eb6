#include "floxels/distance_transform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace floxels {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 1D squared-distance transform, lower envelope of parabolas
// (Felzenszwalb & Huttenlocher). f and d in squared cell units.
void dt1d(const double* f, double* d, int n, int* v, double* z) {
    int k = -1;
    for (int q = 0; q < n; ++q) {
        if (f[q] == kInf) continue;
        while (k >= 0) {
            const double s =
                ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * (q - v[k]));
            if (s <= z[k]) {
                --k;
            } else {
                break;
            }
        }
        ++k;
        v[k] = q;
        z[k] = k == 0 ? -kInf
                      : ((f[q] + q * q) - (f[v[k - 1]] + v[k - 1] * v[k - 1])) /
                            (2.0 * (q - v[k - 1]));
    }
    if (k < 0) {
        std::fill(d, d + n, kInf);
        return;
    }
    int j = 0;
    for (int q = 0; q < n; ++q) {
        while (j < k && z[j + 1] < q) ++j;
        const double dq = q - v[j];
        d[q] = dq * dq + f[v[j]];
    }
}

}  // namespace

DistanceTransform::DistanceTransform(const PointCloud& target,
                                     const Aabb& bounds, double cell,
                                     double truncation) {
    if (target.empty()) throw InvalidConfig("distance transform target is empty");
    if (cell <= 0.0) throw InvalidConfig("dt cell must be positive");
    if (truncation <= 0.0) throw InvalidConfig("dt truncation must be positive");
    if (!bounds.valid()) throw InvalidConfig("dt bounds are empty");

    origin_ = bounds.min;
    cell_ = cell;
    truncation_ = truncation;
    const Vec3 ext = bounds.extent();
    auto cells_for = [&](double e) {
        return std::max<size_t>(
            1, static_cast<size_t>(std::ceil(e / cell - 1e-12)));
    };
    nx_ = cells_for(ext.x);
    ny_ = cells_for(ext.y);
    nz_ = cells_for(ext.z);

    // Squared distances in cell units; occupied cells seed zero.
    std::vector<double> d2(nx_ * ny_ * nz_, kInf);
    auto cell_index = [&](double v, double o, size_t n) -> long {
        const long i = static_cast<long>(std::floor((v - o) / cell_));
        return std::clamp<long>(i, -1, static_cast<long>(n));
    };
    for (const Point3& p : target.points) {
        const long i = cell_index(p.x, origin_.x, nx_);
        const long j = cell_index(p.y, origin_.y, ny_);
        const long k = cell_index(p.z, origin_.z, nz_);
        if (i < 0 || j < 0 || k < 0 || i >= static_cast<long>(nx_) ||
            j >= static_cast<long>(ny_) || k >= static_cast<long>(nz_))
            continue;  // outside the field; nearest-cell semantics still hold
        d2[static_cast<size_t>(i) +
           nx_ * (static_cast<size_t>(j) + ny_ * static_cast<size_t>(k))] = 0.0;
    }

    const size_t nmax = std::max({nx_, ny_, nz_});
    std::vector<double> f(nmax), d(nmax);
    std::vector<int> v(nmax);
    std::vector<double> z(nmax + 1);

    // Pass 1: x rows.
    for (size_t k = 0; k < nz_; ++k)
        for (size_t j = 0; j < ny_; ++j) {
            double* row = &d2[nx_ * (j + ny_ * k)];
            std::copy(row, row + nx_, f.data());
            dt1d(f.data(), row, static_cast<int>(nx_), v.data(), z.data());
        }
    // Pass 2: y columns.
    for (size_t k = 0; k < nz_; ++k)
        for (size_t i = 0; i < nx_; ++i) {
            for (size_t j = 0; j < ny_; ++j) f[j] = d2[i + nx_ * (j + ny_ * k)];
            dt1d(f.data(), d.data(), static_cast<int>(ny_), v.data(), z.data());
            for (size_t j = 0; j < ny_; ++j) d2[i + nx_ * (j + ny_ * k)] = d[j];
        }
    // Pass 3: z columns.
    for (size_t j = 0; j < ny_; ++j)
        for (size_t i = 0; i < nx_; ++i) {
            for (size_t k = 0; k < nz_; ++k) f[k] = d2[i + nx_ * (j + ny_ * k)];
            dt1d(f.data(), d.data(), static_cast<int>(nz_), v.data(), z.data());
            for (size_t k = 0; k < nz_; ++k) d2[i + nx_ * (j + ny_ * k)] = d[k];
        }

    values_.resize(d2.size());
    for (size_t i = 0; i < d2.size(); ++i)
        values_[i] = std::min(std::sqrt(d2[i]) * cell_, truncation_);
}

DtSample DistanceTransform::sample(const Point3& p) const {
    DtSample out;
    out.distance = truncation_;

    // Cell-center lattice coordinates.
    const double u[3] = {(p.x - origin_.x) / cell_ - 0.5,
                         (p.y - origin_.y) / cell_ - 0.5,
                         (p.z - origin_.z) / cell_ - 0.5};
    const double n[3] = {static_cast<double>(nx_ - 1),
                         static_cast<double>(ny_ - 1),
                         static_cast<double>(nz_ - 1)};
    for (int a = 0; a < 3; ++a)
        if (u[a] < 0.0 || u[a] > n[a]) return out;

    size_t c[3];
    double frac[3];
    const size_t dims_[3] = {nx_, ny_, nz_};
    for (int a = 0; a < 3; ++a) {
        size_t ci = static_cast<size_t>(std::floor(u[a]));
        if (dims_[a] >= 2) ci = std::min(ci, dims_[a] - 2);
        c[a] = ci;
        frac[a] = u[a] - static_cast<double>(ci);
    }

    const double wx[2] = {1.0 - frac[0], frac[0]};
    const double wy[2] = {1.0 - frac[1], frac[1]};
    const double wz[2] = {1.0 - frac[2], frac[2]};
    const double dw[2] = {-1.0, 1.0};

    double dist = 0.0;
    Vec3 grad;
    for (int dk = 0; dk < (nz_ > 1 ? 2 : 1); ++dk)
        for (int dj = 0; dj < (ny_ > 1 ? 2 : 1); ++dj)
            for (int di = 0; di < (nx_ > 1 ? 2 : 1); ++di) {
                const double val = value_at(c[0] + di, c[1] + dj, c[2] + dk);
                dist += val * wx[di] * wy[dj] * wz[dk];
                grad.x += val * dw[di] * wy[dj] * wz[dk] / cell_;
                grad.y += val * wx[di] * dw[dj] * wz[dk] / cell_;
                grad.z += val * wx[di] * wy[dj] * dw[dk] / cell_;
            }

    if (nx_ == 1) grad.x = 0.0;
    if (ny_ == 1) grad.y = 0.0;
    if (nz_ == 1) grad.z = 0.0;

    if (dist >= truncation_ - kEpsTrunc) {
        out.distance = truncation_;
        return out;
    }
    out.distance = dist;
    out.spatial_grad = grad;
    out.valid = true;
    return out;
}

std::vector<uint16_t> DistanceTransform::slice_millimeters(size_t k) const {
    if (k >= nz_) throw InvalidConfig("slice index out of range");
    std::vector<uint16_t> img(nx_ * ny_);
    for (size_t j = 0; j < ny_; ++j)
        for (size_t i = 0; i < nx_; ++i) {
            const double mm = value_at(i, j, k) * 1000.0;
            img[j * nx_ + i] =
                static_cast<uint16_t>(std::clamp(mm, 0.0, 65535.0));
        }
    return img;
}

DistanceTransform build_dt(const PointCloud& target, double cell,
                           double truncation) {
    if (target.empty()) throw InvalidConfig("distance transform target is empty");
    return DistanceTransform(target, target.bounds().expanded(truncation),
                             cell, truncation);
}

}  // namespace floxels
