#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "floxels/types.hpp"

namespace floxels {

// 3x3 row-major matrix, used for the spatial jacobian of the interpolant.
using Mat3 = std::array<std::array<double, 3>, 3>;

// Trilinear interpolation stencil at a query point: the 8 enclosing lattice
// corners (flat parameter indices) and their partition-of-unity weights.
struct TrilinearStencil {
    std::array<size_t, 8> corner;
    std::array<double, 8> weight;
};

// Axis-aligned lattice of trainable flow vectors. Corner (i,j,k) lives at
// origin + (i,j,k)*cell_size and maps to flat index i + nx*(j + ny*k);
// parameters are stored as 3 doubles per corner in that order.
class FlowGrid {
  public:
    FlowGrid() = default;  // empty grid; assign before use
    FlowGrid(const Aabb& scene_bounds, double cell_size, double margin);

    const Vec3& origin() const { return origin_; }
    double cell_size() const { return cell_size_; }
    std::array<size_t, 3> dims() const { return {nx_, ny_, nz_}; }
    size_t num_corners() const { return nx_ * ny_ * nz_; }

    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }

    size_t corner_index(size_t i, size_t j, size_t k) const {
        return i + nx_ * (j + ny_ * k);
    }
    Vec3 corner_position(size_t flat) const;

    Vec3 corner_value(size_t flat) const {
        return {params_[3 * flat], params_[3 * flat + 1],
                params_[3 * flat + 2]};
    }
    void set_corner_value(size_t flat, const Vec3& v) {
        params_[3 * flat] = v.x;
        params_[3 * flat + 1] = v.y;
        params_[3 * flat + 2] = v.z;
    }

    // Out-of-grid query positions are clamped to the grid AABB.
    TrilinearStencil stencil(const Point3& p) const;
    Vec3 query_flow(const Point3& p) const;

    // Adjoint of query_flow: accumulates upstream * w_i into the 8 corners'
    // slots of grad_accum (size 3 * num_corners).
    void scatter_grad(const Point3& p, const Vec3& upstream,
                      std::vector<double>& grad_accum) const;

    // d(flow)/d(position) of the interpolant; throws OnCellBoundary when p
    // is on a cell face or outside the grid.
    Mat3 query_flow_spatial_jacobian(const Point3& p) const;

    Aabb grid_bounds() const;

    // JSON header line (origin, cell_size, dims) followed by the raw
    // little-endian float32 parameter block.
    void save_checkpoint(const std::string& path) const;
    static FlowGrid load_checkpoint(const std::string& path);

  private:
    Vec3 origin_;
    double cell_size_ = 0.0;
    size_t nx_ = 0, ny_ = 0, nz_ = 0;
    std::vector<double> params_;
};

}  // namespace floxels
