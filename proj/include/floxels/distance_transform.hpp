#pragma once

#include <array>
#include <string>
#include <vector>

#include "floxels/point_cloud.hpp"

namespace floxels {

struct DtSample {
    double distance = 0.0;  // meters
    Vec3 spatial_grad;      // d(distance)/d(position)
    bool valid = false;
};

// Dense truncated Euclidean distance field for one target scan. Values are
// distances from each cell center to the nearest occupied cell center
// (occupied = contains at least one target point), clamped to truncation.
// Immutable after construction.
class DistanceTransform {
  public:
    // bounds: sampling region, expanded internally to whole cells.
    DistanceTransform(const PointCloud& target, const Aabb& bounds,
                      double cell, double truncation);

    double cell() const { return cell_; }
    double truncation() const { return truncation_; }
    const Vec3& origin() const { return origin_; }
    std::array<size_t, 3> dims() const { return {nx_, ny_, nz_}; }
    const std::vector<double>& values() const { return values_; }

    double value_at(size_t i, size_t j, size_t k) const {
        return values_[i + nx_ * (j + ny_ * k)];
    }
    Vec3 cell_center(size_t i, size_t j, size_t k) const {
        return origin_ + Vec3(static_cast<double>(i) + 0.5,
                              static_cast<double>(j) + 0.5,
                              static_cast<double>(k) + 0.5) *
                             cell_;
    }

    // Trilinear interpolation over cell centers with its exact gradient.
    // valid=false outside the sampling lattice or within eps_trunc of the
    // truncation plateau; such samples carry distance=truncation, grad=0.
    DtSample sample(const Point3& p) const;

    // Axial z-slice as 16-bit millimeter values, row-major (y rows, x cols).
    std::vector<uint16_t> slice_millimeters(size_t k) const;

    static constexpr double kEpsTrunc = 1e-6;

  private:
    Vec3 origin_;  // min corner of cell (0,0,0)
    double cell_ = 0.0;
    double truncation_ = 0.0;
    size_t nx_ = 0, ny_ = 0, nz_ = 0;
    std::vector<double> values_;
};

// Convenience for the multi-scan pipeline: bounds = target AABB expanded by
// the truncation radius.
DistanceTransform build_dt(const PointCloud& target, double cell,
                           double truncation);

}  // namespace floxels
