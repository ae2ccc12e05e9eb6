#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "floxels/types.hpp"

namespace floxels {

// Point positions plus optional evaluation-only channels stored as parallel
// arrays. A channel, when present, has exactly one entry per point.
struct PointCloud {
    std::vector<Point3> points;
    std::optional<std::vector<uint32_t>> labels;
    std::optional<std::vector<Vec3>> gt_flow;
    std::optional<std::vector<uint8_t>> dynamic_mask;

    size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }

    // Throws InvalidConfig on channel length mismatch or non-finite data.
    void validate() const;

    Aabb bounds() const;

    // Keeps exactly the points at the given indices, all channels in sync.
    PointCloud subset(const std::vector<size_t>& keep) const;
};

// Drops points inside the ego cylinder (XY radius), above max_height, or
// beyond max_range (3D). Thresholds in meters.
PointCloud filter_cloud(const PointCloud& c, double ego_radius,
                        double max_height, double max_range);

// Ground stand-in: drops points with z < z_threshold.
PointCloud ground_filter_z(const PointCloud& c, double z_threshold);

}  // namespace floxels
