#include "floxels/point_cloud.hpp"

#include <limits>

namespace floxels {

void PointCloud::validate() const {
    const size_t n = points.size();
    if (labels && labels->size() != n)
        throw InvalidConfig("labels channel length mismatch");
    if (gt_flow && gt_flow->size() != n)
        throw InvalidConfig("gt_flow channel length mismatch");
    if (dynamic_mask && dynamic_mask->size() != n)
        throw InvalidConfig("dynamic_mask channel length mismatch");
    for (const auto& p : points)
        if (!p.finite()) throw InvalidConfig("non-finite point coordinate");
    if (gt_flow)
        for (const auto& f : *gt_flow)
            if (!f.finite()) throw InvalidConfig("non-finite gt_flow entry");
}

Aabb PointCloud::bounds() const {
    constexpr double inf = std::numeric_limits<double>::infinity();
    Aabb b{{inf, inf, inf}, {-inf, -inf, -inf}};
    for (const auto& p : points) {
        b.min.x = std::min(b.min.x, p.x);
        b.min.y = std::min(b.min.y, p.y);
        b.min.z = std::min(b.min.z, p.z);
        b.max.x = std::max(b.max.x, p.x);
        b.max.y = std::max(b.max.y, p.y);
        b.max.z = std::max(b.max.z, p.z);
    }
    return b;
}

PointCloud PointCloud::subset(const std::vector<size_t>& keep) const {
    PointCloud out;
    out.points.reserve(keep.size());
    for (size_t i : keep) out.points.push_back(points[i]);
    if (labels) {
        out.labels.emplace();
        out.labels->reserve(keep.size());
        for (size_t i : keep) out.labels->push_back((*labels)[i]);
    }
    if (gt_flow) {
        out.gt_flow.emplace();
        out.gt_flow->reserve(keep.size());
        for (size_t i : keep) out.gt_flow->push_back((*gt_flow)[i]);
    }
    if (dynamic_mask) {
        out.dynamic_mask.emplace();
        out.dynamic_mask->reserve(keep.size());
        for (size_t i : keep) out.dynamic_mask->push_back((*dynamic_mask)[i]);
    }
    return out;
}

PointCloud filter_cloud(const PointCloud& c, double ego_radius,
                        double max_height, double max_range) {
    if (ego_radius < 0.0 || max_range < 0.0)
        throw InvalidConfig("filter radii must be non-negative");
    std::vector<size_t> keep;
    keep.reserve(c.size());
    for (size_t i = 0; i < c.size(); ++i) {
        const Point3& p = c.points[i];
        if (p.norm_xy() <= ego_radius) continue;
        if (p.z > max_height) continue;
        if (p.norm() > max_range) continue;
        keep.push_back(i);
    }
    return c.subset(keep);
}

PointCloud ground_filter_z(const PointCloud& c, double z_threshold) {
    std::vector<size_t> keep;
    keep.reserve(c.size());
    for (size_t i = 0; i < c.size(); ++i)
        if (c.points[i].z >= z_threshold) keep.push_back(i);
    return c.subset(keep);
}

}  // namespace floxels
