#pragma once

#include <vector>

#include "floxels/point_cloud.hpp"

namespace floxels {

// Balanced 3D k-d tree over a snapshot of point positions. Immutable after
// construction; queries are const and thread-safe.
class KdTree {
  public:
    KdTree() = default;
    explicit KdTree(const std::vector<Point3>& points);
    explicit KdTree(const PointCloud& cloud) : KdTree(cloud.points) {}

    // Indices i with ||p_i - q|| <= r (closed ball), ascending order.
    std::vector<size_t> radius_neighbors(const Point3& q, double r) const;

    size_t size() const { return points_.size(); }

  private:
    struct Node {
        int32_t left = -1;
        int32_t right = -1;
        uint32_t begin = 0;   // leaf payload range into order_
        uint32_t end = 0;
        uint8_t axis = 0;
        double split = 0.0;
        bool leaf() const { return left < 0 && right < 0; }
    };

    int32_t build(uint32_t begin, uint32_t end);
    void query(int32_t node, const Point3& q, double r2,
               std::vector<size_t>& out) const;

    std::vector<Point3> points_;
    std::vector<uint32_t> order_;
    std::vector<Node> nodes_;
    int32_t root_ = -1;

    static constexpr uint32_t kLeafSize = 16;
};

}  // namespace floxels
