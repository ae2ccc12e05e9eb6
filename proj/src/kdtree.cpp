#include "floxels/kdtree.hpp"

#include <algorithm>
#include <numeric>

namespace floxels {

KdTree::KdTree(const std::vector<Point3>& points) : points_(points) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0u);
    if (!order_.empty())
        root_ = build(0, static_cast<uint32_t>(order_.size()));
}

int32_t KdTree::build(uint32_t begin, uint32_t end) {
    Node node;
    node.begin = begin;
    node.end = end;
    if (end - begin <= kLeafSize) {
        nodes_.push_back(node);
        return static_cast<int32_t>(nodes_.size() - 1);
    }

    // Split on the axis of largest spread.
    Vec3 lo = points_[order_[begin]];
    Vec3 hi = lo;
    for (uint32_t i = begin + 1; i < end; ++i) {
        const Point3& p = points_[order_[i]];
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
    }
    const Vec3 spread = hi - lo;
    uint8_t axis = 0;
    if (spread.y > spread[axis]) axis = 1;
    if (spread.z > spread[axis]) axis = 2;

    const uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid,
                     order_.begin() + end, [&](uint32_t a, uint32_t b) {
                         return points_[a][axis] < points_[b][axis];
                     });
    node.axis = axis;
    node.split = points_[order_[mid]][axis];

    const int32_t self = static_cast<int32_t>(nodes_.size());
    nodes_.push_back(node);
    const int32_t left = build(begin, mid);
    const int32_t right = build(mid, end);
    nodes_[self].left = left;
    nodes_[self].right = right;
    return self;
}

std::vector<size_t> KdTree::radius_neighbors(const Point3& q, double r) const {
    if (r < 0.0) throw InvalidConfig("radius must be non-negative");
    std::vector<size_t> out;
    if (root_ >= 0) query(root_, q, r * r, out);
    std::sort(out.begin(), out.end());
    return out;
}

void KdTree::query(int32_t node_id, const Point3& q, double r2,
                   std::vector<size_t>& out) const {
    const Node& node = nodes_[node_id];
    if (node.leaf()) {
        for (uint32_t i = node.begin; i < node.end; ++i) {
            const uint32_t idx = order_[i];
            if ((points_[idx] - q).squared_norm() <= r2) out.push_back(idx);
        }
        return;
    }
    const double d = q[node.axis] - node.split;
    if (d * d <= r2) {
        query(node.left, q, r2, out);
        query(node.right, q, r2, out);
    } else if (d < 0.0) {
        query(node.left, q, r2, out);
    } else {
        query(node.right, q, r2, out);
    }
}

}  // namespace floxels
