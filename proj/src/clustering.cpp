#include "floxels/clustering.hpp"

#include <deque>
#include <functional>

namespace floxels {

namespace {

// Region growth shared by the kd-tree and brute-force variants; the only
// difference is how neighborhoods are produced.
ClusterAssignment dbscan_impl(
    size_t n, const DbscanParams& params,
    const std::function<std::vector<size_t>(size_t)>& neighbors_of) {
    params.validate();
    ClusterAssignment out;
    out.cluster_id.assign(n, -1);
    std::vector<uint8_t> visited(n, 0);  // neighborhood computed

    const size_t min_pts = static_cast<size_t>(params.min_points);
    for (size_t seed = 0; seed < n; ++seed) {
        if (out.cluster_id[seed] != -1 || visited[seed]) continue;
        visited[seed] = 1;
        std::vector<size_t> seed_nbrs = neighbors_of(seed);
        if (seed_nbrs.size() < min_pts) continue;  // not core; may still
                                                   // become a border point

        const int32_t cid = out.num_clusters++;
        out.cluster_id[seed] = cid;
        std::deque<size_t> queue(seed_nbrs.begin(), seed_nbrs.end());
        while (!queue.empty()) {
            const size_t p = queue.front();
            queue.pop_front();
            if (out.cluster_id[p] == -1) out.cluster_id[p] = cid;
            if (out.cluster_id[p] != cid || visited[p]) continue;
            visited[p] = 1;
            std::vector<size_t> nbrs = neighbors_of(p);
            if (nbrs.size() < min_pts) continue;  // border point
            for (size_t q : nbrs) queue.push_back(q);
        }
    }

    out.members.resize(out.num_clusters);
    for (size_t i = 0; i < n; ++i)
        if (out.cluster_id[i] >= 0) out.members[out.cluster_id[i]].push_back(i);
    return out;
}

}  // namespace

ClusterAssignment dbscan(const PointCloud& c, const DbscanParams& params) {
    KdTree tree(c);
    return dbscan_impl(c.size(), params, [&](size_t i) {
        return tree.radius_neighbors(c.points[i], params.eps);
    });
}

ClusterAssignment dbscan_brute_force(const PointCloud& c,
                                     const DbscanParams& params) {
    return dbscan_impl(c.size(), params, [&](size_t i) {
        std::vector<size_t> nbrs;
        const double r2 = params.eps * params.eps;
        for (size_t j = 0; j < c.size(); ++j)
            if ((c.points[j] - c.points[i]).squared_norm() <= r2)
                nbrs.push_back(j);
        return nbrs;
    });
}

std::vector<Vec3> cluster_means(const std::vector<Vec3>& flows,
                                const ClusterAssignment& a) {
    if (flows.size() != a.cluster_id.size())
        throw LengthMismatch("flow count does not match cluster assignment");
    std::vector<Vec3> means(a.members.size());
    for (size_t c = 0; c < a.members.size(); ++c) {
        Vec3 sum;
        for (size_t i : a.members[c]) sum += flows[i];
        means[c] = sum / static_cast<double>(a.members[c].size());
    }
    return means;
}

ClusterLossResult cluster_loss_and_grad(const std::vector<Vec3>& flows,
                                        const ClusterAssignment& a) {
    const std::vector<Vec3> means = cluster_means(flows, a);
    ClusterLossResult out;
    out.grad.assign(flows.size(), Vec3{});
    const size_t n_active = a.non_noise_count();
    if (n_active == 0) return out;
    const double inv_n = 1.0 / static_cast<double>(n_active);

    for (size_t c = 0; c < a.members.size(); ++c) {
        const auto& members = a.members[c];
        Vec3 unit_sum;
        std::vector<Vec3> units(members.size());
        for (size_t m = 0; m < members.size(); ++m) {
            const Vec3 r = flows[members[m]] - means[c];
            const double rn = r.norm();
            out.loss += rn * inv_n;
            if (rn > 0.0) units[m] = r / rn;  // subgradient 0 at r = 0
            unit_sum += units[m];
        }
        // d mean / d f_j couples every member: grad_j = (1/N)(u_j - avg(u)).
        const Vec3 unit_avg = unit_sum / static_cast<double>(members.size());
        for (size_t m = 0; m < members.size(); ++m)
            out.grad[members[m]] = (units[m] - unit_avg) * inv_n;
    }
    return out;
}

}  // namespace floxels
