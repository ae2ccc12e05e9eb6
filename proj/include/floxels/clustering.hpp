#pragma once

#include <cstdint>
#include <vector>

#include "floxels/kdtree.hpp"
#include "floxels/point_cloud.hpp"

namespace floxels {

struct DbscanParams {
    double eps = 0.5;      // meters
    int min_points = 4;    // neighbor count including the query point

    void validate() const {
        if (eps <= 0.0) throw InvalidConfig("dbscan eps must be positive");
        if (min_points < 1)
            throw InvalidConfig("dbscan min_points must be >= 1");
    }
};

struct ClusterAssignment {
    std::vector<int32_t> cluster_id;  // -1 = noise
    int32_t num_clusters = 0;
    std::vector<std::vector<size_t>> members;

    size_t non_noise_count() const {
        size_t n = 0;
        for (const auto& m : members) n += m.size();
        return n;
    }
};

// Deterministic DBSCAN: seeds scanned in ascending index order, region
// growth by FIFO expansion, border points claimed by the first core point
// that reaches them.
ClusterAssignment dbscan(const PointCloud& c, const DbscanParams& params);

// Same semantics with O(n^2) neighborhoods; test oracle.
ClusterAssignment dbscan_brute_force(const PointCloud& c,
                                     const DbscanParams& params);

// Arithmetic mean of member flows, one entry per cluster.
std::vector<Vec3> cluster_means(const std::vector<Vec3>& flows,
                                const ClusterAssignment& a);

struct ClusterLossResult {
    double loss = 0.0;
    std::vector<Vec3> grad;  // per point; zero for noise points
};

// loss = (1/N) sum_i ||f_i - mean(C_i)|| over non-noise points. The mean is
// differentiated through; zero-norm residuals take subgradient zero.
ClusterLossResult cluster_loss_and_grad(const std::vector<Vec3>& flows,
                                        const ClusterAssignment& a);

}  // namespace floxels
