#pragma once

#include <memory>
#include <vector>

#include "floxels/clustering.hpp"
#include "floxels/distance_transform.hpp"
#include "floxels/flow_grid.hpp"
#include "floxels/point_cloud.hpp"

namespace floxels {

struct LossWeights {
    double lambda_d = 1.0;
    double lambda_c = 1.0;
    double lambda_gamma = 0.01;

    void validate() const {
        if (lambda_d < 0.0 || lambda_c < 0.0 || lambda_gamma < 0.0)
            throw InvalidConfig("loss weights must be non-negative");
    }
};

struct SupportFrame {
    int delta_t = 0;  // signed frame offset from the reference, never 0
    std::shared_ptr<const DistanceTransform> dt_field;
};

// Reference scan plus the distance fields of its support frames. m is the
// nominal half-window; supports may be fewer at sequence boundaries.
struct MultiScanContext {
    PointCloud reference;
    std::vector<SupportFrame> supports;
    int m = 2;

    void validate() const;
};

struct LossBreakdown {
    double total = 0.0;
    double dt_term = 0.0;
    double cluster_term = 0.0;
    double norm_term = 0.0;
    std::vector<double> rejected_fraction;  // per support frame
};

// Multi-scan DT loss: each reference point moved by flow * delta_t, sampled
// in the support's distance field, averaged over |reference| and weighted by
// 1/delta_t^2. Rejected samples contribute zero but keep N fixed.
double dt_loss_and_grad(const MultiScanContext& ctx, const FlowGrid& grid,
                        std::vector<double>& grad_accum, int workers = 1,
                        std::vector<double>* rejected_fraction = nullptr);

// Mean flow-magnitude penalty over the reference points.
double norm_loss_and_grad(const PointCloud& reference, const FlowGrid& grid,
                          std::vector<double>& grad_accum, int workers = 1);

// total = lambda_d * dt + (2m-1) * (lambda_c * cluster + lambda_gamma * norm)
LossBreakdown total_loss_and_grad(const MultiScanContext& ctx,
                                  const FlowGrid& grid,
                                  const ClusterAssignment& clusters,
                                  const LossWeights& w,
                                  std::vector<double>& grad_accum,
                                  int workers = 1);

}  // namespace floxels
