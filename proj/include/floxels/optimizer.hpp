#pragma once

#include <string>
#include <vector>

#include "floxels/losses.hpp"

namespace floxels {

struct OptimConfig {
    double learning_rate = 0.05;
    int max_epochs = 500;
    int patience = 250;
    double min_delta = 0.01;  // absolute on total loss by default
    bool relative_min_delta = false;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_adam = 1e-8;

    void validate() const {
        if (learning_rate <= 0.0)
            throw InvalidConfig("learning_rate must be positive");
        if (max_epochs < 1) throw InvalidConfig("max_epochs must be >= 1");
        if (patience < 1 || patience > max_epochs)
            throw InvalidConfig("patience must be in [1, max_epochs]");
        if (min_delta < 0.0) throw InvalidConfig("min_delta must be >= 0");
        if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
            throw InvalidConfig("adam betas must be in [0, 1)");
    }
};

struct OptimState {
    std::vector<double> m;  // first moment
    std::vector<double> v;  // second moment
    long step = 0;
    double best_loss = 0.0;
    int epochs_since_improvement = 0;

    explicit OptimState(size_t param_count)
        : m(param_count, 0.0), v(param_count, 0.0) {}
};

// Bias-corrected Adam update in place. Throws NonFiniteGradient.
void adam_step(FlowGrid& grid, const std::vector<double>& grad,
               OptimState& state, const OptimConfig& cfg);

struct EpochRecord {
    int epoch = 0;
    LossBreakdown loss;
    double wall_ms = 0.0;
};

struct FitResult {
    std::vector<EpochRecord> log;
    int best_epoch = 0;
    int epochs_run = 0;
    std::string stop_reason;  // "early_stop" or "max_epochs"
};

// Full-batch optimization with early stopping; the grid ends at the best
// epoch's parameters, not the last.
FitResult fit(const MultiScanContext& ctx, const ClusterAssignment& clusters,
              const LossWeights& w, const OptimConfig& cfg, FlowGrid& grid,
              int workers = 1);

}  // namespace floxels
