#include "floxels/optimizer.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace floxels {

void adam_step(FlowGrid& grid, const std::vector<double>& grad,
               OptimState& state, const OptimConfig& cfg) {
    auto& params = grid.params();
    if (grad.size() != params.size() || state.m.size() != params.size())
        throw LengthMismatch("adam buffers do not match parameter count");

    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (size_t i = 0; i < params.size(); ++i) {
        const double g = grad[i];
        if (!std::isfinite(g))
            throw NonFiniteGradient("non-finite gradient at parameter " +
                                    std::to_string(i) + " (step " +
                                    std::to_string(state.step) + ")");
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.eps_adam);
    }
}

FitResult fit(const MultiScanContext& ctx, const ClusterAssignment& clusters,
              const LossWeights& w, const OptimConfig& cfg, FlowGrid& grid,
              int workers) {
    cfg.validate();
    ctx.validate();

    OptimState state(grid.params().size());
    state.best_loss = std::numeric_limits<double>::infinity();
    std::vector<double> grad(grid.params().size(), 0.0);
    std::vector<double> best_params = grid.params();

    FitResult result;
    result.stop_reason = "max_epochs";
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::fill(grad.begin(), grad.end(), 0.0);
        const LossBreakdown loss =
            total_loss_and_grad(ctx, grid, clusters, w, grad, workers);

        const double bar =
            cfg.relative_min_delta
                ? state.best_loss - cfg.min_delta * std::abs(state.best_loss)
                : state.best_loss - cfg.min_delta;
        if (loss.total <= bar || epoch == 1) {
            state.epochs_since_improvement = 0;
        } else {
            ++state.epochs_since_improvement;
        }
        if (loss.total < state.best_loss) {
            state.best_loss = loss.total;
            best_params = grid.params();
            result.best_epoch = epoch;
        }

        adam_step(grid, grad, state, cfg);

        const auto t1 = std::chrono::steady_clock::now();
        result.log.push_back(
            {epoch, loss,
             std::chrono::duration<double, std::milli>(t1 - t0).count()});
        result.epochs_run = epoch;

        if (state.epochs_since_improvement >= cfg.patience) {
            result.stop_reason = "early_stop";
            break;
        }
    }

    grid.params() = best_params;
    return result;
}

}  // namespace floxels
