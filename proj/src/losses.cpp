#include "floxels/losses.hpp"

#include <cmath>
#include <functional>
#include <thread>

namespace floxels {

namespace {

// Runs fn(shard, begin, end) on `workers` contiguous point shards. Shard
// boundaries depend only on (n, workers), keeping reductions deterministic
// for a fixed worker count.
void parallel_shards(size_t n, int workers,
                     const std::function<void(int, size_t, size_t)>& fn) {
    const int w = std::max(1, workers);
    if (w == 1 || n < 2 * static_cast<size_t>(w)) {
        fn(0, 0, n);
        return;
    }
    std::vector<std::thread> threads;
    const size_t chunk = (n + w - 1) / w;
    for (int s = 0; s < w; ++s) {
        const size_t begin = std::min(n, s * chunk);
        const size_t end = std::min(n, begin + chunk);
        threads.emplace_back(fn, s, begin, end);
    }
    for (auto& t : threads) t.join();
}

struct ShardBuffers {
    explicit ShardBuffers(int workers, size_t param_count)
        : grad(std::max(1, workers), std::vector<double>(param_count, 0.0)),
          loss(std::max(1, workers), 0.0) {}

    std::vector<std::vector<double>> grad;
    std::vector<double> loss;

    // Fixed-order reduction into the caller's accumulator.
    double reduce_into(std::vector<double>& grad_accum) const {
        double total = 0.0;
        for (size_t s = 0; s < loss.size(); ++s) {
            total += loss[s];
            for (size_t i = 0; i < grad_accum.size(); ++i)
                grad_accum[i] += grad[s][i];
        }
        return total;
    }
};

}  // namespace

void MultiScanContext::validate() const {
    if (reference.empty()) throw InvalidConfig("reference cloud is empty");
    if (m < 1) throw InvalidConfig("half-window m must be >= 1");
    for (const auto& s : supports) {
        if (s.delta_t == 0 || s.delta_t < -m || s.delta_t > m)
            throw InvalidConfig("support delta_t outside [-m, m] \\ {0}");
        if (!s.dt_field)
            throw InvalidConfig("support frame is missing its distance field");
    }
}

double dt_loss_and_grad(const MultiScanContext& ctx, const FlowGrid& grid,
                        std::vector<double>& grad_accum, int workers,
                        std::vector<double>* rejected_fraction) {
    ctx.validate();
    const size_t n = ctx.reference.size();
    const double inv_n = 1.0 / static_cast<double>(n);
    if (rejected_fraction) rejected_fraction->clear();

    double term = 0.0;
    for (const SupportFrame& support : ctx.supports) {
        const double delta = static_cast<double>(support.delta_t);
        const double lambda_t = 1.0 / (delta * delta);
        const DistanceTransform& dt = *support.dt_field;

        ShardBuffers buffers(workers, grad_accum.size());
        std::vector<size_t> shard_rejected(buffers.loss.size(), 0);
        parallel_shards(n, workers, [&](int shard, size_t begin, size_t end) {
            double local = 0.0;
            size_t rejected = 0;
            for (size_t i = begin; i < end; ++i) {
                const Point3& p = ctx.reference.points[i];
                const Vec3 flow = grid.query_flow(p);
                const DtSample s = dt.sample(p + flow * delta);
                if (!s.valid) {
                    ++rejected;
                    continue;
                }
                local += s.distance;
                // d distance / d flow = spatial_grad * delta_t, scattered
                // through the trilinear weights at the (unmoved) point.
                grid.scatter_grad(p,
                                  s.spatial_grad * (delta * lambda_t * inv_n),
                                  buffers.grad[shard]);
            }
            buffers.loss[shard] = local * lambda_t * inv_n;
            shard_rejected[shard] = rejected;
        });
        term += buffers.reduce_into(grad_accum);
        if (rejected_fraction) {
            size_t rejected = 0;
            for (size_t r : shard_rejected) rejected += r;
            rejected_fraction->push_back(static_cast<double>(rejected) * inv_n);
        }
    }
    return term;
}

double norm_loss_and_grad(const PointCloud& reference, const FlowGrid& grid,
                          std::vector<double>& grad_accum, int workers) {
    if (reference.empty()) throw InvalidConfig("reference cloud is empty");
    const size_t n = reference.size();
    const double inv_n = 1.0 / static_cast<double>(n);

    ShardBuffers buffers(workers, grad_accum.size());
    parallel_shards(n, workers, [&](int shard, size_t begin, size_t end) {
        double local = 0.0;
        for (size_t i = begin; i < end; ++i) {
            const Point3& p = reference.points[i];
            const Vec3 flow = grid.query_flow(p);
            const double norm = flow.norm();
            local += norm;
            if (norm > 0.0)  // subgradient 0 at zero flow
                grid.scatter_grad(p, flow * (inv_n / norm),
                                  buffers.grad[shard]);
        }
        buffers.loss[shard] = local * inv_n;
    });
    return buffers.reduce_into(grad_accum);
}

LossBreakdown total_loss_and_grad(const MultiScanContext& ctx,
                                  const FlowGrid& grid,
                                  const ClusterAssignment& clusters,
                                  const LossWeights& w,
                                  std::vector<double>& grad_accum,
                                  int workers) {
    w.validate();
    ctx.validate();
    if (clusters.cluster_id.size() != ctx.reference.size())
        throw LengthMismatch("cluster assignment does not match reference");
    if (grad_accum.size() != grid.params().size())
        throw LengthMismatch("gradient buffer does not match grid parameters");

    LossBreakdown out;
    const double scan_scale = 2.0 * ctx.m - 1.0;

    std::vector<double> term_grad(grad_accum.size(), 0.0);
    out.dt_term = dt_loss_and_grad(ctx, grid, term_grad, workers,
                                   &out.rejected_fraction);
    for (size_t i = 0; i < grad_accum.size(); ++i)
        grad_accum[i] += w.lambda_d * term_grad[i];

    // Cluster term: flows queried at reference points, exact gradient of the
    // cluster loss scattered back through the same trilinear weights.
    const size_t n = ctx.reference.size();
    std::vector<Vec3> flows(n);
    parallel_shards(n, workers, [&](int, size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i)
            flows[i] = grid.query_flow(ctx.reference.points[i]);
    });
    const ClusterLossResult cluster = cluster_loss_and_grad(flows, clusters);
    out.cluster_term = cluster.loss;
    const double cluster_weight = scan_scale * w.lambda_c;
    if (cluster_weight != 0.0) {
        ShardBuffers buffers(workers, grad_accum.size());
        parallel_shards(n, workers, [&](int shard, size_t begin, size_t end) {
            for (size_t i = begin; i < end; ++i)
                grid.scatter_grad(ctx.reference.points[i],
                                  cluster.grad[i] * cluster_weight,
                                  buffers.grad[shard]);
        });
        buffers.reduce_into(grad_accum);
    }

    std::fill(term_grad.begin(), term_grad.end(), 0.0);
    out.norm_term = norm_loss_and_grad(ctx.reference, grid, term_grad, workers);
    const double norm_weight = scan_scale * w.lambda_gamma;
    for (size_t i = 0; i < grad_accum.size(); ++i)
        grad_accum[i] += norm_weight * term_grad[i];

    out.total = w.lambda_d * out.dt_term +
                scan_scale * (w.lambda_c * out.cluster_term +
                              w.lambda_gamma * out.norm_term);
    return out;
}

}  // namespace floxels
