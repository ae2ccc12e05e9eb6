#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>

#include "floxels/clustering.hpp"
#include "floxels/synth.hpp"

using namespace floxels;

namespace {

PointCloud random_cloud(size_t n, uint64_t seed, double extent) {
    SplitMix64 rng(seed);
    PointCloud c;
    for (size_t i = 0; i < n; ++i)
        c.points.push_back({extent * rng.uniform(), extent * rng.uniform(),
                            extent * rng.uniform()});
    return c;
}

// Canonical relabeling: clusters renumbered by their lowest member index,
// so two runs compare as partitions.
std::vector<int32_t> canonical(const std::vector<int32_t>& ids) {
    std::map<int32_t, int32_t> remap;
    std::vector<int32_t> out(ids.size());
    for (size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0) {
            out[i] = -1;
            continue;
        }
        auto [it, inserted] =
            remap.try_emplace(ids[i], static_cast<int32_t>(remap.size()));
        out[i] = it->second;
    }
    return out;
}

}  // namespace

TEST_CASE("two separated blobs, zero noise") {
    PointCloud c;
    for (int i = 0; i < 10; ++i) {
        c.points.push_back({0.1 * i, 0.0, 0.0});
        c.points.push_back({5.0 + 0.1 * i, 0.0, 0.0});
    }
    ClusterAssignment a = dbscan(c, {});
    CHECK(a.num_clusters == 2);
    CHECK(a.non_noise_count() == 20);
    for (int32_t id : a.cluster_id) CHECK(id >= 0);
}

TEST_CASE("points below min_points are noise") {
    PointCloud c;
    c.points = {{0.0, 0, 0}, {0.1, 0, 0}, {0.2, 0, 0}};
    ClusterAssignment a = dbscan(c, {0.5, 4});
    CHECK(a.num_clusters == 0);
    for (int32_t id : a.cluster_id) CHECK(id == -1);
}

TEST_CASE("assignment structure invariants") {
    PointCloud c = random_cloud(400, 31, 6.0);
    DbscanParams params{0.5, 4};
    ClusterAssignment a = dbscan(c, params);
    REQUIRE(a.cluster_id.size() == c.size());
    REQUIRE(static_cast<int32_t>(a.members.size()) == a.num_clusters);
    std::vector<bool> seen(c.size(), false);
    for (int32_t cid = 0; cid < a.num_clusters; ++cid) {
        CHECK(a.members[cid].size() >=
              static_cast<size_t>(params.min_points));
        for (size_t i : a.members[cid]) {
            CHECK(a.cluster_id[i] == cid);
            CHECK_FALSE(seen[i]);
            seen[i] = true;
        }
    }
    for (size_t i = 0; i < c.size(); ++i)
        CHECK(seen[i] == (a.cluster_id[i] >= 0));
}

TEST_CASE("kd-tree dbscan matches brute-force reference") {
    SplitMix64 rng(32);
    for (int trial = 0; trial < 30; ++trial) {
        size_t n = 50 + static_cast<size_t>(rng.uniform() * 450);
        double extent = 2.0 + 8.0 * rng.uniform();
        PointCloud c = random_cloud(n, rng.next(), extent);
        ClusterAssignment fast = dbscan(c, {});
        ClusterAssignment slow = dbscan_brute_force(c, {});
        CHECK(fast.num_clusters == slow.num_clusters);
        CHECK(canonical(fast.cluster_id) == canonical(slow.cluster_id));
    }
}

TEST_CASE("permutation invariance up to relabeling") {
    PointCloud c = random_cloud(300, 33, 5.0);
    ClusterAssignment base = dbscan(c, {});

    // Reverse the points; map the result back to the original order.
    PointCloud rev;
    rev.points.assign(c.points.rbegin(), c.points.rend());
    ClusterAssignment r = dbscan(rev, {});
    std::vector<int32_t> mapped(c.size());
    for (size_t i = 0; i < c.size(); ++i)
        mapped[i] = r.cluster_id[c.size() - 1 - i];
    // Border-point ties can differ between orders; compare core structure:
    // noise sets must be identical, cluster counts equal.
    CHECK(base.num_clusters == r.num_clusters);
    size_t disagreements = 0;
    for (size_t i = 0; i < c.size(); ++i)
        disagreements += (base.cluster_id[i] < 0) != (mapped[i] < 0);
    CHECK(disagreements == 0);
}

TEST_CASE("cluster means") {
    PointCloud c;
    for (int i = 0; i < 4; ++i) c.points.push_back({0.1 * i, 0, 0});
    ClusterAssignment a = dbscan(c, {});
    REQUIRE(a.num_clusters == 1);

    std::vector<Vec3> same(4, Vec3{1.0, 2.0, 3.0});
    CHECK((cluster_means(same, a)[0] - Vec3{1.0, 2.0, 3.0}).norm() < 1e-15);

    std::vector<Vec3> two = {{1, 0, 0}, {0, 1, 0}, {1, 0, 0}, {0, 1, 0}};
    CHECK((cluster_means(two, a)[0] - Vec3{0.5, 0.5, 0.0}).norm() < 1e-15);

    SplitMix64 rng(34);
    std::vector<Vec3> rnd(4);
    Vec3 sum{0, 0, 0};
    for (auto& f : rnd) {
        f = {rng.uniform(), rng.uniform(), rng.uniform()};
        sum += f;
    }
    CHECK((cluster_means(rnd, a)[0] - sum / 4.0).norm() < 1e-12);
}

TEST_CASE("cluster loss hand examples") {
    PointCloud c;
    for (int i = 0; i < 4; ++i) c.points.push_back({0.1 * i, 0, 0});
    ClusterAssignment a = dbscan(c, {});

    std::vector<Vec3> equal(4, Vec3{0.7, -0.7, 0.0});
    ClusterLossResult zero = cluster_loss_and_grad(equal, a);
    CHECK(zero.loss == doctest::Approx(0.0));
    for (const auto& g : zero.grad) CHECK(g.norm() == doctest::Approx(0.0));

    // Two-member cluster, flows (1,0,0) and (0,0,0): residuals +-0.5.
    ClusterAssignment pair;
    pair.cluster_id = {0, 0};
    pair.num_clusters = 1;
    pair.members = {{0, 1}};
    ClusterLossResult r =
        cluster_loss_and_grad({{1, 0, 0}, {0, 0, 0}}, pair);
    CHECK(r.loss == doctest::Approx(0.5));
}

TEST_CASE("noise points carry zero loss and gradient") {
    ClusterAssignment a;
    a.cluster_id = {0, 0, 0, 0, -1};
    a.num_clusters = 1;
    a.members = {{0, 1, 2, 3}};
    std::vector<Vec3> flows = {
        {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 1}, {50.0, 50.0, 50.0}};
    ClusterLossResult r = cluster_loss_and_grad(flows, a);
    CHECK(r.grad[4].norm() == 0.0);
    // N excludes the noise point: loss is the mean over 4 members only.
    double mean_norm = 0.0;
    Vec3 mean{0.5, 0.5, 0.5};
    for (int i = 0; i < 4; ++i) mean_norm += (flows[i] - mean).norm();
    CHECK(r.loss == doctest::Approx(mean_norm / 4.0));
}

TEST_CASE("gradient sums to zero within each cluster") {
    SplitMix64 rng(35);
    PointCloud c = random_cloud(300, 36, 4.0);
    ClusterAssignment a = dbscan(c, {});
    std::vector<Vec3> flows(c.size());
    for (auto& f : flows)
        f = {rng.uniform() - 0.5, rng.uniform() - 0.5, rng.uniform() - 0.5};
    ClusterLossResult r = cluster_loss_and_grad(flows, a);
    for (int32_t cid = 0; cid < a.num_clusters; ++cid) {
        Vec3 sum{0, 0, 0};
        for (size_t i : a.members[cid]) sum += r.grad[i];
        CHECK(sum.norm() < 1e-10);
    }
}

TEST_CASE("gradient matches finite differences") {
    SplitMix64 rng(37);
    PointCloud c = random_cloud(120, 38, 3.0);
    ClusterAssignment a = dbscan(c, {});
    std::vector<Vec3> flows(c.size());
    for (auto& f : flows)
        f = {rng.uniform() - 0.5, rng.uniform() - 0.5, rng.uniform() - 0.5};
    ClusterLossResult r = cluster_loss_and_grad(flows, a);
    const double h = 1e-6;
    std::vector<Vec3> means = cluster_means(flows, a);
    for (size_t i = 0; i < flows.size(); ++i) {
        if (a.cluster_id[i] < 0) continue;
        if ((flows[i] - means[a.cluster_id[i]]).norm() < 1e-8) continue;
        for (int axis = 0; axis < 3; ++axis) {
            std::vector<Vec3> plus = flows, minus = flows;
            (axis == 0 ? plus[i].x : axis == 1 ? plus[i].y : plus[i].z) += h;
            (axis == 0 ? minus[i].x : axis == 1 ? minus[i].y : minus[i].z) -=
                h;
            double fd = (cluster_loss_and_grad(plus, a).loss -
                         cluster_loss_and_grad(minus, a).loss) /
                        (2 * h);
            double got = r.grad[i][axis];
            CHECK(got == doctest::Approx(fd).epsilon(1e-5));
        }
    }
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(DbscanParams({0.0, 4}).validate(), InvalidConfig);
    CHECK_THROWS_AS(DbscanParams({0.5, 0}).validate(), InvalidConfig);
}
