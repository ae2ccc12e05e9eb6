#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "floxels/flow_grid.hpp"
#include "floxels/synth.hpp"

using namespace floxels;

namespace {

const Aabb kUnitCube{{0, 0, 0}, {1, 1, 1}};

FlowGrid random_grid(uint64_t seed, const Aabb& bounds = kUnitCube,
                     double cell = 0.5) {
    FlowGrid g(bounds, cell, 0.0);
    SplitMix64 rng(seed);
    for (double& p : g.params()) p = 2.0 * rng.uniform() - 1.0;
    return g;
}

Point3 random_interior(SplitMix64& rng, const FlowGrid& g) {
    Aabb b = g.grid_bounds();
    Vec3 e = b.extent();
    // Margin keeps points off cell faces.
    return {b.min.x + e.x * (0.05 + 0.9 * rng.uniform()),
            b.min.y + e.y * (0.05 + 0.9 * rng.uniform()),
            b.min.z + e.z * (0.05 + 0.9 * rng.uniform())};
}

void load_affine(FlowGrid& g, const Mat3& A, const Vec3& b) {
    auto d = g.dims();
    for (size_t k = 0; k < d[2]; ++k)
        for (size_t j = 0; j < d[1]; ++j)
            for (size_t i = 0; i < d[0]; ++i) {
                size_t flat = g.corner_index(i, j, k);
                Point3 p = g.corner_position(flat);
                Vec3 v{A[0][0] * p.x + A[0][1] * p.y + A[0][2] * p.z + b.x,
                       A[1][0] * p.x + A[1][1] * p.y + A[1][2] * p.z + b.y,
                       A[2][0] * p.x + A[2][1] * p.y + A[2][2] * p.z + b.z};
                g.set_corner_value(flat, v);
            }
}

}  // namespace

TEST_CASE("grid construction") {
    FlowGrid g(kUnitCube, 0.5, 0.0);
    CHECK(g.dims() == std::array<size_t, 3>{3, 3, 3});
    CHECK(g.num_corners() == 27);
    for (double p : g.params()) CHECK(p == 0.0);

    FlowGrid g2(kUnitCube, 2.0, 0.0);
    CHECK(g2.dims() == std::array<size_t, 3>{2, 2, 2});

    FlowGrid g3(kUnitCube, 0.5, 1.0);
    CHECK(g3.origin() == Vec3{-1.0, -1.0, -1.0});
    CHECK(g3.dims() == std::array<size_t, 3>{7, 7, 7});

    CHECK_THROWS_AS(FlowGrid(kUnitCube, 0.0, 0.0), InvalidConfig);
    CHECK_THROWS_AS(FlowGrid(Aabb{{1, 0, 0}, {0, 1, 1}}, 0.5, 0.0),
                    InvalidConfig);
}

TEST_CASE("query reproduces corner values and constant cells") {
    FlowGrid g = random_grid(1);
    for (size_t flat = 0; flat < g.num_corners(); ++flat) {
        Vec3 got = g.query_flow(g.corner_position(flat));
        CHECK((got - g.corner_value(flat)).norm() < 1e-12);
    }

    FlowGrid c(kUnitCube, 1.0, 0.0);
    for (size_t flat = 0; flat < c.num_corners(); ++flat)
        c.set_corner_value(flat, {1.0, -2.0, 3.0});
    SplitMix64 rng(2);
    for (int i = 0; i < 20; ++i) {
        Point3 p{rng.uniform(), rng.uniform(), rng.uniform()};
        CHECK((c.query_flow(p) - Vec3{1.0, -2.0, 3.0}).norm() < 1e-12);
    }
}

TEST_CASE("partition of unity") {
    FlowGrid g = random_grid(3);
    SplitMix64 rng(4);
    for (int i = 0; i < 200; ++i) {
        Point3 p{3.0 * rng.uniform() - 1.0, 3.0 * rng.uniform() - 1.0,
                 3.0 * rng.uniform() - 1.0};
        TrilinearStencil s = g.stencil(p);
        double sum = 0.0;
        for (double w : s.weight) {
            CHECK(w >= 0.0);
            CHECK(w <= 1.0);
            sum += w;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("affine exactness") {
    FlowGrid g(kUnitCube, 0.5, 0.5);
    Mat3 A{{{0.3, -0.1, 0.2}, {0.0, 0.7, -0.4}, {1.1, 0.05, -0.2}}};
    Vec3 b{0.1, -0.2, 0.3};
    load_affine(g, A, b);
    SplitMix64 rng(5);
    for (int i = 0; i < 100; ++i) {
        Point3 p = random_interior(rng, g);
        Vec3 want{A[0][0] * p.x + A[0][1] * p.y + A[0][2] * p.z + b.x,
                  A[1][0] * p.x + A[1][1] * p.y + A[1][2] * p.z + b.y,
                  A[2][0] * p.x + A[2][1] * p.y + A[2][2] * p.z + b.z};
        CHECK((g.query_flow(p) - want).norm() < 1e-12);
    }
}

TEST_CASE("out-of-grid queries clamp") {
    FlowGrid g = random_grid(6);
    Aabb b = g.grid_bounds();
    Vec3 at_corner = g.query_flow(b.min);
    Vec3 outside = g.query_flow(b.min - Vec3{5.0, 5.0, 5.0});
    CHECK((at_corner - outside).norm() < 1e-12);
    CHECK(g.query_flow({100, 100, 100}).finite());
}

TEST_CASE("scatter_grad examples and locality") {
    FlowGrid g(kUnitCube, 1.0, 0.0);
    std::vector<double> acc(3 * g.num_corners(), 0.0);

    g.scatter_grad({0.0, 0.0, 0.0}, {1.0, 0.0, 0.0}, acc);
    CHECK(acc[3 * g.corner_index(0, 0, 0)] == doctest::Approx(1.0));
    size_t nonzero = 0;
    for (double v : acc) nonzero += v != 0.0;
    CHECK(nonzero == 1);

    std::fill(acc.begin(), acc.end(), 0.0);
    g.scatter_grad({0.5, 0.5, 0.5}, {8.0, 0.0, 0.0}, acc);
    for (size_t flat = 0; flat < g.num_corners(); ++flat)
        CHECK(acc[3 * flat] == doctest::Approx(1.0));

    // At most 8 corners touched for any point.
    FlowGrid big(Aabb{{0, 0, 0}, {4, 4, 4}}, 0.5, 0.0);
    std::vector<double> acc2(3 * big.num_corners(), 0.0);
    big.scatter_grad({1.3, 2.7, 0.6}, {1.0, 1.0, 1.0}, acc2);
    size_t corners_touched = 0;
    for (size_t flat = 0; flat < big.num_corners(); ++flat)
        corners_touched += acc2[3 * flat] != 0.0 ||
                           acc2[3 * flat + 1] != 0.0 ||
                           acc2[3 * flat + 2] != 0.0;
    CHECK(corners_touched == 8);
}

TEST_CASE("scatter_grad is the exact adjoint of query_flow") {
    FlowGrid g = random_grid(7);
    SplitMix64 rng(8);
    const double h = 1e-4;
    for (int trial = 0; trial < 20; ++trial) {
        Point3 p = random_interior(rng, g);
        Vec3 u{rng.uniform() - 0.5, rng.uniform() - 0.5, rng.uniform() - 0.5};
        std::vector<double> adj(g.params().size(), 0.0);
        g.scatter_grad(p, u, adj);
        // Central finite differences of u . query_flow(p) per parameter.
        TrilinearStencil s = g.stencil(p);
        for (size_t c = 0; c < 8; ++c) {
            for (int axis = 0; axis < 3; ++axis) {
                size_t idx = 3 * s.corner[c] + axis;
                double saved = g.params()[idx];
                g.params()[idx] = saved + h;
                double plus = u.dot(g.query_flow(p));
                g.params()[idx] = saved - h;
                double minus = u.dot(g.query_flow(p));
                g.params()[idx] = saved;
                double fd = (plus - minus) / (2.0 * h);
                CHECK(adj[idx] == doctest::Approx(fd).epsilon(1e-6));
            }
        }
    }
}

TEST_CASE("spatial jacobian") {
    FlowGrid constant(kUnitCube, 1.0, 0.0);
    for (size_t flat = 0; flat < constant.num_corners(); ++flat)
        constant.set_corner_value(flat, {2.0, 2.0, 2.0});
    Mat3 J = constant.query_flow_spatial_jacobian({0.4, 0.4, 0.4});
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) CHECK(J[r][c] == doctest::Approx(0.0));

    FlowGrid affine(kUnitCube, 0.5, 0.5);
    Mat3 A{{{0.3, -0.1, 0.2}, {0.0, 0.7, -0.4}, {1.1, 0.05, -0.2}}};
    load_affine(affine, A, {0.0, 0.0, 0.0});
    Mat3 JA = affine.query_flow_spatial_jacobian({0.3, 0.6, 0.2});
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            CHECK(JA[r][c] == doctest::Approx(A[r][c]).epsilon(1e-10));

    // Finite differences on a random grid.
    FlowGrid g = random_grid(9);
    SplitMix64 rng(10);
    const double h = 1e-6;
    for (int trial = 0; trial < 20; ++trial) {
        Point3 p = random_interior(rng, g);
        Mat3 Jg = g.query_flow_spatial_jacobian(p);
        for (int c = 0; c < 3; ++c) {
            Vec3 dp{c == 0 ? h : 0.0, c == 1 ? h : 0.0, c == 2 ? h : 0.0};
            Vec3 fd = (g.query_flow(p + dp) - g.query_flow(p - dp)) /
                      (2.0 * h);
            CHECK(Jg[0][c] == doctest::Approx(fd.x).epsilon(1e-5));
            CHECK(Jg[1][c] == doctest::Approx(fd.y).epsilon(1e-5));
            CHECK(Jg[2][c] == doctest::Approx(fd.z).epsilon(1e-5));
        }
    }

    CHECK_THROWS_AS(g.query_flow_spatial_jacobian({0.5, 0.25, 0.25}),
                    OnCellBoundary);
    CHECK_THROWS_AS(g.query_flow_spatial_jacobian({-5.0, 0.25, 0.25}),
                    OnCellBoundary);
}

TEST_CASE("checkpoint round trip") {
    FlowGrid g = random_grid(11, Aabb{{-1, 2, 0}, {3, 4, 1.5}}, 0.5);
    // Quantize to f32 so the round trip is exact.
    for (double& p : g.params()) p = static_cast<float>(p);
    const std::string path =
        (std::filesystem::temp_directory_path() / "grid.fgrid").string();
    g.save_checkpoint(path);
    FlowGrid back = FlowGrid::load_checkpoint(path);
    CHECK(back.dims() == g.dims());
    CHECK(back.cell_size() == g.cell_size());
    CHECK((back.origin() - g.origin()).norm() < 1e-12);
    CHECK(back.params() == g.params());
}
