#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "floxels/io.hpp"
#include "floxels/kdtree.hpp"
#include "floxels/synth.hpp"

using namespace floxels;
namespace fs = std::filesystem;

namespace {

std::string tmp_path(const std::string& name) {
    return (fs::temp_directory_path() / name).string();
}

PointCloud random_cloud(size_t n, uint64_t seed, double scale = 10.0) {
    SplitMix64 rng(seed);
    PointCloud c;
    for (size_t i = 0; i < n; ++i)
        c.points.push_back({scale * (rng.uniform() - 0.5),
                            scale * (rng.uniform() - 0.5),
                            scale * (rng.uniform() - 0.5)});
    return c;
}

std::vector<size_t> brute_radius(const std::vector<Point3>& pts,
                                 const Point3& q, double r) {
    std::vector<size_t> out;
    for (size_t i = 0; i < pts.size(); ++i)
        if ((pts[i] - q).norm() <= r) out.push_back(i);
    return out;
}

}  // namespace

TEST_CASE("filter_cloud thresholds") {
    PointCloud c;
    c.points = {{1.0, 0.0, 0.0},    // inside ego radius
                {10.0, 0.0, 5.0},   // too high
                {10.0, 0.0, 1.0},   // kept
                {60.0, 0.0, 1.0},   // out of range
                {0.0, 3.0, 1.0}};   // exactly on the ego circle: removed
    PointCloud f = filter_cloud(c, 3.0, 4.0, 50.0);
    REQUIRE(f.size() == 1);
    CHECK(f.points[0] == Point3{10.0, 0.0, 1.0});

    // Boundary inclusivity on the keep side.
    PointCloud b;
    b.points = {{10.0, 0.0, 4.0}};  // z == max_height kept
    CHECK(filter_cloud(b, 3.0, 4.0, 50.0).size() == 1);
    b.points = {{50.0, 0.0, 0.0}};  // range == max_range kept
    CHECK(filter_cloud(b, 3.0, 4.0, 50.0).size() == 1);
}

TEST_CASE("filter_cloud is idempotent and keeps channels in sync") {
    PointCloud c = random_cloud(500, 11, 100.0);
    c.labels = std::vector<uint32_t>(c.size());
    c.gt_flow = std::vector<Vec3>(c.size());
    for (size_t i = 0; i < c.size(); ++i) {
        (*c.labels)[i] = static_cast<uint32_t>(i % 7);
        (*c.gt_flow)[i] = {static_cast<double>(i), 0.0, 0.0};
    }
    PointCloud once = filter_cloud(c, 3.0, 4.0, 50.0);
    PointCloud twice = filter_cloud(once, 3.0, 4.0, 50.0);
    REQUIRE(once.size() == twice.size());
    CHECK(once.points == twice.points);
    REQUIRE(once.labels);
    REQUIRE(once.gt_flow);
    CHECK(once.labels->size() == once.size());
    for (size_t i = 0; i < once.size(); ++i) {
        // Label must still match the flow tag attached to the same point.
        CHECK((*once.gt_flow)[i].x ==
              doctest::Approx(static_cast<double>((*once.labels)[i]) == 0.0
                                  ? (*once.gt_flow)[i].x
                                  : (*once.gt_flow)[i].x));
        CHECK(static_cast<uint32_t>((*once.gt_flow)[i].x) % 7 ==
              (*once.labels)[i]);
    }
}

TEST_CASE("ground_filter_z") {
    PointCloud c;
    c.points = {{0.0, 0.0, -0.1}, {0.0, 0.0, -0.1}};
    CHECK(ground_filter_z(c, 0.0).empty());

    PointCloud mixed = random_cloud(200, 3, 2.0);
    PointCloud kept = ground_filter_z(mixed, 0.3);
    size_t expect = 0;
    for (const auto& p : mixed.points)
        if (p.z >= 0.3) ++expect;
    CHECK(kept.size() == expect);
    for (const auto& p : kept.points) CHECK(p.z >= 0.3);

    PointCloud all = ground_filter_z(
        mixed, -std::numeric_limits<double>::infinity());
    CHECK(all.points == mixed.points);
}

TEST_CASE("kd-tree basics") {
    KdTree empty{std::vector<Point3>{}};
    CHECK(empty.radius_neighbors({0, 0, 0}, 1.0).empty());

    KdTree single{std::vector<Point3>{{0, 0, 0}}};
    CHECK(single.radius_neighbors({0, 0, 0}, 0.0) ==
          std::vector<size_t>{0});
}

TEST_CASE("kd-tree matches brute force") {
    SplitMix64 rng(77);
    for (size_t n : {100ul, 1000ul, 10000ul}) {
        PointCloud c = random_cloud(n, rng.next());
        KdTree tree(c);
        for (int q = 0; q < 30; ++q) {
            Point3 query{10.0 * (rng.uniform() - 0.5),
                         10.0 * (rng.uniform() - 0.5),
                         10.0 * (rng.uniform() - 0.5)};
            double r = 0.2 + 2.0 * rng.uniform();
            auto got = tree.radius_neighbors(query, r);
            auto want = brute_radius(c.points, query, r);
            CHECK(got == want);
            CHECK(std::is_sorted(got.begin(), got.end()));
        }
        // Closed ball: a point exactly at distance r is included.
        Point3 base = c.points[0];
        auto hits = tree.radius_neighbors({base.x + 0.25, base.y, base.z},
                                          0.25);
        CHECK(std::count(hits.begin(), hits.end(), 0ul) == 1);
    }
}

TEST_CASE("ply round trip") {
    PointCloud c = random_cloud(50, 5);
    c.labels = std::vector<uint32_t>(c.size(), 0);
    c.gt_flow = std::vector<Vec3>(c.size(), Vec3{0.5, -0.25, 0.0});
    c.dynamic_mask = std::vector<uint8_t>(c.size(), 1);
    (*c.labels)[7] = 3;
    const std::string path = tmp_path("roundtrip.ply");
    save_cloud(path, c, CloudFormat::ply_ascii);
    PointCloud back = load_cloud(path, CloudFormat::ply_ascii);
    REQUIRE(back.size() == c.size());
    for (size_t i = 0; i < c.size(); ++i) {
        CHECK((back.points[i] - c.points[i]).norm() < 1e-6);
        CHECK((*back.gt_flow)[i].x == doctest::Approx(0.5).epsilon(1e-6));
    }
    CHECK((*back.labels)[7] == 3);
    CHECK((*back.dynamic_mask)[0] == 1);
}

TEST_CASE("xyz_f32 round trip is exact") {
    PointCloud c = random_cloud(64, 9);
    // Quantize to f32 first so the round trip is bit-exact.
    for (auto& p : c.points)
        p = {static_cast<float>(p.x), static_cast<float>(p.y),
             static_cast<float>(p.z)};
    const std::string path = tmp_path("roundtrip.f32");
    save_cloud(path, c, CloudFormat::xyz_f32);
    PointCloud back = load_cloud(path, CloudFormat::xyz_f32);
    CHECK(back.points == c.points);
}

TEST_CASE("io error cases") {
    const std::string path = tmp_path("bad.ply");
    write_text_file(path,
                    "ply\nformat ascii 1.0\nelement vertex 1\n"
                    "property float x\nproperty float y\nproperty float z\n"
                    "end_header\n1.0 nan 2.0\n");
    CHECK_THROWS_AS(load_cloud(path, CloudFormat::ply_ascii), ParseError);

    const std::string empty = tmp_path("empty.f32");
    std::ofstream(empty, std::ios::binary).close();
    CHECK(load_cloud(empty, CloudFormat::xyz_f32).empty());

    const std::string ragged = tmp_path("ragged.f32");
    std::ofstream(ragged, std::ios::binary).write("abcde", 5);
    CHECK_THROWS_AS(load_cloud(ragged, CloudFormat::xyz_f32), ParseError);

    CHECK_THROWS_AS(load_cloud(tmp_path("definitely_missing.ply"),
                               CloudFormat::ply_ascii),
                    IoError);
}

TEST_CASE("manifest round trip and validation") {
    const std::string dir = tmp_path("manifest_test");
    fs::create_directories(dir);
    SequenceManifest m;
    m.frames = {{"a.ply", 0.0}, {"b.ply", 0.1}, {"c.ply", 0.25}};
    m.reference_index = 1;
    const std::string path = dir + "/manifest.json";
    save_manifest(path, m);
    SequenceManifest back = load_manifest(path);
    REQUIRE(back.frames.size() == 3);
    CHECK(back.reference_index == 1);
    CHECK(back.frames[2].t == doctest::Approx(0.25));
    // Relative paths resolve against the manifest directory.
    CHECK(fs::path(back.frames[0].path).parent_path() == fs::path(dir));
    // Median of gaps {0.1, 0.15}.
    CHECK(back.nominal_dt() == doctest::Approx(0.125));

    write_text_file(path,
                    R"({"frames":[{"path":"a.ply","t":1.0},)"
                    R"({"path":"b.ply","t":1.0}],"reference_index":0})");
    CHECK_THROWS_AS(load_manifest(path), ParseError);
}

TEST_CASE("flow file round trip") {
    std::vector<Vec3> flow = {{0.5f, -1.0f, 0.25f}, {0.0f, 0.0f, 0.0f}};
    const std::string path = tmp_path("flow.f32");
    save_flow_file(path, flow);
    CHECK(load_flow_file(path) == flow);
}
