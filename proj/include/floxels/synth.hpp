#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "floxels/point_cloud.hpp"

namespace floxels {

// Counter-based 64-bit generator (splitmix64 constants); one independent
// stream per (seed, frame, element) so frames can be produced in any order.
class SplitMix64 {
  public:
    explicit SplitMix64(uint64_t seed) : state_(seed) {}

    uint64_t next() {
        state_ += 0x9e3779b97f4a7c15ull;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Standard normal, Box-Muller.
    double normal();

    static uint64_t mix(uint64_t a, uint64_t b) {
        SplitMix64 g(a ^ (b * 0xff51afd7ed558ccdull));
        return g.next();
    }

  private:
    uint64_t state_;
    bool have_cached_ = false;
    double cached_ = 0.0;
};

struct StaticElement {
    Aabb box;
    double density = 0.0;  // surface points per square meter
};

struct Actor {
    Aabb box;  // at t = 0
    Vec3 velocity;  // meters per frame
    double density = 0.0;
    uint32_t label = 1;
};

struct SceneSpec {
    std::vector<StaticElement> static_elements;
    std::vector<Actor> actors;
    Point3 sensor_origin{0.0, 0.0, 0.5};
    int frames = 5;
    uint64_t seed = 0;
    bool occlusion = false;
    double noise_sigma = 0.0;  // meters
    double dynamic_threshold = 0.05;  // meters/frame, for dynamic_mask

    void validate() const;
};

struct SynthFrame {
    PointCloud cloud;
    int t = 0;
};

// Surfaces are resampled independently per frame, so no cross-frame point
// correspondences exist. gt_flow is exact: zero for statics, the actor's
// velocity for actor points. Static points carry label 0.
std::vector<SynthFrame> generate(const SceneSpec& spec);

// Generates a single frame; frames of a sequence are independent.
SynthFrame generate_frame(const SceneSpec& spec, int t);

std::vector<std::string> scenario_names();

// Named scene specs; frames = 0 selects the scenario default.
SceneSpec scenario(const std::string& name, uint64_t seed, int frames = 0);

// Segment/AABB intersection used by the occlusion ray cast; exposed for the
// test oracle. Returns true when the open segment interior crosses the box.
bool segment_hits_box(const Point3& a, const Point3& b, const Aabb& box);

}  // namespace floxels
