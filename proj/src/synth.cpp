#include "floxels/synth.hpp"

#include <algorithm>
#include <cmath>

namespace floxels {

double SplitMix64::normal() {
    if (have_cached_) {
        have_cached_ = false;
        return cached_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    cached_ = r * std::sin(theta);
    have_cached_ = true;
    return r * std::cos(theta);
}

void SceneSpec::validate() const {
    if (frames < 2) throw InvalidSpec("scene needs at least 2 frames");
    if (static_elements.empty() && actors.empty())
        throw InvalidSpec("scene has no elements");
    for (const auto& e : static_elements) {
        if (!e.box.valid()) throw InvalidSpec("static element box is empty");
        if (e.density <= 0.0) throw InvalidSpec("density must be positive");
    }
    for (const auto& a : actors) {
        if (!a.box.valid()) throw InvalidSpec("actor box is empty");
        if (a.density <= 0.0) throw InvalidSpec("density must be positive");
        if (!a.velocity.finite()) throw InvalidSpec("actor velocity not finite");
        if (a.label == 0) throw InvalidSpec("actor label 0 is reserved");
    }
    if (noise_sigma < 0.0) throw InvalidSpec("noise_sigma must be >= 0");
}

namespace {

// Uniform samples on the box surface: per-face counts round(area * density).
void sample_box_surface(const Aabb& box, double density, SplitMix64& rng,
                        std::vector<Point3>& out) {
    const Vec3 e = box.extent();
    const double areas[3] = {e.y * e.z, e.x * e.z, e.x * e.y};
    for (int axis = 0; axis < 3; ++axis) {
        for (int side = 0; side < 2; ++side) {
            const long count = std::lround(areas[axis] * density);
            for (long n = 0; n < count; ++n) {
                const double u = rng.uniform();
                const double v = rng.uniform();
                Point3 p;
                if (axis == 0)
                    p = {side ? box.max.x : box.min.x, box.min.y + u * e.y,
                         box.min.z + v * e.z};
                else if (axis == 1)
                    p = {box.min.x + u * e.x, side ? box.max.y : box.min.y,
                         box.min.z + v * e.z};
                else
                    p = {box.min.x + u * e.x, box.min.y + v * e.y,
                         side ? box.max.z : box.min.z};
                out.push_back(p);
            }
        }
    }
}

}  // namespace

bool segment_hits_box(const Point3& a, const Point3& b, const Aabb& box) {
    // Slab test on the parametric segment a + t*(b-a), t in (eps, 1-eps).
    constexpr double kEnter = 1e-9;
    constexpr double kExit = 1.0 - 1e-6;
    double t0 = kEnter;
    double t1 = kExit;
    const Vec3 d = b - a;
    for (int axis = 0; axis < 3; ++axis) {
        const double da = d[axis];
        const double lo = box.min[axis] - a[axis];
        const double hi = box.max[axis] - a[axis];
        if (std::abs(da) < 1e-300) {
            if (lo > 0.0 || hi < 0.0) return false;
            continue;
        }
        double ta = lo / da;
        double tb = hi / da;
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 > t1) return false;
    }
    return true;
}

SynthFrame generate_frame(const SceneSpec& spec, int t) {
    spec.validate();
    if (t < 0 || t >= spec.frames) throw InvalidSpec("frame index out of range");

    SynthFrame frame;
    frame.t = t;
    PointCloud& cloud = frame.cloud;
    cloud.labels.emplace();
    cloud.gt_flow.emplace();
    cloud.dynamic_mask.emplace();

    // Boxes as they stand at frame t, for the occlusion cast.
    std::vector<Aabb> frame_boxes;
    for (const auto& e : spec.static_elements) frame_boxes.push_back(e.box);
    for (const auto& a : spec.actors) {
        const Vec3 shift = a.velocity * static_cast<double>(t);
        frame_boxes.push_back({a.box.min + shift, a.box.max + shift});
    }

    std::vector<Point3> samples;
    uint64_t elem_id = 0;
    auto emit = [&](const Aabb& box, double density, uint32_t label,
                    const Vec3& velocity) {
        samples.clear();
        SplitMix64 rng(SplitMix64::mix(
            spec.seed, (static_cast<uint64_t>(t) << 20) | elem_id));
        ++elem_id;
        sample_box_surface(box, density, rng, samples);
        const bool dynamic = velocity.norm() > spec.dynamic_threshold;
        for (Point3 p : samples) {
            if (spec.occlusion) {
                bool hidden = false;
                for (const Aabb& occluder : frame_boxes)
                    if (segment_hits_box(spec.sensor_origin, p, occluder)) {
                        hidden = true;
                        break;
                    }
                if (hidden) continue;
            }
            if (spec.noise_sigma > 0.0)
                p += Vec3(rng.normal(), rng.normal(), rng.normal()) *
                     spec.noise_sigma;
            cloud.points.push_back(p);
            cloud.labels->push_back(label);
            cloud.gt_flow->push_back(velocity);
            cloud.dynamic_mask->push_back(dynamic ? 1 : 0);
        }
    };

    size_t box_idx = 0;
    for (const auto& e : spec.static_elements) {
        emit(frame_boxes[box_idx++], e.density, 0, Vec3{});
    }
    for (const auto& a : spec.actors) {
        emit(frame_boxes[box_idx++], a.density, a.label, a.velocity);
    }
    return frame;
}

std::vector<SynthFrame> generate(const SceneSpec& spec) {
    spec.validate();
    std::vector<SynthFrame> frames;
    frames.reserve(spec.frames);
    for (int t = 0; t < spec.frames; ++t)
        frames.push_back(generate_frame(spec, t));
    return frames;
}

std::vector<std::string> scenario_names() {
    return {"single_mover", "opposite_movers", "occluded_shadow",
            "static_only", "near_point_trap"};
}

SceneSpec scenario(const std::string& name, uint64_t seed, int frames) {
    SceneSpec s;
    s.seed = seed;
    s.sensor_origin = {0.0, 0.0, 0.5};

    if (name == "static_only") {
        s.frames = frames > 0 ? frames : 5;
        s.static_elements.push_back(
            {{{6.0, 3.0, 0.0}, {14.0, 3.1, 2.0}}, 20.0});
        s.static_elements.push_back(
            {{{6.0, -4.1, 0.0}, {14.0, -4.0, 2.0}}, 20.0});
        s.static_elements.push_back(
            {{{12.5, -1.0, 0.0}, {13.5, 0.0, 1.0}}, 25.0});
        return s;
    }
    if (name == "single_mover") {
        s.frames = frames > 0 ? frames : 5;
        // Actor placed so the middle (reference) frame sits near x = 10.
        const double ref = std::floor(s.frames / 2.0);
        const Vec3 v{0.5, 0.0, 0.0};
        Aabb box{{9.0, -0.5, 0.0}, {11.0, 0.5, 1.0}};
        box.min -= v * ref;
        box.max -= v * ref;
        s.actors.push_back({box, v, 30.0, 1});
        s.static_elements.push_back(
            {{{4.0, 3.5, 0.0}, {16.0, 3.6, 2.0}}, 20.0});
        s.static_elements.push_back(
            {{{4.0, -3.6, 0.0}, {16.0, -3.5, 2.0}}, 20.0});
        return s;
    }
    if (name == "opposite_movers") {
        s.frames = frames > 0 ? frames : 5;
        const double ref = std::floor(s.frames / 2.0);
        const Vec3 va{0.5, 0.0, 0.0};
        const Vec3 vb{-0.5, 0.0, 0.0};
        Aabb ba{{9.0, 1.0, 0.0}, {10.0, 2.0, 1.0}};
        Aabb bb{{10.0, -2.0, 0.0}, {11.0, -1.0, 1.0}};
        ba.min -= va * ref;
        ba.max -= va * ref;
        bb.min -= vb * ref;
        bb.max -= vb * ref;
        s.actors.push_back({ba, va, 40.0, 1});
        s.actors.push_back({bb, vb, 40.0, 2});
        s.static_elements.push_back(
            {{{4.0, 4.5, 0.0}, {16.0, 4.6, 2.0}}, 20.0});
        return s;
    }
    if (name == "occluded_shadow") {
        // Actor crosses the shadow of a small occluder exactly at delta_t
        // = +1 from the reference (middle) frame. A distant "bait" surface
        // sits just inside the truncation radius of the reference position
        // and just outside it at the true flow.
        s.frames = frames > 0 ? frames : 5;
        s.occlusion = true;
        const double ref = std::floor(s.frames / 2.0);
        const Vec3 v{0.0, 0.8, 0.0};
        Aabb box{{9.8, -0.2, 0.3}, {10.2, 0.2, 0.7}};
        box.min -= v * ref;
        box.max -= v * ref;
        s.actors.push_back({box, v, 400.0, 1});
        // Occluder: hides the actor (at x ~= 10) for y in [0.6, 1.0].
        s.static_elements.push_back(
            {{{3.95, 0.22, 0.40}, {4.05, 0.42, 0.60}}, 800.0});
        // Bait, 4.5-4.9 m behind the reference actor position.
        s.static_elements.push_back(
            {{{9.85, -5.0, 0.35}, {10.15, -4.7, 0.65}}, 400.0});
        // Far wall, > 5 m from every actor position.
        s.static_elements.push_back(
            {{{6.0, 6.4, 0.0}, {14.0, 6.5, 2.0}}, 20.0});
        return s;
    }
    if (name == "near_point_trap") {
        // Slow actor sliding past a static pole 0.4 m from its flank.
        s.frames = frames > 0 ? frames : 5;
        const double ref = std::floor(s.frames / 2.0);
        const Vec3 v{0.3, 0.0, 0.0};
        Aabb box{{9.5, -0.5, 0.0}, {10.5, 0.5, 1.0}};
        box.min -= v * ref;
        box.max -= v * ref;
        s.actors.push_back({box, v, 40.0, 1});
        // Pole just ahead of the reference front face, offset to the side.
        s.static_elements.push_back(
            {{{10.8, 0.7, 0.0}, {11.0, 0.9, 1.6}}, 60.0});
        s.static_elements.push_back(
            {{{4.0, -3.6, 0.0}, {16.0, -3.5, 2.0}}, 20.0});
        return s;
    }
    throw UsageError("unknown scenario '" + name + "'");
}

}  // namespace floxels
