#include <cstdio>
#include <filesystem>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "floxels/pipeline.hpp"

namespace fs = std::filesystem;
using namespace floxels;

namespace {

constexpr const char* kVersion = "floxels 1.0.0 (config schema 1)";

SceneSpec spec_from_json(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    auto vec3 = [](const nlohmann::json& a) {
        return Vec3{a.at(0).get<double>(), a.at(1).get<double>(),
                    a.at(2).get<double>()};
    };
    auto box = [](const nlohmann::json& a) {
        return Aabb{{a.at(0).get<double>(), a.at(1).get<double>(),
                     a.at(2).get<double>()},
                    {a.at(3).get<double>(), a.at(4).get<double>(),
                     a.at(5).get<double>()}};
    };
    SceneSpec s;
    try {
        if (j.contains("frames")) s.frames = j["frames"].get<int>();
        if (j.contains("seed")) s.seed = j["seed"].get<uint64_t>();
        if (j.contains("occlusion")) s.occlusion = j["occlusion"].get<bool>();
        if (j.contains("noise_sigma"))
            s.noise_sigma = j["noise_sigma"].get<double>();
        if (j.contains("sensor_origin"))
            s.sensor_origin = vec3(j["sensor_origin"]);
        for (const auto& e : j.value("static_elements", nlohmann::json::array()))
            s.static_elements.push_back(
                {box(e.at("box")), e.at("density").get<double>()});
        uint32_t next_label = 1;
        for (const auto& a : j.value("actors", nlohmann::json::array())) {
            Actor actor{box(a.at("box")), vec3(a.at("velocity")),
                        a.at("density").get<double>(), next_label};
            if (a.contains("label")) actor.label = a["label"].get<uint32_t>();
            next_label = actor.label + 1;
            s.actors.push_back(actor);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    return s;
}

int run_synth(const std::string& scenario_name, const std::string& spec_path,
              uint64_t seed, int frames, const std::string& out_dir) {
    SceneSpec spec;
    if (!spec_path.empty()) {
        spec = spec_from_json(spec_path);
        if (seed != 0) spec.seed = seed;
        if (frames > 0) spec.frames = frames;
    } else if (!scenario_name.empty()) {
        spec = scenario(scenario_name, seed, frames);
    } else {
        std::string names;
        for (const auto& n : scenario_names()) names += " " + n;
        throw UsageError("need --scenario or --spec; scenarios:" + names);
    }

    const std::vector<SynthFrame> synth_frames = generate(spec);
    SequenceManifest manifest;
    manifest.reference_index = spec.frames / 2;
    fs::create_directories(out_dir);
    for (const SynthFrame& frame : synth_frames) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%03d.ply", frame.t);
        save_cloud((fs::path(out_dir) / name).string(), frame.cloud,
                   CloudFormat::ply_ascii);
        manifest.frames.push_back({name, 0.1 * frame.t});
    }
    const std::string manifest_path =
        (fs::path(out_dir) / "manifest.json").string();
    save_manifest(manifest_path, manifest);
    std::cout << manifest_path << "\n";
    return 0;
}

int run_estimate(const std::string& manifest_path, const RunConfig& cfg,
                 const std::string& out_dir, int reference, bool all_frames) {
    const SequenceManifest manifest = load_manifest(manifest_path);
    if (!all_frames) {
        std::optional<int> ref;
        if (reference >= 0) ref = reference;
        const EstimateResult result = estimate_sequence(manifest, cfg, ref);
        const std::string flow = write_estimate_outputs(out_dir, result, cfg);
        std::cout << flow << "\n";
        return 0;
    }

    // Sequence mode: every frame in turn becomes the reference; frames are
    // distributed over the worker budget, one worker per optimization.
    RunConfig frame_cfg = cfg;
    frame_cfg.workers = 1;
    const int n = static_cast<int>(manifest.frames.size());
    std::vector<std::exception_ptr> errors(n);
    std::atomic<int> cursor{0};
    auto worker = [&]() {
        for (int i = cursor.fetch_add(1); i < n; i = cursor.fetch_add(1)) {
            try {
                const EstimateResult result =
                    estimate_sequence(manifest, frame_cfg, i);
                char sub[32];
                std::snprintf(sub, sizeof(sub), "frame_%03d", i);
                write_estimate_outputs((fs::path(out_dir) / sub).string(),
                                       result, frame_cfg);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < std::max(1, cfg.workers); ++w)
        pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    std::cout << out_dir << "\n";
    return 0;
}

PointCloud load_reference(const SequenceManifest& manifest,
                          const RunConfig& cfg) {
    const std::string& path = manifest.frames[manifest.reference_index].path;
    PointCloud cloud = load_cloud(path, CloudFormat::ply_ascii);
    cloud = filter_cloud(cloud, cfg.filter_ego_radius, cfg.filter_max_height,
                         cfg.filter_max_range);
    if (cfg.filter_ground_z)
        cloud = ground_filter_z(cloud, *cfg.filter_ground_z);
    return cloud;
}

int run_eval(const std::string& flow_path, const std::string& manifest_path,
             const RunConfig& cfg, const std::string& report_path) {
    const SequenceManifest manifest = load_manifest(manifest_path);
    const PointCloud reference = load_reference(manifest, cfg);
    const std::vector<Vec3> pred = load_flow_file(flow_path);
    const std::string report = eval_report(pred, reference, cfg);
    if (report_path.empty() || report_path == "-")
        std::cout << report;
    else
        write_text_file(report_path, report);
    return 0;
}

int run_render_bev(const std::string& flow_path,
                   const std::string& manifest_path, const RunConfig& cfg,
                   const std::string& image_path, double m_per_px) {
    const SequenceManifest manifest = load_manifest(manifest_path);
    const PointCloud reference = load_reference(manifest, cfg);
    const std::vector<Vec3> pred = load_flow_file(flow_path);
    if (pred.size() != reference.size())
        throw LengthMismatch("flow length does not match reference cloud");
    const BevImage img = render_bev(reference, pred, m_per_px);
    save_ppm(image_path, img.width, img.height, img.rgb);
    return 0;
}

int run_dt_slice(const std::string& manifest_path, const RunConfig& cfg,
                 int frame, double z, const std::string& image_path) {
    const SequenceManifest manifest = load_manifest(manifest_path);
    if (frame < 0 || frame >= static_cast<int>(manifest.frames.size()))
        throw UsageError("frame index out of range");
    PointCloud cloud =
        load_cloud(manifest.frames[frame].path, CloudFormat::ply_ascii);
    cloud = filter_cloud(cloud, cfg.filter_ego_radius, cfg.filter_max_height,
                         cfg.filter_max_range);
    const DistanceTransform dt = build_dt(cloud, cfg.dt_cell, cfg.dt_truncation);
    const auto dims = dt.dims();
    long k = std::lround((z - dt.origin().z) / dt.cell() - 0.5);
    k = std::clamp<long>(k, 0, static_cast<long>(dims[2]) - 1);
    save_pgm16(image_path, dims[0], dims[1],
               dt.slice_millimeters(static_cast<size_t>(k)));
    return 0;
}

int run_clusters(const std::string& manifest_path, const RunConfig& cfg,
                 const std::string& out_path) {
    const SequenceManifest manifest = load_manifest(manifest_path);
    const PointCloud reference = load_reference(manifest, cfg);
    const ClusterAssignment a = dbscan(reference, cfg.dbscan_params);
    save_cluster_ids(out_path, a.cluster_id);
    std::cout << a.num_clusters << " clusters, "
              << (reference.size() - a.non_noise_count()) << " noise points\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Voxel-grid scene flow estimation for lidar sequences"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::vector<std::string> overrides;
    app.add_option("--config", config_path, "JSON config file (flat dotted keys)");
    app.add_option("--set", overrides, "config override key=value");

    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic sequence");
    std::string scenario_name, spec_path, out_dir = "out";
    uint64_t seed = 0;
    int frames = 0;
    synth_cmd->add_option("--scenario", scenario_name, "named scenario");
    synth_cmd->add_option("--spec", spec_path, "scene spec JSON file");
    synth_cmd->add_option("--seed", seed, "generator seed");
    synth_cmd->add_option("--frames", frames, "frame count override");
    synth_cmd->add_option("-o,--out", out_dir, "output directory");

    auto* estimate_cmd = app.add_subcommand("estimate", "fit a flow grid");
    std::string manifest_path;
    int reference = -1;
    bool all_frames = false;
    estimate_cmd->add_option("manifest", manifest_path, "sequence manifest")
        ->required();
    estimate_cmd->add_option("-o,--out", out_dir, "output directory");
    estimate_cmd->add_option("--reference", reference,
                             "reference frame override");
    estimate_cmd->add_flag("--all-frames", all_frames,
                           "estimate every frame as reference");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a flow file");
    std::string flow_path, report_path;
    eval_cmd->add_option("manifest", manifest_path, "sequence manifest")
        ->required();
    eval_cmd->add_option("--flow", flow_path, "flow file (.f32)")->required();
    eval_cmd->add_option("-o,--report", report_path,
                         "report path (default stdout)");

    auto* bev_cmd = app.add_subcommand("render-bev", "render a birds-eye view");
    std::string image_path = "bev.ppm";
    double m_per_px = 0.2;
    bev_cmd->add_option("manifest", manifest_path, "sequence manifest")
        ->required();
    bev_cmd->add_option("--flow", flow_path, "flow file (.f32)")->required();
    bev_cmd->add_option("-o,--image", image_path, "output PPM path");
    bev_cmd->add_option("--resolution", m_per_px, "meters per pixel");

    auto* dt_cmd = app.add_subcommand("dt-slice", "dump a DT slice as PGM");
    int dt_frame = 0;
    double dt_z = 0.5;
    dt_cmd->add_option("manifest", manifest_path, "sequence manifest")
        ->required();
    dt_cmd->add_option("--frame", dt_frame, "frame index");
    dt_cmd->add_option("--z", dt_z, "slice height in meters");
    dt_cmd->add_option("-o,--image", image_path, "output PGM path");

    auto* cluster_cmd =
        app.add_subcommand("clusters", "emit reference-frame cluster IDs");
    std::string cluster_out = "clusters.i32";
    cluster_cmd->add_option("manifest", manifest_path, "sequence manifest")
        ->required();
    cluster_cmd->add_option("-o,--out", cluster_out, "sidecar path (int32 LE)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        const RunConfig cfg = resolve_config(config_path, overrides);
        if (*synth_cmd)
            return run_synth(scenario_name, spec_path, seed, frames, out_dir);
        if (*estimate_cmd)
            return run_estimate(manifest_path, cfg, out_dir, reference,
                                all_frames);
        if (*eval_cmd)
            return run_eval(flow_path, manifest_path, cfg, report_path);
        if (*bev_cmd)
            return run_render_bev(flow_path, manifest_path, cfg, image_path,
                                  m_per_px);
        if (*dt_cmd)
            return run_dt_slice(manifest_path, cfg, dt_frame, dt_z, image_path);
        if (*cluster_cmd) return run_clusters(manifest_path, cfg, cluster_out);
        return 1;
    } catch (const NonFiniteGradient& e) {
        std::cerr << "error (numeric): " << e.what() << "\n";
        return 3;
    } catch (const IoError& e) {
        std::cerr << "error (io): " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
}
