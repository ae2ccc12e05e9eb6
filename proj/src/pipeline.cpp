#include "floxels/pipeline.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include <nlohmann/json.hpp>

namespace floxels {

namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw UsageError("bad numeric value for " + key + ": '" + value + "'");
    }
}

long parse_long(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        const long v = std::stol(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw UsageError("bad integer value for " + key + ": '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw UsageError("bad boolean value for " + key + ": '" + value + "'");
}

}  // namespace

void RunConfig::validate() const {
    if (grid_cell_size <= 0.0) throw InvalidConfig("grid.cell_size must be > 0");
    if (grid_margin < 0.0) throw InvalidConfig("grid.margin must be >= 0");
    if (m < 1) throw InvalidConfig("scans.m must be >= 1");
    if (dt_cell <= 0.0) throw InvalidConfig("dt.cell must be > 0");
    if (dt_truncation <= 0.0) throw InvalidConfig("dt.truncation must be > 0");
    if (workers < 1) throw InvalidConfig("workers must be >= 1");
    if (dynamic_threshold < 0.0)
        throw InvalidConfig("dynamic.threshold must be >= 0");
    weights.validate();
    optim.validate();
    dbscan_params.validate();
    if (filter_ego_radius < 0.0 || filter_max_range < 0.0)
        throw InvalidConfig("filter radii must be >= 0");
}

void RunConfig::set(const std::string& key, const std::string& value) {
    if (key == "grid.cell_size") grid_cell_size = parse_double(key, value);
    else if (key == "grid.margin") grid_margin = parse_double(key, value);
    else if (key == "scans.m") m = static_cast<int>(parse_long(key, value));
    else if (key == "dt.cell") dt_cell = parse_double(key, value);
    else if (key == "dt.truncation") dt_truncation = parse_double(key, value);
    else if (key == "loss.lambda_d") weights.lambda_d = parse_double(key, value);
    else if (key == "loss.lambda_c") weights.lambda_c = parse_double(key, value);
    else if (key == "loss.lambda_gamma")
        weights.lambda_gamma = parse_double(key, value);
    else if (key == "optim.learning_rate")
        optim.learning_rate = parse_double(key, value);
    else if (key == "optim.max_epochs")
        optim.max_epochs = static_cast<int>(parse_long(key, value));
    else if (key == "optim.patience")
        optim.patience = static_cast<int>(parse_long(key, value));
    else if (key == "optim.min_delta") optim.min_delta = parse_double(key, value);
    else if (key == "optim.relative_min_delta")
        optim.relative_min_delta = parse_bool(key, value);
    else if (key == "optim.beta1") optim.beta1 = parse_double(key, value);
    else if (key == "optim.beta2") optim.beta2 = parse_double(key, value);
    else if (key == "optim.eps_adam") optim.eps_adam = parse_double(key, value);
    else if (key == "dbscan.eps") dbscan_params.eps = parse_double(key, value);
    else if (key == "dbscan.min_points")
        dbscan_params.min_points = static_cast<int>(parse_long(key, value));
    else if (key == "filter.ego_radius")
        filter_ego_radius = parse_double(key, value);
    else if (key == "filter.max_height")
        filter_max_height = parse_double(key, value);
    else if (key == "filter.max_range")
        filter_max_range = parse_double(key, value);
    else if (key == "filter.ground_z") {
        if (value == "off")
            filter_ground_z.reset();
        else
            filter_ground_z = parse_double(key, value);
    } else if (key == "dynamic.threshold")
        dynamic_threshold = parse_double(key, value);
    else if (key == "workers")
        workers = static_cast<int>(parse_long(key, value));
    else if (key == "seed")
        seed = static_cast<uint64_t>(parse_long(key, value));
    else
        throw UsageError("unknown config key '" + key + "'");
}

std::map<std::string, std::string> RunConfig::entries() const {
    std::map<std::string, std::string> e;
    e["grid.cell_size"] = fmt_double(grid_cell_size);
    e["grid.margin"] = fmt_double(grid_margin);
    e["scans.m"] = std::to_string(m);
    e["dt.cell"] = fmt_double(dt_cell);
    e["dt.truncation"] = fmt_double(dt_truncation);
    e["loss.lambda_d"] = fmt_double(weights.lambda_d);
    e["loss.lambda_c"] = fmt_double(weights.lambda_c);
    e["loss.lambda_gamma"] = fmt_double(weights.lambda_gamma);
    e["optim.learning_rate"] = fmt_double(optim.learning_rate);
    e["optim.max_epochs"] = std::to_string(optim.max_epochs);
    e["optim.patience"] = std::to_string(optim.patience);
    e["optim.min_delta"] = fmt_double(optim.min_delta);
    e["optim.relative_min_delta"] = optim.relative_min_delta ? "true" : "false";
    e["optim.beta1"] = fmt_double(optim.beta1);
    e["optim.beta2"] = fmt_double(optim.beta2);
    e["optim.eps_adam"] = fmt_double(optim.eps_adam);
    e["dbscan.eps"] = fmt_double(dbscan_params.eps);
    e["dbscan.min_points"] = std::to_string(dbscan_params.min_points);
    e["filter.ego_radius"] = fmt_double(filter_ego_radius);
    e["filter.max_height"] = fmt_double(filter_max_height);
    e["filter.max_range"] = fmt_double(filter_max_range);
    e["filter.ground_z"] =
        filter_ground_z ? fmt_double(*filter_ground_z) : "off";
    e["dynamic.threshold"] = fmt_double(dynamic_threshold);
    e["workers"] = std::to_string(workers);
    e["seed"] = std::to_string(seed);
    return e;
}

std::string RunConfig::hash() const {
    uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ull;
        }
    };
    for (const auto& [k, v] : entries()) {
        mix(k);
        mix("=");
        mix(v);
        mix(";");
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(h));
    return buf;
}

RunConfig resolve_config(const std::string& config_path,
                         const std::vector<std::string>& overrides) {
    RunConfig cfg;
    if (!config_path.empty()) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(read_text_file(config_path));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(config_path + ": " + e.what());
        }
        if (!j.is_object())
            throw ParseError(config_path + ": config must be a JSON object");
        for (const auto& [key, value] : j.items()) {
            std::string v;
            if (value.is_string())
                v = value.get<std::string>();
            else if (value.is_boolean())
                v = value.get<bool>() ? "true" : "false";
            else
                v = value.dump();
            cfg.set(key, v);
        }
    }
    for (const std::string& assignment : overrides) {
        const auto eq = assignment.find('=');
        if (eq == std::string::npos)
            throw UsageError("override must be key=value: '" + assignment +
                             "'");
        cfg.set(assignment.substr(0, eq), assignment.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
}

namespace {

PointCloud load_and_filter(const std::string& path, const RunConfig& cfg) {
    CloudFormat format = CloudFormat::ply_ascii;
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".f32")
        format = CloudFormat::xyz_f32;
    PointCloud cloud = load_cloud(path, format);
    cloud = filter_cloud(cloud, cfg.filter_ego_radius, cfg.filter_max_height,
                         cfg.filter_max_range);
    if (cfg.filter_ground_z) cloud = ground_filter_z(cloud, *cfg.filter_ground_z);
    return cloud;
}

}  // namespace

EstimateResult estimate_sequence(const SequenceManifest& manifest,
                                 const RunConfig& cfg,
                                 std::optional<int> reference_override) {
    cfg.validate();
    const int ref_idx =
        reference_override.value_or(manifest.reference_index);
    if (ref_idx < 0 || ref_idx >= static_cast<int>(manifest.frames.size()))
        throw InvalidConfig("reference index out of range");

    EstimateResult result;
    result.reference_index = ref_idx;
    result.reference = load_and_filter(manifest.frames[ref_idx].path, cfg);
    if (result.reference.empty())
        throw InvalidConfig("reference frame is empty after filtering");

    // Window frames; missing boundary frames are dropped without weight
    // renormalization.
    struct Support {
        int delta_t;
        PointCloud cloud;
    };
    std::vector<Support> supports;
    Aabb union_bounds = result.reference.bounds();
    for (int dt = -cfg.m; dt <= cfg.m; ++dt) {
        if (dt == 0) continue;
        const int idx = ref_idx + dt;
        if (idx < 0 || idx >= static_cast<int>(manifest.frames.size()))
            continue;
        PointCloud cloud = load_and_filter(manifest.frames[idx].path, cfg);
        if (cloud.empty()) continue;
        union_bounds = union_bounds.merged(cloud.bounds());
        supports.push_back({dt, std::move(cloud)});
    }
    if (supports.empty())
        throw InvalidConfig("no support frames available around reference");

    MultiScanContext ctx;
    ctx.reference = result.reference;
    ctx.m = cfg.m;
    for (auto& s : supports)
        ctx.supports.push_back(
            {s.delta_t, std::make_shared<DistanceTransform>(
                            s.cloud, s.cloud.bounds().expanded(cfg.dt_truncation),
                            cfg.dt_cell, cfg.dt_truncation)});

    result.clusters = dbscan(result.reference, cfg.dbscan_params);

    result.grid = FlowGrid(union_bounds, cfg.grid_cell_size, cfg.grid_margin);
    result.fit = fit(ctx, result.clusters, cfg.weights, cfg.optim, result.grid,
                     cfg.workers);

    result.flow.reserve(result.reference.size());
    for (const Point3& p : result.reference.points)
        result.flow.push_back(result.grid.query_flow(p));
    return result;
}

std::string write_estimate_outputs(const std::string& out_dir,
                                   const EstimateResult& result,
                                   const RunConfig& cfg) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const std::string flow_path = (fs::path(out_dir) / "flow.f32").string();
    save_flow_file(flow_path, result.flow);
    result.grid.save_checkpoint(
        (fs::path(out_dir) / "checkpoint.fgrid").string());

    std::ostringstream log;
    for (const EpochRecord& r : result.fit.log) {
        nlohmann::json line;
        line["epoch"] = r.epoch;
        line["total"] = r.loss.total;
        line["dt_term"] = r.loss.dt_term;
        line["cluster_term"] = r.loss.cluster_term;
        line["norm_term"] = r.loss.norm_term;
        line["rejected_fraction"] = r.loss.rejected_fraction;
        line["wall_ms"] = r.wall_ms;
        log << line.dump() << "\n";
    }
    write_text_file((fs::path(out_dir) / "training_log.jsonl").string(),
                    log.str());

    nlohmann::json meta;
    meta["config_hash"] = cfg.hash();
    meta["config"] = cfg.entries();
    meta["epochs_run"] = result.fit.epochs_run;
    meta["best_epoch"] = result.fit.best_epoch;
    meta["stop_reason"] = result.fit.stop_reason;
    meta["reference_index"] = result.reference_index;
    meta["point_count"] = result.reference.size();
    meta["num_clusters"] = result.clusters.num_clusters;
    write_text_file((fs::path(out_dir) / "meta.json").string(),
                    meta.dump(2) + "\n");
    return flow_path;
}

std::string eval_report(const std::vector<Vec3>& pred,
                        const PointCloud& reference, const RunConfig& cfg) {
    if (!reference.gt_flow)
        throw MissingGroundTruth("reference frame has no gt_flow channel");
    if (pred.size() != reference.size())
        throw LengthMismatch("flow length does not match reference cloud");
    const std::vector<Vec3>& gt = *reference.gt_flow;
    const std::vector<uint8_t> dyn =
        split_dynamic(gt, cfg.dynamic_threshold);
    std::vector<uint8_t> stat(dyn.size());
    for (size_t i = 0; i < dyn.size(); ++i) stat[i] = dyn[i] ? 0 : 1;

    auto eval_json = [](const FlowEval& e) {
        nlohmann::json j;
        j["count"] = e.count;
        if (e.count > 0) {
            j["epe_mean"] = e.epe_mean;
            j["acc5"] = e.acc5;
            j["acc10"] = e.acc10;
            j["angle_error_mean"] = e.angle_error_mean;
        }
        return j;
    };

    nlohmann::json report;
    // Per-point normalized variant, not the external challenge's
    // speed-bucketed metric.
    report["metric_note"] =
        "dnEPE uses per-point normalization with a 0.05 m floor";
    report["dynamic_threshold_mode"] = "per_point_m_per_frame";
    report["overall"] = eval_json(eval_flow(pred, gt));
    report["static"] = eval_json(eval_flow(pred, gt, stat));
    report["dynamic"] = eval_json(eval_flow(pred, gt, dyn));
    if (reference.labels) {
        const BucketedEval b =
            eval_bucketed(pred, gt, *reference.labels, dyn);
        nlohmann::json per_class;
        for (const auto& [cls, v] : b.dn_epe)
            per_class[std::to_string(cls)] = v;
        report["bucketed"] = {{"dn_epe", per_class}, {"mdn_epe", b.mdn_epe}};
    }
    report["config"] = cfg.entries();
    report["config_hash"] = cfg.hash();
    return report.dump(2) + "\n";
}

BevImage render_bev(const PointCloud& cloud, const std::vector<Vec3>& flow,
                    double meters_per_pixel, double saturation_full_scale) {
    if (flow.size() != cloud.size())
        throw LengthMismatch("flow length does not match cloud");

    BevImage img;
    if (cloud.empty()) {
        img.width = img.height = 16;
        img.rgb.assign(img.width * img.height * 3, 0);
        return img;
    }
    const Aabb b = cloud.bounds().expanded(1.0);
    img.width = static_cast<size_t>(
                    std::ceil((b.max.x - b.min.x) / meters_per_pixel)) +
                1;
    img.height = static_cast<size_t>(
                     std::ceil((b.max.y - b.min.y) / meters_per_pixel)) +
                 1;
    std::vector<double> acc(img.width * img.height * 3, 0.0);
    std::vector<uint32_t> hits(img.width * img.height, 0);

    auto hsv_to_rgb = [](double h, double s, double v, double* rgb) {
        const double c = v * s;
        const double hp = h / (M_PI / 3.0);  // sector in [0,6)
        const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
        double r = 0, g = 0, bl = 0;
        if (hp < 1) { r = c; g = x; }
        else if (hp < 2) { r = x; g = c; }
        else if (hp < 3) { g = c; bl = x; }
        else if (hp < 4) { g = x; bl = c; }
        else if (hp < 5) { r = x; bl = c; }
        else { r = c; bl = x; }
        const double m = v - c;
        rgb[0] = r + m;
        rgb[1] = g + m;
        rgb[2] = bl + m;
    };

    for (size_t i = 0; i < cloud.size(); ++i) {
        const Point3& p = cloud.points[i];
        const size_t px = static_cast<size_t>((p.x - b.min.x) / meters_per_pixel);
        // image rows run north to south
        const size_t py = img.height - 1 -
                          static_cast<size_t>((p.y - b.min.y) / meters_per_pixel);
        const Vec3& f = flow[i];
        double h = std::atan2(f.y, f.x);
        if (h < 0.0) h += 2.0 * M_PI;
        const double s =
            std::min(1.0, f.norm_xy() / saturation_full_scale);
        double rgb[3];
        hsv_to_rgb(h, s, 1.0, rgb);
        const size_t pix = py * img.width + px;
        for (int c = 0; c < 3; ++c) acc[3 * pix + c] += rgb[c];
        ++hits[pix];
    }

    img.rgb.assign(img.width * img.height * 3, 0);
    for (size_t pix = 0; pix < hits.size(); ++pix) {
        if (!hits[pix]) continue;
        for (int c = 0; c < 3; ++c)
            img.rgb[3 * pix + c] = static_cast<uint8_t>(std::lround(
                255.0 * acc[3 * pix + c] / static_cast<double>(hits[pix])));
    }
    return img;
}

}  // namespace floxels
