#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "floxels/clustering.hpp"
#include "floxels/io.hpp"
#include "floxels/losses.hpp"
#include "floxels/metrics.hpp"
#include "floxels/optimizer.hpp"
#include "floxels/synth.hpp"

namespace floxels {

// All tunables, addressable by flat dotted keys (config file and CLI
// overrides share the same namespace).
struct RunConfig {
    double grid_cell_size = 0.5;
    double grid_margin = 3.0;
    int m = 2;  // half-window; 2m+1 scans
    double dt_cell = 0.2;
    double dt_truncation = 5.0;
    LossWeights weights;
    OptimConfig optim;
    DbscanParams dbscan_params;
    double filter_ego_radius = 3.0;
    double filter_max_height = 4.0;
    double filter_max_range = 50.0;
    std::optional<double> filter_ground_z;  // unset = ground filter off
    double dynamic_threshold = 0.05;        // meters/frame
    int workers = 1;
    uint64_t seed = 0;

    void validate() const;

    // Apply a "dotted.key=value" assignment; unknown keys throw UsageError.
    void set(const std::string& key, const std::string& value);

    // Canonical key/value listing (sorted keys, fixed formatting).
    std::map<std::string, std::string> entries() const;

    // FNV-1a 64 over the canonical listing, hex string.
    std::string hash() const;
};

// Defaults < config file < explicit overrides.
RunConfig resolve_config(const std::string& config_path,
                         const std::vector<std::string>& overrides);

struct EstimateResult {
    std::vector<Vec3> flow;  // per reference point
    FlowGrid grid;
    FitResult fit;
    PointCloud reference;  // filtered, the cloud the flow aligns to
    ClusterAssignment clusters;
    int reference_index = 0;
};

EstimateResult estimate_sequence(const SequenceManifest& manifest,
                                 const RunConfig& cfg,
                                 std::optional<int> reference_override = {});

// Writes flow.f32, checkpoint.fgrid, training_log.jsonl and meta.json into
// out_dir; returns the flow file path.
std::string write_estimate_outputs(const std::string& out_dir,
                                   const EstimateResult& result,
                                   const RunConfig& cfg);

// JSON metric report (overall/static/dynamic FlowEval + BucketedEval +
// config echo) for a flow file against the reference frame's GT channels.
std::string eval_report(const std::vector<Vec3>& pred,
                        const PointCloud& reference, const RunConfig& cfg);

struct BevImage {
    size_t width = 0;
    size_t height = 0;
    std::vector<uint8_t> rgb;
};

// Top-down orthographic raster: flow direction -> hue, magnitude ->
// saturation; overlapping points averaged per pixel.
BevImage render_bev(const PointCloud& cloud, const std::vector<Vec3>& flow,
                    double meters_per_pixel = 0.2,
                    double saturation_full_scale = 1.0);

}  // namespace floxels
