#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "floxels/types.hpp"

namespace floxels {

struct FlowEval {
    double epe_mean = 0.0;          // meters
    double acc5 = 0.0;              // fraction
    double acc10 = 0.0;             // fraction
    double angle_error_mean = 0.0;  // radians
    size_t count = 0;               // points evaluated; means undefined at 0
};

struct BucketedEval {
    std::map<uint32_t, double> dn_epe;  // class -> normalized EPE, dynamic pts
    double mdn_epe = 0.0;               // mean over classes present
};

// Point i dynamic iff ||gt_flow_i|| > threshold (meters/frame).
std::vector<uint8_t> split_dynamic(const std::vector<Vec3>& gt_flow,
                                   double threshold = 0.05);

// mask: empty = all points, else one byte per point (nonzero = selected).
FlowEval eval_flow(const std::vector<Vec3>& pred,
                   const std::vector<Vec3>& gt,
                   const std::vector<uint8_t>& mask = {});

// Per-class normalized EPE over dynamic points, gt norm floored at eta;
// classes with zero dynamic points are excluded from the class mean.
BucketedEval eval_bucketed(const std::vector<Vec3>& pred,
                           const std::vector<Vec3>& gt,
                           const std::vector<uint32_t>& labels,
                           const std::vector<uint8_t>& dynamic_mask,
                           double eta = 0.05);

}  // namespace floxels
