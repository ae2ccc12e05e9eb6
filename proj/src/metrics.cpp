#include "floxels/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace floxels {

namespace {
constexpr double kAngleEps = 1e-9;
constexpr double kZeroNorm = 1e-6;
}  // namespace

std::vector<uint8_t> split_dynamic(const std::vector<Vec3>& gt_flow,
                                   double threshold) {
    if (gt_flow.empty()) throw MissingGroundTruth("gt_flow is empty");
    std::vector<uint8_t> mask(gt_flow.size());
    for (size_t i = 0; i < gt_flow.size(); ++i)
        mask[i] = gt_flow[i].norm() > threshold ? 1 : 0;
    return mask;
}

FlowEval eval_flow(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt,
                   const std::vector<uint8_t>& mask) {
    if (pred.size() != gt.size())
        throw LengthMismatch("pred/gt length mismatch");
    if (!mask.empty() && mask.size() != pred.size())
        throw LengthMismatch("mask length mismatch");

    FlowEval out;
    double epe_sum = 0.0, angle_sum = 0.0;
    size_t acc5 = 0, acc10 = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
        if (!mask.empty() && !mask[i]) continue;
        ++out.count;
        const double epe = (pred[i] - gt[i]).norm();
        epe_sum += epe;
        const double gt_norm = gt[i].norm();
        const double rel = gt_norm > 0.0 ? epe / gt_norm
                                         : std::numeric_limits<double>::infinity();
        if (epe < 0.05 || rel < 0.05) ++acc5;
        if (epe < 0.10 || rel < 0.10) ++acc10;

        const double pred_norm = pred[i].norm();
        double angle;
        if (pred_norm < kZeroNorm && gt_norm < kZeroNorm) {
            angle = 0.0;  // both direction-less: agreement
        } else if (pred_norm < kZeroNorm || gt_norm < kZeroNorm) {
            angle = M_PI / 2.0;  // one direction-less: maximal disagreement
        } else {
            const double c =
                pred[i].dot(gt[i]) / (pred_norm * gt_norm + kAngleEps);
            angle = std::acos(std::clamp(c, -1.0, 1.0));
        }
        angle_sum += angle;
    }
    if (out.count > 0) {
        const double inv = 1.0 / static_cast<double>(out.count);
        out.epe_mean = epe_sum * inv;
        out.acc5 = static_cast<double>(acc5) * inv;
        out.acc10 = static_cast<double>(acc10) * inv;
        out.angle_error_mean = angle_sum * inv;
    }
    return out;
}

BucketedEval eval_bucketed(const std::vector<Vec3>& pred,
                           const std::vector<Vec3>& gt,
                           const std::vector<uint32_t>& labels,
                           const std::vector<uint8_t>& dynamic_mask,
                           double eta) {
    if (labels.empty()) throw MissingLabels("labels are required");
    if (pred.size() != gt.size() || labels.size() != pred.size() ||
        dynamic_mask.size() != pred.size())
        throw LengthMismatch("bucketed eval channel length mismatch");

    std::map<uint32_t, std::pair<double, size_t>> sums;  // class -> (sum, n)
    for (size_t i = 0; i < pred.size(); ++i) {
        if (!dynamic_mask[i]) continue;
        const double epe = (pred[i] - gt[i]).norm();
        const double denom = std::max(gt[i].norm(), eta);
        auto& [sum, n] = sums[labels[i]];
        sum += epe / denom;
        ++n;
    }

    BucketedEval out;
    double class_sum = 0.0;
    for (const auto& [cls, acc] : sums) {
        const double dn = acc.first / static_cast<double>(acc.second);
        out.dn_epe[cls] = dn;
        class_sum += dn;
    }
    if (!out.dn_epe.empty())
        out.mdn_epe = class_sum / static_cast<double>(out.dn_epe.size());
    return out;
}

}  // namespace floxels
