#pragma once

#include <string>

#include "flowpose/flow.hpp"
#include "flowpose/geometry.hpp"

namespace flowpose {

// Translation-term form of the motion loss.
//   kFull       : ||t^ - t|| + ||r^ - r||, scale-aware baseline
//   kCos        : 1 - cos(t^, t) + ||r^ - r||, minimized at alignment
//   kCosPrinted : raw cosine similarity + ||r^ - r||; kept for reproducing
//                 the uncorrected form, minimized at anti-alignment
//   kNorm       : || t^/||t^|| - t/||t|| || + ||r^ - r||, eps-guarded
enum class LossVariant { kFull, kCos, kCosPrinted, kNorm };

LossVariant loss_variant_from_string(const std::string& name);
std::string to_string(LossVariant v);

// Guard against division by zero in the up-to-scale terms.
constexpr double kLossEpsilon = 1e-6;

struct FlowLossResult {
    double value = 0.0;
    FlowField grad;  // d value / d pred, same shape as pred
};

// Mean L1 norm of (pred - label) over valid pixels.
FlowLossResult flow_loss(const FlowField& pred, const FlowField& label, const PixelMask& mask);

struct MotionLossResult {
    double value = 0.0;  // translation_term + rotation_term
    double translation_term = 0.0;
    double rotation_term = 0.0;
    Vec3 d_translation = Vec3::Zero();
    Vec3 d_rotation = Vec3::Zero();
};

MotionLossResult motion_loss_full(const RelativeMotion& pred, const RelativeMotion& label);
MotionLossResult motion_loss_cos(const RelativeMotion& pred, const RelativeMotion& label,
                                 bool printed_form = false);
MotionLossResult motion_loss_norm(const RelativeMotion& pred, const RelativeMotion& label);
MotionLossResult motion_loss(LossVariant variant, const RelativeMotion& pred,
                             const RelativeMotion& label);

struct LossValue {
    double total = 0.0;
    double translation_term = 0.0;
    double rotation_term = 0.0;
    double flow_term = 0.0;  // 0 when no flow pair is supplied
};

struct TotalLossResult {
    LossValue value;
    MotionLossResult motion;
    FlowLossResult flow;      // grad empty when no flow pair is supplied
};

// Joint objective: total = lambda * flow_term + translation_term +
// rotation_term. flow_pred/flow_label/mask may all be null for the
// motion-only form.
TotalLossResult total_loss(const FlowField* flow_pred, const FlowField* flow_label,
                           const PixelMask* mask, const RelativeMotion& motion_pred,
                           const RelativeMotion& motion_label, double lambda, LossVariant variant);

}  // namespace flowpose
