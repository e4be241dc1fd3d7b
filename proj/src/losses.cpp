#include "flowpose/losses.hpp"

#include <cmath>

namespace flowpose {

namespace {

double sign(double x) {
    if (x > 0) return 1.0;
    if (x < 0) return -1.0;
    return 0.0;
}

// ||r^ - r|| and its gradient, shared by every variant.
void add_rotation_term(const Vec3& pred, const Vec3& label, MotionLossResult& out) {
    const Vec3 diff = pred - label;
    const double norm = diff.norm();
    out.rotation_term = norm;
    out.d_rotation = norm > 0 ? Vec3(diff / norm) : Vec3::Zero();
}

}  // namespace

LossVariant loss_variant_from_string(const std::string& name) {
    if (name == "full") return LossVariant::kFull;
    if (name == "cos") return LossVariant::kCos;
    if (name == "cos-printed") return LossVariant::kCosPrinted;
    if (name == "norm") return LossVariant::kNorm;
    throw ParseError("unknown loss variant '" + name + "' (expected full|cos|cos-printed|norm)");
}

std::string to_string(LossVariant v) {
    switch (v) {
        case LossVariant::kFull: return "full";
        case LossVariant::kCos: return "cos";
        case LossVariant::kCosPrinted: return "cos-printed";
        case LossVariant::kNorm: return "norm";
    }
    return "?";
}

FlowLossResult flow_loss(const FlowField& pred, const FlowField& label, const PixelMask& mask) {
    require_same_shape(pred.width, pred.height, label.width, label.height, "flow_loss pred/label");
    require_same_shape(pred.width, pred.height, mask.width, mask.height, "flow_loss pred/mask");

    const size_t valid = mask.count_valid();
    if (valid == 0) {
        throw EmptyMask("flow_loss: no valid pixel");
    }

    FlowLossResult out;
    out.grad = FlowField(pred.width, pred.height);
    const double inv_n = 1.0 / static_cast<double>(valid);
    double sum = 0.0;
    for (size_t p = 0; p < pred.pixel_count(); ++p) {
        if (!mask.data[p]) continue;
        const double du = pred.data[2 * p] - label.data[2 * p];
        const double dv = pred.data[2 * p + 1] - label.data[2 * p + 1];
        sum += std::abs(du) + std::abs(dv);
        out.grad.data[2 * p] = sign(du) * inv_n;
        out.grad.data[2 * p + 1] = sign(dv) * inv_n;
    }
    out.value = sum * inv_n;
    return out;
}

MotionLossResult motion_loss_full(const RelativeMotion& pred, const RelativeMotion& label) {
    pred.validate();
    label.validate();
    MotionLossResult out;
    const Vec3 dt = pred.translation - label.translation;
    const double tn = dt.norm();
    out.translation_term = tn;
    out.d_translation = tn > 0 ? Vec3(dt / tn) : Vec3::Zero();
    add_rotation_term(pred.rotation, label.rotation, out);
    out.value = out.translation_term + out.rotation_term;
    return out;
}

MotionLossResult motion_loss_cos(const RelativeMotion& pred, const RelativeMotion& label,
                                 bool printed_form) {
    pred.validate();
    label.validate();
    MotionLossResult out;

    const Vec3& th = pred.translation;
    const Vec3& t = label.translation;
    const double dot = th.dot(t);
    const double nh = th.norm();
    const double nl = t.norm();
    const double raw_denom = nh * nl;
    const double denom = std::max(raw_denom, kLossEpsilon);
    const double cosine = dot / denom;

    Vec3 d_cos;
    if (nh <= 10.0 * kLossEpsilon) {
        // At a near-zero prediction the true slope scales like 1/eps and one
        // descent step would catapult a zero-initialized predictor; inside
        // this non-differentiable ball we use the bounded pull toward the
        // label direction instead. The loss value is untouched.
        d_cos = t / std::max(nl, kLossEpsilon);
    } else if (raw_denom > kLossEpsilon) {
        d_cos = t / denom - (dot * nl / nh) * th / (denom * denom);
    } else {
        // Denominator pinned at eps by a tiny label; the numerator is the
        // only live part, and its slope is bounded because nl*nh <= eps.
        d_cos = t / denom;
    }

    if (printed_form) {
        out.translation_term = cosine;
        out.d_translation = d_cos;
    } else {
        out.translation_term = 1.0 - cosine;
        out.d_translation = -d_cos;
    }
    add_rotation_term(pred.rotation, label.rotation, out);
    out.value = out.translation_term + out.rotation_term;
    return out;
}

MotionLossResult motion_loss_norm(const RelativeMotion& pred, const RelativeMotion& label) {
    pred.validate();
    label.validate();
    MotionLossResult out;

    const Vec3& th = pred.translation;
    const double nh = std::max(th.norm(), kLossEpsilon);
    const double nl = std::max(label.translation.norm(), kLossEpsilon);
    const Vec3 u = th / nh;
    const Vec3 v = label.translation / nl;
    const Vec3 diff = u - v;
    const double term = diff.norm();
    out.translation_term = term;
    if (term > 0) {
        const Vec3 d_diff = diff / term;
        if (th.norm() > 10.0 * kLossEpsilon) {
            out.d_translation = (d_diff - u * u.dot(d_diff)) / nh;
        } else {
            // At a near-zero prediction the true slope scales like 1/eps and
            // one descent step would catapult a zero-initialized predictor;
            // inside this non-differentiable ball we use the bounded pull
            // toward the label direction instead. The loss value is
            // untouched.
            out.d_translation = d_diff;
        }
    }
    add_rotation_term(pred.rotation, label.rotation, out);
    out.value = out.translation_term + out.rotation_term;
    return out;
}

MotionLossResult motion_loss(LossVariant variant, const RelativeMotion& pred,
                             const RelativeMotion& label) {
    switch (variant) {
        case LossVariant::kFull: return motion_loss_full(pred, label);
        case LossVariant::kCos: return motion_loss_cos(pred, label, false);
        case LossVariant::kCosPrinted: return motion_loss_cos(pred, label, true);
        case LossVariant::kNorm: return motion_loss_norm(pred, label);
    }
    throw Error("motion_loss: bad variant");
}

TotalLossResult total_loss(const FlowField* flow_pred, const FlowField* flow_label,
                           const PixelMask* mask, const RelativeMotion& motion_pred,
                           const RelativeMotion& motion_label, double lambda, LossVariant variant) {
    if (lambda < 0) {
        throw Error("total_loss: lambda must be >= 0");
    }
    const bool has_flow = flow_pred != nullptr;
    if (has_flow && (flow_label == nullptr || mask == nullptr)) {
        throw Error("total_loss: flow prediction supplied without label or mask");
    }

    TotalLossResult out;
    out.motion = motion_loss(variant, motion_pred, motion_label);
    if (has_flow) {
        out.flow = flow_loss(*flow_pred, *flow_label, *mask);
        out.value.flow_term = out.flow.value;
    }
    out.value.translation_term = out.motion.translation_term;
    out.value.rotation_term = out.motion.rotation_term;
    out.value.total = lambda * out.value.flow_term + out.value.translation_term + out.value.rotation_term;
    return out;
}

}  // namespace flowpose
