#include "flowpose/augment.hpp"

#include <algorithm>
#include <cmath>

#include "flowpose/util.hpp"

namespace flowpose {

namespace {

constexpr double kMaxResizeFactor = 2.5;
constexpr double kFactorTol = 1e-9;
constexpr double kPi = 3.14159265358979323846;

// Bilinear sample with the cell anchored at min(floor(x), size-2). At a
// flush-right crop the fractional weight can slightly exceed 1, which turns
// the last cell into a linear extrapolation; exact for affine fields like the
// IL, and confined to the outermost output column/row for flow.
template <typename Getter>
double bilinear(Getter&& get, int width, int height, double x, double y) {
    const int x0 = std::clamp(static_cast<int>(std::floor(x)), 0, width - 2);
    const int y0 = std::clamp(static_cast<int>(std::floor(y)), 0, height - 2);
    const double fx = x - x0;
    const double fy = y - y0;
    const double v00 = get(x0, y0);
    const double v10 = get(x0 + 1, y0);
    const double v01 = get(x0, y0 + 1);
    const double v11 = get(x0 + 1, y0 + 1);
    return (1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) + fy * ((1.0 - fx) * v01 + fx * v11);
}

}  // namespace

void CropResizeParams::validate(int src_width, int src_height) const {
    if (w < 2 || h < 2 || out_w < 2 || out_h < 2) {
        throw InvalidCrop("crop and output sizes must be at least 2 pixels");
    }
    if (x0 < 0 || y0 < 0 || x0 + w > src_width || y0 + h > src_height) {
        throw InvalidCrop("crop rect (" + std::to_string(x0) + "," + std::to_string(y0) + "," +
                          std::to_string(w) + "," + std::to_string(h) + ") exits source bounds " +
                          std::to_string(src_width) + "x" + std::to_string(src_height));
    }
    const double sx = scale_x();
    const double sy = scale_y();
    if (sx < 1.0 - kFactorTol || sx > kMaxResizeFactor + kFactorTol || sy < 1.0 - kFactorTol ||
        sy > kMaxResizeFactor + kFactorTol) {
        throw InvalidCrop("resize factors (" + std::to_string(sx) + "," + std::to_string(sy) +
                          ") outside [1.0, 2.5]");
    }
}

ILGrid make_il(const CameraIntrinsics& k) {
    k.validate();
    ILGrid il(k.width, k.height);
    for (int y = 0; y < k.height; ++y) {
        for (int x = 0; x < k.width; ++x) {
            const size_t i = static_cast<size_t>(y) * k.width + x;
            il.kx[i] = (x - k.ox) / k.fx;
            il.ky[i] = (y - k.oy) / k.fy;
        }
    }
    return il;
}

std::pair<Sample, ILGrid> rcr(const Sample& sample, const ILGrid& il, const CropResizeParams& params) {
    const int src_w = sample.flow.width;
    const int src_h = sample.flow.height;
    require_same_shape(src_w, src_h, il.width, il.height, "rcr flow/IL");
    require_same_shape(src_w, src_h, sample.valid_mask.width, sample.valid_mask.height, "rcr flow/mask");
    params.validate(src_w, src_h);

    const double sx = params.scale_x();
    const double sy = params.scale_y();
    const double inv_sx = static_cast<double>(params.w) / params.out_w;
    const double inv_sy = static_cast<double>(params.h) / params.out_h;

    Sample out;
    out.motion = sample.motion;
    out.flow = FlowField(params.out_w, params.out_h);
    out.valid_mask = PixelMask(params.out_w, params.out_h, false);
    ILGrid out_il(params.out_w, params.out_h);

    const auto& flow = sample.flow;
    for (int y = 0; y < params.out_h; ++y) {
        const double src_y = params.y0 + y * inv_sy;
        for (int x = 0; x < params.out_w; ++x) {
            const double src_x = params.x0 + x * inv_sx;
            out.flow.u(x, y) =
                sx * bilinear([&](int i, int j) { return flow.u(i, j); }, src_w, src_h, src_x, src_y);
            out.flow.v(x, y) =
                sy * bilinear([&](int i, int j) { return flow.v(i, j); }, src_w, src_h, src_x, src_y);
            const size_t o = static_cast<size_t>(y) * params.out_w + x;
            out_il.kx[o] =
                bilinear([&](int i, int j) { return il.kx_at(i, j); }, src_w, src_h, src_x, src_y);
            out_il.ky[o] =
                bilinear([&](int i, int j) { return il.ky_at(i, j); }, src_w, src_h, src_x, src_y);
            const int nx = std::clamp(static_cast<int>(std::lround(src_x)), 0, src_w - 1);
            const int ny = std::clamp(static_cast<int>(std::lround(src_y)), 0, src_h - 1);
            out.valid_mask.set(x, y, sample.valid_mask.at(nx, ny));
        }
    }

    out.intrinsics = sample.intrinsics;
    out.intrinsics.fx = sample.intrinsics.fx * sx;
    out.intrinsics.fy = sample.intrinsics.fy * sy;
    out.intrinsics.ox = (sample.intrinsics.ox - params.x0) * sx;
    out.intrinsics.oy = (sample.intrinsics.oy - params.y0) * sy;
    out.intrinsics.width = params.out_w;
    out.intrinsics.height = params.out_h;
    return {std::move(out), std::move(out_il)};
}

CropResizeParams sample_rcr_params(const CameraIntrinsics& k, std::uint64_t seed,
                                   std::pair<double, double> fov_range_deg) {
    k.validate();
    const double lo_deg = fov_range_deg.first;
    const double hi_deg = fov_range_deg.second;
    if (!(lo_deg > 0) || !(hi_deg < 120.0) || lo_deg > hi_deg) {
        throw Error("sample_rcr_params: FoV range must lie within (0, 120) degrees");
    }

    // A crop of width w resized back to full width acts like a camera whose
    // horizontal FoV is the angle the crop subtends: 2*atan(w / (2*fx)).
    const auto crop_width_for_fov = [&](double fov_deg) {
        return 2.0 * k.fx * std::tan(0.5 * fov_deg * kPi / 180.0);
    };
    const int min_factor_w = static_cast<int>(std::ceil(k.width / kMaxResizeFactor));
    int w_lo = std::max({static_cast<int>(std::ceil(crop_width_for_fov(lo_deg) - kFactorTol)),
                         min_factor_w, 2});
    int w_hi = std::min(static_cast<int>(std::floor(crop_width_for_fov(hi_deg) + kFactorTol)), k.width);
    if (w_lo > w_hi) {
        throw Infeasible("sample_rcr_params: no crop width in [1, 2.5]x resize reaches FoV [" +
                         std::to_string(lo_deg) + ", " + std::to_string(hi_deg) + "] deg");
    }

    auto rng = make_rng(derive_seed(seed, rng_stream::kCropParams));
    std::uniform_int_distribution<int> w_dist(w_lo, w_hi);

    CropResizeParams p;
    p.out_w = k.width;
    p.out_h = k.height;
    p.w = w_dist(rng);
    const int min_factor_h = std::max(static_cast<int>(std::ceil(k.height / kMaxResizeFactor)), 2);
    p.h = std::clamp(static_cast<int>(std::lround(static_cast<double>(k.height) * p.w / k.width)),
                     min_factor_h, k.height);
    std::uniform_int_distribution<int> x_dist(0, k.width - p.w);
    std::uniform_int_distribution<int> y_dist(0, k.height - p.h);
    p.x0 = x_dist(rng);
    p.y0 = y_dist(rng);
    return p;
}

}  // namespace flowpose
