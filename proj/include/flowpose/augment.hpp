#pragma once

#include <cstdint>
#include <utility>

#include "flowpose/flow.hpp"
#include "flowpose/geometry.hpp"
#include "flowpose/synthgen.hpp"

namespace flowpose {

// Two-channel grid of normalized pixel coordinates, (u-ox)/fx and (v-oy)/fy.
// Concatenated to the flow it tells the pose regressor which camera produced
// the pixels. Both channels are strictly increasing along their axis.
struct ILGrid {
    int width{0};
    int height{0};
    std::vector<double> kx;  // row-major, width*height
    std::vector<double> ky;

    ILGrid() = default;
    ILGrid(int w, int h)
        : width(w), height(h), kx(static_cast<size_t>(w) * h, 0.0), ky(static_cast<size_t>(w) * h, 0.0) {}

    double kx_at(int x, int y) const { return kx[static_cast<size_t>(y) * width + x]; }
    double ky_at(int x, int y) const { return ky[static_cast<size_t>(y) * width + x]; }
};

// Crop rectangle in source pixels plus the output size it is resampled to.
// Valid when the rect is inside the source frame and both resize factors
// out/crop lie in [1.0, 2.5].
struct CropResizeParams {
    int x0{0};
    int y0{0};
    int w{0};
    int h{0};
    int out_w{0};
    int out_h{0};

    double scale_x() const { return static_cast<double>(out_w) / w; }
    double scale_y() const { return static_cast<double>(out_h) / h; }

    // Throws InvalidCrop when the rect exits the source bounds or a factor is
    // outside [1.0, 2.5].
    void validate(int src_width, int src_height) const;
};

ILGrid make_il(const CameraIntrinsics& k);

// Crops and resizes flow, mask and IL (bilinear for the continuous channels,
// nearest for the mask), scales the flow by the resize factors, and rewrites
// the sample's intrinsics to the effective camera the crop simulates.
std::pair<Sample, ILGrid> rcr(const Sample& sample, const ILGrid& il, const CropResizeParams& params);

// Draws crop parameters whose effective horizontal FoV lies in
// fov_range_deg. Aspect ratio is preserved (one scale serves both axes, so a
// single FoV target pins the crop size) and the crop position is uniform over
// the feasible area. Output size equals the source size.
CropResizeParams sample_rcr_params(const CameraIntrinsics& k, std::uint64_t seed,
                                   std::pair<double, double> fov_range_deg);

}  // namespace flowpose
