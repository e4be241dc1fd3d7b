#pragma once

#include <cstdint>
#include <vector>

#include "flowpose/errors.hpp"

namespace flowpose {

// Dense 2-channel per-pixel displacement grid, pixels. Row-major, the two
// channels of each pixel interleaved (u then v).
struct FlowField {
    int width{0};
    int height{0};
    std::vector<double> data;

    FlowField() = default;
    FlowField(int w, int h) : width(w), height(h), data(static_cast<size_t>(w) * h * 2, 0.0) {}

    double& u(int x, int y) { return data[(static_cast<size_t>(y) * width + x) * 2]; }
    double& v(int x, int y) { return data[(static_cast<size_t>(y) * width + x) * 2 + 1]; }
    double u(int x, int y) const { return data[(static_cast<size_t>(y) * width + x) * 2]; }
    double v(int x, int y) const { return data[(static_cast<size_t>(y) * width + x) * 2 + 1]; }

    size_t pixel_count() const { return static_cast<size_t>(width) * height; }
};

// Per-pixel validity, row-major; nonzero means valid.
struct PixelMask {
    int width{0};
    int height{0};
    std::vector<std::uint8_t> data;

    PixelMask() = default;
    PixelMask(int w, int h, bool value = true)
        : width(w), height(h), data(static_cast<size_t>(w) * h, value ? 1 : 0) {}

    bool at(int x, int y) const { return data[static_cast<size_t>(y) * width + x] != 0; }
    void set(int x, int y, bool value) { data[static_cast<size_t>(y) * width + x] = value ? 1 : 0; }

    size_t count_valid() const {
        size_t n = 0;
        for (auto b : data) n += (b != 0);
        return n;
    }
};

// Per-pixel positive depth, row-major, scene units.
struct DepthGrid {
    int width{0};
    int height{0};
    std::vector<double> data;

    DepthGrid() = default;
    DepthGrid(int w, int h) : width(w), height(h), data(static_cast<size_t>(w) * h, 0.0) {}

    double& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
    double at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }
};

inline void require_same_shape(int wa, int ha, int wb, int hb, const char* what) {
    if (wa != wb || ha != hb) {
        throw ShapeMismatch(std::string(what) + ": " + std::to_string(wa) + "x" + std::to_string(ha) +
                            " vs " + std::to_string(wb) + "x" + std::to_string(hb));
    }
}

}  // namespace flowpose
