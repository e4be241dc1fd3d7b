#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "flowpose/geometry.hpp"

namespace flowpose {

// Shape of the motion regressor: a stack of 3x3 stride-2 convolutions with
// ReLU, flattened into two fully connected heads (translation and rotation).
struct PoseNetConfig {
    int input_width = 64;
    int input_height = 48;
    int input_channels = 2;  // flow u,v; 4 adds the two intrinsics channels
    std::vector<int> stage_channels = {8, 16, 32, 64, 64};
    std::vector<int> head_widths = {128, 32};
    double input_scale = 0.125;  // premultiplier for the flow channels
    std::uint64_t seed = 0;

    void validate() const;
};

class PoseNet {
   public:
    explicit PoseNet(const PoseNetConfig& config);

    const PoseNetConfig& config() const { return config_; }
    size_t parameter_count() const { return params_.size(); }
    std::span<double> parameters() { return params_; }
    std::span<const double> parameters() const { return params_; }

    // Activation and scratch buffers reused across calls; sized on first use.
    struct Workspace {
        std::vector<std::vector<double>> acts;  // [0]=scaled input, then per-stage outputs
        std::vector<double> t_h1, t_h2, r_h1, r_h2;
        Vec3 t_out = Vec3::Zero();
        Vec3 r_out = Vec3::Zero();
        std::vector<std::vector<double>> d_acts;
        std::vector<double> t_dh1, t_dh2, r_dh1, r_dh2;
        bool filled = false;  // true once forward has populated the buffers
    };

    // input holds channel-planar row-major values, input_channels*H*W of
    // them: the flow u plane, the flow v plane, then (4-channel nets) the
    // two intrinsics planes. Returns the raw head outputs.
    RelativeMotion forward(std::span<const double> input, Workspace& ws) const;

    // Chain-rules d_translation/d_rotation back through the workspace left by
    // forward, accumulating (+=) into grad, which must have parameter_count()
    // entries.
    void backward(Workspace& ws, const Vec3& d_translation, const Vec3& d_rotation,
                  std::span<double> grad) const;

    // Wraps the rotation into the |r| < pi chart used everywhere else, e.g. a
    // 1.5*pi turn about an axis becomes -0.5*pi about it. Non-finite raw
    // outputs are rejected.
    static RelativeMotion canonicalize(const RelativeMotion& raw);

    // Flattened output size of the convolutional stack.
    int flat_size() const { return flat_size_; }

   private:
    struct ConvLayer {
        int in_ch, out_ch;
        int in_w, in_h, out_w, out_h;
        size_t w_off, b_off;
    };
    struct DenseLayer {
        int in_dim, out_dim;
        size_t w_off, b_off;
    };

    void ensure_workspace(Workspace& ws) const;
    void conv_forward(const ConvLayer& layer, const std::vector<double>& in,
                      std::vector<double>& out) const;
    void conv_backward(const ConvLayer& layer, const std::vector<double>& in,
                       const std::vector<double>& out, std::vector<double>& d_out,
                       std::vector<double>* d_in, std::span<double> grad) const;
    Vec3 head_forward(const DenseLayer* layers, std::span<const double> flat,
                      std::vector<double>& h1, std::vector<double>& h2) const;
    void head_backward(const DenseLayer* layers, std::span<const double> flat,
                       const std::vector<double>& h1, const std::vector<double>& h2,
                       const Vec3& d_out, std::vector<double>& dh1, std::vector<double>& dh2,
                       std::vector<double>& d_flat, std::span<double> grad) const;

    PoseNetConfig config_;
    std::vector<ConvLayer> conv_;
    DenseLayer t_head_[3];
    DenseLayer r_head_[3];
    int flat_size_ = 0;
    std::vector<double> params_;
};

// Serialized network: magic, config echo, step counter, then the parameter
// vector verbatim.
void save_checkpoint(const std::filesystem::path& path, const PoseNet& net, std::int64_t step);

struct Checkpoint {
    PoseNet net;
    std::int64_t step = 0;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace flowpose
