#include "flowpose/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "flowpose/errors.hpp"
#include "flowpose/io.hpp"
#include "flowpose/util.hpp"

namespace flowpose {

void PoseNetConfig::validate() const {
    if (input_width < 4 || input_height < 4) {
        throw Error("input grid must be at least 4x4, got " + std::to_string(input_width) + "x" +
                    std::to_string(input_height));
    }
    if (input_channels != 2 && input_channels != 4) {
        throw Error("input_channels must be 2 (flow) or 4 (flow + intrinsics), got " +
                    std::to_string(input_channels));
    }
    if (stage_channels.empty()) throw Error("need at least one convolution stage");
    for (int c : stage_channels) {
        if (c < 1) throw Error("stage channel counts must be positive");
    }
    if (head_widths.size() != 2 || head_widths[0] < 1 || head_widths[1] < 1) {
        throw Error("heads use exactly two positive hidden widths");
    }
    if (!(input_scale > 0.0) || !std::isfinite(input_scale)) {
        throw Error("input_scale must be positive and finite");
    }
}

PoseNet::PoseNet(const PoseNetConfig& config) : config_(config) {
    config_.validate();

    size_t off = 0;
    int w = config_.input_width;
    int h = config_.input_height;
    int c = config_.input_channels;
    for (int out_c : config_.stage_channels) {
        ConvLayer layer;
        layer.in_ch = c;
        layer.out_ch = out_c;
        layer.in_w = w;
        layer.in_h = h;
        layer.out_w = (w + 1) / 2;
        layer.out_h = (h + 1) / 2;
        layer.w_off = off;
        off += static_cast<size_t>(out_c) * c * 9;
        layer.b_off = off;
        off += static_cast<size_t>(out_c);
        conv_.push_back(layer);
        w = layer.out_w;
        h = layer.out_h;
        c = out_c;
    }
    flat_size_ = c * w * h;

    const int dims[4] = {flat_size_, config_.head_widths[0], config_.head_widths[1], 3};
    for (DenseLayer* head : {t_head_, r_head_}) {
        for (int i = 0; i < 3; ++i) {
            head[i].in_dim = dims[i];
            head[i].out_dim = dims[i + 1];
            head[i].w_off = off;
            off += static_cast<size_t>(head[i].out_dim) * head[i].in_dim;
            head[i].b_off = off;
            off += static_cast<size_t>(head[i].out_dim);
        }
    }

    params_.assign(off, 0.0);

    // Uniform fan-in init for everything except the final layer of each
    // head, which starts at zero so the untrained net predicts zero motion.
    // The bound sqrt(6/fan_in) keeps the signal variance roughly constant
    // through the ReLU stack; smaller scales starve the heads of
    // input-dependent gradient and training collapses to bias fitting.
    auto rng = make_rng(derive_seed(config_.seed, rng_stream::kModelInit));
    for (const ConvLayer& layer : conv_) {
        const double bound = std::sqrt(6.0 / (static_cast<double>(layer.in_ch) * 9.0));
        std::uniform_real_distribution<double> dist(-bound, bound);
        const size_t count = static_cast<size_t>(layer.out_ch) * layer.in_ch * 9;
        for (size_t i = 0; i < count; ++i) params_[layer.w_off + i] = dist(rng);
    }
    for (const DenseLayer* head : {t_head_, r_head_}) {
        for (int i = 0; i < 2; ++i) {
            const double bound = std::sqrt(6.0 / static_cast<double>(head[i].in_dim));
            std::uniform_real_distribution<double> dist(-bound, bound);
            const size_t count = static_cast<size_t>(head[i].out_dim) * head[i].in_dim;
            for (size_t j = 0; j < count; ++j) params_[head[i].w_off + j] = dist(rng);
        }
    }
}

void PoseNet::ensure_workspace(Workspace& ws) const {
    const size_t stages = conv_.size();
    if (ws.acts.size() != stages + 1) {
        ws.acts.assign(stages + 1, {});
        ws.d_acts.assign(stages + 1, {});
    }
    const size_t in_size = static_cast<size_t>(config_.input_channels) * config_.input_width *
                           config_.input_height;
    ws.acts[0].resize(in_size);
    ws.d_acts[0].resize(in_size);
    for (size_t s = 0; s < stages; ++s) {
        const size_t out_size =
            static_cast<size_t>(conv_[s].out_ch) * conv_[s].out_w * conv_[s].out_h;
        ws.acts[s + 1].resize(out_size);
        ws.d_acts[s + 1].resize(out_size);
    }
    ws.t_h1.resize(static_cast<size_t>(config_.head_widths[0]));
    ws.t_h2.resize(static_cast<size_t>(config_.head_widths[1]));
    ws.r_h1.resize(static_cast<size_t>(config_.head_widths[0]));
    ws.r_h2.resize(static_cast<size_t>(config_.head_widths[1]));
    ws.t_dh1.resize(ws.t_h1.size());
    ws.t_dh2.resize(ws.t_h2.size());
    ws.r_dh1.resize(ws.r_h1.size());
    ws.r_dh2.resize(ws.r_h2.size());
}

void PoseNet::conv_forward(const ConvLayer& layer, const std::vector<double>& in,
                           std::vector<double>& out) const {
    const double* w_all = params_.data() + layer.w_off;
    const double* bias = params_.data() + layer.b_off;
    const int in_hw = layer.in_w * layer.in_h;
    const int out_hw = layer.out_w * layer.out_h;

    for (int oc = 0; oc < layer.out_ch; ++oc) {
        double* o = out.data() + static_cast<size_t>(oc) * out_hw;
        std::fill(o, o + out_hw, bias[oc]);
        for (int ic = 0; ic < layer.in_ch; ++ic) {
            const double* a = in.data() + static_cast<size_t>(ic) * in_hw;
            const double* w = w_all + (static_cast<size_t>(oc) * layer.in_ch + ic) * 9;
            for (int ky = 0; ky < 3; ++ky) {
                // Output row oy reads input row 2*oy - 1 + ky (stride 2,
                // padding 1); rows outside the input contribute nothing.
                const int oy_lo = (ky == 0) ? 1 : 0;
                const int oy_hi =
                    std::min(layer.out_h - 1, layer.in_h >= ky ? (layer.in_h - ky) / 2 : -1);
                for (int kx = 0; kx < 3; ++kx) {
                    const double wv = w[ky * 3 + kx];
                    const int ox_lo = (kx == 0) ? 1 : 0;
                    const int ox_hi =
                        std::min(layer.out_w - 1, layer.in_w >= kx ? (layer.in_w - kx) / 2 : -1);
                    for (int oy = oy_lo; oy <= oy_hi; ++oy) {
                        const double* arow = a + (2 * oy - 1 + ky) * layer.in_w + kx - 1;
                        double* orow = o + oy * layer.out_w;
                        for (int ox = ox_lo; ox <= ox_hi; ++ox) {
                            orow[ox] += wv * arow[2 * ox];
                        }
                    }
                }
            }
        }
        for (int i = 0; i < out_hw; ++i) {
            if (o[i] < 0.0) o[i] = 0.0;
        }
    }
}

void PoseNet::conv_backward(const ConvLayer& layer, const std::vector<double>& in,
                            const std::vector<double>& out, std::vector<double>& d_out,
                            std::vector<double>* d_in, std::span<double> grad) const {
    const double* w_all = params_.data() + layer.w_off;
    const int in_hw = layer.in_w * layer.in_h;
    const int out_hw = layer.out_w * layer.out_h;

    // The stored activations are post-ReLU, so the pre-activation gradient is
    // the upstream gradient gated by activation > 0.
    for (size_t i = 0; i < d_out.size(); ++i) {
        if (out[i] <= 0.0) d_out[i] = 0.0;
    }

    for (int oc = 0; oc < layer.out_ch; ++oc) {
        const double* dz = d_out.data() + static_cast<size_t>(oc) * out_hw;
        double db = 0.0;
        for (int i = 0; i < out_hw; ++i) db += dz[i];
        grad[layer.b_off + static_cast<size_t>(oc)] += db;

        for (int ic = 0; ic < layer.in_ch; ++ic) {
            const double* a = in.data() + static_cast<size_t>(ic) * in_hw;
            const size_t w_base = layer.w_off + (static_cast<size_t>(oc) * layer.in_ch + ic) * 9;
            const double* w = w_all + (static_cast<size_t>(oc) * layer.in_ch + ic) * 9;
            double* da = (d_in != nullptr) ? d_in->data() + static_cast<size_t>(ic) * in_hw
                                           : nullptr;
            for (int ky = 0; ky < 3; ++ky) {
                const int oy_lo = (ky == 0) ? 1 : 0;
                const int oy_hi =
                    std::min(layer.out_h - 1, layer.in_h >= ky ? (layer.in_h - ky) / 2 : -1);
                for (int kx = 0; kx < 3; ++kx) {
                    const int ox_lo = (kx == 0) ? 1 : 0;
                    const int ox_hi =
                        std::min(layer.out_w - 1, layer.in_w >= kx ? (layer.in_w - kx) / 2 : -1);
                    const double wv = w[ky * 3 + kx];
                    double dw = 0.0;
                    for (int oy = oy_lo; oy <= oy_hi; ++oy) {
                        const double* arow = a + (2 * oy - 1 + ky) * layer.in_w + kx - 1;
                        const double* dzrow = dz + oy * layer.out_w;
                        if (da != nullptr) {
                            double* darow = da + (2 * oy - 1 + ky) * layer.in_w + kx - 1;
                            for (int ox = ox_lo; ox <= ox_hi; ++ox) {
                                dw += dzrow[ox] * arow[2 * ox];
                                darow[2 * ox] += wv * dzrow[ox];
                            }
                        } else {
                            for (int ox = ox_lo; ox <= ox_hi; ++ox) {
                                dw += dzrow[ox] * arow[2 * ox];
                            }
                        }
                    }
                    grad[w_base + static_cast<size_t>(ky * 3 + kx)] += dw;
                }
            }
        }
    }
}

namespace {

void dense_forward(const double* params, size_t w_off, size_t b_off, int in_dim, int out_dim,
                   const double* in, double* out, bool relu) {
    for (int j = 0; j < out_dim; ++j) {
        const double* w = params + w_off + static_cast<size_t>(j) * in_dim;
        double acc = params[b_off + static_cast<size_t>(j)];
        for (int i = 0; i < in_dim; ++i) acc += w[i] * in[i];
        out[j] = (relu && acc < 0.0) ? 0.0 : acc;
    }
}

}  // namespace

Vec3 PoseNet::head_forward(const DenseLayer* layers, std::span<const double> flat,
                           std::vector<double>& h1, std::vector<double>& h2) const {
    dense_forward(params_.data(), layers[0].w_off, layers[0].b_off, layers[0].in_dim,
                  layers[0].out_dim, flat.data(), h1.data(), true);
    dense_forward(params_.data(), layers[1].w_off, layers[1].b_off, layers[1].in_dim,
                  layers[1].out_dim, h1.data(), h2.data(), true);
    Vec3 out;
    dense_forward(params_.data(), layers[2].w_off, layers[2].b_off, layers[2].in_dim,
                  layers[2].out_dim, h2.data(), out.data(), false);
    return out;
}

void PoseNet::head_backward(const DenseLayer* layers, std::span<const double> flat,
                            const std::vector<double>& h1, const std::vector<double>& h2,
                            const Vec3& d_out, std::vector<double>& dh1, std::vector<double>& dh2,
                            std::vector<double>& d_flat, std::span<double> grad) const {
    // Output layer (linear).
    std::fill(dh2.begin(), dh2.end(), 0.0);
    for (int j = 0; j < 3; ++j) {
        const double g = d_out(j);
        const size_t w_row = layers[2].w_off + static_cast<size_t>(j) * layers[2].in_dim;
        grad[layers[2].b_off + static_cast<size_t>(j)] += g;
        for (int i = 0; i < layers[2].in_dim; ++i) {
            grad[w_row + static_cast<size_t>(i)] += g * h2[static_cast<size_t>(i)];
            dh2[static_cast<size_t>(i)] += params_[w_row + static_cast<size_t>(i)] * g;
        }
    }
    // Hidden layer 2.
    std::fill(dh1.begin(), dh1.end(), 0.0);
    for (int j = 0; j < layers[1].out_dim; ++j) {
        if (h2[static_cast<size_t>(j)] <= 0.0) continue;
        const double g = dh2[static_cast<size_t>(j)];
        const size_t w_row = layers[1].w_off + static_cast<size_t>(j) * layers[1].in_dim;
        grad[layers[1].b_off + static_cast<size_t>(j)] += g;
        for (int i = 0; i < layers[1].in_dim; ++i) {
            grad[w_row + static_cast<size_t>(i)] += g * h1[static_cast<size_t>(i)];
            dh1[static_cast<size_t>(i)] += params_[w_row + static_cast<size_t>(i)] * g;
        }
    }
    // Hidden layer 1; input gradient accumulates because both heads share it.
    for (int j = 0; j < layers[0].out_dim; ++j) {
        if (h1[static_cast<size_t>(j)] <= 0.0) continue;
        const double g = dh1[static_cast<size_t>(j)];
        const size_t w_row = layers[0].w_off + static_cast<size_t>(j) * layers[0].in_dim;
        grad[layers[0].b_off + static_cast<size_t>(j)] += g;
        for (int i = 0; i < layers[0].in_dim; ++i) {
            grad[w_row + static_cast<size_t>(i)] += g * flat[static_cast<size_t>(i)];
            d_flat[static_cast<size_t>(i)] += params_[w_row + static_cast<size_t>(i)] * g;
        }
    }
}

RelativeMotion PoseNet::forward(std::span<const double> input, Workspace& ws) const {
    const size_t expected = static_cast<size_t>(config_.input_channels) * config_.input_width *
                            config_.input_height;
    if (input.size() != expected) {
        throw ShapeMismatch("network input has " + std::to_string(input.size()) +
                            " values, expected " + std::to_string(expected));
    }
    ensure_workspace(ws);

    const size_t plane = static_cast<size_t>(config_.input_width) * config_.input_height;
    std::vector<double>& in0 = ws.acts[0];
    for (size_t i = 0; i < expected; ++i) {
        in0[i] = (i < 2 * plane) ? input[i] * config_.input_scale : input[i];
    }

    for (size_t s = 0; s < conv_.size(); ++s) {
        conv_forward(conv_[s], ws.acts[s], ws.acts[s + 1]);
    }
    const std::vector<double>& flat = ws.acts.back();
    ws.t_out = head_forward(t_head_, flat, ws.t_h1, ws.t_h2);
    ws.r_out = head_forward(r_head_, flat, ws.r_h1, ws.r_h2);
    ws.filled = true;

    RelativeMotion motion;
    motion.translation = ws.t_out;
    motion.rotation = ws.r_out;
    return motion;
}

void PoseNet::backward(Workspace& ws, const Vec3& d_translation, const Vec3& d_rotation,
                       std::span<double> grad) const {
    if (!ws.filled) throw Error("backward called before forward");
    if (grad.size() != params_.size()) {
        throw ShapeMismatch("gradient buffer has " + std::to_string(grad.size()) +
                            " entries, expected " + std::to_string(params_.size()));
    }

    std::vector<double>& d_flat = ws.d_acts.back();
    std::fill(d_flat.begin(), d_flat.end(), 0.0);
    head_backward(t_head_, ws.acts.back(), ws.t_h1, ws.t_h2, d_translation, ws.t_dh1, ws.t_dh2,
                  d_flat, grad);
    head_backward(r_head_, ws.acts.back(), ws.r_h1, ws.r_h2, d_rotation, ws.r_dh1, ws.r_dh2,
                  d_flat, grad);

    for (size_t s = conv_.size(); s-- > 0;) {
        std::vector<double>* d_in = (s > 0) ? &ws.d_acts[s] : nullptr;
        if (d_in != nullptr) std::fill(d_in->begin(), d_in->end(), 0.0);
        conv_backward(conv_[s], ws.acts[s], ws.acts[s + 1], ws.d_acts[s + 1], d_in, grad);
    }
}

RelativeMotion PoseNet::canonicalize(const RelativeMotion& raw) {
    if (!raw.translation.allFinite() || !raw.rotation.allFinite()) {
        throw NonFinite("network produced a non-finite motion");
    }
    constexpr double kPi = std::numbers::pi;
    const double theta = raw.rotation.norm();
    if (theta < kPi) return raw;
    const Vec3 axis = raw.rotation / theta;
    double wrapped = std::fmod(theta, 2.0 * kPi);  // [0, 2*pi)
    if (wrapped > kPi) wrapped -= 2.0 * kPi;       // (-pi, pi]
    // An exact half-turn has no preferred sign; nudge it inside the chart.
    if (wrapped == kPi) wrapped = std::nextafter(kPi, 0.0);
    RelativeMotion out;
    out.translation = raw.translation;
    out.rotation = axis * wrapped;
    return out;
}

// --- checkpoints ---------------------------------------------------------------

namespace {

std::string join_ints(const std::vector<int>& values) {
    std::string out;
    for (size_t i = 0; i < values.size(); ++i) {
        if (i > 0) out += ",";
        out += std::to_string(values[i]);
    }
    return out;
}

std::vector<int> parse_int_list(const std::string& text, const std::string& where) {
    std::vector<int> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            size_t used = 0;
            const int value = std::stoi(item, &used);
            if (used != item.size()) throw std::invalid_argument(item);
            out.push_back(value);
        } catch (const std::exception&) {
            throw ParseError(where + ": '" + item + "' is not an integer");
        }
    }
    if (out.empty()) throw ParseError(where + ": empty integer list");
    return out;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const PoseNet& net, std::int64_t step) {
    ConfigMap header;
    const PoseNetConfig& cfg = net.config();
    header.set_int("input_width", cfg.input_width);
    header.set_int("input_height", cfg.input_height);
    header.set_int("input_channels", cfg.input_channels);
    header.set("stage_channels", join_ints(cfg.stage_channels));
    header.set("head_widths", join_ints(cfg.head_widths));
    header.set_double("input_scale", cfg.input_scale);
    header.set_u64("seed", cfg.seed);
    header.set_int("step", step);
    const std::string text = header.serialize();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + path.string());
    out.write("PNET", 4);
    bin::put_u32(out, static_cast<std::uint32_t>(text.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    bin::put_u64(out, net.parameter_count());
    for (double value : net.parameters()) bin::put_f64(out, value);
    out.flush();
    if (!out) throw IoError("write failure on " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    bin::check_magic(in, "PNET", path);
    const std::uint32_t header_len = bin::take_u32(in, path);
    if (header_len > 65536) throw ParseError(path.string() + ": implausible header length");
    std::string text(header_len, '\0');
    in.read(text.data(), header_len);
    if (!in) throw IoError("unexpected end of file in " + path.string());

    ConfigMap header = ConfigMap::parse_string(text, path.string() + " (header)");
    PoseNetConfig cfg;
    cfg.input_width = static_cast<int>(header.require_int("input_width"));
    cfg.input_height = static_cast<int>(header.require_int("input_height"));
    cfg.input_channels = static_cast<int>(header.require_int("input_channels"));
    cfg.stage_channels =
        parse_int_list(header.require_string("stage_channels"), path.string() + " stage_channels");
    cfg.head_widths =
        parse_int_list(header.require_string("head_widths"), path.string() + " head_widths");
    cfg.input_scale = header.require_double("input_scale");
    cfg.seed = header.get_u64("seed", 0);
    const std::int64_t step = header.require_int("step");
    header.reject_unknown();

    Checkpoint ckpt{PoseNet(cfg), step};
    const std::uint64_t count = bin::take_u64(in, path);
    if (count != ckpt.net.parameter_count()) {
        throw MismatchError(path.string() + ": stores " + std::to_string(count) +
                            " parameters but the described network has " +
                            std::to_string(ckpt.net.parameter_count()));
    }
    for (double& value : ckpt.net.parameters()) value = bin::take_f64(in, path);
    bin::check_trailing(in, path);
    return ckpt;
}

}  // namespace flowpose
