#include "flowpose/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <random>
#include <set>
#include <sstream>

#include "flowpose/augment.hpp"
#include "flowpose/errors.hpp"
#include "flowpose/io.hpp"
#include "flowpose/util.hpp"

namespace flowpose {

void TrainConfig::validate() const {
    if (iterations < 0) throw Error("TrainConfig: iterations must be >= 0");
    if (batch_size < 1) throw Error("TrainConfig: batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw Error("TrainConfig: learning rate must be positive");
    if (!(decay_factor > 0.0) || decay_factor > 1.0) {
        throw Error("TrainConfig: decay factor must lie in (0, 1]");
    }
    double prev = 0.0;
    for (double m : decay_milestones) {
        if (!(m > prev) || m > 1.0) {
            throw Error("TrainConfig: decay milestones must be strictly increasing in (0, 1]");
        }
        prev = m;
    }
    if (lambda < 0.0) throw Error("TrainConfig: lambda must be >= 0");
    if (grad_clip < 0.0) throw Error("TrainConfig: grad_clip must be >= 0");
    if (eval_interval < 1) throw Error("TrainConfig: eval_interval must be >= 1");
    if (eval_cap < 1) throw Error("TrainConfig: eval_cap must be >= 1");
}

double learning_rate_at(const TrainConfig& cfg, int step) {
    double lr = cfg.learning_rate;
    for (double m : cfg.decay_milestones) {
        if (static_cast<double>(step) >= m * static_cast<double>(cfg.iterations)) {
            lr *= cfg.decay_factor;
        }
    }
    return lr;
}

// --- sample sources ---------------------------------------------------------

SyntheticSourceSpec::SyntheticSourceSpec() : camera(default_camera()) {}

namespace {

struct SourceEntry {
    Sample sample;
    FlowField clean;  // pre-noise flow; meaningful only when noise is active
};

}  // namespace

SampleSource make_synthetic_source(const SyntheticSourceSpec& spec) {
    spec.scene.validate();
    spec.camera.validate();
    spec.noise.validate();
    if (spec.count == 0) throw Error("synthetic source needs at least one sample");
    if (spec.environments.empty()) throw Error("synthetic source needs at least one environment");

    const bool noisy = spec.noise.sigma > 0.0 || spec.noise.dropout > 0.0;

    auto produce = [spec, noisy](size_t index) {
        if (index >= spec.count) {
            throw Error("sample index " + std::to_string(index) + " outside source of " +
                        std::to_string(spec.count));
        }
        SceneConfig scene = spec.scene;
        scene.environment_id = spec.environments[index % spec.environments.size()];
        const auto per_env = static_cast<std::uint64_t>(index / spec.environments.size());

        SourceEntry entry;
        entry.sample = generate_sample(scene, per_env, spec.pattern, spec.camera);
        if (spec.bake_rcr) {
            const CropResizeParams params = sample_rcr_params(
                entry.sample.intrinsics,
                derive_seed(spec.rcr_seed, rng_stream::kEvalCrop, index), spec.rcr_fov_deg);
            entry.sample =
                rcr(entry.sample, make_il(entry.sample.intrinsics), params).first;
        }
        if (noisy) {
            entry.clean = entry.sample.flow;
            entry.sample.flow =
                corrupt_flow(entry.sample.flow, spec.noise,
                             derive_seed(spec.noise_seed, rng_stream::kFlowNoise, index));
        }
        return entry;
    };

    auto cache = std::make_shared<std::vector<std::unique_ptr<SourceEntry>>>(
        std::min(spec.count, spec.cache_limit));
    auto fetch = [cache, produce](size_t index) -> SourceEntry {
        if (index < cache->size()) {
            auto& slot = (*cache)[index];
            if (!slot) slot = std::make_unique<SourceEntry>(produce(index));
            return *slot;
        }
        return produce(index);
    };

    SampleSource source;
    source.name = spec.name;
    source.count = spec.count;
    source.get = [fetch](size_t index) { return fetch(index).sample; };
    if (noisy) {
        source.reference_flow = [fetch](size_t index) { return fetch(index).clean; };
    }
    return source;
}

SampleSource make_memory_source(std::vector<Sample> samples, std::string name) {
    if (samples.empty()) throw Error("memory source needs at least one sample");
    auto storage = std::make_shared<std::vector<Sample>>(std::move(samples));
    SampleSource source;
    source.name = std::move(name);
    source.count = storage->size();
    source.get = [storage](size_t index) { return storage->at(index); };
    return source;
}

SampleSource prefix_source(const SampleSource& source, size_t n, std::string name) {
    if (n == 0) throw Error("prefix source must keep at least one sample");
    if (n > source.count) {
        throw Error("prefix of " + std::to_string(n) + " samples from a source of " +
                    std::to_string(source.count));
    }
    SampleSource out = source;
    out.name = std::move(name);
    out.count = n;
    return out;
}

// --- evaluation ----------------------------------------------------------------

void assemble_input(const Sample& sample, bool with_il, std::vector<double>& out) {
    const int w = sample.flow.width;
    const int h = sample.flow.height;
    require_same_shape(w, h, sample.intrinsics.width, sample.intrinsics.height, "assemble_input");
    const size_t plane = static_cast<size_t>(w) * h;
    out.resize(plane * (with_il ? 4 : 2));
    for (size_t p = 0; p < plane; ++p) {
        out[p] = sample.flow.data[2 * p];
        out[plane + p] = sample.flow.data[2 * p + 1];
    }
    if (with_il) {
        const ILGrid il = make_il(sample.intrinsics);
        std::copy(il.kx.begin(), il.kx.end(), out.begin() + static_cast<long>(2 * plane));
        std::copy(il.ky.begin(), il.ky.end(), out.begin() + static_cast<long>(3 * plane));
    }
}

namespace {

// Loss of one prediction, with rotation-chart escapes reported as divergence
// rather than contract violations: a training run that walked out of the
// chart has diverged in every sense that matters to callers.
TotalLossResult guarded_loss(const FlowField* flow_pred, const FlowField* flow_label,
                             const PixelMask* mask, const RelativeMotion& pred,
                             const RelativeMotion& label, double lambda, LossVariant variant) {
    try {
        return total_loss(flow_pred, flow_label, mask, pred, label, lambda, variant);
    } catch (const NonCanonicalRotation& e) {
        throw Diverged(std::string("prediction left the rotation chart: ") + e.what());
    } catch (const NonFinite& e) {
        throw Diverged(std::string("prediction became non-finite: ") + e.what());
    }
}

void add_loss(LossValue& acc, const LossValue& v) {
    acc.total += v.total;
    acc.translation_term += v.translation_term;
    acc.rotation_term += v.rotation_term;
    acc.flow_term += v.flow_term;
}

void scale_loss(LossValue& acc, double factor) {
    acc.total *= factor;
    acc.translation_term *= factor;
    acc.rotation_term *= factor;
    acc.flow_term *= factor;
}

bool loss_finite(const LossValue& v) {
    return std::isfinite(v.total) && std::isfinite(v.translation_term) &&
           std::isfinite(v.rotation_term) && std::isfinite(v.flow_term);
}

// Materializes the first min(count, cap) samples of a source, optionally
// applying one fixed crop per index, so repeated curve records see frozen
// data without regenerating it.
SampleSource freeze_view(const SampleSource& source, size_t cap, bool crop,
                         std::pair<double, double> fov_deg, std::uint64_t crop_seed) {
    const size_t n = std::min(source.count, cap);
    auto samples = std::make_shared<std::vector<Sample>>();
    samples->reserve(n);
    const bool has_ref = static_cast<bool>(source.reference_flow);
    auto refs = std::make_shared<std::vector<FlowField>>();

    for (size_t i = 0; i < n; ++i) {
        Sample sample = source.get(i);
        FlowField ref;
        if (has_ref) ref = source.reference_flow(i);
        if (crop) {
            const CropResizeParams params = sample_rcr_params(
                sample.intrinsics, derive_seed(crop_seed, rng_stream::kEvalCrop, i), fov_deg);
            const ILGrid il = make_il(sample.intrinsics);
            if (has_ref) {
                Sample carrier = sample;
                carrier.flow = std::move(ref);
                ref = rcr(carrier, il, params).first.flow;
            }
            sample = rcr(sample, il, params).first;
        }
        samples->push_back(std::move(sample));
        if (has_ref) refs->push_back(std::move(ref));
    }

    SampleSource out;
    out.name = source.name;
    out.count = n;
    out.get = [samples](size_t i) { return samples->at(i); };
    if (has_ref) {
        out.reference_flow = [refs](size_t i) { return refs->at(i); };
    }
    return out;
}

}  // namespace

LossValue evaluate(const PoseNet& net, const SampleSource& source, const TrainConfig& cfg,
                   size_t cap) {
    const size_t n = std::min(source.count, cap);
    if (n == 0 || !source.get) throw Error("evaluate: empty source");
    const bool with_il = net.config().input_channels == 4;
    const bool with_flow_term = static_cast<bool>(source.reference_flow) && cfg.lambda > 0.0;

    PoseNet::Workspace ws;
    std::vector<double> input;
    LossValue mean;
    for (size_t i = 0; i < n; ++i) {
        const Sample sample = source.get(i);
        FlowField ref;
        if (with_flow_term) ref = source.reference_flow(i);
        assemble_input(sample, with_il, input);
        const RelativeMotion pred = net.forward(input, ws);
        const TotalLossResult r = guarded_loss(
            with_flow_term ? &sample.flow : nullptr, with_flow_term ? &ref : nullptr,
            with_flow_term ? &sample.valid_mask : nullptr, pred, sample.motion, cfg.lambda,
            cfg.variant);
        add_loss(mean, r.value);
    }
    scale_loss(mean, 1.0 / static_cast<double>(n));
    return mean;
}

// --- training loop ----------------------------------------------------------------

const LossCurvePoint& LossCurve::final_point() const {
    if (points.empty()) throw Error("loss curve has no records");
    return points.back();
}

TrainResult train(PoseNet& net, const SampleSource& train_set,
                  const std::vector<SampleSource>& test_sets, const TrainConfig& cfg,
                  int start_step, int stop_step) {
    cfg.validate();
    if (train_set.count == 0 || !train_set.get) throw Error("train: empty dataset");
    if (stop_step < 0) stop_step = cfg.iterations;
    if (start_step < 0 || start_step > cfg.iterations || stop_step > cfg.iterations ||
        stop_step < start_step) {
        throw Error("train: step window [" + std::to_string(start_step) + ", " +
                    std::to_string(stop_step) + ") outside a run of " +
                    std::to_string(cfg.iterations) + " iterations");
    }
    const int expected_channels = cfg.use_il ? 4 : 2;
    if (net.config().input_channels != expected_channels) {
        throw MismatchError("network takes " + std::to_string(net.config().input_channels) +
                            " channels but the configuration implies " +
                            std::to_string(expected_channels));
    }

    LossCurve curve;
    curve.train_name = train_set.name;
    for (const SampleSource& t : test_sets) curve.test_names.push_back(t.name);
    if (start_step == stop_step) return {curve};

    // Frozen splits for the periodic loss records. The training view gets the
    // same kind of crops the batches see, drawn once from a dedicated stream,
    // so successive records are comparable.
    const SampleSource train_view = freeze_view(train_set, static_cast<size_t>(cfg.eval_cap),
                                                cfg.use_rcr, cfg.rcr_fov_deg, cfg.seed);
    std::vector<SampleSource> test_views;
    test_views.reserve(test_sets.size());
    for (const SampleSource& t : test_sets) {
        test_views.push_back(
            freeze_view(t, static_cast<size_t>(cfg.eval_cap), false, cfg.rcr_fov_deg, 0));
    }

    PoseNet::Workspace ws;
    std::vector<double> grad(net.parameter_count(), 0.0);
    std::vector<double> input;
    const bool with_flow_term = static_cast<bool>(train_set.reference_flow) && cfg.lambda > 0.0;
    const double inv_batch = 1.0 / static_cast<double>(cfg.batch_size);

    for (int step = start_step; step < stop_step; ++step) {
        const double lr = learning_rate_at(cfg, step);
        auto batch_rng = make_rng(derive_seed(cfg.seed, rng_stream::kBatch,
                                              static_cast<std::uint64_t>(step)));
        std::uniform_int_distribution<size_t> pick(0, train_set.count - 1);

        std::fill(grad.begin(), grad.end(), 0.0);
        double batch_loss = 0.0;
        for (int b = 0; b < cfg.batch_size; ++b) {
            const size_t index = pick(batch_rng);
            Sample sample = train_set.get(index);
            FlowField ref;
            if (with_flow_term) ref = train_set.reference_flow(index);
            if (cfg.use_rcr) {
                const CropResizeParams params = sample_rcr_params(
                    sample.intrinsics,
                    derive_seed(cfg.seed, rng_stream::kBatchCrop, static_cast<std::uint64_t>(step),
                                static_cast<std::uint64_t>(b)),
                    cfg.rcr_fov_deg);
                const ILGrid il = make_il(sample.intrinsics);
                if (with_flow_term) {
                    Sample carrier = sample;
                    carrier.flow = std::move(ref);
                    ref = rcr(carrier, il, params).first.flow;
                }
                sample = rcr(sample, il, params).first;
            }
            assemble_input(sample, cfg.use_il, input);
            const RelativeMotion pred = net.forward(input, ws);
            const TotalLossResult r = guarded_loss(
                with_flow_term ? &sample.flow : nullptr, with_flow_term ? &ref : nullptr,
                with_flow_term ? &sample.valid_mask : nullptr, pred, sample.motion, cfg.lambda,
                cfg.variant);
            batch_loss += r.value.total;
            net.backward(ws, r.motion.d_translation * inv_batch, r.motion.d_rotation * inv_batch,
                         grad);
        }
        batch_loss *= inv_batch;
        if (!std::isfinite(batch_loss)) {
            throw Diverged("batch loss became non-finite at step " + std::to_string(step));
        }

        if (cfg.grad_clip > 0.0) {
            double sq = 0.0;
            for (double g : grad) sq += g * g;
            const double norm = std::sqrt(sq);
            if (norm > cfg.grad_clip) {
                const double rescale = cfg.grad_clip / norm;
                for (double& g : grad) g *= rescale;
            }
        }

        std::span<double> params = net.parameters();
        for (size_t i = 0; i < params.size(); ++i) params[i] -= lr * grad[i];

        const int done = step + 1;
        if (done % cfg.eval_interval == 0 || done == stop_step) {
            LossCurvePoint point;
            point.step = done;
            point.train = evaluate(net, train_view, cfg, train_view.count);
            bool finite = loss_finite(point.train);
            for (const SampleSource& view : test_views) {
                point.test.push_back(evaluate(net, view, cfg, view.count));
                finite = finite && loss_finite(point.test.back());
            }
            if (!finite) {
                throw Diverged("recorded loss became non-finite at step " + std::to_string(done));
            }
            curve.points.push_back(std::move(point));
        }
    }
    return {curve};
}

// --- experiments ----------------------------------------------------------------

ExperimentConfig::ExperimentConfig() : camera(default_camera()) {
    // The stock base rate is sized for long schedules; at the experiments'
    // 5k-step budget a hotter rate is needed to reach the regime where the
    // ablation orderings are measurable.
    train.learning_rate = 3e-3;
}

void ExperimentConfig::validate() const {
    train.validate();
    scene.validate();
    camera.validate();
    if (train_envs.empty() || test_envs.empty()) {
        throw Error("experiments need at least one training and one held-out environment");
    }
    const std::set<int> train_set(train_envs.begin(), train_envs.end());
    for (int env : test_envs) {
        if (train_set.count(env) != 0) {
            throw Error("held-out environment " + std::to_string(env) +
                        " also appears in the training environments");
        }
    }
    if (train_size == 0 || test_size == 0) throw Error("experiment split sizes must be positive");
    if (!(test_translation_range.first > 0) ||
        test_translation_range.second < test_translation_range.first) {
        throw Error("degenerate held-out translation range");
    }
}

namespace {

PoseNetConfig experiment_net_config(const ExperimentConfig& cfg, bool use_il) {
    PoseNetConfig nc;
    nc.input_width = cfg.camera.width;
    nc.input_height = cfg.camera.height;
    nc.input_channels = use_il ? 4 : 2;
    nc.seed = cfg.train.seed;
    return nc;
}

SyntheticSourceSpec experiment_source_spec(const ExperimentConfig& cfg,
                                           const std::vector<int>& envs, size_t count,
                                           std::string name) {
    SyntheticSourceSpec spec;
    spec.scene = cfg.scene;
    spec.camera = cfg.camera;
    spec.environments = envs;
    spec.count = count;
    spec.pattern = cfg.pattern;
    spec.name = std::move(name);
    // Experiments revisit every index many times over; keep the whole split
    // resident (a desk-scale split is ~1 GB at most).
    spec.cache_limit = count;
    return spec;
}

}  // namespace

DataQuantityResult experiment_data_quantity(const std::vector<size_t>& sizes,
                                            const ExperimentConfig& cfg) {
    cfg.validate();
    if (sizes.size() < 3) throw Error("data-quantity experiment needs at least 3 sizes");
    for (size_t i = 0; i < sizes.size(); ++i) {
        if (sizes[i] == 0) throw Error("training-set size 0 is not a training set");
        if (i > 0 && sizes[i] <= sizes[i - 1]) {
            throw Error("training-set sizes must be strictly increasing");
        }
    }

    const SampleSource pool =
        make_synthetic_source(experiment_source_spec(cfg, cfg.train_envs, sizes.back(), "train"));
    const SampleSource heldout =
        make_synthetic_source(experiment_source_spec(cfg, cfg.test_envs, cfg.test_size, "heldout"));

    DataQuantityResult result;
    result.sizes = sizes;
    for (size_t size : sizes) {
        const SampleSource subset = prefix_source(pool, size, "train");
        PoseNet net(experiment_net_config(cfg, cfg.train.use_il));
        TrainResult run = train(net, subset, {heldout}, cfg.train);
        const LossCurvePoint& last = run.curve.final_point();
        result.final_train.push_back(last.train.total);
        result.final_test.push_back(last.test.at(0).total);
        result.gap.push_back(last.test.at(0).total - last.train.total);
        result.curves.push_back(std::move(run.curve));
    }
    return result;
}

UpToScaleResult experiment_up_to_scale(const ExperimentConfig& cfg) {
    cfg.validate();
    const SampleSource train_src = make_synthetic_source(
        experiment_source_spec(cfg, cfg.train_envs, cfg.train_size, "train"));
    SyntheticSourceSpec heldout_spec =
        experiment_source_spec(cfg, cfg.test_envs, cfg.test_size, "heldout_shifted");
    // The held-out split draws translation magnitudes from a band the
    // training distribution never produces; a scale-memorizing model has to
    // get those magnitudes wrong.
    heldout_spec.scene.translation_range = cfg.test_translation_range;
    const SampleSource heldout = make_synthetic_source(heldout_spec);

    UpToScaleResult result;
    for (const LossVariant variant : {LossVariant::kFull, LossVariant::kNorm}) {
        TrainConfig tc = cfg.train;
        tc.variant = variant;
        PoseNet net(experiment_net_config(cfg, tc.use_il));
        TrainResult run = train(net, train_src, {heldout}, tc);
        const LossCurvePoint& last = run.curve.final_point();
        const double train_trans = last.train.translation_term;
        const double test_trans = last.test.at(0).translation_term;
        const double rot_gap = last.test.at(0).rotation_term - last.train.rotation_term;
        if (variant == LossVariant::kFull) {
            result.full_curve = std::move(run.curve);
            result.full_train_trans = train_trans;
            result.full_test_trans = test_trans;
            result.full_gap_trans = test_trans - train_trans;
            result.full_gap_rot = rot_gap;
        } else {
            result.norm_curve = std::move(run.curve);
            result.norm_train_trans = train_trans;
            result.norm_test_trans = test_trans;
            result.norm_gap_trans = test_trans - train_trans;
            result.norm_gap_rot = rot_gap;
        }
    }
    return result;
}

RcrIlResult experiment_rcr_il(const ExperimentConfig& cfg) {
    cfg.validate();
    const SampleSource train_src = make_synthetic_source(
        experiment_source_spec(cfg, cfg.train_envs, cfg.train_size, "train"));
    const SampleSource test_fixed = make_synthetic_source(
        experiment_source_spec(cfg, cfg.test_envs, cfg.test_size, "test_fixed"));
    SyntheticSourceSpec rcr_spec =
        experiment_source_spec(cfg, cfg.test_envs, cfg.test_size, "test_rcr");
    rcr_spec.bake_rcr = true;
    rcr_spec.rcr_fov_deg = cfg.train.rcr_fov_deg;
    rcr_spec.rcr_seed = derive_seed(cfg.train.seed, rng_stream::kCropParams, 1);
    const SampleSource test_rcr = make_synthetic_source(rcr_spec);

    RcrIlResult result;
    const std::array<std::pair<bool, bool>, 4> combos = {
        std::pair<bool, bool>{false, false}, {false, true}, {true, false}, {true, true}};
    for (size_t i = 0; i < combos.size(); ++i) {
        const auto [use_rcr, use_il] = combos[i];
        TrainConfig tc = cfg.train;
        tc.use_rcr = use_rcr;
        tc.use_il = use_il;
        PoseNet net(experiment_net_config(cfg, use_il));
        TrainResult run = train(net, train_src, {test_rcr, test_fixed}, tc);
        const LossCurvePoint& last = run.curve.final_point();
        RcrIlCell& cell = result.cells[i];
        cell.use_rcr = use_rcr;
        cell.use_il = use_il;
        cell.train_loss = last.train.total;
        cell.test_rcr_loss = last.test.at(0).total;
        cell.test_fixed_loss = last.test.at(1).total;
        cell.curve = std::move(run.curve);
    }
    return result;
}

// --- plain-text emission ------------------------------------------------------------

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.flush();
    if (!out) throw IoError("write failure on " + path.string());
}

void append_loss_columns(std::string& row, const LossValue& v) {
    row += " " + format_double(v.total) + " " + format_double(v.translation_term) + " " +
           format_double(v.rotation_term) + " " + format_double(v.flow_term);
}

}  // namespace

void write_curve_file(const std::filesystem::path& path, const LossCurve& curve) {
    std::string text = "# step";
    for (const std::string& name :
         [&] {
             std::vector<std::string> names = {curve.train_name};
             names.insert(names.end(), curve.test_names.begin(), curve.test_names.end());
             return names;
         }()) {
        text += " " + name + "_total " + name + "_trans " + name + "_rot " + name + "_flow";
    }
    text += "\n";
    for (const LossCurvePoint& point : curve.points) {
        std::string row = std::to_string(point.step);
        append_loss_columns(row, point.train);
        for (const LossValue& v : point.test) append_loss_columns(row, v);
        text += row + "\n";
    }
    write_text(path, text);
}

LossCurve read_curve_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());

    LossCurve curve;
    curve.test_names.clear();
    std::string line;
    int line_no = 0;
    bool header_seen = false;
    size_t sets = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string where = path.string() + ":" + std::to_string(line_no);
        std::istringstream row(line);
        std::string tok;
        std::vector<std::string> tokens;
        while (row >> tok) tokens.push_back(tok);
        if (tokens.empty()) continue;
        if (tokens[0] == "#") {
            if (header_seen || tokens.size() < 2 || tokens[1] != "step" ||
                (tokens.size() - 2) % 4 != 0) {
                throw ParseError(where + ": malformed curve header");
            }
            sets = (tokens.size() - 2) / 4;
            if (sets == 0) throw ParseError(where + ": curve header names no splits");
            for (size_t s = 0; s < sets; ++s) {
                std::string name = tokens[2 + 4 * s];
                const std::string suffix = "_total";
                if (name.size() > suffix.size() &&
                    name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
                    name.resize(name.size() - suffix.size());
                }
                if (s == 0) {
                    curve.train_name = name;
                } else {
                    curve.test_names.push_back(name);
                }
            }
            header_seen = true;
            continue;
        }
        if (!header_seen) throw ParseError(where + ": data before the curve header");
        if (tokens.size() != 1 + 4 * sets) {
            throw ParseError(where + ": expected " + std::to_string(1 + 4 * sets) +
                             " columns, got " + std::to_string(tokens.size()));
        }
        LossCurvePoint point;
        try {
            size_t used = 0;
            point.step = std::stoi(tokens[0], &used);
            if (used != tokens[0].size()) throw std::invalid_argument(tokens[0]);
        } catch (const std::exception&) {
            throw ParseError(where + ": '" + tokens[0] + "' is not a step index");
        }
        auto read_value = [&](size_t col) {
            try {
                size_t used = 0;
                const double v = std::stod(tokens[col], &used);
                if (used != tokens[col].size()) throw std::invalid_argument(tokens[col]);
                return v;
            } catch (const std::exception&) {
                throw ParseError(where + ": '" + tokens[col] + "' is not a number");
            }
        };
        for (size_t s = 0; s < sets; ++s) {
            LossValue v;
            v.total = read_value(1 + 4 * s);
            v.translation_term = read_value(2 + 4 * s);
            v.rotation_term = read_value(3 + 4 * s);
            v.flow_term = read_value(4 + 4 * s);
            if (s == 0) {
                point.train = v;
            } else {
                point.test.push_back(v);
            }
        }
        if (!curve.points.empty() && point.step <= curve.points.back().step) {
            throw ParseError(where + ": steps not strictly increasing");
        }
        curve.points.push_back(std::move(point));
    }
    if (!header_seen) throw ParseError(path.string() + ": not a curve file (no header)");
    return curve;
}

void write_data_quantity_table(const std::filesystem::path& path, const DataQuantityResult& r) {
    std::string text = "# size train_total test_total gap\n";
    for (size_t i = 0; i < r.sizes.size(); ++i) {
        text += std::to_string(r.sizes[i]) + " " + format_double(r.final_train[i]) + " " +
                format_double(r.final_test[i]) + " " + format_double(r.gap[i]) + "\n";
    }
    write_text(path, text);
}

void write_up_to_scale_table(const std::filesystem::path& path, const UpToScaleResult& r) {
    std::string text = "# variant train_trans test_trans gap_trans gap_rot\n";
    text += "full " + format_double(r.full_train_trans) + " " + format_double(r.full_test_trans) +
            " " + format_double(r.full_gap_trans) + " " + format_double(r.full_gap_rot) + "\n";
    text += "norm " + format_double(r.norm_train_trans) + " " + format_double(r.norm_test_trans) +
            " " + format_double(r.norm_gap_trans) + " " + format_double(r.norm_gap_rot) + "\n";
    write_text(path, text);
}

void write_rcr_il_table(const std::filesystem::path& path, const RcrIlResult& r) {
    std::string text = "# rcr il train_loss test_rcr test_fixed\n";
    for (const RcrIlCell& cell : r.cells) {
        text += std::string(cell.use_rcr ? "1" : "0") + " " + (cell.use_il ? "1" : "0") + " " +
                format_double(cell.train_loss) + " " + format_double(cell.test_rcr_loss) + " " +
                format_double(cell.test_fixed_loss) + "\n";
    }
    write_text(path, text);
}

}  // namespace flowpose
