#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "flowpose/losses.hpp"
#include "flowpose/model.hpp"
#include "flowpose/synthgen.hpp"

namespace flowpose {

struct TrainConfig {
    int iterations = 5000;
    int batch_size = 32;
    double learning_rate = 1e-4;
    double decay_factor = 0.2;
    // Fractions of the total step count at which the rate is multiplied by
    // decay_factor; strictly increasing within (0, 1].
    std::vector<double> decay_milestones = {0.5, 0.875};
    LossVariant variant = LossVariant::kNorm;
    double lambda = 0.1;  // weight of the matching term when a reference flow exists
    // Cap on the global L2 norm of the batch gradient; 0 disables clipping.
    // The direction-only losses have slopes that scale like 1/|t| near a
    // zero prediction, and the heads start at exactly zero, so the first few
    // unclipped steps would catapult the parameters.
    double grad_clip = 10.0;
    bool use_rcr = false;
    bool use_il = false;
    std::pair<double, double> rcr_fov_deg = {40.0, 90.0};
    int eval_interval = 250;  // steps between loss-curve records
    int eval_cap = 512;       // samples per split evaluated for a record
    std::uint64_t seed = 0;

    void validate() const;
};

// Learning rate in effect at a given (0-based) step. With defaults this is
// 1e-4 on [0, 1/2), 2e-5 on [1/2, 7/8), 4e-6 on [7/8, 1] of the run.
double learning_rate_at(const TrainConfig& cfg, int step);

// A randomly addressable sample stream. get must be a pure function of the
// index so that subsets, epochs, and resumed runs all see identical data.
// reference_flow, when set, returns the uncorrupted flow for the same index
// (the label the matching term is charged against).
struct SampleSource {
    std::string name = "set";
    size_t count = 0;
    std::function<Sample(size_t)> get;
    std::function<FlowField(size_t)> reference_flow;
};

// Recipe for a procedural sample stream.
struct SyntheticSourceSpec {
    SceneConfig scene;
    CameraIntrinsics camera;
    std::vector<int> environments = {0};  // striped across indices
    size_t count = 0;
    MotionPattern pattern = MotionPattern::kFull6Dof;
    FlowNoiseModel noise{0.0, 0.0};  // disabled by default
    std::uint64_t noise_seed = 0;
    // Bakes one fixed crop-resize per index into the stream, simulating a
    // test set captured by diverse cameras.
    bool bake_rcr = false;
    std::pair<double, double> rcr_fov_deg = {40.0, 90.0};
    std::uint64_t rcr_seed = 0;
    // Indices below this are kept in memory after first use.
    size_t cache_limit = 4096;
    std::string name = "synth";

    SyntheticSourceSpec();
};

SampleSource make_synthetic_source(const SyntheticSourceSpec& spec);
SampleSource make_memory_source(std::vector<Sample> samples, std::string name);
// The first n samples of a source, as its own stream.
SampleSource prefix_source(const SampleSource& source, size_t n, std::string name);

struct LossCurvePoint {
    int step = 0;
    LossValue train;
    std::vector<LossValue> test;
};

struct LossCurve {
    std::string train_name = "train";
    std::vector<std::string> test_names;
    std::vector<LossCurvePoint> points;

    const LossCurvePoint& final_point() const;
};

struct TrainResult {
    LossCurve curve;
};

// Minibatch gradient descent over the source, recording train/test losses
// every eval_interval steps. Steps [start_step, stop_step) are executed
// (stop_step < 0 means run to cfg.iterations) while the decay schedule keeps
// following cfg.iterations, so a run interrupted at any step and resumed from
// a checkpoint reproduces the uninterrupted run bit for bit.
TrainResult train(PoseNet& net, const SampleSource& train_set,
                  const std::vector<SampleSource>& test_sets, const TrainConfig& cfg,
                  int start_step = 0, int stop_step = -1);

// Mean loss of the net over the first min(count, cap) samples of a source.
LossValue evaluate(const PoseNet& net, const SampleSource& source, const TrainConfig& cfg,
                   size_t cap);

// Builds the network input for one sample: the two flow planes (plus the two
// normalized-coordinate planes when with_il), channel-planar row-major.
void assemble_input(const Sample& sample, bool with_il, std::vector<double>& out);

// --- the three headline experiments -----------------------------------------

// Shared protocol: training data from train_envs, held-out data from
// test_envs (disjoint), one camera, motions from the same pattern.
struct ExperimentConfig {
    TrainConfig train;
    SceneConfig scene;
    CameraIntrinsics camera;
    std::vector<int> train_envs = {0, 1, 2, 3, 4, 5, 6, 7};
    std::vector<int> test_envs = {1000, 1001, 1002, 1003};
    size_t train_size = 20000;
    size_t test_size = 2000;
    MotionPattern pattern = MotionPattern::kFull6Dof;
    // Translation-magnitude band of the held-out split in the scale
    // experiment; shifted away from scene.translation_range.
    std::pair<double, double> test_translation_range = {0.45, 0.9};

    ExperimentConfig();
    void validate() const;
};

struct DataQuantityResult {
    std::vector<size_t> sizes;
    std::vector<LossCurve> curves;
    std::vector<double> final_train;
    std::vector<double> final_test;
    std::vector<double> gap;  // final_test - final_train
};

// One net per size, trained on nested subsets of one pool, all evaluated on
// the same held-out environments. Sizes must be strictly increasing, >= 3 of
// them, each positive.
DataQuantityResult experiment_data_quantity(const std::vector<size_t>& sizes,
                                            const ExperimentConfig& cfg);

struct UpToScaleResult {
    LossCurve full_curve;
    LossCurve norm_curve;
    double full_train_trans = 0.0, full_test_trans = 0.0;
    double norm_train_trans = 0.0, norm_test_trans = 0.0;
    double full_gap_trans = 0.0, norm_gap_trans = 0.0;
    double full_gap_rot = 0.0, norm_gap_rot = 0.0;
};

// Scale-aware loss vs direction-only loss, tested on motions whose
// translation magnitudes come from a shifted band.
UpToScaleResult experiment_up_to_scale(const ExperimentConfig& cfg);

struct RcrIlCell {
    bool use_rcr = false;
    bool use_il = false;
    double train_loss = 0.0;
    double test_rcr_loss = 0.0;    // held-out data with per-index random crops
    double test_fixed_loss = 0.0;  // held-out data from the fixed camera
    LossCurve curve;
};

struct RcrIlResult {
    // Row order: (no-RCR, no-IL), (no-RCR, IL), (RCR, no-IL), (RCR, IL).
    std::array<RcrIlCell, 4> cells;
};

// The 2x2 crop-augmentation x intrinsics-channels ablation with shared seeds
// and data.
RcrIlResult experiment_rcr_il(const ExperimentConfig& cfg);

// --- plain-text emission -------------------------------------------------------

// Curve files: '#' header naming the columns, then one row per record:
// step, then (total, translation, rotation, flow) per split, train first.
void write_curve_file(const std::filesystem::path& path, const LossCurve& curve);
LossCurve read_curve_file(const std::filesystem::path& path);

void write_data_quantity_table(const std::filesystem::path& path, const DataQuantityResult& r);
void write_up_to_scale_table(const std::filesystem::path& path, const UpToScaleResult& r);
void write_rcr_il_table(const std::filesystem::path& path, const RcrIlResult& r);

}  // namespace flowpose
