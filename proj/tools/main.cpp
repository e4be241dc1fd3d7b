#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "flowpose/augment.hpp"
#include "flowpose/errors.hpp"
#include "flowpose/eval.hpp"
#include "flowpose/io.hpp"
#include "flowpose/model.hpp"
#include "flowpose/synthgen.hpp"
#include "flowpose/trainer.hpp"

namespace fp = flowpose;
namespace fs = std::filesystem;

namespace {

constexpr const char* kOutRootEnv = "FLOWPOSE_OUT_ROOT";

// Options shared by every subcommand.
struct CommonOpts {
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> variant;
    int threads = 1;
};

fs::path resolve_out_dir(const CommonOpts& opts, const std::string& command) {
    fs::path dir;
    if (!opts.out_dir.empty()) {
        dir = opts.out_dir;
    } else if (const char* root = std::getenv(kOutRootEnv); root != nullptr && *root != '\0') {
        dir = fs::path(root) / command;
    } else {
        throw fp::ParseError("no output directory: pass --out or set " + std::string(kOutRootEnv));
    }
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw fp::IoError("cannot create " + dir.string() + ": " + ec.message());
    return dir;
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
            throw fp::ParseError(where + ": '" + item + "' is not an integer");
        }
    }
    if (out.empty()) throw fp::ParseError(where + ": empty list");
    return out;
}

std::vector<double> parse_double_list(const std::string& text, const std::string& where) {
    std::vector<double> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            size_t used = 0;
            const double value = std::stod(item, &used);
            if (used != item.size()) throw std::invalid_argument(item);
            out.push_back(value);
        } catch (const std::exception&) {
            throw fp::ParseError(where + ": '" + item + "' is not a number");
        }
    }
    if (out.empty()) throw fp::ParseError(where + ": empty list");
    return out;
}

std::string join_doubles(const std::vector<double>& values) {
    std::string out;
    for (size_t i = 0; i < values.size(); ++i) {
        if (i > 0) out += ",";
        out += fp::format_double(values[i]);
    }
    return out;
}

std::string join_ints(const std::vector<int>& values) {
    std::string out;
    for (size_t i = 0; i < values.size(); ++i) {
        if (i > 0) out += ",";
        out += std::to_string(values[i]);
    }
    return out;
}

fp::CameraIntrinsics parse_camera(fp::ConfigMap& cfg) {
    fp::CameraIntrinsics base = fp::default_camera();
    fp::CameraIntrinsics k;
    k.width = static_cast<int>(cfg.get_int("width", base.width));
    k.height = static_cast<int>(cfg.get_int("height", base.height));
    k.fx = cfg.get_double("fx", base.fx);
    k.fy = cfg.get_double("fy", base.fy);
    k.ox = cfg.get_double("ox", base.ox);
    k.oy = cfg.get_double("oy", base.oy);
    k.validate();
    return k;
}

fp::SceneConfig parse_scene(fp::ConfigMap& cfg, std::uint64_t seed) {
    fp::SceneConfig scene;
    scene.point_count = static_cast<int>(cfg.get_int("point_count", scene.point_count));
    scene.depth_range.first = cfg.get_double("depth_min", scene.depth_range.first);
    scene.depth_range.second = cfg.get_double("depth_max", scene.depth_range.second);
    scene.translation_range.first =
        cfg.get_double("translation_min", scene.translation_range.first);
    scene.translation_range.second =
        cfg.get_double("translation_max", scene.translation_range.second);
    scene.rotation_range.first = cfg.get_double("rotation_min", scene.rotation_range.first);
    scene.rotation_range.second = cfg.get_double("rotation_max", scene.rotation_range.second);
    scene.seed = seed;
    scene.validate();
    return scene;
}

fp::MotionPattern parse_pattern(fp::ConfigMap& cfg) {
    const std::string name = cfg.get_string("pattern", "full");
    if (name == "full") return fp::MotionPattern::kFull6Dof;
    if (name == "planar") return fp::MotionPattern::kPlanarCarlike;
    throw fp::ParseError("unknown motion pattern '" + name + "' (expected full|planar)");
}

fp::TrainConfig parse_train_config(fp::ConfigMap& cfg, const CommonOpts& common) {
    fp::TrainConfig tc;
    tc.iterations = static_cast<int>(cfg.get_int("iterations", tc.iterations));
    tc.batch_size = static_cast<int>(cfg.get_int("batch_size", tc.batch_size));
    tc.learning_rate = cfg.get_double("learning_rate", tc.learning_rate);
    tc.decay_factor = cfg.get_double("decay_factor", tc.decay_factor);
    if (cfg.has("milestones")) {
        tc.decay_milestones = parse_double_list(cfg.require_string("milestones"), "milestones");
    }
    tc.variant = fp::loss_variant_from_string(cfg.get_string("variant", to_string(tc.variant)));
    tc.lambda = cfg.get_double("lambda", tc.lambda);
    tc.grad_clip = cfg.get_double("grad_clip", tc.grad_clip);
    tc.use_rcr = cfg.get_bool("use_rcr", tc.use_rcr);
    tc.use_il = cfg.get_bool("use_il", tc.use_il);
    tc.rcr_fov_deg.first = cfg.get_double("fov_min", tc.rcr_fov_deg.first);
    tc.rcr_fov_deg.second = cfg.get_double("fov_max", tc.rcr_fov_deg.second);
    tc.eval_interval = static_cast<int>(cfg.get_int("eval_interval", tc.eval_interval));
    tc.eval_cap = static_cast<int>(cfg.get_int("eval_cap", tc.eval_cap));
    tc.seed = cfg.get_u64("seed", 0);
    if (common.seed) tc.seed = *common.seed;
    if (common.variant) tc.variant = fp::loss_variant_from_string(*common.variant);
    tc.validate();
    return tc;
}

void echo_train_config(fp::ConfigMap& echo, const fp::TrainConfig& tc) {
    echo.set_int("iterations", tc.iterations);
    echo.set_int("batch_size", tc.batch_size);
    echo.set_double("learning_rate", tc.learning_rate);
    echo.set_double("decay_factor", tc.decay_factor);
    echo.set("milestones", join_doubles(tc.decay_milestones));
    echo.set("variant", to_string(tc.variant));
    echo.set_double("lambda", tc.lambda);
    echo.set_double("grad_clip", tc.grad_clip);
    echo.set_bool("use_rcr", tc.use_rcr);
    echo.set_bool("use_il", tc.use_il);
    echo.set_double("fov_min", tc.rcr_fov_deg.first);
    echo.set_double("fov_max", tc.rcr_fov_deg.second);
    echo.set_int("eval_interval", tc.eval_interval);
    echo.set_int("eval_cap", tc.eval_cap);
    echo.set_u64("seed", tc.seed);
    echo.set("optimizer", "sgd");  // declared, not configurable
}

void echo_scene(fp::ConfigMap& echo, const fp::SceneConfig& scene,
                const fp::CameraIntrinsics& k) {
    echo.set_int("point_count", scene.point_count);
    echo.set_double("depth_min", scene.depth_range.first);
    echo.set_double("depth_max", scene.depth_range.second);
    echo.set_double("translation_min", scene.translation_range.first);
    echo.set_double("translation_max", scene.translation_range.second);
    echo.set_double("rotation_min", scene.rotation_range.first);
    echo.set_double("rotation_max", scene.rotation_range.second);
    echo.set_int("width", k.width);
    echo.set_int("height", k.height);
    echo.set_double("fx", k.fx);
    echo.set_double("fy", k.fy);
    echo.set_double("ox", k.ox);
    echo.set_double("oy", k.oy);
}

void finish_manifest(const fs::path& out_dir, fp::RunManifest manifest) {
    manifest.finished_at = fp::iso8601_utc_now();
    fp::append_manifest(out_dir, manifest);
}

// --- generate ------------------------------------------------------------------

int cmd_generate(const std::string& config_path, const CommonOpts& common) {
    const fs::path out_dir = resolve_out_dir(common, "generate");
    fp::RunManifest manifest;
    manifest.command = "generate";
    manifest.started_at = fp::iso8601_utc_now();

    fp::ConfigMap cfg = fp::ConfigMap::parse_file(config_path);
    const std::uint64_t seed = common.seed ? *common.seed : cfg.get_u64("seed", 0);

    fp::SyntheticSourceSpec spec;
    spec.camera = parse_camera(cfg);
    spec.scene = parse_scene(cfg, seed);
    spec.count = static_cast<size_t>(cfg.get_int("count", 200));
    if (cfg.has("environments")) {
        spec.environments = parse_int_list(cfg.require_string("environments"), "environments");
    }
    spec.pattern = parse_pattern(cfg);
    spec.noise.sigma = cfg.get_double("noise_sigma", 0.0);
    spec.noise.dropout = cfg.get_double("noise_dropout", 0.0);
    spec.noise_seed = seed;
    spec.cache_limit = 0;  // straight pass-through, no reuse
    cfg.reject_unknown();

    const fp::SampleSource source = fp::make_synthetic_source(spec);
    std::vector<fp::Sample> samples;
    samples.reserve(spec.count);
    for (size_t i = 0; i < spec.count; ++i) samples.push_back(source.get(i));

    fp::ConfigMap echo;
    echo_scene(echo, spec.scene, spec.camera);
    echo.set_int("count", static_cast<std::int64_t>(spec.count));
    echo.set("environments", join_ints(spec.environments));
    echo.set("pattern", spec.pattern == fp::MotionPattern::kFull6Dof ? "full" : "planar");
    echo.set_double("noise_sigma", spec.noise.sigma);
    echo.set_double("noise_dropout", spec.noise.dropout);
    echo.set_u64("seed", seed);
    fp::save_dataset(out_dir, samples, echo);

    manifest.seed = seed;
    manifest.config = echo;
    manifest.outputs = {"meta.cfg", "motions.txt"};
    std::cout << "wrote " << spec.count << " samples to " << out_dir.string() << "\n";
    finish_manifest(out_dir, manifest);
    return 0;
}

// --- train ---------------------------------------------------------------------

int cmd_train(const std::string& config_path, const std::string& dataset_flag,
              const std::string& resume_path, int stop_at, const CommonOpts& common) {
    const fs::path out_dir = resolve_out_dir(common, "train");
    fp::RunManifest manifest;
    manifest.command = "train";
    manifest.started_at = fp::iso8601_utc_now();

    fp::ConfigMap cfg = fp::ConfigMap::parse_file(config_path);
    const std::string dataset_dir =
        !dataset_flag.empty() ? dataset_flag : cfg.get_string("dataset", "");
    if (dataset_dir.empty()) {
        throw fp::ParseError("no dataset: pass --dataset or set 'dataset' in the config");
    }
    fp::TrainConfig tc = parse_train_config(cfg, common);
    const auto holdout = static_cast<size_t>(cfg.get_int("holdout", 0));
    cfg.reject_unknown();

    std::vector<fp::Sample> samples = fp::load_dataset(dataset_dir);
    if (holdout >= samples.size()) {
        throw fp::MismatchError("holdout of " + std::to_string(holdout) +
                                " samples leaves nothing to train on");
    }
    const fp::CameraIntrinsics camera = samples.front().intrinsics;
    std::vector<fp::Sample> train_part(samples.begin(),
                                       samples.end() - static_cast<long>(holdout));
    std::vector<fp::Sample> test_part(samples.end() - static_cast<long>(holdout), samples.end());
    samples.clear();

    const fp::SampleSource train_src = fp::make_memory_source(std::move(train_part), "train");
    std::vector<fp::SampleSource> test_sets;
    if (holdout > 0) {
        test_sets.push_back(fp::make_memory_source(std::move(test_part), "holdout"));
    }

    int start_step = 0;
    std::optional<fp::PoseNet> net;
    if (!resume_path.empty()) {
        fp::Checkpoint ckpt = fp::load_checkpoint(resume_path);
        start_step = static_cast<int>(ckpt.step);
        net.emplace(std::move(ckpt.net));
    } else {
        fp::PoseNetConfig nc;
        nc.input_width = camera.width;
        nc.input_height = camera.height;
        nc.input_channels = tc.use_il ? 4 : 2;
        nc.seed = tc.seed;
        net.emplace(nc);
    }

    const fp::TrainResult result = fp::train(*net, train_src, test_sets, tc, start_step, stop_at);
    const int end_step = stop_at < 0 ? tc.iterations : stop_at;

    fp::write_curve_file(out_dir / "curve_train.txt", result.curve);
    fp::save_checkpoint(out_dir / "checkpoint.pnet", *net, end_step);

    fp::ConfigMap echo;
    echo_train_config(echo, tc);
    echo.set("dataset", dataset_dir);
    echo.set_int("holdout", static_cast<std::int64_t>(holdout));
    manifest.seed = tc.seed;
    manifest.config = echo;
    manifest.outputs = {"curve_train.txt", "checkpoint.pnet"};
    if (!result.curve.points.empty()) {
        const fp::LossValue& last = result.curve.final_point().train;
        std::cout << "final train loss " << fp::format_double(last.total) << " after " << end_step
                  << " steps\n";
    } else {
        std::cout << "no training steps executed\n";
    }
    finish_manifest(out_dir, manifest);
    return 0;
}

// --- experiment ------------------------------------------------------------------

fp::ExperimentConfig parse_experiment_config(fp::ConfigMap& cfg, const CommonOpts& common) {
    fp::ExperimentConfig ec;
    ec.train = parse_train_config(cfg, common);
    ec.camera = parse_camera(cfg);
    ec.scene = parse_scene(cfg, ec.train.seed);
    if (cfg.has("train_envs")) {
        ec.train_envs = parse_int_list(cfg.require_string("train_envs"), "train_envs");
    }
    if (cfg.has("test_envs")) {
        ec.test_envs = parse_int_list(cfg.require_string("test_envs"), "test_envs");
    }
    ec.train_size = static_cast<size_t>(cfg.get_int("train_size", static_cast<std::int64_t>(ec.train_size)));
    ec.test_size = static_cast<size_t>(cfg.get_int("test_size", static_cast<std::int64_t>(ec.test_size)));
    ec.pattern = parse_pattern(cfg);
    ec.test_translation_range.first =
        cfg.get_double("test_translation_min", ec.test_translation_range.first);
    ec.test_translation_range.second =
        cfg.get_double("test_translation_max", ec.test_translation_range.second);
    return ec;
}

void echo_experiment_config(fp::ConfigMap& echo, const fp::ExperimentConfig& ec) {
    echo_train_config(echo, ec.train);
    echo_scene(echo, ec.scene, ec.camera);
    echo.set("train_envs", join_ints(ec.train_envs));
    echo.set("test_envs", join_ints(ec.test_envs));
    echo.set_int("train_size", static_cast<std::int64_t>(ec.train_size));
    echo.set_int("test_size", static_cast<std::int64_t>(ec.test_size));
    echo.set("pattern", ec.pattern == fp::MotionPattern::kFull6Dof ? "full" : "planar");
    echo.set_double("test_translation_min", ec.test_translation_range.first);
    echo.set_double("test_translation_max", ec.test_translation_range.second);
}

int cmd_experiment(const std::string& name, const std::string& config_path,
                   const CommonOpts& common) {
    if (name != "data_quantity" && name != "up_to_scale" && name != "rcr_il") {
        throw fp::ParseError("unknown experiment '" + name +
                             "' (expected data_quantity|up_to_scale|rcr_il)");
    }
    const fs::path out_dir = resolve_out_dir(common, name);
    fp::RunManifest manifest;
    manifest.command = "experiment " + name;
    manifest.started_at = fp::iso8601_utc_now();

    fp::ConfigMap cfg = fp::ConfigMap::parse_file(config_path);
    fp::ExperimentConfig ec = parse_experiment_config(cfg, common);

    fp::ConfigMap echo;
    echo_experiment_config(echo, ec);
    manifest.seed = ec.train.seed;

    if (name == "data_quantity") {
        std::vector<size_t> sizes = {1000, 5000, 20000};
        if (cfg.has("sizes")) {
            sizes.clear();
            for (int v : parse_int_list(cfg.require_string("sizes"), "sizes")) {
                if (v <= 0) throw fp::ParseError("sizes: training-set sizes must be positive");
                sizes.push_back(static_cast<size_t>(v));
            }
        }
        cfg.reject_unknown();
        std::string sizes_text;
        for (size_t i = 0; i < sizes.size(); ++i) {
            sizes_text += (i > 0 ? "," : "") + std::to_string(sizes[i]);
        }
        echo.set("sizes", sizes_text);

        const fp::DataQuantityResult result = fp::experiment_data_quantity(sizes, ec);
        for (size_t i = 0; i < result.sizes.size(); ++i) {
            const std::string file = "curve_size_" + std::to_string(result.sizes[i]) + ".txt";
            fp::write_curve_file(out_dir / file, result.curves[i]);
            manifest.outputs.push_back(file);
        }
        fp::write_data_quantity_table(out_dir / "table_data_quantity.txt", result);
        manifest.outputs.push_back("table_data_quantity.txt");
        for (size_t i = 0; i < result.sizes.size(); ++i) {
            std::cout << "size " << result.sizes[i] << ": train "
                      << fp::format_double(result.final_train[i]) << " test "
                      << fp::format_double(result.final_test[i]) << " gap "
                      << fp::format_double(result.gap[i]) << "\n";
        }
    } else if (name == "up_to_scale") {
        cfg.reject_unknown();
        const fp::UpToScaleResult result = fp::experiment_up_to_scale(ec);
        fp::write_curve_file(out_dir / "curve_full.txt", result.full_curve);
        fp::write_curve_file(out_dir / "curve_norm.txt", result.norm_curve);
        fp::write_up_to_scale_table(out_dir / "table_up_to_scale.txt", result);
        manifest.outputs = {"curve_full.txt", "curve_norm.txt", "table_up_to_scale.txt"};
        std::cout << "translation gap: full " << fp::format_double(result.full_gap_trans)
                  << " norm " << fp::format_double(result.norm_gap_trans) << "\n";
    } else {
        cfg.reject_unknown();
        const fp::RcrIlResult result = fp::experiment_rcr_il(ec);
        for (const fp::RcrIlCell& cell : result.cells) {
            const std::string file = std::string("curve_rcr") + (cell.use_rcr ? "1" : "0") +
                                     "_il" + (cell.use_il ? "1" : "0") + ".txt";
            fp::write_curve_file(out_dir / file, cell.curve);
            manifest.outputs.push_back(file);
        }
        fp::write_rcr_il_table(out_dir / "table_rcr_il.txt", result);
        manifest.outputs.push_back("table_rcr_il.txt");
        for (const fp::RcrIlCell& cell : result.cells) {
            std::cout << "rcr=" << cell.use_rcr << " il=" << cell.use_il << ": train "
                      << fp::format_double(cell.train_loss) << " test-rcr "
                      << fp::format_double(cell.test_rcr_loss) << " test-fixed "
                      << fp::format_double(cell.test_fixed_loss) << "\n";
        }
    }

    manifest.config = echo;
    finish_manifest(out_dir, manifest);
    return 0;
}

// --- eval ----------------------------------------------------------------------

int cmd_eval(const std::string& est_path, const std::string& gt_path, const std::string& align,
             const std::string& segments, const CommonOpts& common) {
    const fs::path out_dir = resolve_out_dir(common, "eval");
    fp::RunManifest manifest;
    manifest.command = "eval";
    manifest.started_at = fp::iso8601_utc_now();

    const fp::AlignMode mode = fp::align_mode_from_string(align);
    std::vector<double> lengths = fp::default_segment_lengths();
    if (!segments.empty()) {
        lengths = parse_double_list(segments, "--segments");
    }

    const fp::Trajectory est_raw = fp::read_trajectory(est_path);
    const fp::Trajectory gt_raw = fp::read_trajectory(gt_path);
    const auto [est, gt] = fp::match_trajectories(est_raw, gt_raw);
    const fp::MetricReport report = fp::evaluate_trajectories(est, gt, mode, lengths);

    std::string text;
    text += "align = " + to_string(report.align_mode) + "\n";
    text += "poses = " + std::to_string(est.size()) + "\n";
    text += "ate = " + fp::format_double(report.ate_value) + "\n";
    text += "t_rel_percent = " + fp::format_double(report.drift.t_rel_percent) + "\n";
    text += "r_rel_deg_per_100 = " + fp::format_double(report.drift.r_rel_deg_per_100) + "\n";
    for (const fp::SegmentDrift& seg : report.drift.per_length) {
        text += "segment " + fp::format_double(seg.length) + " = t_rel " +
                fp::format_double(seg.t_rel_percent) + " r_rel " +
                fp::format_double(seg.r_rel_deg_per_100) + " count " +
                std::to_string(seg.count) + "\n";
    }
    std::cout << text;

    std::ofstream out(out_dir / "report.txt", std::ios::binary | std::ios::trunc);
    if (!out) throw fp::IoError("cannot create " + (out_dir / "report.txt").string());
    out << text;
    out.flush();
    if (!out) throw fp::IoError("write failure on " + (out_dir / "report.txt").string());

    fp::ConfigMap echo;
    echo.set("est", est_path);
    echo.set("gt", gt_path);
    echo.set("align", to_string(mode));
    echo.set("segments", join_doubles(lengths));
    manifest.config = echo;
    manifest.outputs = {"report.txt"};
    finish_manifest(out_dir, manifest);
    return 0;
}

// --- plotdata --------------------------------------------------------------------

int cmd_plotdata(const std::string& run_dir_arg, const CommonOpts& common) {
    const fs::path run_dir = run_dir_arg;
    if (!fs::is_directory(run_dir)) {
        throw fp::IoError("run directory " + run_dir.string() + " does not exist");
    }
    std::vector<fs::path> curve_files;
    for (const auto& entry : fs::directory_iterator(run_dir)) {
        const std::string name = entry.path().filename().string();
        if (entry.is_regular_file() && name.rfind("curve_", 0) == 0 &&
            entry.path().extension() == ".txt") {
            curve_files.push_back(entry.path());
        }
    }
    std::sort(curve_files.begin(), curve_files.end());
    if (curve_files.empty()) {
        throw fp::IoError("no curve files in " + run_dir.string());
    }

    fp::RunManifest manifest;
    manifest.command = "plotdata";
    manifest.started_at = fp::iso8601_utc_now();
    if (common.seed) manifest.seed = *common.seed;

    for (const fs::path& file : curve_files) {
        const fp::LossCurve curve = fp::read_curve_file(file);
        if (curve.test_names.empty()) continue;  // nothing to plot against
        std::string stem = file.stem().string().substr(std::string("curve_").size());
        const struct {
            const char* tag;
            double fp::LossValue::*field;
        } panels[] = {
            {"total", &fp::LossValue::total},
            {"trans", &fp::LossValue::translation_term},
        };
        for (const auto& panel : panels) {
            std::string text = "# step train test\n";
            for (const fp::LossCurvePoint& point : curve.points) {
                text += std::to_string(point.step) + " " +
                        fp::format_double(point.train.*panel.field) + " " +
                        fp::format_double(point.test.at(0).*panel.field) + "\n";
            }
            const std::string out_name = "panel_" + stem + "_" + panel.tag + ".txt";
            std::ofstream out(run_dir / out_name, std::ios::binary | std::ios::trunc);
            if (!out) throw fp::IoError("cannot create " + (run_dir / out_name).string());
            out << text;
            out.flush();
            if (!out) throw fp::IoError("write failure on " + (run_dir / out_name).string());
            manifest.outputs.push_back(out_name);
        }
    }

    fp::ConfigMap echo;
    echo.set("run", run_dir.string());
    manifest.config = echo;
    std::cout << "wrote " << manifest.outputs.size() << " panel files\n";
    finish_manifest(run_dir, manifest);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"flow-to-motion learning artifact"};
    app.require_subcommand(1);

    CommonOpts common;
    std::uint64_t seed_value = 0;
    std::string variant_value;
    auto add_common = [&](CLI::App* cmd, bool with_out = true) {
        if (with_out) {
            cmd->add_option("--out", common.out_dir,
                            "output directory (default: $" + std::string(kOutRootEnv) +
                                "/<command>)");
        }
        cmd->add_option("--seed", seed_value, "seed override")->each([&](const std::string&) {
            common.seed = seed_value;
        });
        cmd->add_option("--variant", variant_value, "loss variant: full|cos|cos-printed|norm")
            ->each([&](const std::string&) { common.variant = variant_value; });
        cmd->add_option("--threads", common.threads, "worker threads (results are identical)")
            ->check(CLI::PositiveNumber);
    };

    std::string config_path;
    std::string dataset_dir;
    std::string resume_path;
    int stop_at = -1;
    std::string experiment_name;
    std::string est_path, gt_path;
    std::string align = "similarity";
    std::string segments;
    std::string run_dir;

    CLI::App* generate = app.add_subcommand("generate", "write a synthetic dataset");
    generate->add_option("--config", config_path, "key = value config file")->required();
    add_common(generate);

    CLI::App* train = app.add_subcommand("train", "train a motion regressor on a dataset");
    train->add_option("--config", config_path, "key = value config file")->required();
    train->add_option("--dataset", dataset_dir, "dataset directory (overrides config)");
    train->add_option("--resume", resume_path, "checkpoint to continue from");
    train->add_option("--stop-at", stop_at, "pause after this many steps (checkpoint resumes)");
    add_common(train);

    CLI::App* experiment = app.add_subcommand("experiment", "run a named experiment");
    experiment->add_option("name", experiment_name, "data_quantity|up_to_scale|rcr_il")
        ->required();
    experiment->add_option("--config", config_path, "key = value config file")->required();
    add_common(experiment);

    CLI::App* eval_cmd = app.add_subcommand("eval", "compare trajectories");
    eval_cmd->add_option("--est", est_path, "estimated trajectory file")->required();
    eval_cmd->add_option("--gt", gt_path, "reference trajectory file")->required();
    eval_cmd->add_option("--align", align, "similarity|rigid|none");
    eval_cmd->add_option("--segments", segments, "comma list of segment lengths");
    add_common(eval_cmd);

    CLI::App* plotdata = app.add_subcommand("plotdata", "export curve panels for plotting");
    plotdata->add_option("--run", run_dir, "directory holding curve files")->required();
    add_common(plotdata, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (generate->parsed()) return cmd_generate(config_path, common);
        if (train->parsed()) {
            return cmd_train(config_path, dataset_dir, resume_path, stop_at, common);
        }
        if (experiment->parsed()) return cmd_experiment(experiment_name, config_path, common);
        if (eval_cmd->parsed()) return cmd_eval(est_path, gt_path, align, segments, common);
        if (plotdata->parsed()) return cmd_plotdata(run_dir, common);
        std::cerr << "no command\n";
        return 2;
    } catch (const fp::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const fp::Diverged& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const fp::MismatchError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 5;
    } catch (const fp::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
