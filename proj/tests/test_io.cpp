#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "doctest.h"
#include "flowpose/eval.hpp"
#include "flowpose/io.hpp"
#include "flowpose/synthgen.hpp"
#include "flowpose/util.hpp"

using namespace flowpose;
namespace fs = std::filesystem;

namespace {

// Fresh scratch directory per test case, removed on destruction.
struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("flowpose_io_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

Trajectory random_trajectory(std::uint64_t seed, int n) {
    std::mt19937_64 rng = make_rng(seed);
    std::uniform_real_distribution<double> ut(-0.5, 0.5);
    std::uniform_real_distribution<double> ur(-0.2, 0.2);
    std::vector<RelativeMotion> motions;
    for (int i = 0; i < n - 1; ++i) {
        RelativeMotion m;
        m.translation = Vec3(ut(rng), ut(rng), ut(rng));
        m.rotation = Vec3(ur(rng), ur(rng), ur(rng));
        motions.push_back(m);
    }
    return integrate(motions, Pose{});
}

bool traj_close(const Trajectory& a, const Trajectory& b, double tol) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i) {
        if ((a.poses[i].position - b.poses[i].position).norm() > tol) return false;
        if ((a.poses[i].rotation - b.poses[i].rotation).norm() > tol) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("config parsing reads values, comments and blank lines") {
    ConfigMap cfg = ConfigMap::parse_string(
        "# a comment\n"
        "alpha = 3.5\n"
        "\n"
        "name = hello world  # trailing comment\n"
        "flag = true\n"
        "count = -4\n");
    CHECK(cfg.require_double("alpha") == 3.5);
    CHECK(cfg.require_string("name") == "hello world");
    CHECK(cfg.get_bool("flag", false) == true);
    CHECK(cfg.require_int("count") == -4);
    cfg.reject_unknown();
}

TEST_CASE("config parse errors carry line numbers") {
    try {
        ConfigMap::parse_string("ok = 1\nbroken line\n", "test.cfg");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("test.cfg") != std::string::npos);
        CHECK(msg.find("2") != std::string::npos);
    }
}

TEST_CASE("config rejects duplicate keys") {
    CHECK_THROWS_AS(ConfigMap::parse_string("a = 1\na = 2\n"), ParseError);
}

TEST_CASE("config rejects empty keys") {
    CHECK_THROWS_AS(ConfigMap::parse_string(" = 3\n"), ParseError);
}

TEST_CASE("unconsumed keys are reported with their location") {
    ConfigMap cfg = ConfigMap::parse_string("known = 1\nmystery = 2\n", "run.cfg");
    CHECK(cfg.require_int("known") == 1);
    try {
        cfg.reject_unknown();
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("mystery") != std::string::npos);
        CHECK(msg.find("run.cfg") != std::string::npos);
    }
}

TEST_CASE("config numeric parsing is strict") {
    ConfigMap cfg = ConfigMap::parse_string("a = 12x\nb = 1.5.3\nc = maybe\n");
    CHECK_THROWS_AS(cfg.require_int("a"), ParseError);
    CHECK_THROWS_AS(cfg.require_double("b"), ParseError);
    CHECK_THROWS_AS(cfg.get_bool("c", true), ParseError);
}

TEST_CASE("missing required keys fail by name") {
    ConfigMap cfg = ConfigMap::parse_string("a = 1\n");
    try {
        cfg.require_double("absent");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("absent") != std::string::npos);
    }
}

TEST_CASE("config serialization round-trips through the parser") {
    ConfigMap cfg;
    cfg.set("name", "trial");
    cfg.set_double("lr", 1e-4);
    cfg.set_int("steps", 5000);
    cfg.set_bool("rcr", true);
    cfg.set_u64("seed", 123456789012345ULL);
    ConfigMap back = ConfigMap::parse_string(cfg.serialize());
    CHECK(back.require_string("name") == "trial");
    CHECK(back.require_double("lr") == 1e-4);
    CHECK(back.require_int("steps") == 5000);
    CHECK(back.get_bool("rcr", false) == true);
    CHECK(back.get_u64("seed", 0) == 123456789012345ULL);
}

TEST_CASE("format_double round-trips exactly") {
    std::mt19937_64 rng = make_rng(51);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 1000; ++i) {
        const double x = u(rng) * std::pow(10.0, static_cast<int>(rng() % 13) - 6);
        CHECK(std::stod(format_double(x)) == x);
    }
}

TEST_CASE("flow files round-trip") {
    TempDir tmp;
    const Sample s = generate_sample(SceneConfig{}, 3, MotionPattern::kFull6Dof, default_camera());
    const fs::path p = tmp.path / "f.uvfl";
    write_flow_file(p, s.flow);
    const FlowField back = read_flow_file(p);
    CHECK(back.width == s.flow.width);
    CHECK(back.height == s.flow.height);
    // Payload is f32, so values survive only to single precision.
    for (size_t i = 0; i < back.data.size(); ++i) {
        CHECK(back.data[i] == static_cast<double>(static_cast<float>(s.flow.data[i])));
    }
}

TEST_CASE("flow reader rejects wrong magic and trailing bytes") {
    TempDir tmp;
    const fs::path p = tmp.path / "bad.uvfl";
    write_text(p, "NOPE rest");
    CHECK_THROWS_AS(read_flow_file(p), ParseError);

    FlowField f(4, 3);
    write_flow_file(p, f);
    std::ofstream app(p, std::ios::binary | std::ios::app);
    app << "x";
    app.close();
    CHECK_THROWS_AS(read_flow_file(p), ParseError);
}

TEST_CASE("flow reader reports missing files as io errors") {
    CHECK_THROWS_AS(read_flow_file("/nonexistent/path/f.uvfl"), IoError);
}

TEST_CASE("mask files round-trip with odd widths") {
    TempDir tmp;
    std::mt19937_64 rng = make_rng(52);
    for (int w : {1, 7, 8, 9, 64}) {
        PixelMask mask(w, 5);
        for (auto& b : mask.data) b = (rng() & 1) ? 1 : 0;
        const fs::path p = tmp.path / ("m" + std::to_string(w) + ".msk");
        write_mask_file(p, mask);
        const PixelMask back = read_mask_file(p);
        CHECK(back.width == mask.width);
        CHECK(back.height == mask.height);
        CHECK(back.data == mask.data);
    }
}

TEST_CASE("motion files round-trip exactly") {
    TempDir tmp;
    std::mt19937_64 rng = make_rng(53);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<RelativeMotion> motions;
    for (int i = 0; i < 25; ++i) {
        RelativeMotion m;
        m.translation = Vec3(u(rng), u(rng), u(rng));
        m.rotation = Vec3(u(rng), u(rng), u(rng)).normalized() * 0.3;
        motions.push_back(m);
    }
    const fs::path p = tmp.path / "motions.txt";
    write_motions_file(p, motions);
    const std::vector<RelativeMotion> back = read_motions_file(p);
    REQUIRE(back.size() == motions.size());
    for (size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].translation == motions[i].translation);
        CHECK(back[i].rotation == motions[i].rotation);
    }
}

TEST_CASE("motion files reject malformed rows") {
    TempDir tmp;
    const fs::path p = tmp.path / "bad.txt";
    write_text(p, "0.1 0.2 0.3 0.0 0.0\n");  // five numbers
    CHECK_THROWS_AS(read_motions_file(p), ParseError);
}

TEST_CASE("datasets round-trip through disk") {
    TempDir tmp;
    SceneConfig c;
    c.seed = 99;
    const std::vector<Sample> samples =
        generate_dataset(c, 5, MotionPattern::kFull6Dof, default_camera());
    ConfigMap echo;
    echo.set("origin", "unit-test");
    save_dataset(tmp.path, samples, echo);

    const std::vector<Sample> back = load_dataset(tmp.path);
    REQUIRE(back.size() == samples.size());
    for (size_t i = 0; i < samples.size(); ++i) {
        CHECK(back[i].motion.translation == samples[i].motion.translation);
        CHECK(back[i].valid_mask.data == samples[i].valid_mask.data);
        CHECK(back[i].intrinsics.fx == samples[i].intrinsics.fx);
        for (size_t j = 0; j < back[i].flow.data.size(); ++j) {
            CHECK(back[i].flow.data[j] ==
                  static_cast<double>(static_cast<float>(samples[i].flow.data[j])));
        }
    }
    ConfigMap meta = read_dataset_meta(tmp.path);
    CHECK(meta.require_string("origin") == "unit-test");
}

TEST_CASE("load_dataset cross-checks the sample count") {
    TempDir tmp;
    const std::vector<Sample> samples =
        generate_dataset(SceneConfig{}, 3, MotionPattern::kFull6Dof, default_camera());
    save_dataset(tmp.path, samples, ConfigMap{});
    fs::remove(tmp.path / "flow_000002.uvfl");
    CHECK_THROWS_AS(load_dataset(tmp.path), Error);
}

TEST_CASE("matrix trajectory files round-trip") {
    TempDir tmp;
    const Trajectory traj = random_trajectory(54, 20);
    const fs::path p = tmp.path / "traj_mat.txt";
    write_trajectory_mat(p, traj);
    const Trajectory back = read_trajectory(p);
    CHECK(traj_close(back, traj, 1e-12));
    // Implicit integer timestamps.
    for (size_t i = 0; i < back.size(); ++i) {
        CHECK(back.timestamps[i] == static_cast<double>(i));
    }
}

TEST_CASE("quaternion trajectory files round-trip") {
    TempDir tmp;
    const Trajectory traj = random_trajectory(55, 20);
    const fs::path p = tmp.path / "traj_quat.txt";
    write_trajectory_quat(p, traj);
    const Trajectory back = read_trajectory(p);
    CHECK(traj_close(back, traj, 1e-9));
    for (size_t i = 0; i < back.size(); ++i) {
        CHECK(back.timestamps[i] == traj.timestamps[i]);
    }
}

TEST_CASE("trajectory format detection is automatic") {
    TempDir tmp;
    const Trajectory traj = random_trajectory(56, 10);
    write_trajectory_mat(tmp.path / "a.txt", traj);
    write_trajectory_quat(tmp.path / "b.txt", traj);
    CHECK(traj_close(read_trajectory(tmp.path / "a.txt"), traj, 1e-12));
    CHECK(traj_close(read_trajectory(tmp.path / "b.txt"), traj, 1e-9));
}

TEST_CASE("trajectory reader rejects junk") {
    TempDir tmp;
    const fs::path p = tmp.path / "junk.txt";
    write_text(p, "1 2 3\n");  // neither 12 nor 8 tokens
    CHECK_THROWS_AS(read_trajectory(p), ParseError);
    write_text(p, "");  // no poses at all
    CHECK_THROWS_AS(read_trajectory(p), ParseError);
}

TEST_CASE("trajectory reader validates rotations") {
    TempDir tmp;
    const fs::path p = tmp.path / "bad_rot.txt";
    // Rows 2 0 0 / 0 1 0 / 0 0 1: determinant 2, not a rotation.
    write_text(p,
               "2 0 0 0 0 1 0 0 0 0 1 0\n"
               "1 0 0 1 0 1 0 0 0 0 1 0\n");
    CHECK_THROWS_AS(read_trajectory(p), ParseError);
}

TEST_CASE("quaternion rows must be near unit length") {
    TempDir tmp;
    const fs::path p = tmp.path / "bad_quat.txt";
    write_text(p,
               "0 0 0 0 0 0 0 2.0\n"
               "1 1 0 0 0 0 0 1\n");
    CHECK_THROWS_AS(read_trajectory(p), ParseError);
}

TEST_CASE("manifests append one json line per run") {
    TempDir tmp;
    RunManifest m;
    m.command = "unit";
    m.seed = 42;
    m.config.set("k", "v");
    m.started_at = iso8601_utc_now();
    m.finished_at = m.started_at;
    m.outputs = {"a.txt", "b.txt"};
    append_manifest(tmp.path, m);
    append_manifest(tmp.path, m);
    std::ifstream in(tmp.path / "manifest.jsonl");
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) {
        ++lines;
        CHECK(line.find("\"unit\"") != std::string::npos);
        CHECK(line.find(version_string()) != std::string::npos);
    }
    CHECK(lines == 2);
}

TEST_CASE("timestamps are well-formed utc") {
    const std::string t = iso8601_utc_now();
    REQUIRE(t.size() == 20);
    CHECK(t[4] == '-');
    CHECK(t[10] == 'T');
    CHECK(t[19] == 'Z');
}
