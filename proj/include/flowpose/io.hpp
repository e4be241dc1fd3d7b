#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "flowpose/eval.hpp"
#include "flowpose/flow.hpp"
#include "flowpose/synthgen.hpp"

namespace flowpose {

// Flat "key = value" text, one pair per line, '#' starts a comment. Consumers
// read values through the typed getters, which mark keys as consumed;
// reject_unknown() then fails on anything left over, so misspelled keys
// surface as errors instead of silently falling back to defaults.
class ConfigMap {
   public:
    ConfigMap() = default;

    static ConfigMap parse_file(const std::filesystem::path& path);
    static ConfigMap parse_string(const std::string& text, const std::string& origin = "<config>");

    bool has(const std::string& key) const;

    std::string require_string(const std::string& key);
    std::string get_string(const std::string& key, const std::string& fallback);
    double require_double(const std::string& key);
    double get_double(const std::string& key, double fallback);
    std::int64_t require_int(const std::string& key);
    std::int64_t get_int(const std::string& key, std::int64_t fallback);
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback);
    bool get_bool(const std::string& key, bool fallback);

    // Setters append (or overwrite) entries; used to build config echoes.
    void set(const std::string& key, const std::string& value);
    void set_double(const std::string& key, double value);
    void set_int(const std::string& key, std::int64_t value);
    void set_u64(const std::string& key, std::uint64_t value);
    void set_bool(const std::string& key, bool value);

    // Throws ParseError naming every key that was never consumed, with its
    // line number.
    void reject_unknown() const;

    // One "key = value" per line, in insertion order.
    std::string serialize() const;

    // Key/value view in insertion order (for manifests).
    std::vector<std::pair<std::string, std::string>> entries() const;

   private:
    struct Entry {
        std::string key;
        std::string value;
        int line = 0;
        mutable bool consumed = false;
    };
    const Entry* find(const std::string& key) const;
    Entry* find(const std::string& key);
    std::string raw_require(const std::string& key);

    std::vector<Entry> entries_;
    std::string origin_ = "<config>";
};

// Exact decimal round-trip formatting for doubles.
std::string format_double(double value);

// Little-endian binary primitives shared by the on-disk formats.
namespace bin {
void put_u32(std::ostream& out, std::uint32_t value);
void put_u64(std::ostream& out, std::uint64_t value);
void put_f32(std::ostream& out, float value);
void put_f64(std::ostream& out, double value);
std::uint32_t take_u32(std::istream& in, const std::filesystem::path& path);
std::uint64_t take_u64(std::istream& in, const std::filesystem::path& path);
float take_f32(std::istream& in, const std::filesystem::path& path);
double take_f64(std::istream& in, const std::filesystem::path& path);
// Reads 4 bytes and fails unless they equal the expected tag.
void check_magic(std::istream& in, const char* magic, const std::filesystem::path& path);
// Fails unless the stream is exactly at end of file.
void check_trailing(std::istream& in, const std::filesystem::path& path);
}  // namespace bin

// --- dense flow fields ("UVFL" magic, u32 width/height, f32 u,v pairs
// row-major, all little-endian) -------------------------------------------
void write_flow_file(const std::filesystem::path& path, const FlowField& flow);
FlowField read_flow_file(const std::filesystem::path& path);

// --- validity masks ("MASK" magic, u32 width/height, row-major bits packed
// LSB-first into bytes, each row padded to a whole byte) -------------------
void write_mask_file(const std::filesystem::path& path, const PixelMask& mask);
PixelMask read_mask_file(const std::filesystem::path& path);

// --- motion lists (text; one motion per line: tx ty tz rx ry rz) ----------
void write_motions_file(const std::filesystem::path& path,
                        const std::vector<RelativeMotion>& motions);
std::vector<RelativeMotion> read_motions_file(const std::filesystem::path& path);

// --- sample datasets on disk ----------------------------------------------
// Layout: <dir>/meta.cfg (camera + count + caller echo), <dir>/motions.txt,
// <dir>/flow_NNNNNN.uvfl and flow_NNNNNN.msk per sample.
void save_dataset(const std::filesystem::path& dir, const std::vector<Sample>& samples,
                  const ConfigMap& echo);
std::vector<Sample> load_dataset(const std::filesystem::path& dir);
ConfigMap read_dataset_meta(const std::filesystem::path& dir);

// --- trajectory files ------------------------------------------------------
// Twelve numbers per line: the top three rows of the homogeneous pose matrix
// [R | t], row-major. Timestamps are implicit (0, 1, 2, ...).
void write_trajectory_mat(const std::filesystem::path& path, const Trajectory& traj);
// Eight numbers per line: timestamp tx ty tz qx qy qz qw.
void write_trajectory_quat(const std::filesystem::path& path, const Trajectory& traj);

enum class TrajectoryFormat { kMat, kQuat, kAuto };
// kAuto picks the format from the token count of the first data line.
Trajectory read_trajectory(const std::filesystem::path& path,
                           TrajectoryFormat format = TrajectoryFormat::kAuto);

// --- run manifests ----------------------------------------------------------
struct RunManifest {
    std::string command;
    std::uint64_t seed = 0;
    ConfigMap config;
    std::string started_at;   // ISO 8601 UTC
    std::string finished_at;  // ISO 8601 UTC
    std::vector<std::string> outputs;
};

std::string version_string();
std::string iso8601_utc_now();

// Appends one JSON line to <dir>/manifest.jsonl.
void append_manifest(const std::filesystem::path& dir, const RunManifest& manifest);

}  // namespace flowpose
