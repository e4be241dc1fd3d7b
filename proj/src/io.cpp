#include "flowpose/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include <Eigen/Geometry>

#include "flowpose/errors.hpp"
#include "json.hpp"

namespace flowpose {

namespace {

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("read failure on " + path.string());
    return buf.str();
}

std::string trim(const std::string& s) {
    size_t begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    size_t end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    size_t pos = 0;
    while (pos <= text.size()) {
        size_t nl = text.find('\n', pos);
        if (nl == std::string::npos) {
            lines.push_back(text.substr(pos));
            break;
        }
        lines.push_back(text.substr(pos, nl - pos));
        pos = nl + 1;
    }
    return lines;
}

std::vector<std::string> split_tokens(const std::string& line) {
    std::vector<std::string> tokens;
    std::istringstream in(line);
    std::string tok;
    while (in >> tok) tokens.push_back(tok);
    return tokens;
}

double parse_strict_double(const std::string& text, const std::string& where) {
    double value = 0.0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    auto result = std::from_chars(begin, end, value);
    if (result.ec != std::errc() || result.ptr != end) {
        throw ParseError(where + ": '" + text + "' is not a number");
    }
    return value;
}

std::int64_t parse_strict_int(const std::string& text, const std::string& where) {
    std::int64_t value = 0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    auto result = std::from_chars(begin, end, value);
    if (result.ec != std::errc() || result.ptr != end) {
        throw ParseError(where + ": '" + text + "' is not an integer");
    }
    return value;
}

std::uint64_t parse_strict_u64(const std::string& text, const std::string& where) {
    std::uint64_t value = 0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    auto result = std::from_chars(begin, end, value);
    if (result.ec != std::errc() || result.ptr != end) {
        throw ParseError(where + ": '" + text + "' is not an unsigned integer");
    }
    return value;
}

}  // namespace

ConfigMap ConfigMap::parse_string(const std::string& text, const std::string& origin) {
    ConfigMap map;
    map.origin_ = origin;
    const std::vector<std::string> lines = split_lines(text);
    for (size_t i = 0; i < lines.size(); ++i) {
        const int line_no = static_cast<int>(i + 1);
        std::string line = lines[i];
        if (size_t hash = line.find('#'); hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ParseError(origin + ":" + std::to_string(line_no) +
                             ": expected 'key = value', got '" + line + "'");
        }
        Entry entry;
        entry.key = trim(line.substr(0, eq));
        entry.value = trim(line.substr(eq + 1));
        entry.line = line_no;
        if (entry.key.empty()) {
            throw ParseError(origin + ":" + std::to_string(line_no) + ": empty key");
        }
        if (const Entry* prior = map.find(entry.key)) {
            throw ParseError(origin + ":" + std::to_string(line_no) + ": duplicate key '" +
                             entry.key + "' (first set on line " + std::to_string(prior->line) +
                             ")");
        }
        map.entries_.push_back(std::move(entry));
    }
    return map;
}

ConfigMap ConfigMap::parse_file(const std::filesystem::path& path) {
    return parse_string(read_text_file(path), path.string());
}

const ConfigMap::Entry* ConfigMap::find(const std::string& key) const {
    for (const Entry& entry : entries_) {
        if (entry.key == key) return &entry;
    }
    return nullptr;
}

ConfigMap::Entry* ConfigMap::find(const std::string& key) {
    for (Entry& entry : entries_) {
        if (entry.key == key) return &entry;
    }
    return nullptr;
}

bool ConfigMap::has(const std::string& key) const { return find(key) != nullptr; }

std::string ConfigMap::raw_require(const std::string& key) {
    Entry* entry = find(key);
    if (entry == nullptr) {
        throw ParseError(origin_ + ": missing required key '" + key + "'");
    }
    entry->consumed = true;
    return entry->value;
}

std::string ConfigMap::require_string(const std::string& key) { return raw_require(key); }

std::string ConfigMap::get_string(const std::string& key, const std::string& fallback) {
    return has(key) ? raw_require(key) : fallback;
}

double ConfigMap::require_double(const std::string& key) {
    return parse_strict_double(raw_require(key), origin_ + ": key '" + key + "'");
}

double ConfigMap::get_double(const std::string& key, double fallback) {
    return has(key) ? require_double(key) : fallback;
}

std::int64_t ConfigMap::require_int(const std::string& key) {
    return parse_strict_int(raw_require(key), origin_ + ": key '" + key + "'");
}

std::int64_t ConfigMap::get_int(const std::string& key, std::int64_t fallback) {
    return has(key) ? require_int(key) : fallback;
}

std::uint64_t ConfigMap::get_u64(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    return parse_strict_u64(raw_require(key), origin_ + ": key '" + key + "'");
}

bool ConfigMap::get_bool(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const std::string value = raw_require(key);
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ParseError(origin_ + ": key '" + key + "': '" + value +
                     "' is not a boolean (true|false|1|0)");
}

void ConfigMap::set(const std::string& key, const std::string& value) {
    if (Entry* entry = find(key)) {
        entry->value = value;
        entry->consumed = true;
        return;
    }
    Entry entry;
    entry.key = key;
    entry.value = value;
    entry.line = 0;
    entry.consumed = true;
    entries_.push_back(std::move(entry));
}

void ConfigMap::set_double(const std::string& key, double value) { set(key, format_double(value)); }

void ConfigMap::set_int(const std::string& key, std::int64_t value) {
    set(key, std::to_string(value));
}

void ConfigMap::set_u64(const std::string& key, std::uint64_t value) {
    set(key, std::to_string(value));
}

void ConfigMap::set_bool(const std::string& key, bool value) { set(key, value ? "true" : "false"); }

void ConfigMap::reject_unknown() const {
    std::string complaint;
    for (const Entry& entry : entries_) {
        if (entry.consumed) continue;
        if (!complaint.empty()) complaint += "; ";
        complaint += "'" + entry.key + "' (line " + std::to_string(entry.line) + ")";
    }
    if (!complaint.empty()) {
        throw ParseError(origin_ + ": unknown key(s): " + complaint);
    }
}

std::string ConfigMap::serialize() const {
    std::string out;
    for (const Entry& entry : entries_) {
        out += entry.key + " = " + entry.value + "\n";
    }
    return out;
}

std::vector<std::pair<std::string, std::string>> ConfigMap::entries() const {
    std::vector<std::pair<std::string, std::string>> out;
    out.reserve(entries_.size());
    for (const Entry& entry : entries_) out.emplace_back(entry.key, entry.value);
    return out;
}

std::string format_double(double value) {
    std::array<char, 64> buf{};
    auto result = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    return std::string(buf.data(), result.ptr);
}

// --- binary primitives -------------------------------------------------------

namespace bin {

void put_u32(std::ostream& out, std::uint32_t value) {
    const std::array<char, 4> bytes = {
        static_cast<char>(value & 0xff),
        static_cast<char>((value >> 8) & 0xff),
        static_cast<char>((value >> 16) & 0xff),
        static_cast<char>((value >> 24) & 0xff),
    };
    out.write(bytes.data(), bytes.size());
}

void put_u64(std::ostream& out, std::uint64_t value) {
    put_u32(out, static_cast<std::uint32_t>(value & 0xffffffffull));
    put_u32(out, static_cast<std::uint32_t>(value >> 32));
}

std::uint32_t take_u32(std::istream& in, const std::filesystem::path& path) {
    std::array<unsigned char, 4> bytes{};
    in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
    if (!in) throw IoError("unexpected end of file in " + path.string());
    return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
           (static_cast<std::uint32_t>(bytes[2]) << 16) |
           (static_cast<std::uint32_t>(bytes[3]) << 24);
}

std::uint64_t take_u64(std::istream& in, const std::filesystem::path& path) {
    const std::uint64_t lo = take_u32(in, path);
    const std::uint64_t hi = take_u32(in, path);
    return lo | (hi << 32);
}

void put_f32(std::ostream& out, float value) { put_u32(out, std::bit_cast<std::uint32_t>(value)); }

void put_f64(std::ostream& out, double value) {
    put_u64(out, std::bit_cast<std::uint64_t>(value));
}

float take_f32(std::istream& in, const std::filesystem::path& path) {
    return std::bit_cast<float>(take_u32(in, path));
}

double take_f64(std::istream& in, const std::filesystem::path& path) {
    return std::bit_cast<double>(take_u64(in, path));
}

void check_magic(std::istream& in, const char* magic, const std::filesystem::path& path) {
    std::array<char, 4> got{};
    in.read(got.data(), got.size());
    if (!in || std::string(got.data(), 4) != magic) {
        throw ParseError(path.string() + ": bad magic, expected '" + std::string(magic) + "'");
    }
}

void check_trailing(std::istream& in, const std::filesystem::path& path) {
    in.peek();
    if (!in.eof()) throw ParseError(path.string() + ": trailing bytes after payload");
}

}  // namespace bin

namespace {

void check_dims(std::uint32_t width, std::uint32_t height, const std::filesystem::path& path) {
    if (width == 0 || height == 0 ||
        static_cast<std::uint64_t>(width) * height > 100'000'000ull) {
        throw ParseError(path.string() + ": implausible dimensions " + std::to_string(width) +
                         "x" + std::to_string(height));
    }
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + path.string());
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return in;
}

void finish_out(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw IoError("write failure on " + path.string());
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out = open_out(path);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    finish_out(out, path);
}

}  // namespace

// --- flow fields --------------------------------------------------------------

void write_flow_file(const std::filesystem::path& path, const FlowField& flow) {
    std::ofstream out = open_out(path);
    out.write("UVFL", 4);
    bin::put_u32(out, static_cast<std::uint32_t>(flow.width));
    bin::put_u32(out, static_cast<std::uint32_t>(flow.height));
    for (double value : flow.data) bin::put_f32(out, static_cast<float>(value));
    finish_out(out, path);
}

FlowField read_flow_file(const std::filesystem::path& path) {
    std::ifstream in = open_in(path);
    bin::check_magic(in, "UVFL", path);
    const std::uint32_t width = bin::take_u32(in, path);
    const std::uint32_t height = bin::take_u32(in, path);
    check_dims(width, height, path);
    FlowField flow(static_cast<int>(width), static_cast<int>(height));
    for (double& value : flow.data) value = static_cast<double>(bin::take_f32(in, path));
    bin::check_trailing(in, path);
    return flow;
}

// --- masks ----------------------------------------------------------------------

void write_mask_file(const std::filesystem::path& path, const PixelMask& mask) {
    std::ofstream out = open_out(path);
    out.write("MASK", 4);
    bin::put_u32(out, static_cast<std::uint32_t>(mask.width));
    bin::put_u32(out, static_cast<std::uint32_t>(mask.height));
    const int bytes_per_row = (mask.width + 7) / 8;
    std::vector<char> row(static_cast<size_t>(bytes_per_row));
    for (int y = 0; y < mask.height; ++y) {
        std::fill(row.begin(), row.end(), 0);
        for (int x = 0; x < mask.width; ++x) {
            if (mask.at(x, y)) row[static_cast<size_t>(x / 8)] |= static_cast<char>(1 << (x % 8));
        }
        out.write(row.data(), static_cast<std::streamsize>(row.size()));
    }
    finish_out(out, path);
}

PixelMask read_mask_file(const std::filesystem::path& path) {
    std::ifstream in = open_in(path);
    bin::check_magic(in, "MASK", path);
    const std::uint32_t width = bin::take_u32(in, path);
    const std::uint32_t height = bin::take_u32(in, path);
    check_dims(width, height, path);
    PixelMask mask(static_cast<int>(width), static_cast<int>(height));
    const int bytes_per_row = (static_cast<int>(width) + 7) / 8;
    std::vector<unsigned char> row(static_cast<size_t>(bytes_per_row));
    for (std::uint32_t y = 0; y < height; ++y) {
        in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
        if (!in) throw IoError("unexpected end of file in " + path.string());
        for (std::uint32_t x = 0; x < width; ++x) {
            mask.set(static_cast<int>(x), static_cast<int>(y),
                     (row[x / 8] >> (x % 8)) & 1u);
        }
    }
    bin::check_trailing(in, path);
    return mask;
}

// --- motion lists -----------------------------------------------------------------

void write_motions_file(const std::filesystem::path& path,
                        const std::vector<RelativeMotion>& motions) {
    std::string text;
    for (const RelativeMotion& m : motions) {
        m.validate();
        text += format_double(m.translation.x()) + " " + format_double(m.translation.y()) + " " +
                format_double(m.translation.z()) + " " + format_double(m.rotation.x()) + " " +
                format_double(m.rotation.y()) + " " + format_double(m.rotation.z()) + "\n";
    }
    write_text_file(path, text);
}

std::vector<RelativeMotion> read_motions_file(const std::filesystem::path& path) {
    const std::vector<std::string> lines = split_lines(read_text_file(path));
    std::vector<RelativeMotion> motions;
    for (size_t i = 0; i < lines.size(); ++i) {
        std::string line = lines[i];
        if (size_t hash = line.find('#'); hash != std::string::npos) line = line.substr(0, hash);
        if (trim(line).empty()) continue;
        const std::vector<std::string> tokens = split_tokens(line);
        const std::string where = path.string() + ":" + std::to_string(i + 1);
        if (tokens.size() != 6) {
            throw ParseError(where + ": expected 6 numbers, got " +
                             std::to_string(tokens.size()));
        }
        std::array<double, 6> v{};
        for (size_t t = 0; t < 6; ++t) v[t] = parse_strict_double(tokens[t], where);
        RelativeMotion motion;
        motion.translation = Vec3(v[0], v[1], v[2]);
        motion.rotation = Vec3(v[3], v[4], v[5]);
        motion.validate();
        motions.push_back(motion);
    }
    return motions;
}

// --- datasets --------------------------------------------------------------------

namespace {

std::string sample_stem(size_t index) {
    std::array<char, 32> buf{};
    std::snprintf(buf.data(), buf.size(), "flow_%06zu", index);
    return std::string(buf.data());
}

}  // namespace

void save_dataset(const std::filesystem::path& dir, const std::vector<Sample>& samples,
                  const ConfigMap& echo) {
    if (samples.empty()) throw Error("refusing to save an empty dataset");
    std::filesystem::create_directories(dir);
    const CameraIntrinsics& k = samples.front().intrinsics;
    k.validate();

    ConfigMap meta;
    for (const auto& [key, value] : echo.entries()) meta.set(key, value);
    meta.set_int("count", static_cast<std::int64_t>(samples.size()));
    meta.set_int("width", k.width);
    meta.set_int("height", k.height);
    meta.set_double("fx", k.fx);
    meta.set_double("fy", k.fy);
    meta.set_double("ox", k.ox);
    meta.set_double("oy", k.oy);
    write_text_file(dir / "meta.cfg", meta.serialize());

    std::vector<RelativeMotion> motions;
    motions.reserve(samples.size());
    for (size_t i = 0; i < samples.size(); ++i) {
        const Sample& sample = samples[i];
        if (sample.intrinsics.width != k.width || sample.intrinsics.height != k.height) {
            throw ShapeMismatch("dataset samples must share one camera geometry");
        }
        write_flow_file(dir / (sample_stem(i) + ".uvfl"), sample.flow);
        write_mask_file(dir / (sample_stem(i) + ".msk"), sample.valid_mask);
        motions.push_back(sample.motion);
    }
    write_motions_file(dir / "motions.txt", motions);
}

ConfigMap read_dataset_meta(const std::filesystem::path& dir) {
    return ConfigMap::parse_file(dir / "meta.cfg");
}

std::vector<Sample> load_dataset(const std::filesystem::path& dir) {
    ConfigMap meta = read_dataset_meta(dir);
    const std::int64_t count = meta.require_int("count");
    CameraIntrinsics k;
    k.width = static_cast<int>(meta.require_int("width"));
    k.height = static_cast<int>(meta.require_int("height"));
    k.fx = meta.require_double("fx");
    k.fy = meta.require_double("fy");
    k.ox = meta.require_double("ox");
    k.oy = meta.require_double("oy");
    k.validate();
    if (count <= 0) throw ParseError(dir.string() + ": dataset count must be positive");

    const std::vector<RelativeMotion> motions = read_motions_file(dir / "motions.txt");
    if (motions.size() != static_cast<size_t>(count)) {
        throw MismatchError(dir.string() + ": meta says " + std::to_string(count) +
                            " samples but motions.txt has " + std::to_string(motions.size()));
    }

    std::vector<Sample> samples;
    samples.reserve(static_cast<size_t>(count));
    for (size_t i = 0; i < static_cast<size_t>(count); ++i) {
        Sample sample;
        sample.flow = read_flow_file(dir / (sample_stem(i) + ".uvfl"));
        sample.valid_mask = read_mask_file(dir / (sample_stem(i) + ".msk"));
        sample.motion = motions[i];
        sample.intrinsics = k;
        if (sample.flow.width != k.width || sample.flow.height != k.height ||
            sample.valid_mask.width != k.width || sample.valid_mask.height != k.height) {
            throw ShapeMismatch(dir.string() + ": sample " + std::to_string(i) +
                                " does not match the dataset camera geometry");
        }
        samples.push_back(std::move(sample));
    }
    return samples;
}

// --- trajectories -------------------------------------------------------------------

void write_trajectory_mat(const std::filesystem::path& path, const Trajectory& traj) {
    traj.validate();
    std::string text;
    for (const Pose& pose : traj.poses) {
        for (int row = 0; row < 3; ++row) {
            for (int col = 0; col < 3; ++col) {
                text += format_double(pose.rotation(row, col)) + " ";
            }
            text += format_double(pose.position(row));
            text += (row == 2) ? "\n" : " ";
        }
    }
    write_text_file(path, text);
}

void write_trajectory_quat(const std::filesystem::path& path, const Trajectory& traj) {
    traj.validate();
    std::string text;
    for (size_t i = 0; i < traj.size(); ++i) {
        Eigen::Quaterniond q(traj.poses[i].rotation);
        q.normalize();
        if (q.w() < 0.0) q.coeffs() = -q.coeffs();
        text += format_double(traj.timestamps[i]) + " " +
                format_double(traj.poses[i].position.x()) + " " +
                format_double(traj.poses[i].position.y()) + " " +
                format_double(traj.poses[i].position.z()) + " " + format_double(q.x()) + " " +
                format_double(q.y()) + " " + format_double(q.z()) + " " + format_double(q.w()) +
                "\n";
    }
    write_text_file(path, text);
}

Trajectory read_trajectory(const std::filesystem::path& path, TrajectoryFormat format) {
    const std::vector<std::string> lines = split_lines(read_text_file(path));
    Trajectory traj;
    size_t data_index = 0;
    for (size_t i = 0; i < lines.size(); ++i) {
        std::string line = lines[i];
        if (size_t hash = line.find('#'); hash != std::string::npos) line = line.substr(0, hash);
        if (trim(line).empty()) continue;
        const std::vector<std::string> tokens = split_tokens(line);
        const std::string where = path.string() + ":" + std::to_string(i + 1);

        if (format == TrajectoryFormat::kAuto) {
            if (tokens.size() == 12) {
                format = TrajectoryFormat::kMat;
            } else if (tokens.size() == 8) {
                format = TrajectoryFormat::kQuat;
            } else {
                throw ParseError(where + ": cannot infer trajectory format from " +
                                 std::to_string(tokens.size()) +
                                 " fields (expected 12 or 8)");
            }
        }

        Pose pose;
        double timestamp = 0.0;
        if (format == TrajectoryFormat::kMat) {
            if (tokens.size() != 12) {
                throw ParseError(where + ": expected 12 numbers, got " +
                                 std::to_string(tokens.size()));
            }
            std::array<double, 12> v{};
            for (size_t t = 0; t < 12; ++t) v[t] = parse_strict_double(tokens[t], where);
            for (int row = 0; row < 3; ++row) {
                pose.rotation(row, 0) = v[static_cast<size_t>(4 * row)];
                pose.rotation(row, 1) = v[static_cast<size_t>(4 * row + 1)];
                pose.rotation(row, 2) = v[static_cast<size_t>(4 * row + 2)];
                pose.position(row) = v[static_cast<size_t>(4 * row + 3)];
            }
            timestamp = static_cast<double>(data_index);
        } else {
            if (tokens.size() != 8) {
                throw ParseError(where + ": expected 8 numbers, got " +
                                 std::to_string(tokens.size()));
            }
            std::array<double, 8> v{};
            for (size_t t = 0; t < 8; ++t) v[t] = parse_strict_double(tokens[t], where);
            timestamp = v[0];
            pose.position = Vec3(v[1], v[2], v[3]);
            Eigen::Quaterniond q(v[7], v[4], v[5], v[6]);
            if (std::abs(q.norm() - 1.0) > 1e-3) {
                throw ParseError(where + ": quaternion norm " + format_double(q.norm()) +
                                 " is far from 1");
            }
            q.normalize();
            pose.rotation = q.toRotationMatrix();
        }
        try {
            pose.validate();
        } catch (const Error& e) {
            throw ParseError(where + ": " + e.what());
        }
        traj.timestamps.push_back(timestamp);
        traj.poses.push_back(pose);
        ++data_index;
    }
    try {
        traj.validate();
    } catch (const Error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return traj;
}

// --- manifests ----------------------------------------------------------------------

std::string version_string() { return "flowpose 0.1.0"; }

std::string iso8601_utc_now() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm parts{};
    gmtime_r(&now, &parts);
    std::array<char, 32> buf{};
    std::strftime(buf.data(), buf.size(), "%Y-%m-%dT%H:%M:%SZ", &parts);
    return std::string(buf.data());
}

void append_manifest(const std::filesystem::path& dir, const RunManifest& manifest) {
    std::filesystem::create_directories(dir);
    nlohmann::json j;
    j["command"] = manifest.command;
    j["seed"] = manifest.seed;
    j["version"] = version_string();
    j["started_at"] = manifest.started_at;
    j["finished_at"] = manifest.finished_at;
    nlohmann::json cfg = nlohmann::json::object();
    for (const auto& [key, value] : manifest.config.entries()) cfg[key] = value;
    j["config"] = cfg;
    j["outputs"] = manifest.outputs;

    const std::filesystem::path path = dir / "manifest.jsonl";
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw IoError("cannot open " + path.string());
    out << j.dump() << "\n";
    out.flush();
    if (!out) throw IoError("write failure on " + path.string());
}

}  // namespace flowpose
