#include "flowpose/synthgen.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>

#include "flowpose/util.hpp"

namespace flowpose {

namespace {

struct SpherePrim {
    Vec3 center;
    double radius;
};

struct PlanePrim {
    Vec3 normal;   // unit
    double offset; // n . X = offset
};

// The procedural world for one (seed, environment_id) pair: spheres scattered
// in a shell around the origin plus a few planes, so a camera near the origin
// sees geometry in every direction.
struct World {
    std::vector<SpherePrim> spheres;
    std::vector<PlanePrim> planes;
};

Vec3 random_unit(std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec3 v;
    do {
        v = Vec3(gauss(rng), gauss(rng), gauss(rng));
    } while (v.norm() < 1e-12);
    return v.normalized();
}

World build_world(const SceneConfig& config) {
    const double dmax = config.depth_range.second;
    auto rng = make_rng(derive_seed(config.seed, rng_stream::kWorld,
                                    static_cast<std::uint64_t>(config.environment_id)));
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    World world;
    const int n_planes = std::clamp(config.point_count / 8, 2, 6);
    const int n_spheres = std::max(config.point_count - n_planes, 0);
    world.planes.reserve(n_planes);
    for (int i = 0; i < n_planes; ++i) {
        PlanePrim p;
        p.normal = random_unit(rng);
        p.offset = (0.4 + 0.5 * uni(rng)) * dmax;
        world.planes.push_back(p);
    }
    world.spheres.reserve(n_spheres);
    for (int i = 0; i < n_spheres; ++i) {
        SpherePrim s;
        s.center = random_unit(rng) * ((0.3 + 0.5 * uni(rng)) * dmax);
        s.radius = (0.08 + 0.22 * uni(rng)) * dmax;
        world.spheres.push_back(s);
    }
    return world;
}

// Nearest-hit z-depth along the pixel ray. dir_cam has unit z, so the ray
// parameter is the camera-frame depth directly.
double raycast_depth(const World& world, const Vec3& origin, const Vec3& dir_world, double dmax) {
    double best = dmax;
    for (const auto& plane : world.planes) {
        const double denom = plane.normal.dot(dir_world);
        if (std::abs(denom) < 1e-12) continue;
        const double d = (plane.offset - plane.normal.dot(origin)) / denom;
        if (d > 1e-6 && d < best) best = d;
    }
    for (const auto& sphere : world.spheres) {
        const Vec3 oc = origin - sphere.center;
        const double a = dir_world.squaredNorm();
        const double b = 2.0 * dir_world.dot(oc);
        const double c = oc.squaredNorm() - sphere.radius * sphere.radius;
        const double disc = b * b - 4.0 * a * c;
        if (disc < 0) continue;
        const double sq = std::sqrt(disc);
        double d = (-b - sq) / (2.0 * a);
        if (d <= 1e-6) d = (-b + sq) / (2.0 * a);
        if (d > 1e-6 && d < best) best = d;
    }
    return best;
}

Pose draw_sample_pose(const SceneConfig& config, std::uint64_t index) {
    auto rng = make_rng(derive_seed(config.seed, rng_stream::kSamplePose,
                                    static_cast<std::uint64_t>(config.environment_id), index));
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    Pose pose;
    pose.position = 0.1 * config.depth_range.second * Vec3(uni(rng), uni(rng), uni(rng));
    Eigen::Quaterniond q(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
    while (q.norm() < 1e-9) q = Eigen::Quaterniond(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
    q.normalize();
    pose.rotation = q.toRotationMatrix();
    return pose;
}

RelativeMotion draw_motion(const SceneConfig& config, MotionPattern pattern, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const auto& tr = config.translation_range;
    const auto& rr = config.rotation_range;
    const double t_mag = tr.first + (tr.second - tr.first) * uni(rng);
    const double r_mag = rr.first + (rr.second - rr.first) * uni(rng);

    RelativeMotion m;
    if (pattern == MotionPattern::kFull6Dof) {
        m.translation = random_unit(rng) * t_mag;
        m.rotation = random_unit(rng) * r_mag;
    } else {
        // Car on a planar arc: yaw about y, translation along the chord of
        // the turn, nothing out of plane.
        const double yaw = (uni(rng) < 0.5 ? -1.0 : 1.0) * r_mag;
        const double heading = 0.5 * yaw;
        m.translation = t_mag * Vec3(std::sin(heading), 0.0, std::cos(heading));
        m.rotation = Vec3(0.0, yaw, 0.0);
    }
    return m;
}

}  // namespace

void SceneConfig::validate() const {
    if (!(depth_range.first > 0) || !(depth_range.second > depth_range.first)) {
        throw Error("SceneConfig: depth_range must satisfy 0 < min < max");
    }
    if (translation_range.second < translation_range.first ||
        rotation_range.second < rotation_range.first || translation_range.first < 0 ||
        rotation_range.first < 0) {
        throw Error("SceneConfig: degenerate motion ranges");
    }
    if (point_count <= 0) {
        throw Error("SceneConfig: point_count must be positive");
    }
}

void FlowNoiseModel::validate() const {
    if (sigma < 0 || dropout < 0 || dropout >= 1) {
        throw Error("FlowNoiseModel: requires sigma >= 0 and 0 <= dropout < 1");
    }
}

DepthGrid render_depth(const SceneConfig& config, const Pose& pose, const CameraIntrinsics& k) {
    config.validate();
    k.validate();
    const World world = build_world(config);
    const double dmin = config.depth_range.first;
    const double dmax = config.depth_range.second;

    DepthGrid grid(k.width, k.height);
    for (int y = 0; y < k.height; ++y) {
        for (int x = 0; x < k.width; ++x) {
            const Vec3 dir_cam((x - k.ox) / k.fx, (y - k.oy) / k.fy, 1.0);
            const Vec3 dir_world = pose.rotation * dir_cam;
            const double d = raycast_depth(world, pose.position, dir_world, dmax);
            grid.at(x, y) = std::clamp(d, dmin, dmax);
        }
    }
    return grid;
}

std::pair<FlowField, PixelMask> flow_from_depth_motion(const DepthGrid& depth,
                                                       const RelativeMotion& motion,
                                                       const CameraIntrinsics& k) {
    k.validate();
    motion.validate();
    require_same_shape(depth.width, depth.height, k.width, k.height, "flow_from_depth_motion");

    const Mat3 rot_t = exp_so3(motion.rotation).transpose();
    FlowField flow(k.width, k.height);
    PixelMask mask(k.width, k.height, true);
    for (int y = 0; y < k.height; ++y) {
        for (int x = 0; x < k.width; ++x) {
            const Vec3 p_t = unproject(Vec2(x, y), depth.at(x, y), k);
            const Vec3 p_t1 = rot_t * (p_t - motion.translation);
            if (p_t1.z() <= 1e-9) {
                mask.set(x, y, false);
                continue;
            }
            // Subtracting the self-reprojection rather than the raw pixel
            // makes both sides share the same rounding, so zero motion gives
            // exactly zero flow.
            const Vec2 base = project(p_t, k);
            const Vec2 reproj = project(p_t1, k);
            flow.u(x, y) = reproj.x() - base.x();
            flow.v(x, y) = reproj.y() - base.y();
            if (reproj.x() < 0 || reproj.x() > k.width - 1 || reproj.y() < 0 ||
                reproj.y() > k.height - 1) {
                mask.set(x, y, false);
            }
        }
    }
    return {std::move(flow), std::move(mask)};
}

Sample generate_sample(const SceneConfig& config, std::uint64_t index, MotionPattern pattern,
                       const CameraIntrinsics& k) {
    const Pose pose = draw_sample_pose(config, index);
    const DepthGrid depth = render_depth(config, pose, k);
    auto motion_rng = make_rng(derive_seed(config.seed, rng_stream::kSampleMotion,
                                           static_cast<std::uint64_t>(config.environment_id),
                                           index));
    const size_t min_valid = (static_cast<size_t>(k.width) * k.height * 8 + 9) / 10;
    for (int attempt = 0; attempt < 1000; ++attempt) {
        const RelativeMotion motion = draw_motion(config, pattern, motion_rng);
        auto [flow, mask] = flow_from_depth_motion(depth, motion, k);
        if (mask.count_valid() >= min_valid) {
            Sample sample;
            sample.flow = std::move(flow);
            sample.valid_mask = std::move(mask);
            sample.motion = motion;
            sample.intrinsics = k;
            return sample;
        }
    }
    throw Error("generate_sample: could not draw a motion keeping 80% of pixels valid; "
                "motion ranges are too large for the depth range");
}

std::vector<Sample> generate_dataset(const SceneConfig& config, int n, MotionPattern pattern,
                                     const CameraIntrinsics& k) {
    if (n <= 0) {
        throw Error("generate_dataset: sample count must be positive");
    }
    config.validate();
    k.validate();

    std::vector<Sample> samples;
    samples.reserve(n);
    for (int i = 0; i < n; ++i) {
        samples.push_back(generate_sample(config, static_cast<std::uint64_t>(i), pattern, k));
    }
    return samples;
}

FlowField corrupt_flow(const FlowField& flow, const FlowNoiseModel& noise, std::uint64_t seed) {
    noise.validate();
    FlowField out = flow;
    if (noise.sigma == 0.0 && noise.dropout == 0.0) {
        return out;
    }
    auto rng = make_rng(derive_seed(seed, rng_stream::kFlowNoise));
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, noise.sigma > 0 ? noise.sigma : 1.0);
    for (size_t p = 0; p < out.pixel_count(); ++p) {
        if (noise.dropout > 0 && uni(rng) < noise.dropout) {
            out.data[2 * p] = 0.0;
            out.data[2 * p + 1] = 0.0;
            continue;
        }
        if (noise.sigma > 0) {
            out.data[2 * p] += gauss(rng);
            out.data[2 * p + 1] += gauss(rng);
        }
    }
    return out;
}

CameraIntrinsics default_camera() {
    CameraIntrinsics k;
    k.width = 64;
    k.height = 48;
    k.fx = 32.0;
    k.fy = 32.0;
    k.ox = 32.0;
    k.oy = 24.0;
    return k;
}

}  // namespace flowpose
