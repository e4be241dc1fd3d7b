#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "flowpose/flow.hpp"
#include "flowpose/geometry.hpp"

namespace flowpose {

// Procedural scene parameters. environment_id selects the procedural field;
// samples generated under different environment ids see structurally
// different worlds, which is what "unseen environment" means for the
// generalization experiments.
struct SceneConfig {
    int point_count = 40;                                // primitives in the world
    std::pair<double, double> depth_range{2.0, 20.0};    // scene units, min > 0
    std::pair<double, double> translation_range{0.05, 0.4};
    std::pair<double, double> rotation_range{0.01, 0.15};  // radians
    std::uint64_t seed = 0;
    int environment_id = 0;

    void validate() const;
};

// One image-free training sample: ground-truth flow standing in for the
// matching frontend, the motion label, and the camera that produced them.
struct Sample {
    FlowField flow;
    RelativeMotion motion;
    CameraIntrinsics intrinsics;
    PixelMask valid_mask;
};

enum class MotionPattern {
    kFull6Dof,       // all six components drawn independently
    kPlanarCarlike,  // forward translation plus yaw only
};

// Depth of the procedural world at the given camera pose. Deterministic in
// (config.seed, config.environment_id, pose, k); depths clamped to
// config.depth_range.
DepthGrid render_depth(const SceneConfig& config, const Pose& pose, const CameraIntrinsics& k);

// Exact forward flow induced by moving a camera with the given motion in
// front of the depth map: unproject at depth, transform, reproject. The mask
// is false where the point falls behind either camera or reprojects outside
// frame t+1.
std::pair<FlowField, PixelMask> flow_from_depth_motion(const DepthGrid& depth,
                                                       const RelativeMotion& motion,
                                                       const CameraIntrinsics& k);

// The sample at a given index: camera pose and motion drawn from per-index
// streams, motions with less than 80% valid pixels redrawn. A pure function
// of (config, index, pattern, k), so callers may materialize any subset in
// any order and always get the same data.
Sample generate_sample(const SceneConfig& config, std::uint64_t index, MotionPattern pattern,
                       const CameraIntrinsics& k);

// generate_sample for indices 0..n-1.
std::vector<Sample> generate_dataset(const SceneConfig& config, int n, MotionPattern pattern,
                                     const CameraIntrinsics& k);

struct FlowNoiseModel {
    double sigma = 0.5;      // px, zero-mean gaussian per component
    double dropout = 0.05;   // fraction of pixels zeroed

    void validate() const;
};

// Simulates an imperfect matching frontend: adds per-component gaussian noise
// and zeroes a random fraction of pixels. Deterministic given seed.
FlowField corrupt_flow(const FlowField& flow, const FlowNoiseModel& noise, std::uint64_t seed);

// The default desk-scale camera: a 64x48 grid with a 90 degree horizontal FoV
// and centered principal point.
CameraIntrinsics default_camera();

}  // namespace flowpose
