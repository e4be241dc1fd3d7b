#pragma once

#include <string>
#include <utility>
#include <vector>

#include "flowpose/geometry.hpp"

namespace flowpose {

// Time-ordered absolute camera poses.
struct Trajectory {
    std::vector<double> timestamps;
    std::vector<Pose> poses;

    size_t size() const { return poses.size(); }

    // Timestamps strictly increasing, one per pose.
    void validate() const;
};

// pose_{i+1} = compose(pose_i, motion_i); timestamps 0, 1, 2, ...
Trajectory integrate(const std::vector<RelativeMotion>& motions, const Pose& start);

// Inverse of integrate: the frame-to-frame motions of a trajectory.
std::vector<RelativeMotion> differentiate(const Trajectory& traj);

// gt_position ~ scale * rotation * est_position + translation.
struct SimilarityTransform {
    double scale = 1.0;
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 apply(const Vec3& p) const { return scale * (rotation * p) + translation; }
};

// Least-squares similarity alignment of est positions onto gt positions
// (Umeyama). Needs >= 3 poses and non-collinear gt.
SimilarityTransform align_similarity(const Trajectory& est, const Trajectory& gt);

// Same minimization with the scale pinned to 1.
SimilarityTransform align_rigid(const Trajectory& est, const Trajectory& gt);

enum class AlignMode { kSimilarity, kRigid, kNone };

AlignMode align_mode_from_string(const std::string& name);
std::string to_string(AlignMode mode);

// Position RMSE after the selected alignment.
double ate(const Trajectory& est, const Trajectory& gt, AlignMode mode);

struct SegmentDrift {
    double length = 0.0;             // nominal segment length, scene units
    double t_rel_percent = 0.0;      // mean translational drift over segments of this length
    double r_rel_deg_per_100 = 0.0;  // mean rotational drift, degrees per 100 units
    size_t count = 0;                // segments evaluated
};

struct DriftResult {
    double t_rel_percent = 0.0;
    double r_rel_deg_per_100 = 0.0;
    std::vector<SegmentDrift> per_length;
};

// KITTI-style relative drift. For every start frame and segment length, the
// segment ends at the first frame where the accumulated gt path length
// crosses the target (no interpolation); the error is the relative-pose
// discrepancy over that span, normalized by the nominal length, averaged over
// all segments.
DriftResult kitti_drift(const Trajectory& est, const Trajectory& gt,
                        const std::vector<double>& segment_lengths);

// Desk-scale defaults; the conventional 100..800 band applies when scene
// units are meters.
std::vector<double> default_segment_lengths();

// Pairs the trajectories up for metric evaluation. Equal lengths pair by
// index; otherwise poses are matched by timestamp within the tolerance, and
// fewer than two matches is a MismatchError.
std::pair<Trajectory, Trajectory> match_trajectories(const Trajectory& est, const Trajectory& gt,
                                                     double tolerance = 1e-6);

struct MetricReport {
    double ate_value = 0.0;
    AlignMode align_mode = AlignMode::kSimilarity;
    DriftResult drift;
};

MetricReport evaluate_trajectories(const Trajectory& est, const Trajectory& gt, AlignMode mode,
                                   const std::vector<double>& segment_lengths);

}  // namespace flowpose
