#include "flowpose/eval.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "flowpose/errors.hpp"

namespace flowpose {

void Trajectory::validate() const {
    if (timestamps.size() != poses.size()) {
        throw ShapeMismatch("trajectory has " + std::to_string(timestamps.size()) +
                            " timestamps for " + std::to_string(poses.size()) + " poses");
    }
    if (poses.size() < 2) {
        throw TrajectoryTooShort("trajectory needs at least 2 poses, got " +
                                 std::to_string(poses.size()));
    }
    for (size_t i = 0; i + 1 < timestamps.size(); ++i) {
        if (!(timestamps[i] < timestamps[i + 1])) {
            throw ParseError("timestamps not strictly increasing at index " + std::to_string(i));
        }
    }
    for (const Pose& pose : poses) pose.validate();
}

Trajectory integrate(const std::vector<RelativeMotion>& motions, const Pose& start) {
    start.validate();
    Trajectory traj;
    traj.timestamps.reserve(motions.size() + 1);
    traj.poses.reserve(motions.size() + 1);
    traj.timestamps.push_back(0.0);
    traj.poses.push_back(start);
    for (size_t i = 0; i < motions.size(); ++i) {
        traj.timestamps.push_back(static_cast<double>(i + 1));
        traj.poses.push_back(compose(traj.poses.back(), motions[i]));
    }
    return traj;
}

std::vector<RelativeMotion> differentiate(const Trajectory& traj) {
    traj.validate();
    std::vector<RelativeMotion> motions;
    motions.reserve(traj.size() - 1);
    for (size_t i = 0; i + 1 < traj.size(); ++i) {
        motions.push_back(motion_between(traj.poses[i], traj.poses[i + 1]));
    }
    return motions;
}

namespace {

struct AlignmentInputs {
    Vec3 mean_est;
    Vec3 mean_gt;
    double var_est = 0.0;             // mean squared deviation of est positions
    Mat3 cross = Mat3::Zero();        // (1/n) * sum (gt - mean_gt)(est - mean_est)^T
    size_t count = 0;
};

AlignmentInputs alignment_inputs(const Trajectory& est, const Trajectory& gt) {
    est.validate();
    gt.validate();
    if (est.size() != gt.size()) {
        throw MismatchError("trajectory lengths differ: " + std::to_string(est.size()) + " vs " +
                            std::to_string(gt.size()));
    }
    const size_t n = est.size();
    if (n < 3) {
        throw DegenerateTrajectory("alignment needs at least 3 poses, got " + std::to_string(n));
    }
    AlignmentInputs in;
    in.count = n;
    in.mean_est = Vec3::Zero();
    in.mean_gt = Vec3::Zero();
    for (size_t i = 0; i < n; ++i) {
        in.mean_est += est.poses[i].position;
        in.mean_gt += gt.poses[i].position;
    }
    in.mean_est /= static_cast<double>(n);
    in.mean_gt /= static_cast<double>(n);
    for (size_t i = 0; i < n; ++i) {
        const Vec3 de = est.poses[i].position - in.mean_est;
        const Vec3 dg = gt.poses[i].position - in.mean_gt;
        in.var_est += de.squaredNorm();
        in.cross += dg * de.transpose();
    }
    in.var_est /= static_cast<double>(n);
    in.cross /= static_cast<double>(n);
    return in;
}

struct RotationFit {
    Mat3 rotation;
    double trace_ds = 0.0;  // trace(D * S), the numerator of the scale estimate
};

RotationFit fit_rotation(const Mat3& cross) {
    Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec3 sv = svd.singularValues();
    // The rotation is only determined when the centered point clouds span a
    // plane: two non-negligible singular values.
    if (sv(0) <= 0.0 || sv(1) <= 1e-12 * sv(0)) {
        throw DegenerateTrajectory("positions are collinear or coincident; alignment undefined");
    }
    Vec3 s_diag(1.0, 1.0, 1.0);
    if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) s_diag(2) = -1.0;
    RotationFit fit;
    fit.rotation = svd.matrixU() * s_diag.asDiagonal() * svd.matrixV().transpose();
    fit.trace_ds = sv.dot(s_diag);
    return fit;
}

}  // namespace

SimilarityTransform align_similarity(const Trajectory& est, const Trajectory& gt) {
    const AlignmentInputs in = alignment_inputs(est, gt);
    if (in.var_est <= 0.0) {
        throw DegenerateTrajectory("estimated positions are all identical; scale undefined");
    }
    const RotationFit fit = fit_rotation(in.cross);
    SimilarityTransform out;
    out.rotation = fit.rotation;
    out.scale = fit.trace_ds / in.var_est;
    out.translation = in.mean_gt - out.scale * (out.rotation * in.mean_est);
    return out;
}

SimilarityTransform align_rigid(const Trajectory& est, const Trajectory& gt) {
    const AlignmentInputs in = alignment_inputs(est, gt);
    const RotationFit fit = fit_rotation(in.cross);
    SimilarityTransform out;
    out.rotation = fit.rotation;
    out.scale = 1.0;
    out.translation = in.mean_gt - out.rotation * in.mean_est;
    return out;
}

AlignMode align_mode_from_string(const std::string& name) {
    if (name == "similarity") return AlignMode::kSimilarity;
    if (name == "rigid") return AlignMode::kRigid;
    if (name == "none") return AlignMode::kNone;
    throw ParseError("unknown alignment mode '" + name + "' (expected similarity|rigid|none)");
}

std::string to_string(AlignMode mode) {
    switch (mode) {
        case AlignMode::kSimilarity: return "similarity";
        case AlignMode::kRigid: return "rigid";
        case AlignMode::kNone: return "none";
    }
    throw Error("invalid alignment mode");
}

double ate(const Trajectory& est, const Trajectory& gt, AlignMode mode) {
    est.validate();
    gt.validate();
    if (est.size() != gt.size()) {
        throw MismatchError("trajectory lengths differ: " + std::to_string(est.size()) + " vs " +
                            std::to_string(gt.size()));
    }
    SimilarityTransform transform;  // identity for kNone
    if (mode == AlignMode::kSimilarity) transform = align_similarity(est, gt);
    if (mode == AlignMode::kRigid) transform = align_rigid(est, gt);
    double sum_sq = 0.0;
    for (size_t i = 0; i < est.size(); ++i) {
        const Vec3 err = transform.apply(est.poses[i].position) - gt.poses[i].position;
        sum_sq += err.squaredNorm();
    }
    return std::sqrt(sum_sq / static_cast<double>(est.size()));
}

std::vector<double> default_segment_lengths() { return {5.0, 10.0, 20.0, 40.0}; }

DriftResult kitti_drift(const Trajectory& est, const Trajectory& gt,
                        const std::vector<double>& segment_lengths) {
    est.validate();
    gt.validate();
    if (est.size() != gt.size()) {
        throw MismatchError("trajectory lengths differ: " + std::to_string(est.size()) + " vs " +
                            std::to_string(gt.size()));
    }
    if (segment_lengths.empty()) throw Error("no segment lengths given");
    std::vector<double> lengths = segment_lengths;
    std::sort(lengths.begin(), lengths.end());
    for (double len : lengths) {
        if (!(len > 0.0)) throw Error("segment lengths must be positive");
    }

    const size_t n = gt.size();
    // Accumulated path length of the reference trajectory.
    std::vector<double> dist(n, 0.0);
    for (size_t i = 1; i < n; ++i) {
        dist[i] = dist[i - 1] + (gt.poses[i].position - gt.poses[i - 1].position).norm();
    }

    struct Accum {
        double t_sum = 0.0;
        double r_sum = 0.0;
        size_t count = 0;
    };
    std::vector<Accum> per_length(lengths.size());
    Accum pooled;

    for (size_t first = 0; first < n; ++first) {
        size_t cursor = first;
        for (size_t li = 0; li < lengths.size(); ++li) {
            const double target = dist[first] + lengths[li];
            // Lengths are evaluated in ascending order, so the end frame
            // search can resume where the previous length stopped. The
            // segment ends at the first frame whose accumulated path length
            // reaches the target.
            while (cursor < n && dist[cursor] < target) ++cursor;
            if (cursor >= n) break;
            const size_t last = cursor;

            const Mat3& r_gf = gt.poses[first].rotation;
            const Mat3& r_ef = est.poses[first].rotation;
            const Mat3 delta_gt_r = r_gf.transpose() * gt.poses[last].rotation;
            const Vec3 delta_gt_t =
                r_gf.transpose() * (gt.poses[last].position - gt.poses[first].position);
            const Mat3 delta_est_r = r_ef.transpose() * est.poses[last].rotation;
            const Vec3 delta_est_t =
                r_ef.transpose() * (est.poses[last].position - est.poses[first].position);

            // Residual motion after removing the reference segment motion.
            const Mat3 err_r = delta_est_r.transpose() * delta_gt_r;
            const Vec3 err_t = delta_est_r.transpose() * (delta_gt_t - delta_est_t);
            // Geodesic angle via atan2(sin, cos): unlike acos of the trace
            // alone, this does not blow machine epsilon up to ~1e-8 when the
            // rotations agree.
            const Vec3 axis(err_r(2, 1) - err_r(1, 2), err_r(0, 2) - err_r(2, 0),
                            err_r(1, 0) - err_r(0, 1));
            const double angle = std::atan2(0.5 * axis.norm(), 0.5 * (err_r.trace() - 1.0));

            const double len = lengths[li];
            const double t_rel = 100.0 * err_t.norm() / len;
            const double r_rel = 100.0 * angle * (180.0 / std::numbers::pi) / len;
            per_length[li].t_sum += t_rel;
            per_length[li].r_sum += r_rel;
            per_length[li].count += 1;
            pooled.t_sum += t_rel;
            pooled.r_sum += r_rel;
            pooled.count += 1;
        }
    }

    if (pooled.count == 0) {
        throw TrajectoryTooShort("reference path (" + std::to_string(dist.back()) +
                                 " units) never spans the smallest segment length");
    }

    DriftResult out;
    out.t_rel_percent = pooled.t_sum / static_cast<double>(pooled.count);
    out.r_rel_deg_per_100 = pooled.r_sum / static_cast<double>(pooled.count);
    for (size_t li = 0; li < lengths.size(); ++li) {
        if (per_length[li].count == 0) continue;
        SegmentDrift seg;
        seg.length = lengths[li];
        seg.t_rel_percent = per_length[li].t_sum / static_cast<double>(per_length[li].count);
        seg.r_rel_deg_per_100 = per_length[li].r_sum / static_cast<double>(per_length[li].count);
        seg.count = per_length[li].count;
        out.per_length.push_back(seg);
    }
    return out;
}

std::pair<Trajectory, Trajectory> match_trajectories(const Trajectory& est, const Trajectory& gt,
                                                     double tolerance) {
    est.validate();
    gt.validate();
    if (est.size() == gt.size()) return {est, gt};

    Trajectory est_out;
    Trajectory gt_out;
    size_t j = 0;
    for (size_t i = 0; i < est.size(); ++i) {
        while (j < gt.size() && gt.timestamps[j] < est.timestamps[i] - tolerance) ++j;
        if (j >= gt.size()) break;
        if (std::abs(gt.timestamps[j] - est.timestamps[i]) <= tolerance) {
            est_out.timestamps.push_back(est.timestamps[i]);
            est_out.poses.push_back(est.poses[i]);
            gt_out.timestamps.push_back(gt.timestamps[j]);
            gt_out.poses.push_back(gt.poses[j]);
            ++j;
        }
    }
    if (est_out.size() < 2) {
        throw MismatchError("trajectories of " + std::to_string(est.size()) + " and " +
                            std::to_string(gt.size()) +
                            " poses share fewer than 2 timestamps");
    }
    return {est_out, gt_out};
}

MetricReport evaluate_trajectories(const Trajectory& est, const Trajectory& gt, AlignMode mode,
                                   const std::vector<double>& segment_lengths) {
    MetricReport report;
    report.align_mode = mode;
    report.ate_value = ate(est, gt, mode);
    report.drift = kitti_drift(est, gt, segment_lengths);
    return report;
}

}  // namespace flowpose
