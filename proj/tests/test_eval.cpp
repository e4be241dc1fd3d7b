#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "flowpose/eval.hpp"
#include "flowpose/util.hpp"

using namespace flowpose;

namespace {

Vec3 random_vec(std::mt19937_64& rng, double scale) {
    std::uniform_real_distribution<double> u(-scale, scale);
    return Vec3(u(rng), u(rng), u(rng));
}

Vec3 random_rotation_vec(std::mt19937_64& rng, double max_angle) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vec3 axis(normal(rng), normal(rng), normal(rng));
    axis.normalize();
    std::uniform_real_distribution<double> angle(0.0, max_angle);
    return axis * angle(rng);
}

Trajectory random_trajectory(std::uint64_t seed, int n, double step_scale = 0.5) {
    std::mt19937_64 rng = make_rng(seed);
    std::vector<RelativeMotion> motions;
    for (int i = 0; i < n - 1; ++i) {
        RelativeMotion m;
        m.translation = random_vec(rng, step_scale);
        m.rotation = random_rotation_vec(rng, 0.3);
        motions.push_back(m);
    }
    return integrate(motions, Pose{});
}

// Straight line along +z, unit spacing.
Trajectory straight_line(int n, double spacing = 1.0) {
    Trajectory t;
    for (int i = 0; i < n; ++i) {
        Pose p;
        p.position = Vec3(0, 0, spacing * i);
        t.poses.push_back(p);
        t.timestamps.push_back(static_cast<double>(i));
    }
    return t;
}

Trajectory transformed(const Trajectory& traj, const SimilarityTransform& s) {
    Trajectory out = traj;
    for (Pose& p : out.poses) {
        p.position = s.apply(p.position);
        p.rotation = s.rotation * p.rotation;
    }
    return out;
}

// Reference drift computation: every (start, length) segment enumerated
// directly, first frame whose accumulated gt arc length exceeds the target.
std::pair<double, double> brute_force_drift(const Trajectory& est, const Trajectory& gt,
                                            const std::vector<double>& lengths) {
    const size_t n = gt.size();
    std::vector<double> arc(n, 0.0);
    for (size_t i = 1; i < n; ++i) {
        arc[i] = arc[i - 1] + (gt.poses[i].position - gt.poses[i - 1].position).norm();
    }
    double t_sum = 0.0, r_sum = 0.0;
    size_t count = 0;
    for (size_t start = 0; start < n; ++start) {
        for (double target : lengths) {
            size_t end = n;
            for (size_t j = start; j < n; ++j) {
                if (arc[j] - arc[start] >= target) {
                    end = j;
                    break;
                }
            }
            if (end == n) continue;
            const Mat3 r_gt = gt.poses[start].rotation.transpose() * gt.poses[end].rotation;
            const Vec3 t_gt =
                gt.poses[start].rotation.transpose() * (gt.poses[end].position - gt.poses[start].position);
            const Mat3 r_est = est.poses[start].rotation.transpose() * est.poses[end].rotation;
            const Vec3 t_est =
                est.poses[start].rotation.transpose() * (est.poses[end].position - est.poses[start].position);
            const Mat3 r_err = r_est.transpose() * r_gt;
            const Vec3 t_err = r_est.transpose() * (t_gt - t_est);
            const Vec3 axis(r_err(2, 1) - r_err(1, 2), r_err(0, 2) - r_err(2, 0),
                            r_err(1, 0) - r_err(0, 1));
            const double angle = std::atan2(0.5 * axis.norm(), 0.5 * (r_err.trace() - 1.0));
            t_sum += t_err.norm() / target * 100.0;
            r_sum += angle * (180.0 / std::numbers::pi) / target * 100.0;
            ++count;
        }
    }
    return {t_sum / count, r_sum / count};
}

}  // namespace

TEST_CASE("integrating zero motions keeps the pose constant") {
    std::vector<RelativeMotion> motions(5);
    const Trajectory t = integrate(motions, Pose{});
    REQUIRE(t.size() == 6);
    for (const Pose& p : t.poses) {
        CHECK(p.position.norm() == 0.0);
    }
}

TEST_CASE("constant forward motion integrates to a straight line") {
    RelativeMotion fwd;
    fwd.translation = Vec3(0, 0, 1);
    const Trajectory t = integrate(std::vector<RelativeMotion>(4, fwd), Pose{});
    for (size_t i = 0; i < t.size(); ++i) {
        CHECK((t.poses[i].position - Vec3(0, 0, static_cast<double>(i))).norm() < 1e-12);
    }
}

TEST_CASE("differentiate inverts integrate") {
    const Trajectory traj = random_trajectory(61, 30);
    const std::vector<RelativeMotion> motions = differentiate(traj);
    const Trajectory back = integrate(motions, traj.poses.front());
    REQUIRE(back.size() == traj.size());
    for (size_t i = 0; i < traj.size(); ++i) {
        CHECK((back.poses[i].position - traj.poses[i].position).norm() < 1e-9);
        CHECK((back.poses[i].rotation - traj.poses[i].rotation).norm() < 1e-9);
    }
}

TEST_CASE("similarity alignment of a trajectory with itself is the identity") {
    const Trajectory t = random_trajectory(62, 20);
    const SimilarityTransform s = align_similarity(t, t);
    CHECK(s.scale == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((s.rotation - Mat3::Identity()).norm() < 1e-9);
    CHECK(s.translation.norm() < 1e-9);
}

TEST_CASE("alignment recovers double scale from a half-size estimate") {
    const Trajectory gt = random_trajectory(63, 20);
    Trajectory est = gt;
    for (Pose& p : est.poses) p.position *= 0.5;
    const SimilarityTransform s = align_similarity(est, gt);
    CHECK(s.scale == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("alignment recovers a constructed similarity transform") {
    std::mt19937_64 rng = make_rng(64);
    for (int trial = 0; trial < 50; ++trial) {
        const Trajectory gt = random_trajectory(700 + trial, 15);
        SimilarityTransform fwd;
        fwd.scale = std::uniform_real_distribution<double>(0.2, 5.0)(rng);
        fwd.rotation = exp_so3(random_rotation_vec(rng, 2.0));
        fwd.translation = random_vec(rng, 10.0);
        // est carries gt positions through the inverse map; alignment must
        // rediscover fwd.
        SimilarityTransform inv;
        inv.scale = 1.0 / fwd.scale;
        inv.rotation = fwd.rotation.transpose();
        inv.translation = -inv.scale * (inv.rotation * fwd.translation);
        const Trajectory est = transformed(gt, inv);
        const SimilarityTransform got = align_similarity(est, gt);
        CHECK(got.scale == doctest::Approx(fwd.scale).epsilon(1e-9));
        double residual = 0.0;
        for (size_t i = 0; i < gt.size(); ++i) {
            residual += (got.apply(est.poses[i].position) - gt.poses[i].position).squaredNorm();
        }
        CHECK(std::sqrt(residual / static_cast<double>(gt.size())) < 1e-9);
    }
}

TEST_CASE("recovered scale is equivariant in the estimate scale") {
    const Trajectory gt = random_trajectory(65, 20);
    for (double k : {0.1, 0.5, 2.0, 10.0}) {
        Trajectory est = gt;
        for (Pose& p : est.poses) p.position *= k;
        CHECK(align_similarity(est, gt).scale == doctest::Approx(1.0 / k).epsilon(1e-9));
    }
}

TEST_CASE("rigid alignment keeps scale at one") {
    const Trajectory gt = random_trajectory(66, 20);
    Trajectory est = gt;
    for (Pose& p : est.poses) p.position *= 0.5;
    CHECK(align_rigid(est, gt).scale == 1.0);
}

TEST_CASE("alignment needs at least three poses") {
    const Trajectory t = random_trajectory(67, 2);
    CHECK_THROWS_AS(align_similarity(t, t), Error);
}

TEST_CASE("alignment rejects mismatched lengths") {
    const Trajectory a = random_trajectory(68, 10);
    const Trajectory b = random_trajectory(68, 11);
    CHECK_THROWS_AS(align_similarity(a, b), MismatchError);
}

TEST_CASE("degenerate estimates are flagged") {
    const Trajectory gt = random_trajectory(69, 10);
    Trajectory est = gt;
    for (Pose& p : est.poses) p.position = Vec3(1, 2, 3);  // all positions equal
    CHECK_THROWS_AS(align_similarity(est, gt), DegenerateTrajectory);
}

TEST_CASE("ate of identical trajectories is zero") {
    const Trajectory t = random_trajectory(70, 20);
    CHECK(ate(t, t, AlignMode::kNone) == 0.0);
    CHECK(ate(t, t, AlignMode::kRigid) < 1e-12);
    CHECK(ate(t, t, AlignMode::kSimilarity) < 1e-12);
}

TEST_CASE("rigid alignment removes a pure offset") {
    const Trajectory gt = random_trajectory(71, 20);
    Trajectory est = gt;
    for (Pose& p : est.poses) p.position += Vec3(1, 0, 0);
    CHECK(ate(est, gt, AlignMode::kNone) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ate(est, gt, AlignMode::kRigid) < 1e-9);
}

TEST_CASE("a single unit perturbation on a hundred poses gives rmse one tenth") {
    Trajectory gt = straight_line(100, 0.5);
    Trajectory est = gt;
    est.poses[40].position += Vec3(1.0, 0, 0);
    CHECK(ate(est, gt, AlignMode::kNone) == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("richer alignment never increases the error") {
    for (int trial = 0; trial < 100; ++trial) {
        const Trajectory gt = random_trajectory(800 + trial, 12);
        Trajectory est = random_trajectory(900 + trial, 12);
        const double none = ate(est, gt, AlignMode::kNone);
        const double rigid = ate(est, gt, AlignMode::kRigid);
        const double sim = ate(est, gt, AlignMode::kSimilarity);
        CHECK(sim <= rigid + 1e-9);
        CHECK(rigid <= none + 1e-9);
    }
}

TEST_CASE("ate is invariant under a common rigid transform") {
    std::mt19937_64 rng = make_rng(72);
    const Trajectory gt = random_trajectory(73, 15);
    const Trajectory est = random_trajectory(74, 15);
    SimilarityTransform rigid;
    rigid.scale = 1.0;
    rigid.rotation = exp_so3(random_rotation_vec(rng, 2.0));
    rigid.translation = random_vec(rng, 5.0);
    for (AlignMode mode : {AlignMode::kSimilarity, AlignMode::kRigid, AlignMode::kNone}) {
        const double base = ate(est, gt, mode);
        const double moved = ate(transformed(est, rigid), transformed(gt, rigid), mode);
        CHECK(std::abs(base - moved) < 1e-9);
    }
}

TEST_CASE("drift of identical trajectories is zero") {
    const Trajectory t = random_trajectory(75, 60);
    const DriftResult d = kitti_drift(t, t, default_segment_lengths());
    CHECK(d.t_rel_percent < 1e-9);
    CHECK(d.r_rel_deg_per_100 < 1e-9);
}

TEST_CASE("half-scale straight-line estimate drifts fifty percent") {
    const Trajectory gt = straight_line(100);
    Trajectory est = gt;
    for (Pose& p : est.poses) p.position *= 0.5;
    const DriftResult d = kitti_drift(est, gt, default_segment_lengths());
    CHECK(std::abs(d.t_rel_percent - 50.0) < 0.5);
    CHECK(d.r_rel_deg_per_100 < 1e-9);
}

TEST_CASE("drift matches a brute-force segment enumeration") {
    for (int trial = 0; trial < 5; ++trial) {
        const Trajectory gt = random_trajectory(1000 + trial, 80, 0.8);
        const Trajectory est = random_trajectory(2000 + trial, 80, 0.8);
        const std::vector<double> lengths = {5.0, 10.0, 20.0};
        const DriftResult fast = kitti_drift(est, gt, lengths);
        const auto [t_ref, r_ref] = brute_force_drift(est, gt, lengths);
        CHECK(fast.t_rel_percent == doctest::Approx(t_ref).epsilon(1e-9));
        CHECK(fast.r_rel_deg_per_100 == doctest::Approx(r_ref).epsilon(1e-9));
    }
}

TEST_CASE("drift is invariant to a global rigid transform of the estimate") {
    std::mt19937_64 rng = make_rng(76);
    const Trajectory gt = random_trajectory(77, 60, 0.8);
    const Trajectory est = random_trajectory(78, 60, 0.8);
    SimilarityTransform rigid;
    rigid.rotation = exp_so3(random_rotation_vec(rng, 2.0));
    rigid.translation = random_vec(rng, 10.0);
    const DriftResult a = kitti_drift(est, gt, {5.0, 10.0});
    const DriftResult b = kitti_drift(transformed(est, rigid), gt, {5.0, 10.0});
    CHECK(std::abs(a.t_rel_percent - b.t_rel_percent) < 1e-9);
    CHECK(std::abs(a.r_rel_deg_per_100 - b.r_rel_deg_per_100) < 1e-9);
}

TEST_CASE("drift reports per-length breakdowns in ascending order") {
    const Trajectory gt = straight_line(100);
    Trajectory est = gt;
    for (Pose& p : est.poses) p.position *= 0.9;
    const DriftResult d = kitti_drift(est, gt, {20.0, 5.0, 10.0});
    REQUIRE(d.per_length.size() == 3);
    CHECK(d.per_length[0].length == 5.0);
    CHECK(d.per_length[1].length == 10.0);
    CHECK(d.per_length[2].length == 20.0);
    for (const SegmentDrift& seg : d.per_length) {
        CHECK(seg.count > 0);
        CHECK(std::abs(seg.t_rel_percent - 10.0) < 0.5);
    }
}

TEST_CASE("drift requires the path to cover the shortest segment") {
    const Trajectory t = straight_line(4);  // total length 3
    CHECK_THROWS_AS(kitti_drift(t, t, {5.0}), TrajectoryTooShort);
}

TEST_CASE("trajectories of equal length pair by index") {
    const Trajectory est = random_trajectory(79, 10);
    Trajectory gt = random_trajectory(80, 10);
    for (double& ts : gt.timestamps) ts += 1000.0;  // timestamps disagree entirely
    const auto [e, g] = match_trajectories(est, gt);
    CHECK(e.size() == 10);
    CHECK(g.size() == 10);
}

TEST_CASE("unequal trajectories match by timestamp") {
    const Trajectory full = random_trajectory(81, 20);
    Trajectory sparse;
    for (size_t i = 0; i < full.size(); i += 2) {
        sparse.timestamps.push_back(full.timestamps[i]);
        sparse.poses.push_back(full.poses[i]);
    }
    const auto [e, g] = match_trajectories(full, sparse);
    REQUIRE(e.size() == sparse.size());
    for (size_t i = 0; i < e.size(); ++i) {
        CHECK(e.timestamps[i] == g.timestamps[i]);
        CHECK((e.poses[i].position - g.poses[i].position).norm() == 0.0);
    }
}

TEST_CASE("disjoint timestamp ranges cannot be matched") {
    const Trajectory a = random_trajectory(82, 10);
    Trajectory b = random_trajectory(83, 12);
    for (double& ts : b.timestamps) ts += 500.0;
    CHECK_THROWS_AS(match_trajectories(a, b), MismatchError);
}

TEST_CASE("metric report carries the alignment mode and drift") {
    const Trajectory gt = straight_line(100);
    Trajectory est = gt;
    for (Pose& p : est.poses) p.position *= 0.5;
    const MetricReport rep =
        evaluate_trajectories(est, gt, AlignMode::kNone, default_segment_lengths());
    CHECK(rep.align_mode == AlignMode::kNone);
    CHECK(std::abs(rep.drift.t_rel_percent - 50.0) < 0.5);
    CHECK(rep.ate_value > 0.0);
}

TEST_CASE("alignment mode names round-trip") {
    for (AlignMode m : {AlignMode::kSimilarity, AlignMode::kRigid, AlignMode::kNone}) {
        CHECK(align_mode_from_string(to_string(m)) == m);
    }
    CHECK_THROWS_AS(align_mode_from_string("wat"), ParseError);
}

TEST_CASE("trajectory validation rejects unsorted timestamps") {
    Trajectory t = straight_line(5);
    t.timestamps[3] = t.timestamps[2];
    CHECK_THROWS_AS(t.validate(), Error);
}
