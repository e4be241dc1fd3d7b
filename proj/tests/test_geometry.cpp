#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/LU>

#include "doctest.h"
#include "flowpose/geometry.hpp"
#include "flowpose/util.hpp"

using namespace flowpose;

namespace {

constexpr double kPi = std::numbers::pi;

// Uniform axis-angle vector with norm below the requested bound.
Vec3 random_rotation_vec(std::mt19937_64& rng, double max_angle) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vec3 axis(normal(rng), normal(rng), normal(rng));
    axis.normalize();
    std::uniform_real_distribution<double> angle(0.0, max_angle);
    return axis * angle(rng);
}

Vec3 random_vec(std::mt19937_64& rng, double scale) {
    std::uniform_real_distribution<double> u(-scale, scale);
    return Vec3(u(rng), u(rng), u(rng));
}

RelativeMotion random_motion(std::mt19937_64& rng) {
    RelativeMotion m;
    m.translation = random_vec(rng, 1.0);
    m.rotation = random_rotation_vec(rng, 2.5);
    return m;
}

Pose random_pose(std::mt19937_64& rng) {
    Pose p;
    p.position = random_vec(rng, 5.0);
    p.rotation = exp_so3(random_rotation_vec(rng, 2.5));
    return p;
}

bool pose_close(const Pose& a, const Pose& b, double tol) {
    return (a.position - b.position).norm() < tol &&
           (a.rotation - b.rotation).norm() < tol;
}

const CameraIntrinsics kCam640{320.0, 320.0, 320.0, 240.0, 640, 480};

}  // namespace

TEST_CASE("exp_so3 of zero is the identity") {
    CHECK((exp_so3(Vec3::Zero()) - Mat3::Identity()).norm() == 0.0);
}

TEST_CASE("exp_so3 quarter turn about z maps x-axis to y-axis") {
    const Mat3 m = exp_so3(Vec3(0, 0, kPi / 2));
    const Vec3 image = m * Vec3(1, 0, 0);
    CHECK((image - Vec3(0, 1, 0)).norm() < 1e-12);
}

TEST_CASE("exp_so3 output is orthonormal with unit determinant") {
    std::mt19937_64 rng = make_rng(11);
    for (int i = 0; i < 100; ++i) {
        const Mat3 m = exp_so3(random_rotation_vec(rng, 3.0));
        CHECK((m * m.transpose() - Mat3::Identity()).norm() < 1e-12);
        CHECK(m.determinant() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("exp_so3 rejects vectors outside the canonical chart") {
    CHECK_THROWS_AS(exp_so3(Vec3(kPi, 0, 0)), NonCanonicalRotation);
    CHECK_THROWS_AS(exp_so3(Vec3(3, 3, 3)), NonCanonicalRotation);
}

TEST_CASE("log_so3 of the identity is zero") {
    CHECK(log_so3(Mat3::Identity()).norm() == 0.0);
}

TEST_CASE("log_so3 inverts exp_so3 over random rotations") {
    std::mt19937_64 rng = make_rng(12);
    for (int i = 0; i < 100; ++i) {
        const Vec3 r = random_rotation_vec(rng, 3.0);
        CHECK((log_so3(exp_so3(r)) - r).norm() < 1e-9);
    }
}

TEST_CASE("exp_so3 inverts log_so3 over random rotations") {
    std::mt19937_64 rng = make_rng(13);
    for (int i = 0; i < 100; ++i) {
        const Mat3 m = exp_so3(random_rotation_vec(rng, 3.0));
        CHECK((exp_so3(log_so3(m)) - m).norm() < 1e-9);
    }
}

TEST_CASE("log_so3 is stable for tiny rotations") {
    const Vec3 r(1e-12, 0, 0);
    const Vec3 back = log_so3(exp_so3(r));
    CHECK(std::isfinite(back.x()));
    CHECK((back - r).norm() < 1e-15);
}

TEST_CASE("log_so3 flags rotations at the chart boundary") {
    // Half-turn about z: angle exactly pi.
    Mat3 m = Mat3::Identity();
    m(0, 0) = -1;
    m(1, 1) = -1;
    CHECK_THROWS_AS(log_so3(m), NearPiRotation);
}

TEST_CASE("compose with zero motion is the identity map") {
    Pose p;
    const RelativeMotion zero;
    CHECK(pose_close(compose(p, zero), p, 1e-15));
}

TEST_CASE("compose applies pure translation in the camera frame") {
    Pose p;
    RelativeMotion m;
    m.translation = Vec3(1, 0, 0);
    const Pose q = compose(p, m);
    CHECK((q.position - Vec3(1, 0, 0)).norm() < 1e-15);
    CHECK((q.rotation - Mat3::Identity()).norm() < 1e-15);
}

TEST_CASE("a chain of motions then their inverses in reverse returns home") {
    std::mt19937_64 rng = make_rng(14);
    for (int trial = 0; trial < 20; ++trial) {
        const Pose start = random_pose(rng);
        std::vector<RelativeMotion> motions;
        Pose p = start;
        for (int i = 0; i < 8; ++i) {
            motions.push_back(random_motion(rng));
            p = compose(p, motions.back());
        }
        for (int i = 7; i >= 0; --i) p = compose(p, inverse(motions[i]));
        CHECK(pose_close(p, start, 1e-9));
    }
}

TEST_CASE("motion_between recovers the motion linking two poses") {
    std::mt19937_64 rng = make_rng(15);
    for (int i = 0; i < 50; ++i) {
        const Pose a = random_pose(rng);
        const RelativeMotion m = random_motion(rng);
        const Pose b = compose(a, m);
        const RelativeMotion got = motion_between(a, b);
        CHECK((got.translation - m.translation).norm() < 1e-9);
        CHECK((got.rotation - m.rotation).norm() < 1e-9);
    }
}

TEST_CASE("compose chains associatively") {
    std::mt19937_64 rng = make_rng(16);
    for (int i = 0; i < 50; ++i) {
        const Pose p = random_pose(rng);
        const RelativeMotion m1 = random_motion(rng);
        const RelativeMotion m2 = random_motion(rng);
        // Composing stepwise must match folding the two motions first.
        const Pose ab_c = compose(compose(p, m1), m2);
        RelativeMotion folded;
        const Mat3 r1 = exp_so3(m1.rotation);
        folded.translation = m1.translation + r1 * m2.translation;
        folded.rotation = log_so3(r1 * exp_so3(m2.rotation));
        const Pose a_bc = compose(p, folded);
        CHECK(pose_close(ab_c, a_bc, 1e-9));
    }
}

TEST_CASE("points on the optical axis project to the principal point") {
    const Vec2 px = project(Vec3(0, 0, 1), kCam640);
    CHECK(px.x() == doctest::Approx(320.0).epsilon(1e-12));
    CHECK(px.y() == doctest::Approx(240.0).epsilon(1e-12));
}

TEST_CASE("projection follows the pinhole ratios") {
    const Vec2 px = project(Vec3(1, 0, 2), kCam640);
    CHECK(px.x() == doctest::Approx(480.0).epsilon(1e-12));
    CHECK(px.y() == doctest::Approx(240.0).epsilon(1e-12));
}

TEST_CASE("project rejects points at or behind the camera") {
    CHECK_THROWS_AS(project(Vec3(0, 0, 0), kCam640), BehindCamera);
    CHECK_THROWS_AS(project(Vec3(0, 0, -1), kCam640), BehindCamera);
}

TEST_CASE("unproject then project round-trips pixels") {
    std::mt19937_64 rng = make_rng(17);
    std::uniform_real_distribution<double> ux(0.0, 639.0);
    std::uniform_real_distribution<double> uy(0.0, 479.0);
    std::uniform_real_distribution<double> ud(0.5, 50.0);
    for (int i = 0; i < 100; ++i) {
        const Vec2 px(ux(rng), uy(rng));
        const double depth = ud(rng);
        const Vec3 p = unproject(px, depth, kCam640);
        CHECK(p.z() == doctest::Approx(depth).epsilon(1e-12));
        CHECK((project(p, kCam640) - px).norm() < 1e-7);
    }
}

TEST_CASE("project then unproject round-trips camera points") {
    std::mt19937_64 rng = make_rng(18);
    for (int i = 0; i < 100; ++i) {
        Vec3 p = random_vec(rng, 3.0);
        p.z() = std::abs(p.z()) + 0.5;
        const Vec3 back = unproject(project(p, kCam640), p.z(), kCam640);
        CHECK((back - p).norm() < 1e-9);
    }
}

TEST_CASE("horizontal_fov matches the arctangent formula") {
    CHECK(kCam640.horizontal_fov() ==
          doctest::Approx(2.0 * std::atan2(640.0, 2.0 * 320.0)).epsilon(1e-12));
    CameraIntrinsics wide = kCam640;
    wide.fx = 160.0;
    CHECK(wide.horizontal_fov() > kCam640.horizontal_fov());
}

TEST_CASE("motion validation enforces the canonical chart and finiteness") {
    RelativeMotion m;
    m.rotation = Vec3(0, 0, kPi);
    CHECK_THROWS_AS(m.validate(), NonCanonicalRotation);
    m.rotation = Vec3(0, 0, 1);
    m.translation = Vec3(std::nan(""), 0, 0);
    CHECK_THROWS_AS(m.validate(), NonFinite);
}

TEST_CASE("pose validation rejects non-orthonormal rotations") {
    Pose p;
    p.rotation(0, 0) = 2.0;
    CHECK_THROWS_AS(p.validate(), Error);
}
