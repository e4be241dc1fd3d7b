#pragma once

#include <Eigen/Core>

#include "flowpose/errors.hpp"

namespace flowpose {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Relative camera motion between two consecutive frames: the pose of camera
// t+1 expressed in the frame of camera t. Points transform as
//   X_{t+1} = exp_so3(rotation)^T * (X_t - translation).
// The rotation is an axis-angle 3-vector restricted to the canonical chart
// |rotation| < pi.
struct RelativeMotion {
    Vec3 translation{Vec3::Zero()};
    Vec3 rotation{Vec3::Zero()};

    // Throws NonCanonicalRotation / NonFinite when the invariants fail.
    void validate() const;
};

// Camera-to-world pose: X_world = rotation * X_cam + position.
struct Pose {
    Vec3 position{Vec3::Zero()};
    Mat3 rotation{Mat3::Identity()};

    void validate() const;
};

// Pinhole parameters, pixels. Pixel indices are cell-centered at integers,
// u in {0..width-1}.
struct CameraIntrinsics {
    double fx{0};
    double fy{0};
    double ox{0};
    double oy{0};
    int width{0};
    int height{0};

    void validate() const;

    // Horizontal field of view, radians: 2*atan(width / (2*fx)).
    double horizontal_fov() const;
};

// Rodrigues exponential. Second-order Taylor branch below |r| = 1e-8.
Mat3 exp_so3(const Vec3& r);

// Inverse of exp_so3. Throws NearPiRotation when the angle is within 1e-6
// of pi, where the chart degenerates.
Vec3 log_so3(const Mat3& m);

// Pose of camera t+1 given the pose of camera t and the connecting motion.
Pose compose(const Pose& pose, const RelativeMotion& motion);

// Motion m with compose(a, m) == b.
RelativeMotion motion_between(const Pose& a, const Pose& b);

// Motion from frame t+1 back to frame t.
RelativeMotion inverse(const RelativeMotion& m);

// Pinhole projection of a camera-frame point; requires depth > 1e-9.
Vec2 project(const Vec3& point, const CameraIntrinsics& k);

// Camera-frame point at the given pixel and depth.
Vec3 unproject(const Vec2& pixel, double depth, const CameraIntrinsics& k);

}  // namespace flowpose
