#include "flowpose/geometry.hpp"

#include <Eigen/Geometry>
#include <cmath>

namespace flowpose {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kSmallAngle = 1e-8;

Mat3 skew(const Vec3& v) {
    Mat3 m;
    m << 0, -v.z(), v.y(),
         v.z(), 0, -v.x(),
         -v.y(), v.x(), 0;
    return m;
}

}  // namespace

void RelativeMotion::validate() const {
    if (!translation.allFinite() || !rotation.allFinite()) {
        throw NonFinite("RelativeMotion has non-finite components");
    }
    if (rotation.norm() >= kPi) {
        throw NonCanonicalRotation("axis-angle norm " + std::to_string(rotation.norm()) +
                                   " is outside the canonical chart |r| < pi");
    }
}

void Pose::validate() const {
    if (!position.allFinite() || !rotation.allFinite()) {
        throw NonFinite("Pose has non-finite components");
    }
    const double ortho = (rotation * rotation.transpose() - Mat3::Identity()).norm();
    if (ortho > 1e-9 || std::abs(rotation.determinant() - 1.0) > 1e-9) {
        throw Error("Pose rotation is not orthonormal with det +1");
    }
}

void CameraIntrinsics::validate() const {
    if (!(fx > 0) || !(fy > 0) || width <= 0 || height <= 0) {
        throw Error("CameraIntrinsics requires fx > 0, fy > 0 and positive image size");
    }
}

double CameraIntrinsics::horizontal_fov() const {
    return 2.0 * std::atan2(static_cast<double>(width), 2.0 * fx);
}

Mat3 exp_so3(const Vec3& r) {
    if (!r.allFinite()) {
        throw NonFinite("exp_so3: non-finite input");
    }
    const double theta = r.norm();
    if (theta >= kPi) {
        throw NonCanonicalRotation("exp_so3: |r| = " + std::to_string(theta) + " >= pi");
    }
    const Mat3 w = skew(r);
    if (theta < kSmallAngle) {
        return Mat3::Identity() + w + 0.5 * w * w;
    }
    const double a = std::sin(theta) / theta;
    const double b = (1.0 - std::cos(theta)) / (theta * theta);
    return Mat3::Identity() + a * w + b * w * w;
}

Vec3 log_so3(const Mat3& m) {
    if ((m * m.transpose() - Mat3::Identity()).norm() > 1e-6 || m.determinant() < 0) {
        throw Error("log_so3: input is not a rotation matrix");
    }
    // The quaternion route stays well-conditioned for angles approaching pi,
    // where the direct acos/sin extraction loses digits.
    Eigen::Quaterniond q(m);
    q.normalize();
    const Eigen::AngleAxisd aa(q);
    if (aa.angle() >= kPi - 1e-6) {
        throw NearPiRotation("log_so3: rotation angle " + std::to_string(aa.angle()) +
                             " is within 1e-6 of pi");
    }
    return aa.angle() * aa.axis();
}

Pose compose(const Pose& pose, const RelativeMotion& motion) {
    motion.validate();
    Pose out;
    out.position = pose.position + pose.rotation * motion.translation;
    out.rotation = pose.rotation * exp_so3(motion.rotation);
    return out;
}

RelativeMotion motion_between(const Pose& a, const Pose& b) {
    RelativeMotion m;
    m.translation = a.rotation.transpose() * (b.position - a.position);
    m.rotation = log_so3(a.rotation.transpose() * b.rotation);
    return m;
}

RelativeMotion inverse(const RelativeMotion& m) {
    RelativeMotion inv;
    inv.rotation = -m.rotation;
    inv.translation = -(exp_so3(-m.rotation) * m.translation);
    return inv;
}

Vec2 project(const Vec3& point, const CameraIntrinsics& k) {
    if (point.z() <= 1e-9) {
        throw BehindCamera("project: depth " + std::to_string(point.z()) + " <= 1e-9");
    }
    return {k.fx * point.x() / point.z() + k.ox,
            k.fy * point.y() / point.z() + k.oy};
}

Vec3 unproject(const Vec2& pixel, double depth, const CameraIntrinsics& k) {
    return {(pixel.x() - k.ox) / k.fx * depth,
            (pixel.y() - k.oy) / k.fy * depth,
            depth};
}

}  // namespace flowpose
