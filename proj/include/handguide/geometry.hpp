#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace handguide {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Hamilton quaternion (w, x, y, z). Kept separate from Eigen::Quaterniond so
/// that the products used by the guidance equations are explicit.
struct Quaternion {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  static Quaternion identity() { return {}; }

  /// Rotation of `angle` radians about the unit axis `axis`, normalized.
  static Quaternion from_axis_angle(const Vec3& axis, double angle) {
    const double half = 0.5 * angle;
    const double s = std::sin(half);
    Quaternion q{std::cos(half), s * axis.x(), s * axis.y(), s * axis.z()};
    return q.normalized();
  }

  /// Fixed-axis roll-pitch-yaw, applied about x, then y, then z.
  static Quaternion from_rpy(double roll, double pitch, double yaw) {
    const Vec3 ex = Vec3::UnitX(), ey = Vec3::UnitY(), ez = Vec3::UnitZ();
    return from_axis_angle(ez, yaw) * from_axis_angle(ey, pitch) * from_axis_angle(ex, roll);
  }

  static Quaternion from_matrix(const Mat3& r) {
    Eigen::Quaterniond e(r);
    e.normalize();
    return Quaternion{e.w(), e.x(), e.y(), e.z()}.canonical();
  }

  double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

  Quaternion normalized() const {
    const double n = norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
      throw std::invalid_argument("cannot normalize a zero or non-finite quaternion");
    }
    return {w / n, x / n, y / n, z / n};
  }

  Quaternion conjugate() const { return {w, -x, -y, -z}; }

  /// Same rotation with w >= 0.
  Quaternion canonical() const { return w < 0.0 ? Quaternion{-w, -x, -y, -z} : *this; }

  friend Quaternion operator*(const Quaternion& a, const Quaternion& b) {
    return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
  }

  /// q * (0, v) * q^-1
  Vec3 rotate(const Vec3& v) const {
    const Quaternion p{0.0, v.x(), v.y(), v.z()};
    const Quaternion r = (*this) * p * conjugate();
    return {r.x, r.y, r.z};
  }

  Mat3 matrix() const {
    return Eigen::Quaterniond(w, x, y, z).toRotationMatrix();
  }
};

/// Rigid motion x -> R x + t.
struct RigidTransform {
  Quaternion rotation;
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }

  static RigidTransform from_xyz_rpy(const Vec3& xyz, const Vec3& rpy) {
    return {Quaternion::from_rpy(rpy.x(), rpy.y(), rpy.z()), xyz};
  }

  static RigidTransform from_matrix(const Mat3& r, const Vec3& t) {
    return {Quaternion::from_matrix(r), t};
  }

  Vec3 apply(const Vec3& p) const { return rotation.rotate(p) + translation; }

  RigidTransform inverse() const {
    const Quaternion inv = rotation.conjugate();
    return {inv, -inv.rotate(translation)};
  }

  /// (a * b).apply(p) == a.apply(b.apply(p))
  friend RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) {
    return {(a.rotation * b.rotation).normalized(), a.rotation.rotate(b.translation) + a.translation};
  }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation.matrix();
    m.topRightCorner<3, 1>() = translation;
    return m;
  }
};

inline bool is_finite(const Vec3& v) { return v.allFinite(); }

/// Geodesic angle between two rotations, radians in [0, pi].
inline double rotation_angle_between(const Quaternion& a, const Quaternion& b) {
  const Quaternion d = a.conjugate() * b;
  const double c = std::min(1.0, std::abs(d.w) / d.norm());
  return 2.0 * std::acos(c);
}

}  // namespace handguide
