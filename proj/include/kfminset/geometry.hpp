#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <vector>

#include "kfminset/errors.hpp"

namespace kfminset {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Angle threshold below which rotation helpers switch to series expansions.
inline constexpr double kSmallAngle = 1e-4;

/// Rotations closer to pi than this are rejected by the logarithm.
inline constexpr double kNearPiMargin = 1e-6;

/// Rigid body pose: Hamilton unit quaternion plus translation.
struct Pose {
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Vec3 translation = Vec3::Zero();

  Pose() = default;
  Pose(const Eigen::Quaterniond& q, const Vec3& t)
      : rotation(q), translation(t) {}

  static Pose Identity() { return Pose(); }

  /// Pure translation.
  static Pose Translation(double x, double y, double z) {
    return Pose(Eigen::Quaterniond::Identity(), Vec3(x, y, z));
  }

  /// Planar pose: yaw about +z at (x, y, 0).
  static Pose Planar(double x, double y, double yaw) {
    return Pose(Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Vec3::UnitZ())),
                Vec3(x, y, 0.0));
  }

  /// Apply the pose to a point: R p + t.
  Vec3 operator*(const Vec3& p) const { return rotation * p + translation; }
};

/// se(3) tangent vector, translation block first: [rho; phi].
struct Twist {
  Vec3 rho = Vec3::Zero();  ///< translational part
  Vec3 phi = Vec3::Zero();  ///< rotational part (axis * angle)

  Twist() = default;
  Twist(const Vec3& r, const Vec3& p) : rho(r), phi(p) {}
  explicit Twist(const Vec6& v) : rho(v.head<3>()), phi(v.tail<3>()) {}

  Vec6 vector() const {
    Vec6 v;
    v << rho, phi;
    return v;
  }
  double norm() const { return vector().norm(); }
};

/// Skew-symmetric matrix such that skew(a) b = a x b.
inline Mat3 skew(const Vec3& v) {
  Mat3 s;
  // clang-format off
  s <<     0, -v.z(),  v.y(),
       v.z(),      0, -v.x(),
      -v.y(),  v.x(),      0;
  // clang-format on
  return s;
}

/// a then b, as one pose.  The quaternion is renormalized after the product
/// so long compositions do not drift off the unit sphere.
Pose compose(const Pose& a, const Pose& b);

/// Inverse pose.
Pose inverse(const Pose& p);

/// Relative pose taking a's frame to b's frame: inverse(a) * b.
Pose relative(const Pose& a, const Pose& b);

/// Euclidean distance between the two translations.
double translation_distance(const Pose& a, const Pose& b);

/// Geodesic angle of the relative rotation between a and b, in [0, pi].
double rotation_distance(const Pose& a, const Pose& b);

/// SO(3) exponential: axis-angle vector to quaternion.
Eigen::Quaterniond so3_exp(const Vec3& phi);

/// SO(3) logarithm: quaternion to axis-angle vector.
/// Throws NearPiRotation when the angle is within kNearPiMargin of pi.
Vec3 so3_log(const Eigen::Quaterniond& q);

/// SE(3) exponential map.
Pose se3_exp(const Twist& t);

/// SE(3) logarithm.  Uses the closed-form inverse of the left Jacobian of
/// SO(3), with a series expansion below kSmallAngle.
/// Throws NearPiRotation when the rotation angle is within kNearPiMargin
/// of pi.
Twist se3_log(const Pose& p);

/// Left Jacobian of SO(3) (the V matrix of the SE(3) exponential).
Mat3 so3_left_jacobian(const Vec3& phi);

/// Closed-form inverse of the left Jacobian of SO(3).
Mat3 so3_left_jacobian_inverse(const Vec3& phi);

/// Adjoint of a pose on [rho; phi] twists.
Mat6 adjoint(const Pose& p);

/// Inverse of the right Jacobian of SE(3) at the given twist.
/// Maps a right perturbation of the group element to the change of its
/// logarithm: log(exp(xi) exp(delta)) ~ xi + se3_right_jacobian_inverse(xi) delta.
Mat6 se3_right_jacobian_inverse(const Twist& xi);

/// Least-squares rigid transform T (rotation + translation, no scale)
/// minimizing sum_i || reference_i - T * estimate_i ||^2.
///
/// Throws TooFewPoses for fewer than 3 points and DegenerateGeometry when
/// the point sets are coincident or collinear (the rotation would not be
/// unique).
Pose umeyama_align(const std::vector<Vec3>& reference,
                   const std::vector<Vec3>& estimate);

}  // namespace kfminset
