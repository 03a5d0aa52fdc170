#include "kfminset/geometry.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <numbers>

namespace kfminset {

namespace {

// Series-vs-closed-form switch shared by the Jacobian helpers.
bool small_angle(double theta) { return theta < kSmallAngle; }

}  // namespace

Pose compose(const Pose& a, const Pose& b) {
  Pose out;
  out.rotation = a.rotation * b.rotation;
  out.rotation.normalize();
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

Pose inverse(const Pose& p) {
  Pose out;
  out.rotation = p.rotation.conjugate();
  out.translation = -(out.rotation * p.translation);
  return out;
}

Pose relative(const Pose& a, const Pose& b) { return compose(inverse(a), b); }

double translation_distance(const Pose& a, const Pose& b) {
  return (a.translation - b.translation).norm();
}

double rotation_distance(const Pose& a, const Pose& b) {
  const Eigen::Quaterniond r = a.rotation.conjugate() * b.rotation;
  const double vec_norm = r.vec().norm();
  return 2.0 * std::atan2(vec_norm, std::abs(r.w()));
}

Eigen::Quaterniond so3_exp(const Vec3& phi) {
  const double theta = phi.norm();
  double scale;  // sin(theta/2) / theta
  if (small_angle(theta)) {
    scale = 0.5 - theta * theta / 48.0;
  } else {
    scale = std::sin(0.5 * theta) / theta;
  }
  Eigen::Quaterniond q(std::cos(0.5 * theta), scale * phi.x(),
                       scale * phi.y(), scale * phi.z());
  q.normalize();
  return q;
}

Vec3 so3_log(const Eigen::Quaterniond& q) {
  // Work with the hemisphere where w >= 0 so the angle lands in [0, pi].
  Eigen::Quaterniond r = q;
  if (r.w() < 0.0) r.coeffs() = -r.coeffs();
  const double vec_norm = r.vec().norm();
  const double theta = 2.0 * std::atan2(vec_norm, r.w());
  if (theta > std::numbers::pi - kNearPiMargin) {
    throw NearPiRotation("rotation angle " + std::to_string(theta) +
                         " within margin of pi; logarithm ill-conditioned");
  }
  if (vec_norm < 1e-300) return Vec3::Zero();
  // axis = vec / |vec|, angle = theta; the ratio theta / |vec| is stable
  // because theta ~ 2 |vec| for small angles.
  return (theta / vec_norm) * r.vec();
}

Mat3 so3_left_jacobian(const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 hat = skew(phi);
  if (small_angle(theta)) {
    return Mat3::Identity() + 0.5 * hat + hat * hat / 6.0;
  }
  const double t2 = theta * theta;
  return Mat3::Identity() + (1.0 - std::cos(theta)) / t2 * hat +
         (theta - std::sin(theta)) / (t2 * theta) * hat * hat;
}

Mat3 so3_left_jacobian_inverse(const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 hat = skew(phi);
  if (small_angle(theta)) {
    return Mat3::Identity() - 0.5 * hat + hat * hat / 12.0;
  }
  const double half = 0.5 * theta;
  const double cot_term = (1.0 - half * std::cos(half) / std::sin(half)) /
                          (theta * theta);
  return Mat3::Identity() - 0.5 * hat + cot_term * hat * hat;
}

Pose se3_exp(const Twist& t) {
  Pose p;
  p.rotation = so3_exp(t.phi);
  p.translation = so3_left_jacobian(t.phi) * t.rho;
  return p;
}

Twist se3_log(const Pose& p) {
  Twist t;
  t.phi = so3_log(p.rotation);
  t.rho = so3_left_jacobian_inverse(t.phi) * p.translation;
  return t;
}

Mat6 adjoint(const Pose& p) {
  const Mat3 r = p.rotation.toRotationMatrix();
  Mat6 ad = Mat6::Zero();
  ad.topLeftCorner<3, 3>() = r;
  ad.topRightCorner<3, 3>() = skew(p.translation) * r;
  ad.bottomRightCorner<3, 3>() = r;
  return ad;
}

namespace {

// Barfoot's Q matrix: the off-diagonal block of the SE(3) left Jacobian.
Mat3 se3_q_matrix(const Vec3& rho, const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 rh = skew(rho);
  const Mat3 ph = skew(phi);
  double c2, c3, c4;  // series-safe trigonometric coefficients
  if (small_angle(theta)) {
    const double t2 = theta * theta;
    c2 = 1.0 / 6.0 - t2 / 120.0;        // (theta - sin) / theta^3
    c3 = -1.0 / 24.0 + t2 / 720.0;      // (1 - theta^2/2 - cos) / theta^4
    c4 = -1.0 / 120.0 + t2 / 5040.0;    // (theta - sin - theta^3/6) / theta^5
  } else {
    const double t2 = theta * theta;
    const double t3 = t2 * theta;
    const double s = std::sin(theta);
    const double c = std::cos(theta);
    c2 = (theta - s) / t3;
    c3 = (1.0 - 0.5 * t2 - c) / (t2 * t2);
    c4 = (theta - s - t3 / 6.0) / (t2 * t3);
  }
  Mat3 q = 0.5 * rh;
  q += c2 * (ph * rh + rh * ph + ph * rh * ph);
  q -= c3 * (ph * ph * rh + rh * ph * ph - 3.0 * ph * rh * ph);
  q -= 0.5 * (c3 - 3.0 * c4) * (ph * rh * ph * ph + ph * ph * rh * ph);
  return q;
}

}  // namespace

Mat6 se3_right_jacobian_inverse(const Twist& xi) {
  // Jr(xi) = Jl(-xi); invert the 2x2 block-triangular left Jacobian.
  const Vec3 rho = -xi.rho;
  const Vec3 phi = -xi.phi;
  const Mat3 jl_inv = so3_left_jacobian_inverse(phi);
  const Mat3 q = se3_q_matrix(rho, phi);
  Mat6 out = Mat6::Zero();
  out.topLeftCorner<3, 3>() = jl_inv;
  out.bottomRightCorner<3, 3>() = jl_inv;
  out.topRightCorner<3, 3>() = -jl_inv * q * jl_inv;
  return out;
}

Pose umeyama_align(const std::vector<Vec3>& reference,
                   const std::vector<Vec3>& estimate) {
  if (reference.size() != estimate.size()) {
    throw DimensionMismatch("alignment point sets differ in size");
  }
  const std::size_t n = reference.size();
  if (n < 3) {
    throw TooFewPoses("rigid alignment needs at least 3 point pairs, got " +
                      std::to_string(n));
  }

  Vec3 mean_ref = Vec3::Zero(), mean_est = Vec3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    mean_ref += reference[i];
    mean_est += estimate[i];
  }
  mean_ref /= static_cast<double>(n);
  mean_est /= static_cast<double>(n);

  // Cross-covariance of centered point sets.
  Mat3 sigma = Mat3::Zero();
  double spread = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 r = reference[i] - mean_ref;
    const Vec3 e = estimate[i] - mean_est;
    sigma += r * e.transpose();
    spread += r.squaredNorm() + e.squaredNorm();
  }
  sigma /= static_cast<double>(n);
  spread /= static_cast<double>(n);

  Eigen::JacobiSVD<Mat3> svd(sigma, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();

  // Coincident clouds: no direction information at all.  Collinear clouds:
  // rank-1 covariance, rotation about the common axis is unconstrained.
  if (spread < 1e-18 || sv(1) <= 1e-9 * std::max(sv(0), 1e-300)) {
    throw DegenerateGeometry(
        "point sets coincident or collinear; rotation not unique");
  }

  Mat3 s = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) {
    s(2, 2) = -1.0;
  }
  const Mat3 r = svd.matrixU() * s * svd.matrixV().transpose();

  Pose out;
  out.rotation = Eigen::Quaterniond(r);
  out.rotation.normalize();
  out.translation = mean_ref - out.rotation * mean_est;
  return out;
}

}  // namespace kfminset
