#pragma once

#include <Eigen/Dense>

namespace sqsafe {

using Point3 = Eigen::Vector3d;
using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;
using RowVector6d = Eigen::Matrix<double, 1, 6>;

namespace so3 {

Eigen::Matrix3d hat(const Eigen::Vector3d& w);

/// Rodrigues' formula.
Eigen::Matrix3d exp(const Eigen::Vector3d& axis_angle);

/// Principal logarithm; the returned angle lies in [0, pi].
Eigen::Vector3d log(const Eigen::Matrix3d& R);

/// Left Jacobian J_l(phi): d/dt exp(phi) = hat(J_l(phi) phidot) exp(phi).
Eigen::Matrix3d left_jacobian(const Eigen::Vector3d& phi);

/// Closed-form inverse of the left Jacobian. Throws std::domain_error when
/// the rotation angle is within 1e-6 of pi, where the inverse blows up.
Eigen::Matrix3d left_jacobian_inverse(const Eigen::Vector3d& phi);

}  // namespace so3

/// Rigid transform in SE(3). `rotation` is kept orthonormal by construction
/// through the factory functions; the raw constructor trusts its input.
struct Pose {
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();

  static Pose identity() { return {}; }
  static Pose from_translation(const Eigen::Vector3d& t) { return {t, Eigen::Matrix3d::Identity()}; }
  /// Translation + axis-angle chart.
  static Pose from_chart(const Vector6d& x);
  static Pose from_chart(const Eigen::Vector3d& t, const Eigen::Vector3d& axis_angle);

  /// Inverse of from_chart; exact round trip for rotation angles below pi.
  Vector6d to_chart() const;

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }
  Pose inverse() const;
  Pose operator*(const Pose& other) const;

  /// Left (world-frame) perturbation: translation += d.head(3),
  /// rotation = exp(d.tail(3)) * rotation.
  Pose perturbed(const Vector6d& d) const;

  bool is_valid(double tol = 1e-9) const;
};

}  // namespace sqsafe
