#include "sqsafe/geometry.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sqsafe {
namespace so3 {

Eigen::Matrix3d hat(const Eigen::Vector3d& w) {
  Eigen::Matrix3d m;
  m << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
       -w.y(), w.x(), 0.0;
  return m;
}

Eigen::Matrix3d exp(const Eigen::Vector3d& axis_angle) {
  const double theta = axis_angle.norm();
  const Eigen::Matrix3d K = hat(axis_angle);
  if (theta < 1e-8) {
    return Eigen::Matrix3d::Identity() + K + 0.5 * K * K;
  }
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  return Eigen::Matrix3d::Identity() + a * K + b * K * K;
}

Eigen::Vector3d log(const Eigen::Matrix3d& R) {
  // Eigen's AngleAxis conversion is robust near 0 and pi.
  const Eigen::AngleAxisd aa(R);
  double angle = aa.angle();
  Eigen::Vector3d axis = aa.axis();
  if (angle > std::numbers::pi) {
    angle = 2.0 * std::numbers::pi - angle;
    axis = -axis;
  }
  return axis * angle;
}

Eigen::Matrix3d left_jacobian(const Eigen::Vector3d& phi) {
  const double theta = phi.norm();
  const Eigen::Matrix3d K = hat(phi);
  if (theta < 1e-6) {
    return Eigen::Matrix3d::Identity() + 0.5 * K + K * K / 6.0;
  }
  const double t2 = theta * theta;
  return Eigen::Matrix3d::Identity() + (1.0 - std::cos(theta)) / t2 * K +
         (theta - std::sin(theta)) / (t2 * theta) * K * K;
}

Eigen::Matrix3d left_jacobian_inverse(const Eigen::Vector3d& phi) {
  const double theta = phi.norm();
  if (std::abs(theta - std::numbers::pi) < 1e-6 || theta > std::numbers::pi) {
    throw std::domain_error("left_jacobian_inverse: rotation angle too close to pi");
  }
  const Eigen::Matrix3d K = hat(phi);
  if (theta < 1e-6) {
    return Eigen::Matrix3d::Identity() - 0.5 * K + K * K / 12.0;
  }
  const double t2 = theta * theta;
  const double coef = 1.0 / t2 - (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  return Eigen::Matrix3d::Identity() - 0.5 * K + coef * K * K;
}

}  // namespace so3

Pose Pose::from_chart(const Vector6d& x) {
  return from_chart(x.head<3>(), x.tail<3>());
}

Pose Pose::from_chart(const Eigen::Vector3d& t, const Eigen::Vector3d& axis_angle) {
  return {t, so3::exp(axis_angle)};
}

Vector6d Pose::to_chart() const {
  Vector6d x;
  x.head<3>() = translation;
  x.tail<3>() = so3::log(rotation);
  return x;
}

Pose Pose::inverse() const {
  const Eigen::Matrix3d Rt = rotation.transpose();
  return {-(Rt * translation), Rt};
}

Pose Pose::operator*(const Pose& other) const {
  return {rotation * other.translation + translation, rotation * other.rotation};
}

Pose Pose::perturbed(const Vector6d& d) const {
  return {translation + d.head<3>(), so3::exp(d.tail<3>()) * rotation};
}

bool Pose::is_valid(double tol) const {
  if (!translation.allFinite() || !rotation.allFinite()) return false;
  const double ortho = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).norm();
  return ortho <= tol && std::abs(rotation.determinant() - 1.0) <= tol;
}

}  // namespace sqsafe
