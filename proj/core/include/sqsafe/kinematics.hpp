#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sqsafe/superquadric.hpp"

namespace sqsafe {

/// Revolute joint: fixed origin transform from the previous link frame,
/// then rotation by q about `axis` (unit, in the joint frame).
struct Joint {
  Pose origin;
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
};

/// Superquadric rigidly attached to link `link` (1-based; link k is the
/// frame after joint k) at a fixed local offset.
struct Attachment {
  int link = 1;
  Pose offset;
  Superquadric sq;
  std::string name;
};

class RobotModel {
 public:
  RobotModel(std::vector<Joint> joints, Pose ee_offset, Eigen::VectorXd velocity_limits,
             std::vector<Attachment> attachments = {}, Pose base = Pose::identity());

  int dof() const { return static_cast<int>(joints_.size()); }
  const std::vector<Joint>& joints() const { return joints_; }
  const std::vector<Attachment>& attachments() const { return attachments_; }
  const Pose& ee_offset() const { return ee_offset_; }
  const Pose& base() const { return base_; }
  const Eigen::VectorXd& velocity_limits() const { return velocity_limits_; }
  const std::string& name() const { return name_; }
  const Eigen::VectorXd& home() const { return home_; }

  /// Task-space rows of the end-effector Jacobian used for manipulability
  /// and the task-consistency objective (all six by default).
  const std::vector<int>& task_rows() const { return task_rows_; }

  /// Attachment index pairs checked for self-collision: every pair whose
  /// links are neither equal nor adjacent, unless overridden.
  const std::vector<std::pair<int, int>>& self_pairs() const { return self_pairs_; }

  RobotModel with_base(const Pose& base) const;

  static RobotModel from_json(const nlohmann::json& j);
  static RobotModel load(const std::filesystem::path& path);
  friend RobotModel planar_2r(double, double);

 private:
  std::vector<Joint> joints_;
  Pose ee_offset_;
  Eigen::VectorXd velocity_limits_;
  std::vector<Attachment> attachments_;
  Pose base_;
  std::string name_;
  Eigen::VectorXd home_;
  std::vector<int> task_rows_{0, 1, 2, 3, 4, 5};
  std::vector<std::pair<int, int>> self_pairs_;
};

/// World poses for one configuration. links[0] is the base; links[k] is the
/// frame after joint k. joint_axes[k-1] / joint_origins[k-1] describe joint
/// k in the world.
struct Kinematics {
  Eigen::VectorXd q;
  std::vector<Pose> links;
  std::vector<Eigen::Vector3d> joint_axes;
  std::vector<Eigen::Vector3d> joint_origins;
  std::vector<Pose> attachments;
  Pose ee;
};

/// Throws std::invalid_argument when q has the wrong size or is not finite.
Kinematics forward_kinematics(const RobotModel& model, const Eigen::VectorXd& q);

/// 6 x n geometric Jacobian [Jv; Jw] of the origin of `link` (0..n), world
/// frame. Columns of joints distal to the link are zero.
Eigen::MatrixXd geometric_jacobian(const RobotModel& model, const Kinematics& fk, int link);
Eigen::MatrixXd geometric_jacobian(const RobotModel& model, const Eigen::VectorXd& q, int link);

/// 6 x n geometric Jacobian of the end-effector point.
Eigen::MatrixXd ee_jacobian(const RobotModel& model, const Kinematics& fk);

/// The model's task rows of the end-effector Jacobian.
Eigen::MatrixXd task_jacobian(const RobotModel& model, const Kinematics& fk);

/// Map from a link twist (v, w at the link origin, world frame) to the rate
/// of an attached SQ's chart (translation, axis-angle):
///   [[I, -[p]x], [0, J_l^{-1}(phi)]]
/// `offset_world` is the link-origin-to-SQ-centre vector in world
/// coordinates and `phi` the SQ's axis-angle in the chart being
/// differentiated (zero for the local perturbation chart). Throws
/// std::domain_error when |phi| is too close to pi.
Matrix6d twist_to_sq_rate_matrix(const Eigen::Vector3d& offset_world, const Eigen::Vector3d& phi);
Vector6d twist_to_sq_rate(const Eigen::Vector3d& offset_world, const Eigen::Vector3d& phi,
                          const Vector6d& twist);

/// 6 x n Jacobian from joint rates to the local-chart rate of attachment i.
Eigen::MatrixXd attachment_jacobian(const RobotModel& model, const Kinematics& fk, int attachment);

enum class ManipulabilityGradient { kFiniteDifference, kAnalytic };

struct Manipulability {
  double mu = 0.0;
  Eigen::RowVectorXd gradient;
  bool gradient_valid = false;  ///< false at or near a singularity (mu < 1e-12)
};

inline constexpr double kSingularManipulability = 1e-12;

/// mu = sqrt(det(J J^T)) over the model's task rows, with its gradient.
Manipulability manipulability(const RobotModel& model, const Eigen::VectorXd& q,
                              ManipulabilityGradient method = ManipulabilityGradient::kFiniteDifference,
                              double fd_step = 1e-6);

double manipulability_value(const RobotModel& model, const Eigen::VectorXd& q);

/// Planar two-link arm in the xy-plane with unit links and two SQ links.
RobotModel planar_2r(double l1 = 1.0, double l2 = 1.0);

}  // namespace sqsafe
