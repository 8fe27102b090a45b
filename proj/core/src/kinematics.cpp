#include "sqsafe/kinematics.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "sqsafe/io.hpp"

namespace sqsafe {

RobotModel::RobotModel(std::vector<Joint> joints, Pose ee_offset, Eigen::VectorXd velocity_limits,
                       std::vector<Attachment> attachments, Pose base)
    : joints_(std::move(joints)),
      ee_offset_(std::move(ee_offset)),
      velocity_limits_(std::move(velocity_limits)),
      attachments_(std::move(attachments)),
      base_(std::move(base)) {
  const int n = dof();
  if (n == 0) throw std::invalid_argument("RobotModel: at least one joint required");
  if (velocity_limits_.size() != n) {
    throw std::invalid_argument("RobotModel: one velocity limit per joint required");
  }
  if (!(velocity_limits_.array() > 0.0).all()) {
    throw std::invalid_argument("RobotModel: velocity limits must be positive");
  }
  for (auto& j : joints_) {
    if (!(j.axis.norm() > 0.0)) throw std::invalid_argument("RobotModel: zero joint axis");
    j.axis.normalize();
  }
  for (const auto& a : attachments_) {
    if (a.link < 1 || a.link > n) {
      throw std::invalid_argument("RobotModel: attachment '" + a.name + "' references link " +
                                  std::to_string(a.link) + " of " + std::to_string(n));
    }
    if (so3::log(a.offset.rotation).norm() >= std::numbers::pi - 0.01) {
      throw std::invalid_argument("RobotModel: attachment rotation too close to pi");
    }
  }
  home_ = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < static_cast<int>(attachments_.size()); ++i) {
    for (int k = i + 1; k < static_cast<int>(attachments_.size()); ++k) {
      if (std::abs(attachments_[static_cast<size_t>(i)].link -
                   attachments_[static_cast<size_t>(k)].link) >= 2) {
        self_pairs_.emplace_back(i, k);
      }
    }
  }
}

RobotModel RobotModel::with_base(const Pose& base) const {
  RobotModel copy = *this;
  copy.base_ = base;
  return copy;
}

RobotModel RobotModel::from_json(const nlohmann::json& j) {
  std::vector<Joint> joints;
  for (const auto& jj : j.at("joints")) {
    Joint joint;
    if (jj.contains("origin")) joint.origin = pose_from_json(jj.at("origin"));
    if (jj.contains("axis")) joint.axis = vec3_from_json(jj.at("axis"));
    joints.push_back(joint);
  }
  std::vector<Attachment> attachments;
  if (j.contains("attachments")) {
    for (const auto& ja : j.at("attachments")) {
      attachments.push_back({ja.at("link").get<int>(),
                             ja.contains("pose") ? pose_from_json(ja.at("pose")) : Pose::identity(),
                             sq_from_json(ja), ja.value("name", std::string{})});
    }
  }
  RobotModel model(std::move(joints), j.contains("ee") ? pose_from_json(j.at("ee")) : Pose::identity(),
                   vecx_from_json(j.at("velocity_limits")), std::move(attachments),
                   j.contains("base") ? pose_from_json(j.at("base")) : Pose::identity());
  model.name_ = j.value("name", std::string{});
  if (j.contains("home")) {
    model.home_ = vecx_from_json(j.at("home"));
    if (model.home_.size() != model.dof()) throw std::invalid_argument("RobotModel: home size mismatch");
  }
  if (j.contains("task_rows")) {
    model.task_rows_ = j.at("task_rows").get<std::vector<int>>();
    for (int r : model.task_rows_) {
      if (r < 0 || r > 5) throw std::invalid_argument("RobotModel: task row out of range");
    }
  }
  if (j.contains("self_pairs")) {
    model.self_pairs_.clear();
    const int na = static_cast<int>(model.attachments_.size());
    for (const auto& p : j.at("self_pairs")) {
      const int a = p.at(0).get<int>();
      const int b = p.at(1).get<int>();
      if (a < 0 || b < 0 || a >= na || b >= na || a == b) {
        throw std::invalid_argument("RobotModel: bad self pair");
      }
      model.self_pairs_.emplace_back(a, b);
    }
  }
  return model;
}

RobotModel RobotModel::load(const std::filesystem::path& path) {
  try {
    return from_json(read_json_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

Kinematics forward_kinematics(const RobotModel& model, const Eigen::VectorXd& q) {
  const int n = model.dof();
  if (q.size() != n || !q.allFinite()) {
    throw std::invalid_argument("forward_kinematics: q must be a finite vector of size " +
                                std::to_string(n));
  }
  Kinematics fk;
  fk.q = q;
  fk.links.reserve(static_cast<size_t>(n) + 1);
  fk.links.push_back(model.base());
  for (int k = 0; k < n; ++k) {
    const Joint& joint = model.joints()[static_cast<size_t>(k)];
    const Pose frame = fk.links.back() * joint.origin;
    fk.joint_axes.push_back(frame.rotation * joint.axis);
    fk.joint_origins.push_back(frame.translation);
    fk.links.push_back(frame * Pose{Eigen::Vector3d::Zero(),
                                    Eigen::AngleAxisd(q[k], joint.axis).toRotationMatrix()});
  }
  fk.ee = fk.links.back() * model.ee_offset();
  for (const auto& a : model.attachments()) {
    fk.attachments.push_back(fk.links[static_cast<size_t>(a.link)] * a.offset);
  }
  return fk;
}

namespace {

Eigen::MatrixXd point_jacobian(const Kinematics& fk, int joints_used, const Eigen::Vector3d& p) {
  const int n = static_cast<int>(fk.joint_axes.size());
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(6, n);
  for (int k = 0; k < joints_used; ++k) {
    const Eigen::Vector3d& z = fk.joint_axes[static_cast<size_t>(k)];
    J.block<3, 1>(0, k) = z.cross(p - fk.joint_origins[static_cast<size_t>(k)]);
    J.block<3, 1>(3, k) = z;
  }
  return J;
}

}  // namespace

Eigen::MatrixXd geometric_jacobian(const RobotModel& model, const Kinematics& fk, int link) {
  if (link < 0 || link > model.dof()) throw std::invalid_argument("geometric_jacobian: bad link");
  return point_jacobian(fk, link, fk.links[static_cast<size_t>(link)].translation);
}

Eigen::MatrixXd geometric_jacobian(const RobotModel& model, const Eigen::VectorXd& q, int link) {
  return geometric_jacobian(model, forward_kinematics(model, q), link);
}

Eigen::MatrixXd ee_jacobian(const RobotModel& model, const Kinematics& fk) {
  return point_jacobian(fk, model.dof(), fk.ee.translation);
}

Matrix6d twist_to_sq_rate_matrix(const Eigen::Vector3d& offset_world, const Eigen::Vector3d& phi) {
  Matrix6d X = Matrix6d::Zero();
  X.topLeftCorner<3, 3>().setIdentity();
  X.topRightCorner<3, 3>() = -so3::hat(offset_world);
  X.bottomRightCorner<3, 3>() = so3::left_jacobian_inverse(phi);
  return X;
}

Vector6d twist_to_sq_rate(const Eigen::Vector3d& offset_world, const Eigen::Vector3d& phi,
                          const Vector6d& twist) {
  return twist_to_sq_rate_matrix(offset_world, phi) * twist;
}

Eigen::MatrixXd attachment_jacobian(const RobotModel& model, const Kinematics& fk, int attachment) {
  const Attachment& a = model.attachments().at(static_cast<size_t>(attachment));
  const Pose& link = fk.links[static_cast<size_t>(a.link)];
  const Eigen::Vector3d offset = fk.attachments[static_cast<size_t>(attachment)].translation - link.translation;
  return twist_to_sq_rate_matrix(offset, Eigen::Vector3d::Zero()) * geometric_jacobian(model, fk, a.link);
}

Eigen::MatrixXd task_jacobian(const RobotModel& model, const Kinematics& fk) {
  const Eigen::MatrixXd full = ee_jacobian(model, fk);
  Eigen::MatrixXd J(static_cast<Eigen::Index>(model.task_rows().size()), full.cols());
  for (size_t r = 0; r < model.task_rows().size(); ++r) {
    J.row(static_cast<Eigen::Index>(r)) = full.row(model.task_rows()[r]);
  }
  return J;
}

namespace {

double mu_of(const Eigen::MatrixXd& J) {
  // Product of singular values; det(J J^T) loses half the digits near zero.
  if (J.rows() > J.cols()) return 0.0;
  return Eigen::JacobiSVD<Eigen::MatrixXd>(J).singularValues().prod();
}

// dJ/dq_k of the end-effector geometric Jacobian.
Eigen::MatrixXd jacobian_derivative(const Kinematics& fk, const Eigen::Vector3d& pe, int k) {
  const int n = static_cast<int>(fk.joint_axes.size());
  Eigen::MatrixXd dJ = Eigen::MatrixXd::Zero(6, n);
  const Eigen::Vector3d& zk = fk.joint_axes[static_cast<size_t>(k)];
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d& zi = fk.joint_axes[static_cast<size_t>(i)];
    const Eigen::Vector3d& pi = fk.joint_origins[static_cast<size_t>(i)];
    const Eigen::Vector3d dz = k < i ? Eigen::Vector3d(zk.cross(zi)) : Eigen::Vector3d::Zero();
    const Eigen::Vector3d dr = k < i ? Eigen::Vector3d(zk.cross(pe - pi))
                                     : Eigen::Vector3d(zk.cross(pe - fk.joint_origins[static_cast<size_t>(k)]));
    dJ.block<3, 1>(0, i) = dz.cross(pe - pi) + zi.cross(dr);
    dJ.block<3, 1>(3, i) = dz;
  }
  return dJ;
}

}  // namespace

double manipulability_value(const RobotModel& model, const Eigen::VectorXd& q) {
  return mu_of(task_jacobian(model, forward_kinematics(model, q)));
}

Manipulability manipulability(const RobotModel& model, const Eigen::VectorXd& q,
                              ManipulabilityGradient method, double fd_step) {
  const Kinematics fk = forward_kinematics(model, q);
  const Eigen::MatrixXd J = task_jacobian(model, fk);
  Manipulability out;
  out.mu = mu_of(J);
  out.gradient = Eigen::RowVectorXd::Zero(model.dof());
  if (out.mu < kSingularManipulability) return out;
  out.gradient_valid = true;
  if (method == ManipulabilityGradient::kFiniteDifference) {
    for (int k = 0; k < model.dof(); ++k) {
      Eigen::VectorXd qp = q;
      Eigen::VectorXd qm = q;
      qp[k] += fd_step;
      qm[k] -= fd_step;
      out.gradient[k] = (manipulability_value(model, qp) - manipulability_value(model, qm)) / (2.0 * fd_step);
    }
    return out;
  }
  const Eigen::MatrixXd A_inv_J = (J * J.transpose()).ldlt().solve(J);
  for (int k = 0; k < model.dof(); ++k) {
    const Eigen::MatrixXd dfull = jacobian_derivative(fk, fk.ee.translation, k);
    double tr = 0.0;
    for (size_t r = 0; r < model.task_rows().size(); ++r) {
      tr += A_inv_J.row(static_cast<Eigen::Index>(r)).dot(dfull.row(model.task_rows()[r]));
    }
    out.gradient[k] = out.mu * tr;
  }
  return out;
}

RobotModel planar_2r(double l1, double l2) {
  std::vector<Joint> joints(2);
  joints[1].origin = Pose::from_translation({l1, 0.0, 0.0});
  std::vector<Attachment> attachments{
      {1, Pose::from_translation({0.5 * l1, 0.0, 0.0}), Superquadric(0.45 * l1, 0.05, 0.05, 0.5, 0.5), "link1"},
      {2, Pose::from_translation({0.5 * l2, 0.0, 0.0}), Superquadric(0.45 * l2, 0.05, 0.05, 0.5, 0.5), "link2"},
  };
  RobotModel model(std::move(joints), Pose::from_translation({l2, 0.0, 0.0}), Eigen::Vector2d(2.0, 2.0),
                   std::move(attachments));
  model.name_ = "planar_2r";
  model.task_rows_ = {0, 1};
  model.home_ = Eigen::Vector2d(0.0, std::numbers::pi / 2);
  return model;
}

}  // namespace sqsafe
