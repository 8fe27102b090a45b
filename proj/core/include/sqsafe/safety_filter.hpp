#pragma once

#include <array>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sqsafe/kinematics.hpp"
#include "sqsafe/qp.hpp"
#include "sqsafe/smoothing.hpp"
#include "sqsafe/worker_pool.hpp"

namespace sqsafe {

struct FilterConfig {
  double alpha_delta = 1.5;       ///< alpha_delta(h) = alpha_delta * h
  double alpha_mu = 0.1;
  double margin = 0.01;           ///< epsilon_delta, metres
  double mu_threshold = 0.02;     ///< epsilon_mu
  double smoothing_weight = 0.1;  ///< w on |u - u_prev|^2
  double period = 0.01;           ///< control period, seconds
  double activation_radius = 0.3; ///< distance rows beyond this are culled
  double slack_penalty = 1e6;
  double slack_limit = 0.05;
  bool self_collision = true;
  bool manipulability = true;
  int workers = 1;
  int n_u = 200;
  int n_v = 200;
  SmoothingConfig smoothing;
  GjkSettings gjk;
  ManipulabilityGradient mu_gradient = ManipulabilityGradient::kFiniteDifference;

  /// Throws std::invalid_argument on non-positive gains or negative margins.
  void validate() const;
  /// Overrides the fields present in `j` (same names as the members).
  static FilterConfig from_json(const nlohmann::json& j, FilterConfig base);
  static FilterConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Obstacle pose (translation + axis-angle) and twist (v of the centre and
/// angular velocity, both world frame).
struct ObstacleState {
  Vector6d pose = Vector6d::Zero();
  Vector6d twist = Vector6d::Zero();
  Pose world_pose() const { return Pose::from_chart(pose); }
};

struct Obstacle {
  std::string name;
  Superquadric sq;
  ObstacleState state;
};

enum class RowKind { kEnv, kSelf, kManipulability };
const char* to_string(RowKind kind);

/// row * u >= rhs.
struct ConstraintRow {
  Eigen::RowVectorXd row;
  double rhs = 0.0;
  RowKind kind = RowKind::kEnv;
  int first = -1;   ///< robot attachment (env, self)
  int second = -1;  ///< obstacle (env) or attachment (self)
  double h = 0.0;
  double d = 0.0;
};

/// One distance pair evaluated for a cycle.
struct PairEvaluation {
  RowKind kind = RowKind::kEnv;
  int first = -1;
  int second = -1;
  WitnessPair witness;
  DistanceJacobian gradient;
  bool has_gradient = false;
  bool failed = false;
  std::string error;
};

enum class FilterStatus { kOptimal, kRelaxed, kHalted };
const char* to_string(FilterStatus status);

struct PairDiagnostic {
  RowKind kind;
  int first;
  int second;
  double d;
  double h;
  double row_norm;  ///< zero when culled
  bool culled;
  bool failed;
};

struct FilterResult {
  Eigen::VectorXd u_star;
  FilterStatus status = FilterStatus::kOptimal;
  std::vector<int> active;  ///< indices into `rows`
  std::vector<ConstraintRow> rows;
  std::vector<PairDiagnostic> pairs;
  double max_slack = 0.0;
  double mu = 0.0;
  double d_min = std::numeric_limits<double>::infinity();       ///< over all pairs
  double d_min_env = std::numeric_limits<double>::infinity();
  double d_min_self = std::numeric_limits<double>::infinity();
  double h_min = std::numeric_limits<double>::infinity();       ///< over distance pairs
  double eval_time = 0.0;   ///< seconds, distances + gradients
  double solve_time = 0.0;  ///< seconds, assembly + QP
};

/// Rows for every evaluated pair with d <= cfg.activation_radius plus the
/// manipulability row (omitted when its gradient is invalid). Throws
/// std::invalid_argument when such a pair has no gradient.
std::vector<ConstraintRow> assemble(const RobotModel& model, const Kinematics& fk,
                                    std::span<const Obstacle> obstacles,
                                    std::span<const PairEvaluation> pairs, const Manipulability& mu,
                                    const FilterConfig& cfg);

/// Solves min |J(u - u_cmd)|^2 + |u - u_cmd|^2 + w |u - u_prev|^2 under the
/// rows and |u_i| <= limits_i, with the slack fallback for infeasibility.
FilterResult solve(const Eigen::VectorXd& u_cmd, const Eigen::VectorXd& u_prev,
                   std::vector<ConstraintRow> rows, const Eigen::MatrixXd& task_jacobian,
                   const Eigen::VectorXd& limits, const FilterConfig& cfg,
                   const std::vector<int>& warm_active = {});

/// Stateful per-cycle filter: owns the sampled polytopes, the worker pool
/// and the per-pair warm-start caches. Not thread-safe; one control thread.
class SafetyFilter {
 public:
  SafetyFilter(std::shared_ptr<const RobotModel> model, FilterConfig cfg = {});

  /// One full cycle: FK, distances and gradients, assembly, QP.
  FilterResult step(const Eigen::VectorXd& q, std::span<const Obstacle> obstacles,
                    const Eigen::VectorXd& u_cmd);

  /// Distances for all pairs; gradients for pairs within the activation
  /// radius, or for every pair when `all_gradients` is set.
  std::vector<PairEvaluation> evaluate(const Kinematics& fk, std::span<const Obstacle> obstacles,
                                       bool all_gradients = false);

  /// Clears warm starts and the previous command.
  void reset();

  const RobotModel& model() const { return *model_; }
  const FilterConfig& config() const { return cfg_; }
  const ConvexPolytope& robot_polytope(int attachment) const;
  std::shared_ptr<const ConvexPolytope> obstacle_polytope(const Superquadric& sq);

 private:
  struct PairSlot {
    RowKind kind;
    int first;
    int second;
    PairCache cache;
    std::optional<ConstraintRow> last_row;
  };
  void rebuild_pairs(int obstacle_count);

  std::shared_ptr<const RobotModel> model_;
  FilterConfig cfg_;
  std::vector<ConvexPolytope> robot_polytopes_;
  std::map<std::array<double, 5>, std::shared_ptr<const ConvexPolytope>> obstacle_polytopes_;
  std::vector<PairSlot> slots_;
  int obstacle_count_ = -1;
  WorkerPool pool_;
  Eigen::VectorXd u_prev_;
  std::vector<int> warm_active_;
};

}  // namespace sqsafe
