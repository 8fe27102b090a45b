#pragma once

#include <functional>
#include <string>

#include <nlohmann/json.hpp>

#include "sqsafe/qp.hpp"
#include "sqsafe/voxel.hpp"

// Reference computations for tests and benchmarks. Nothing here touches
// the polytope sampling, GJK/EPA, smoothing or active-set code paths.
namespace sqsafe::oracle {

struct OracleReport {
  std::string case_id;
  std::string method;
  std::vector<double> values;
  double tolerance = 0.0;
  double wall_time = 0.0;
  bool converged = true;

  nlohmann::json to_json() const;
};

/// Analytic support function of a posed SQ: max over the solid of <p, n>,
/// with the support point in `point` when non-null.
double support_value(const PosedSq& s, const Eigen::Vector3d& n, Eigen::Vector3d* point = nullptr);

struct SdfReference {
  double distance = 0.0;
  Eigen::Vector3d normal = Eigen::Vector3d::Zero();  ///< unit, B -> A
  Eigen::Vector3d point_a = Eigen::Vector3d::Zero();
  Eigen::Vector3d point_b = Eigen::Vector3d::Zero();
  double residual = 0.0;  ///< projected gradient norm at the optimum
  bool converged = false;
};

/// Signed distance of two smooth SQs as -min over unit n of
/// sigma_A(n) + sigma_B(-n), minimized from `starts` spread directions.
SdfReference sdf_reference(const PosedSq& a, const PosedSq& b, int starts = 32);

/// Central differences of a scalar function of a 6-vector.
Vector6d fd_gradient(const std::function<double(const Vector6d&)>& f, const Vector6d& x,
                     double step = 1e-6);

struct SurrogateSettings {
  int starts = 32;
  int rounds = 6;
  double initial_penalty = 10.0;
  double penalty_growth = 10.0;
  double fd_step = 1e-4;  ///< step of the x-offset difference
};

struct SurrogateResult {
  double f_star = 0.0;
  double grad_x = 0.0;
  Eigen::Vector3d minimizer = Eigen::Vector3d::Zero();
  double violation = 0.0;  ///< f_b(minimizer) - 1, clipped at zero
  bool converged = false;
};

/// min f_a(p) s.t. f_b(p) <= 1 by a multi-start quadratic-penalty method,
/// together with d f* / d x for a translation of B along world x.
SurrogateResult implicit_surrogate(const PosedSq& a, const PosedSq& b, const SurrogateSettings& s = {});

/// The same minimum found by bisection on the gauge of A against the
/// 1-sublevel set of B. Used to cross-check the penalty method.
double implicit_surrogate_gauge(const PosedSq& a, const PosedSq& b, double tolerance = 1e-10);

struct QpReferenceResult {
  Eigen::VectorXd x;
  Eigen::VectorXd multipliers;
  double kkt_residual = 0.0;
  int sweeps = 0;
  bool feasible = false;
};

/// Hildreth's dual coordinate ascent, run until the KKT residual of the
/// unit-normalized problem is below `tolerance`.
QpReferenceResult qp_reference(const QpProblem& p, double tolerance = 1e-10, int max_sweeps = 2000000);

}  // namespace sqsafe::oracle
