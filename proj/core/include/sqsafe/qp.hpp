#pragma once

#include <vector>

#include <Eigen/Dense>

namespace sqsafe {

/// min 1/2 x^T H x + g^T x  subject to  A x >= b, with H symmetric
/// positive definite.
struct QpProblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::MatrixXd A;  ///< m x n
  Eigen::VectorXd b;
};

struct QpResult {
  Eigen::VectorXd x;
  Eigen::VectorXd multipliers;  ///< one per row, zero for inactive rows
  std::vector<int> active;      ///< rows in the final active set
  bool feasible = false;
  int iterations = 0;
};

struct QpSettings {
  double tolerance = 1e-12;  ///< violation tolerance on unit-normalized rows
  int max_iterations = 0;    ///< 0 picks 10 (m + n)
};

/// Dual active-set method of Goldfarb and Idnani. Rows listed in
/// `warm_active` are tried first when several rows are violated, which
/// reproduces the previous active set in few iterations. Rows are
/// normalized internally, so positive row scaling does not change the
/// result. Throws std::invalid_argument when H is not positive definite
/// or the sizes disagree. Infeasibility is reported through `feasible`.
QpResult solve_qp(const QpProblem& problem, const std::vector<int>& warm_active = {},
                  const QpSettings& settings = {});

}  // namespace sqsafe
