#include "sqsafe/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sqsafe {

namespace {

// Factors of the active set: with H = L L^T and B = L^{-1} N = Q [R; 0],
// J = L^{-T} Q spans the primal directions.
struct ActiveFactors {
  Eigen::MatrixXd J;
  Eigen::MatrixXd R;  // q x q upper triangular
};

ActiveFactors factor_active(const Eigen::LLT<Eigen::MatrixXd>& llt, const Eigen::MatrixXd& A,
                            const std::vector<int>& active, Eigen::Index n) {
  const auto q = static_cast<Eigen::Index>(active.size());
  Eigen::MatrixXd N(n, q);
  for (Eigen::Index k = 0; k < q; ++k) N.col(k) = A.row(active[static_cast<size_t>(k)]).transpose();
  const Eigen::MatrixXd B = llt.matrixL().solve(N);
  Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(n, n);
  ActiveFactors f;
  if (q > 0) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(B);
    Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
    f.R = qr.matrixQR().topLeftCorner(q, q).triangularView<Eigen::Upper>();
  }
  f.J = llt.matrixU().solve(Q);
  return f;
}

}  // namespace

QpResult solve_qp(const QpProblem& p, const std::vector<int>& warm_active, const QpSettings& s) {
  const Eigen::Index n = p.H.rows();
  const Eigen::Index m = p.A.rows();
  if (p.H.cols() != n || p.g.size() != n || (m > 0 && p.A.cols() != n) || p.b.size() != m) {
    throw std::invalid_argument("solve_qp: inconsistent problem sizes");
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(p.H);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("solve_qp: H is not positive definite");

  // Unit-normalized rows; zero rows are either trivially satisfied or infeasible.
  Eigen::MatrixXd A = p.A;
  Eigen::VectorXd b = p.b;
  Eigen::VectorXd scale = Eigen::VectorXd::Ones(m);
  std::vector<bool> usable(static_cast<size_t>(m), true);
  QpResult out;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double norm = A.row(i).norm();
    if (norm > 0.0) {
      scale[i] = norm;
      A.row(i) /= norm;
      b[i] /= norm;
    } else {
      usable[static_cast<size_t>(i)] = false;
      if (b[i] > s.tolerance) {
        out.x = -llt.solve(p.g);
        out.multipliers = Eigen::VectorXd::Zero(m);
        out.feasible = false;
        return out;
      }
    }
  }

  std::vector<bool> preferred(static_cast<size_t>(m), false);
  for (int i : warm_active) {
    if (i >= 0 && i < m) preferred[static_cast<size_t>(i)] = true;
  }

  Eigen::VectorXd x = -llt.solve(p.g);
  std::vector<int> active;
  std::vector<double> u;  // multipliers of the active rows
  std::vector<bool> in_active(static_cast<size_t>(m), false);
  ActiveFactors f = factor_active(llt, A, active, n);
  const int budget = s.max_iterations > 0 ? s.max_iterations : static_cast<int>(10 * (m + n) + 10);

  auto finish = [&](bool feasible) {
    out.x = x;
    out.multipliers = Eigen::VectorXd::Zero(m);
    for (size_t k = 0; k < active.size(); ++k) {
      out.multipliers[active[k]] = u[k] / scale[active[k]];
    }
    out.active = active;
    out.feasible = feasible;
    return out;
  };

  for (int it = 0; it < budget; ++it) {
    out.iterations = it + 1;
    // Most violated row, previously active rows first.
    int pick = -1;
    double worst = -s.tolerance;
    bool pick_preferred = false;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (!usable[static_cast<size_t>(i)] || in_active[static_cast<size_t>(i)]) continue;
      const double slack = A.row(i).dot(x) - b[i];
      if (slack >= -s.tolerance) continue;
      const bool pref = preferred[static_cast<size_t>(i)];
      if (pick < 0 || (pref && !pick_preferred) || (pref == pick_preferred && slack < worst)) {
        pick = static_cast<int>(i);
        worst = slack;
        pick_preferred = pref;
      }
    }
    if (pick < 0) return finish(true);

    const Eigen::VectorXd np = A.row(pick).transpose();
    double u_new = 0.0;
    for (;;) {
      const auto q = static_cast<Eigen::Index>(active.size());
      const Eigen::VectorXd d = f.J.transpose() * np;
      const Eigen::VectorXd z = f.J.rightCols(n - q) * d.tail(n - q);
      Eigen::VectorXd r;
      if (q > 0) r = f.R.triangularView<Eigen::Upper>().solve(d.head(q));

      double t1 = std::numeric_limits<double>::infinity();
      int drop = -1;
      for (Eigen::Index k = 0; k < q; ++k) {
        if (r[k] > 0.0) {
          const double ratio = u[static_cast<size_t>(k)] / r[k];
          if (ratio < t1) {
            t1 = ratio;
            drop = static_cast<int>(k);
          }
        }
      }
      const double zn = z.dot(np);
      double t2 = std::numeric_limits<double>::infinity();
      if (z.norm() > 1e-14 && zn > 0.0) t2 = -(np.dot(x) - b[pick]) / zn;

      const double t = std::min(t1, t2);
      if (!std::isfinite(t)) return finish(false);

      if (std::isfinite(t2)) x += t * z;
      for (Eigen::Index k = 0; k < q; ++k) u[static_cast<size_t>(k)] -= t * r[k];
      u_new += t;

      if (t2 <= t1) {
        active.push_back(pick);
        u.push_back(u_new);
        in_active[static_cast<size_t>(pick)] = true;
        f = factor_active(llt, A, active, n);
        break;
      }
      in_active[static_cast<size_t>(active[static_cast<size_t>(drop)])] = false;
      active.erase(active.begin() + drop);
      u.erase(u.begin() + drop);
      f = factor_active(llt, A, active, n);
      if (++it >= budget) break;
    }
  }
  throw std::runtime_error("solve_qp: iteration budget exhausted");
}

}  // namespace sqsafe
