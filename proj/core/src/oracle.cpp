#include "sqsafe/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace sqsafe::oracle {

nlohmann::json OracleReport::to_json() const {
  return {{"case", case_id}, {"method", method}, {"values", values},
          {"tolerance", tolerance}, {"wall_time", wall_time}, {"converged", converged}};
}

namespace {

double dual_exponent(double e) { return e >= 2.0 - 1e-9 ? 1e8 : 2.0 / (2.0 - e); }

// ||(u, v)||_q with its partial derivatives.
double norm2q(double u, double v, double q, double* du, double* dv) {
  const double m = std::max(std::abs(u), std::abs(v));
  if (m == 0.0) {
    *du = 0.0;
    *dv = 0.0;
    return 0.0;
  }
  const double ru = std::abs(u) / m;
  const double rv = std::abs(v) / m;
  const double n = m * std::pow(std::pow(ru, q) + std::pow(rv, q), 1.0 / q);
  *du = std::copysign(std::pow(std::abs(u) / n, q - 1.0), u);
  *dv = std::copysign(std::pow(std::abs(v) / n, q - 1.0), v);
  return n;
}

// Local-frame support: dual of the nested gauge.
double local_support(const Superquadric& sq, const Eigen::Vector3d& n, Eigen::Vector3d* grad) {
  const double q1 = dual_exponent(sq.e1());
  const double q2 = dual_exponent(sq.e2());
  double d1 = 0.0;
  double d2 = 0.0;
  const double rho = norm2q(sq.a1() * n.x(), sq.a2() * n.y(), q2, &d1, &d2);
  double dr = 0.0;
  double dz = 0.0;
  const double sigma = norm2q(rho, sq.a3() * n.z(), q1, &dr, &dz);
  if (grad) *grad = Eigen::Vector3d(sq.a1() * dr * d1, sq.a2() * dr * d2, sq.a3() * dz);
  return sigma;
}

// Nested gauge N(p): the SQ is {N <= 1} and f = N^(2/e1) - 1.
double gauge(const Superquadric& sq, const Eigen::Vector3d& p, Eigen::Vector3d* grad) {
  const double p1 = 2.0 / sq.e1();
  const double p2 = 2.0 / sq.e2();
  double d1 = 0.0;
  double d2 = 0.0;
  const double rho = norm2q(p.x() / sq.a1(), p.y() / sq.a2(), p2, &d1, &d2);
  double dr = 0.0;
  double dz = 0.0;
  const double g = norm2q(rho, p.z() / sq.a3(), p1, &dr, &dz);
  if (grad) *grad = Eigen::Vector3d(dr * d1 / sq.a1(), dr * d2 / sq.a2(), dz / sq.a3());
  return g;
}

using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>;

struct MinimizeResult {
  Eigen::VectorXd x;
  double value;
  double grad_norm;
};

// BFGS with Armijo backtracking.
MinimizeResult bfgs(const Objective& f, Eigen::VectorXd x, double grad_tol, int max_iter) {
  const Eigen::Index n = x.size();
  Eigen::VectorXd g(n);
  double fx = f(x, &g);
  Eigen::MatrixXd Hinv = Eigen::MatrixXd::Identity(n, n);
  for (int it = 0; it < max_iter && g.norm() > grad_tol; ++it) {
    Eigen::VectorXd dir = -Hinv * g;
    if (dir.dot(g) >= 0.0) {
      Hinv.setIdentity();
      dir = -g;
    }
    double step = 1.0;
    Eigen::VectorXd xn(n);
    Eigen::VectorXd gn(n);
    double fn = fx;
    bool accepted = false;
    for (int ls = 0; ls < 80; ++ls) {
      xn = x + step * dir;
      fn = f(xn, &gn);
      if (std::isfinite(fn) && fn <= fx + 1e-4 * step * dir.dot(g)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    const Eigen::VectorXd sk = xn - x;
    const Eigen::VectorXd yk = gn - g;
    const double sy = sk.dot(yk);
    if (sy > 1e-300) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
      Hinv = (I - rho * sk * yk.transpose()) * Hinv * (I - rho * yk * sk.transpose()) +
             rho * sk * sk.transpose();
    }
    const double change = std::abs(fx - fn);
    x = xn;
    g = gn;
    fx = fn;
    if (change <= 1e-17 * std::max(1.0, std::abs(fx)) && sk.norm() <= 1e-15 * std::max(1.0, x.norm())) break;
  }
  return {x, fx, g.norm()};
}

std::vector<Eigen::Vector3d> fibonacci_directions(int count) {
  std::vector<Eigen::Vector3d> dirs;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < count; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / count;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    dirs.emplace_back(r * std::cos(golden * i), r * std::sin(golden * i), z);
  }
  return dirs;
}

}  // namespace

double support_value(const PosedSq& s, const Eigen::Vector3d& n, Eigen::Vector3d* point) {
  Eigen::Vector3d g;
  const double v = local_support(s.sq, s.pose.rotation.transpose() * n, &g);
  if (point) *point = s.pose.apply(g);
  return v + n.dot(s.pose.translation);
}

SdfReference sdf_reference(const PosedSq& a, const PosedSq& b, int starts) {
  // sigma_M(n) = sigma_A(n) + sigma_B(-n), evaluated at n = v / |v|.
  const Objective f = [&](const Eigen::VectorXd& v, Eigen::VectorXd* grad) {
    const double len = v.norm();
    const Eigen::Vector3d n = v / len;
    Eigen::Vector3d pa;
    Eigen::Vector3d pb;
    const double val = support_value(a, n, &pa) + support_value(b, -n, &pb);
    if (grad) {
      const Eigen::Vector3d gs = pa - pb;
      *grad = (gs - n * n.dot(gs)) / len;
    }
    return val;
  };
  SdfReference best;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<double> values;
  for (const Eigen::Vector3d& d : fibonacci_directions(std::max(1, starts))) {
    const MinimizeResult r = bfgs(f, d, 1e-13, 500);
    values.push_back(r.value);
    if (r.value < best_val) {
      best_val = r.value;
      const Eigen::Vector3d n = r.x.normalized();
      best.normal = -n;
      support_value(a, n, &best.point_a);
      support_value(b, -n, &best.point_b);
      best.residual = r.grad_norm * r.x.norm();
    }
  }
  best.distance = -best_val;
  // At a flat face the support function has a kink at the optimum and the
  // gradient cannot vanish; independent starts agreeing on the value then
  // certify the minimum instead.
  const double tol = 1e-12 * std::max(1.0, std::abs(best_val));
  const auto agreeing = std::count_if(values.begin(), values.end(), [&](double v) { return v <= best_val + tol; });
  best.converged = best.residual <= 1e-8 || agreeing >= 3;
  return best;
}

Vector6d fd_gradient(const std::function<double(const Vector6d&)>& f, const Vector6d& x, double step) {
  Vector6d g;
  for (int k = 0; k < 6; ++k) {
    Vector6d xp = x;
    Vector6d xm = x;
    xp[k] += step;
    xm[k] -= step;
    g[k] = (f(xp) - f(xm)) / (2.0 * step);
  }
  return g;
}

namespace {

// The penalty method works on the gauges: f_a is an increasing function of
// N_a, and f_b <= 1 is N_b <= 2^(e1_b / 2). Same minimizer, far better
// scaled than the raw implicit functions.
struct SurrogateCore {
  Eigen::Vector3d minimizer;
  double f_star;
  double violation;
};

Eigen::Vector3d run_penalty(const PosedSq& a, const PosedSq& b, const SurrogateSettings& s,
                            Eigen::VectorXd x, int first_round, int last_round) {
  const double level = std::pow(2.0, 0.5 * b.sq.e1());
  const Eigen::Matrix3d RaT = a.pose.rotation.transpose();
  const Eigen::Matrix3d RbT = b.pose.rotation.transpose();
  double mu = s.initial_penalty * std::pow(s.penalty_growth, first_round);
  for (int round = first_round; round < last_round; ++round, mu *= s.penalty_growth) {
    const Objective F = [&](const Eigen::VectorXd& p, Eigen::VectorXd* grad) {
      Eigen::Vector3d ga;
      Eigen::Vector3d gb;
      const double na = gauge(a.sq, RaT * (p - a.pose.translation), &ga);
      const double nb = gauge(b.sq, RbT * (p - b.pose.translation), &gb);
      const double excess = std::max(0.0, nb - level);
      if (grad) *grad = a.pose.rotation * ga + 2.0 * mu * excess * (b.pose.rotation * gb);
      return na + mu * excess * excess;
    };
    x = bfgs(F, x, 1e-9, 2000).x;
  }
  return x;
}

SurrogateCore evaluate(const PosedSq& a, const PosedSq& b, const Eigen::Vector3d& x) {
  const double na = gauge(a.sq, a.pose.rotation.transpose() * (x - a.pose.translation), nullptr);
  const double nb = gauge(b.sq, b.pose.rotation.transpose() * (x - b.pose.translation), nullptr);
  return {x, std::pow(na, 2.0 / a.sq.e1()) - 1.0, std::max(0.0, std::pow(nb, 2.0 / b.sq.e1()) - 2.0)};
}

// All starts go through the first round; the best few finish the schedule.
SurrogateCore surrogate_core(const PosedSq& a, const PosedSq& b, const SurrogateSettings& s) {
  const double level = std::pow(2.0, 0.5 * b.sq.e1());
  std::vector<std::pair<double, Eigen::Vector3d>> firsts;
  const auto dirs = fibonacci_directions(std::max(1, s.starts - 1));
  for (int k = 0; k < s.starts; ++k) {
    // Starts on the boundary of B's 1-sublevel set (uniform angles) plus its centre.
    Eigen::Vector3d p0 = b.pose.translation;
    if (k > 0) {
      const Eigen::Vector3d& dir = dirs[static_cast<size_t>(k - 1)];
      p0 = b.pose.apply(dir * (level / gauge(b.sq, dir, nullptr)));
    }
    const Eigen::Vector3d x = run_penalty(a, b, s, p0, 0, std::min(1, s.rounds));
    firsts.emplace_back(evaluate(a, b, x).f_star, x);
  }
  std::sort(firsts.begin(), firsts.end(), [](const auto& l, const auto& r) { return l.first < r.first; });
  SurrogateCore best{};
  best.f_star = std::numeric_limits<double>::infinity();
  for (size_t k = 0; k < std::min<size_t>(4, firsts.size()); ++k) {
    const SurrogateCore c = evaluate(a, b, run_penalty(a, b, s, firsts[k].second, 1, s.rounds));
    if (c.f_star < best.f_star) best = c;
  }
  return best;
}

}  // namespace

SurrogateResult implicit_surrogate(const PosedSq& a, const PosedSq& b, const SurrogateSettings& s) {
  const SurrogateCore c = surrogate_core(a, b, s);
  PosedSq bp = b;
  PosedSq bm = b;
  bp.pose.translation.x() += s.fd_step;
  bm.pose.translation.x() -= s.fd_step;
  // The problem is convex, so the shifted solves start from the minimizer.
  const double fp = evaluate(a, bp, run_penalty(a, bp, s, c.minimizer, 0, s.rounds)).f_star;
  const double fm = evaluate(a, bm, run_penalty(a, bm, s, c.minimizer, 0, s.rounds)).f_star;
  SurrogateResult r;
  r.f_star = c.f_star;
  r.minimizer = c.minimizer;
  r.violation = c.violation;
  r.grad_x = (fp - fm) / (2.0 * s.fd_step);
  r.converged = c.violation <= 1e-4 * std::max(1.0, std::abs(c.f_star));
  return r;
}

double implicit_surrogate_gauge(const PosedSq& a, const PosedSq& b, double tolerance) {
  // B's 1-sublevel set is B scaled about its centre by 2^(e1/2).
  PosedSq big = b;
  const double level = std::pow(2.0, 0.5 * b.sq.e1());
  big.sq = Superquadric(b.sq.axes() * level, b.sq.e1(), b.sq.e2());
  if (gauge(big.sq, b.pose.rotation.transpose() * (a.pose.translation - b.pose.translation), nullptr) <= 1.0) {
    return -1.0;  // A's centre lies in the feasible set
  }
  auto scaled = [&](double lambda) {
    PosedSq s = a;
    s.sq = Superquadric(a.sq.axes() * lambda, a.sq.e1(), a.sq.e2());
    return s;
  };
  double lo = 0.0;
  double hi = 1.0;
  while (sdf_reference(scaled(hi), big, 8).distance > 0.0) hi *= 2.0;
  while (hi - lo > tolerance * hi) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= 0.0) break;
    (sdf_reference(scaled(mid), big, 8).distance > 0.0 ? lo : hi) = mid;
  }
  return std::pow(0.5 * (lo + hi), 2.0 / a.sq.e1()) - 1.0;
}

QpReferenceResult qp_reference(const QpProblem& p, double tolerance, int max_sweeps) {
  const Eigen::Index m = p.A.rows();
  const Eigen::LLT<Eigen::MatrixXd> llt(p.H);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("qp_reference: H not positive definite");
  Eigen::MatrixXd A = p.A;
  Eigen::VectorXd b = p.b;
  Eigen::VectorXd scale = Eigen::VectorXd::Ones(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double nrm = A.row(i).norm();
    if (nrm > 0.0) {
      scale[i] = nrm;
      A.row(i) /= nrm;
      b[i] /= nrm;
    }
  }
  // Dual: maximize -1/2 l^T P l + c^T l over l >= 0, x = H^{-1}(A^T l - g).
  const Eigen::MatrixXd HinvAt = llt.solve(A.transpose());
  const Eigen::VectorXd x0 = -llt.solve(p.g);
  const Eigen::MatrixXd P = A * HinvAt;
  const Eigen::VectorXd c = b - A * x0;
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd x = x0;
  QpReferenceResult out;
  auto kkt = [&]() {
    double r = 0.0;
    const Eigen::VectorXd slack = A * x - b;
    for (Eigen::Index i = 0; i < m; ++i) {
      r = std::max(r, -slack[i]);
      r = std::max(r, std::abs(lambda[i] * slack[i]));
    }
    return r;  // stationarity holds by construction of x
  };
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    for (Eigen::Index i = 0; i < m; ++i) {
      if (!(P(i, i) > 0.0)) continue;
      const double grad = c[i] - P.row(i).dot(lambda);
      const double next = std::max(0.0, lambda[i] + grad / P(i, i));
      if (next != lambda[i]) {
        x += HinvAt.col(i) * (next - lambda[i]);
        lambda[i] = next;
      }
    }
    out.sweeps = sweep + 1;
    if ((sweep & 15) == 0) {
      x = x0 + HinvAt * lambda;
      if (kkt() <= tolerance) break;
      if (lambda.maxCoeff() > 1e14) break;
    }
  }
  x = x0 + HinvAt * lambda;
  out.x = x;
  out.kkt_residual = kkt();
  out.feasible = out.kkt_residual <= tolerance;
  out.multipliers = lambda.cwiseQuotient(scale);
  return out;
}

}  // namespace sqsafe::oracle
