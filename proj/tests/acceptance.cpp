// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. `acceptance A3 A7` runs a subset.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "sqsafe/oracle.hpp"
#include "sqsafe/safety_filter.hpp"
#include "sqsafe/sim.hpp"
#include "sqsafe/voxel.hpp"
#include "studies.hpp"
#include "support.hpp"

using namespace sqsafe;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
  nlohmann::json data = nlohmann::json::object();
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ------------------------------------------------------------------ A1

Outcome a1() {
  const auto samples = studies::figtwo(61, -3.0, 3.0, 200);
  double peak = 0.0, g_lo = 1e300, g_hi = 0.0;
  int separated = 0;
  bool converged = true;
  for (const auto& s : samples) {
    peak = std::max({peak, std::abs(s.f_star), std::abs(s.df_dx)});
    converged = converged && s.converged;
    if (s.d > 0.0) {
      ++separated;
      g_lo = std::min(g_lo, s.grad_norm);
      g_hi = std::max(g_hi, s.grad_norm);
    }
  }
  Outcome o;
  o.pass = converged && peak > 1e4 && separated > 0 && g_lo >= 0.9 && g_hi <= 1.1;
  o.detail = fmt("max(|f*|,|df*/dx|) = %.3g, |grad d| in [%.4f, %.4f] over %d separated samples", peak, g_lo, g_hi,
                 separated);
  o.data = {{"peak", peak}, {"grad_min", g_lo}, {"grad_max", g_hi}, {"separated", separated}};
  return o;
}

// ------------------------------------------------------------------ A2

Outcome a2() {
  using studies::Orientation;
  studies::GradStudy study(200, 1e-6);
  const std::vector<double> d_cs{0.3, 0.5, 1.0};
  double worst = 0.0;
  bool converged = true;
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : study.grid({1.0, 0.3}, {Orientation::kFaceFace}, d_cs, {1e-8})) {
    worst = std::max(worst, c.rel_error);
    converged = converged && c.converged;
    cells.push_back(c.to_json());
  }
  // Reported only: vertex-vertex cubes at the closest spacing.
  double vv_worst = 0.0;
  nlohmann::json vv = nlohmann::json::array();
  for (const auto& c : study.grid({0.3}, {Orientation::kVertexVertex}, {0.3}, {1e-2, 1e-4, 1e-6, 1e-8, 1e-10})) {
    vv_worst = std::max(vv_worst, c.rel_error);
    vv.push_back(c.to_json());
  }
  Outcome o;
  o.pass = converged && worst <= 0.01;
  o.detail = fmt("worst relative error %.3g%% over 6 cells (vertex-vertex d_c=0.3, reported: worst %.3g%%)",
                 100 * worst, 100 * vv_worst);
  o.data = {{"cells", cells}, {"vertex_vertex", vv}};
  return o;
}

// ------------------------------------------------------------------ A3, A4

struct RandomPair {
  Superquadric a, b;
  Pose pa, pb;
};

RandomPair random_pair(std::mt19937_64& rng, double r_min, double r_max) {
  std::uniform_real_distribution<double> r(r_min, r_max);
  RandomPair p{test::random_sq(rng), test::random_sq(rng), test::random_pose(rng, 0.1), Pose::identity()};
  p.pb = Pose::from_chart(p.pa.translation + test::random_unit(rng) * r(rng), test::random_unit(rng) * 1.5);
  return p;
}

Outcome a3() {
  std::mt19937_64 rng(301);
  int accepted = 0, penetrating = 0, deep = 0, unconverged = 0;
  double worst = 0.0;
  while (accepted < 50) {
    const RandomPair p = random_pair(rng, 0.08, 0.4);
    const auto ref = oracle::sdf_reference({p.a, p.pa}, {p.b, p.pb});
    const double shallow = 0.5 * std::min(p.a.axes().minCoeff(), p.b.axes().minCoeff());
    if (!ref.converged) {
      ++unconverged;
      continue;
    }
    if (ref.distance < -shallow) {
      ++deep;
      continue;
    }
    const ConvexPolytope ma = sample_surface(p.a, 200, 200);
    const ConvexPolytope mb = sample_surface(p.b, 200, 200);
    const double d = signed_distance({&ma, &mb, p.pa, p.pb}).distance;
    worst = std::max(worst, std::abs(d - ref.distance));
    penetrating += ref.distance < 0.0;
    ++accepted;
  }
  Outcome o;
  o.pass = worst <= 1e-3 && penetrating > 0;
  o.detail = fmt("max |d - d_ref| = %.3g m over 50 pairs (%d penetrating; skipped %d deep, %d oracle-unconverged draws)",
                 worst, penetrating, deep, unconverged);
  o.data = {{"worst", worst}, {"penetrating", penetrating}, {"deep", deep}, {"unconverged", unconverged}};
  return o;
}

Outcome a4() {
  std::mt19937_64 rng(401);
  int checked = 0;
  double lo = 1e300, hi = 0.0;
  while (checked < 200) {
    const RandomPair p = random_pair(rng, 0.35, 0.8);
    const ConvexPolytope ma = sample_surface(p.a, 200, 200);
    const ConvexPolytope mb = sample_surface(p.b, 200, 200);
    const DistanceQuery q{&ma, &mb, p.pa, p.pb};
    const WitnessPair w = signed_distance(q);
    if (w.distance <= 0.0) continue;
    const double g = pose_gradient(q, w).j_b.head<3>().norm();
    lo = std::min(lo, g);
    hi = std::max(hi, g);
    ++checked;
  }
  Outcome o;
  o.pass = lo >= 0.99 && hi <= 1.01;
  o.detail = fmt("translation-gradient norm in [%.5f, %.5f] over 200 separated pairs", lo, hi);
  o.data = {{"min", lo}, {"max", hi}};
  return o;
}

// ------------------------------------------------------------------ A5, A6

Outcome a5() {
  Outcome o;
  o.pass = true;
  std::ostringstream detail;
  for (const char* name : {"basket_l040.json", "basket_l032.json", "basket_l024.json"}) {
    int safe_on = 0, pen_off = 0;
    double worst_on = 1e300;
    nlohmann::json runs = nlohmann::json::array();
    double margin = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const Scenario s = Scenario::load(test::scenario_path(name), seed);
      margin = s.filter.margin;
      const RunMetrics on = run(s, true).metrics;
      const RunMetrics off = run(s, false).metrics;
      safe_on += on.d_min >= 0.0;
      pen_off += off.d_min < 0.0;
      worst_on = std::min(worst_on, on.d_min);
      runs.push_back({{"seed", seed}, {"on", on.to_json()}, {"off", off.to_json()}});
    }
    const bool ok = safe_on == 10 && pen_off >= 8;
    o.pass = o.pass && ok;
    detail << fmt("%s (eps %.4g): ON safe %d/10 (min d %.4g), OFF penetrating %d/10; ", name, margin, safe_on,
                  worst_on, pen_off);
    o.data[name] = runs;
  }
  const RunMetrics swing = run(Scenario::load(test::scenario_path("dynamic_swing.json")), true).metrics;
  o.pass = o.pass && swing.d_min >= 0.0;
  detail << fmt("dynamic_swing ON min d %.4g", swing.d_min);
  o.data["dynamic_swing"] = swing.to_json();
  o.detail = detail.str();
  return o;
}

Outcome a6() {
  double worst = 0.0, ratio = 0.0;
  int cycles = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const RunResult r = run(Scenario::load(test::scenario_path("empty.json"), seed), true);
    ratio = std::max(ratio, r.metrics.intervention_ratio);
    for (const auto& c : r.log) worst = std::max(worst, (c.u_filtered - c.u_nominal).norm());
    cycles += static_cast<int>(r.log.size());
  }
  Outcome o;
  o.pass = ratio == 0.0 && worst <= 1e-9;
  o.detail = fmt("intervention ratio %.3g, max |u* - u_cmd| = %.3g over %d cycles", ratio, worst, cycles);
  o.data = {{"ratio", ratio}, {"max_deviation", worst}};
  return o;
}

// ------------------------------------------------------------------ A7

Outcome a7() {
  std::mt19937_64 rng(701);
  std::normal_distribution<double> g;
  std::uniform_int_distribution<int> rows_n(1, 50);
  FilterConfig cfg;
  cfg.manipulability = false;
  double worst = 0.0;
  int bad_status = 0;
  for (int t = 0; t < 100; ++t) {
    const int n = 7;
    const int m = rows_n(rng);
    const Eigen::VectorXd u_cmd = Eigen::VectorXd::NullaryExpr(n, [&] { return g(rng); });
    const Eigen::VectorXd u_prev = Eigen::VectorXd::NullaryExpr(n, [&] { return 0.5 * g(rng); });
    const Eigen::MatrixXd J = Eigen::MatrixXd::NullaryExpr(6, n, [&] { return g(rng); });
    const Eigen::VectorXd limits = Eigen::VectorXd::Constant(n, 2.0);
    std::vector<ConstraintRow> rows(static_cast<size_t>(m));
    for (auto& r : rows) {
      r.row = Eigen::RowVectorXd::NullaryExpr(n, [&] { return g(rng); });
      r.rhs = -std::abs(g(rng));  // u = 0 stays feasible
    }
    const FilterResult f = solve(u_cmd, u_prev, rows, J, limits, cfg);
    bad_status += f.status != FilterStatus::kOptimal;

    QpProblem ref;
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd JtJ = J.transpose() * J;
    ref.H = 2.0 * (JtJ + (1.0 + cfg.smoothing_weight) * I);
    ref.g = -2.0 * ((JtJ + I) * u_cmd + cfg.smoothing_weight * u_prev);
    ref.A.resize(m + 2 * n, n);
    ref.b.resize(m + 2 * n);
    for (int k = 0; k < m; ++k) {
      ref.A.row(k) = rows[static_cast<size_t>(k)].row;
      ref.b[k] = rows[static_cast<size_t>(k)].rhs;
    }
    ref.A.bottomRows(2 * n) << I, -I;
    ref.b.tail(2 * n) = -limits.replicate(2, 1);
    worst = std::max(worst, (oracle::qp_reference(ref).x - f.u_star).norm());
  }
  Outcome o;
  o.pass = worst <= 1e-6 && bad_status == 0;
  o.detail = fmt("max |u_filter - u_oracle| = %.3g over 100 instances (n = 7, 1..50 rows)", worst);
  o.data = {{"worst", worst}};
  return o;
}

// ------------------------------------------------------------------ A8

Outcome a8() {
  studies::PairBenchmark bench(300, 7, 200);
  std::vector<double> x, y;
  nlohmann::json points = nlohmann::json::array();
  for (int p = 8; p <= 256; p += 8) {
    const auto pt = bench.run(p, 1, 30);
    x.push_back(p);
    y.push_back(pt.mean);
    points.push_back(pt.to_json());
  }
  const double r2 = studies::r_squared(x, y);
  const auto one = bench.run(300, 1, 30);
  const auto four = bench.run(300, 4, 30);
  const double speedup = one.mean / four.mean;
  Outcome o;
  o.pass = r2 >= 0.95 && speedup >= 2.4;
  o.detail = fmt("R^2 = %.4f over 8..256 pairs; 300 pairs: %.2f ms (1 worker), %.2f ms (4 workers), speedup %.2fx "
                 "on %u hardware threads",
                 r2, 1e3 * one.mean, 1e3 * four.mean, speedup, std::thread::hardware_concurrency());
  o.data = {{"points", points}, {"r2", r2}, {"one", one.to_json()}, {"four", four.to_json()}, {"speedup", speedup}};
  return o;
}

// ------------------------------------------------------------------ A9

Vector6d pose_delta(const Pose& from, const Pose& to) {
  Vector6d d;
  d << to.translation - from.translation, so3::log(to.rotation * from.rotation.transpose());
  return d;
}

Outcome a9() {
  const RobotModel m = RobotModel::load(test::data_dir() / "robots" / "fr3_like.json");
  std::mt19937_64 rng(901);
  std::uniform_real_distribution<double> u(-2.5, 2.5);
  const double h = 1e-6;
  double jac = 0.0, rate = 0.0, mu_fd = 0.0, mu_an = 0.0;
  int rate_checks = 0;
  for (int t = 0; t < 100; ++t) {
    const Eigen::VectorXd q = Eigen::VectorXd::NullaryExpr(m.dof(), [&] { return u(rng); });
    const Eigen::VectorXd qd = Eigen::VectorXd::NullaryExpr(m.dof(), [&] { return u(rng); });
    const Kinematics fk = forward_kinematics(m, q);
    std::vector<Kinematics> plus, minus;
    for (int k = 0; k < m.dof(); ++k) {
      Eigen::VectorXd qp = q, qm = q;
      qp[k] += h;
      qm[k] -= h;
      plus.push_back(forward_kinematics(m, qp));
      minus.push_back(forward_kinematics(m, qm));
    }
    for (int link = 1; link <= m.dof(); ++link) {
      const Eigen::MatrixXd J = geometric_jacobian(m, fk, link);
      for (int k = 0; k < m.dof(); ++k) {
        const Vector6d fd = pose_delta(minus[static_cast<size_t>(k)].links[static_cast<size_t>(link)],
                                       plus[static_cast<size_t>(k)].links[static_cast<size_t>(link)]) / (2 * h);
        jac = std::max(jac, (J.col(k) - fd).cwiseAbs().maxCoeff());
      }
    }
    // Twist-to-SQ-rate: rate of the (translation, axis-angle) chart of each
    // attachment along the joint velocity qd.
    const Kinematics fp = forward_kinematics(m, q + h * qd);
    const Kinematics fm = forward_kinematics(m, q - h * qd);
    for (size_t i = 0; i < m.attachments().size(); ++i) {
      const Attachment& a = m.attachments()[i];
      const Vector6d x0 = fk.attachments[i].to_chart();
      if (x0.tail<3>().norm() > std::numbers::pi - 0.05) continue;  // chart wraps near pi
      const Vector6d twist = geometric_jacobian(m, fk, a.link) * qd;
      const Eigen::Vector3d offset = fk.attachments[i].translation - fk.links[static_cast<size_t>(a.link)].translation;
      const Vector6d r = twist_to_sq_rate(offset, x0.tail<3>(), twist);
      const Vector6d fd = (fp.attachments[i].to_chart() - fm.attachments[i].to_chart()) / (2 * h);
      rate = std::max(rate, (r - fd).cwiseAbs().maxCoeff());
      ++rate_checks;
    }
    Eigen::RowVectorXd ref(m.dof());
    for (int k = 0; k < m.dof(); ++k) {
      Eigen::VectorXd qp = q, qm = q;
      qp[k] += 1e-5;
      qm[k] -= 1e-5;
      ref[k] = (manipulability_value(m, qp) - manipulability_value(m, qm)) / 2e-5;
    }
    const Manipulability f = manipulability(m, q, ManipulabilityGradient::kFiniteDifference);
    const Manipulability an = manipulability(m, q, ManipulabilityGradient::kAnalytic);
    mu_fd = std::max(mu_fd, (f.gradient - ref).cwiseAbs().maxCoeff());
    mu_an = std::max(mu_an, (an.gradient - ref).cwiseAbs().maxCoeff());
  }
  Outcome o;
  o.pass = jac <= 1e-4 && rate <= 1e-4 && mu_fd <= 1e-4 && mu_an <= 1e-4;
  o.detail = fmt("max abs error: Jacobian %.2g, SQ rate %.2g (%d maps), J_mu %.2g (fd) / %.2g (analytic)", jac, rate,
                 rate_checks, mu_fd, mu_an);
  o.data = {{"jacobian", jac}, {"sq_rate", rate}, {"mu_fd", mu_fd}, {"mu_analytic", mu_an}};
  return o;
}

// ------------------------------------------------------------------ A10

Outcome a10() {
  const std::vector<PosedSq> arm{{Superquadric(0.1, 0.05, 0.2, 0.4, 0.8), Pose::identity()},
                                 {Superquadric(0.05, 0.05, 0.15, 1.0, 1.0), Pose::from_translation(Point3(0, 0, 0.3))}};
  const VoxelMetrics same = voxel_metrics(arm, arm, 0.005);
  const std::vector<PosedSq> outer{{Superquadric(0.2, 0.2, 0.2, 1, 1), Pose::identity()}};
  const std::vector<PosedSq> inner{{Superquadric(0.1, 0.1, 0.1, 1, 1), Pose::identity()}};
  const VoxelMetrics conc = voxel_metrics(outer, inner, 0.005);
  const double expected = 7.0;  // (0.2^3 - 0.1^3) / 0.1^3
  Outcome o;
  o.pass = same.coverage == 1.0 && same.over_approx == 0.0 && conc.coverage == 1.0 &&
           std::abs(conc.over_approx - expected) <= 0.05 * expected;
  o.detail = fmt("identical: (%.17g, %.17g); concentric: coverage %.4f, over-approximation %.4f vs %.1f", same.coverage,
                 same.over_approx, conc.coverage, conc.over_approx, expected);
  o.data = {{"same", {same.coverage, same.over_approx}}, {"concentric", {conc.coverage, conc.over_approx}}};
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"A1", a1}, {"A2", a2}, {"A3", a3}, {"A4", a4}, {"A5", a5},
      {"A6", a6}, {"A7", a7}, {"A8", a8}, {"A9", a9}, {"A10", a10}};
  std::set<std::string> only(argv + 1, argv + argc);
  nlohmann::json report = nlohmann::json::object();
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && !only.contains(name)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::cout << name << ' ' << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << fmt("  [%.1f s]", secs) << std::endl;
    report[name] = {{"pass", o.pass}, {"detail", o.detail}, {"seconds", secs}, {"data", o.data}};
  }
  std::ofstream("acceptance_report.json") << report.dump(2) << '\n';
  return failed == 0 ? 0 : 1;
}
