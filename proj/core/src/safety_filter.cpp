#include "sqsafe/safety_filter.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace sqsafe {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool is_distance_row(RowKind k) { return k != RowKind::kManipulability; }

}  // namespace

const char* to_string(RowKind kind) {
  switch (kind) {
    case RowKind::kEnv: return "env";
    case RowKind::kSelf: return "self";
    case RowKind::kManipulability: return "manipulability";
  }
  return "?";
}

const char* to_string(FilterStatus status) {
  switch (status) {
    case FilterStatus::kOptimal: return "optimal";
    case FilterStatus::kRelaxed: return "relaxed";
    case FilterStatus::kHalted: return "halted";
  }
  return "?";
}

void FilterConfig::validate() const {
  if (!(alpha_delta > 0.0) || !(alpha_mu > 0.0)) throw std::invalid_argument("FilterConfig: gains must be positive");
  if (!(margin >= 0.0) || !(mu_threshold >= 0.0)) throw std::invalid_argument("FilterConfig: margins must be non-negative");
  if (!(smoothing_weight >= 0.0)) throw std::invalid_argument("FilterConfig: smoothing weight must be non-negative");
  if (!(period > 0.0)) throw std::invalid_argument("FilterConfig: period must be positive");
  if (!(activation_radius > 0.0)) throw std::invalid_argument("FilterConfig: activation radius must be positive");
  if (workers < 1) throw std::invalid_argument("FilterConfig: workers must be >= 1");
  if (n_u < 4 || n_v < 4) throw std::invalid_argument("FilterConfig: sampling resolution must be >= 4");
  if (!(smoothing.temperature > 0.0) || smoothing.neighborhood_depth < 1) {
    throw std::invalid_argument("FilterConfig: invalid smoothing settings");
  }
}

FilterConfig FilterConfig::from_json(const nlohmann::json& j, FilterConfig c) {
  c.alpha_delta = j.value("alpha_delta", c.alpha_delta);
  c.alpha_mu = j.value("alpha_mu", c.alpha_mu);
  c.margin = j.value("margin", c.margin);
  c.mu_threshold = j.value("mu_threshold", c.mu_threshold);
  c.smoothing_weight = j.value("smoothing_weight", c.smoothing_weight);
  c.period = j.value("period", c.period);
  c.activation_radius = j.value("activation_radius", c.activation_radius);
  c.slack_penalty = j.value("slack_penalty", c.slack_penalty);
  c.slack_limit = j.value("slack_limit", c.slack_limit);
  c.self_collision = j.value("self_collision", c.self_collision);
  c.manipulability = j.value("manipulability", c.manipulability);
  c.workers = j.value("workers", c.workers);
  c.n_u = j.value("n_u", c.n_u);
  c.n_v = j.value("n_v", c.n_v);
  c.smoothing.temperature = j.value("temperature", c.smoothing.temperature);
  c.smoothing.neighborhood_depth = j.value("neighborhood_depth", c.smoothing.neighborhood_depth);
  if (j.contains("mu_gradient")) {
    const auto m = j.at("mu_gradient").get<std::string>();
    if (m == "fd") {
      c.mu_gradient = ManipulabilityGradient::kFiniteDifference;
    } else if (m == "analytic") {
      c.mu_gradient = ManipulabilityGradient::kAnalytic;
    } else {
      throw std::invalid_argument("FilterConfig: mu_gradient must be \"fd\" or \"analytic\"");
    }
  }
  c.validate();
  return c;
}

FilterConfig FilterConfig::from_json(const nlohmann::json& j) { return from_json(j, FilterConfig{}); }

nlohmann::json FilterConfig::to_json() const {
  return {{"alpha_delta", alpha_delta}, {"alpha_mu", alpha_mu}, {"margin", margin},
          {"mu_threshold", mu_threshold}, {"smoothing_weight", smoothing_weight}, {"period", period},
          {"activation_radius", activation_radius}, {"slack_penalty", slack_penalty},
          {"slack_limit", slack_limit}, {"self_collision", self_collision},
          {"manipulability", manipulability}, {"workers", workers}, {"n_u", n_u}, {"n_v", n_v},
          {"temperature", smoothing.temperature}, {"neighborhood_depth", smoothing.neighborhood_depth},
          {"mu_gradient", mu_gradient == ManipulabilityGradient::kAnalytic ? "analytic" : "fd"}};
}

std::vector<ConstraintRow> assemble(const RobotModel& model, const Kinematics& fk,
                                    std::span<const Obstacle> obstacles,
                                    std::span<const PairEvaluation> pairs, const Manipulability& mu,
                                    const FilterConfig& cfg) {
  std::vector<ConstraintRow> rows;
  std::map<int, Eigen::MatrixXd> att_jac;
  auto jac = [&](int i) -> const Eigen::MatrixXd& {
    auto it = att_jac.find(i);
    if (it == att_jac.end()) it = att_jac.emplace(i, attachment_jacobian(model, fk, i)).first;
    return it->second;
  };
  for (const PairEvaluation& p : pairs) {
    if (p.failed || p.witness.distance > cfg.activation_radius) continue;
    if (!p.has_gradient) {
      throw std::invalid_argument("assemble: pair within the activation radius has no gradient");
    }
    ConstraintRow r;
    r.kind = p.kind;
    r.first = p.first;
    r.second = p.second;
    r.d = p.witness.distance;
    r.h = r.d - cfg.margin;
    r.rhs = -cfg.alpha_delta * r.h;
    if (p.kind == RowKind::kEnv) {
      r.row = p.gradient.j_a * jac(p.first);
      r.rhs -= p.gradient.j_b.dot(obstacles[static_cast<size_t>(p.second)].state.twist.transpose());
    } else {
      r.row = p.gradient.j_a * jac(p.first) + p.gradient.j_b * jac(p.second);
    }
    rows.push_back(std::move(r));
  }
  if (cfg.manipulability && mu.gradient_valid) {
    ConstraintRow r;
    r.kind = RowKind::kManipulability;
    r.row = mu.gradient;
    r.h = mu.mu - cfg.mu_threshold;
    r.d = mu.mu;
    r.rhs = -cfg.alpha_mu * r.h;
    rows.push_back(std::move(r));
  }
  return rows;
}

FilterResult solve(const Eigen::VectorXd& u_cmd, const Eigen::VectorXd& u_prev,
                   std::vector<ConstraintRow> rows, const Eigen::MatrixXd& J,
                   const Eigen::VectorXd& limits, const FilterConfig& cfg,
                   const std::vector<int>& warm_active) {
  const auto t0 = std::chrono::steady_clock::now();
  const Eigen::Index n = u_cmd.size();
  if (!u_cmd.allFinite()) throw std::invalid_argument("solve: u_cmd must be finite");
  if (u_prev.size() != n || limits.size() != n || J.cols() != n) {
    throw std::invalid_argument("solve: inconsistent sizes");
  }
  const auto m = static_cast<Eigen::Index>(rows.size());
  const Eigen::MatrixXd JtJ = J.transpose() * J;
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  const double w = cfg.smoothing_weight;

  QpProblem qp;
  qp.H = JtJ + (1.0 + w) * I;
  qp.g = -(JtJ + I) * u_cmd - w * u_prev;
  qp.A.resize(m + 2 * n, n);
  qp.b.resize(m + 2 * n);
  for (Eigen::Index k = 0; k < m; ++k) {
    qp.A.row(k) = rows[static_cast<size_t>(k)].row;
    qp.b[k] = rows[static_cast<size_t>(k)].rhs;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    qp.A.row(m + 2 * i) = I.row(i);
    qp.b[m + 2 * i] = -limits[i];
    qp.A.row(m + 2 * i + 1) = -I.row(i);
    qp.b[m + 2 * i + 1] = -limits[i];
  }

  FilterResult out;
  const QpResult r = solve_qp(qp, warm_active);
  if (r.feasible) {
    out.u_star = r.x;
    out.status = FilterStatus::kOptimal;
    for (int a : r.active) {
      if (a < m) out.active.push_back(a);
    }
  } else {
    // Slack s_k >= 0 on every distance row, penalized quadratically.
    std::vector<Eigen::Index> slack_rows;
    for (Eigen::Index k = 0; k < m; ++k) {
      if (is_distance_row(rows[static_cast<size_t>(k)].kind)) slack_rows.push_back(k);
    }
    const auto ns = static_cast<Eigen::Index>(slack_rows.size());
    QpProblem aug;
    aug.H = Eigen::MatrixXd::Zero(n + ns, n + ns);
    aug.H.topLeftCorner(n, n) = qp.H;
    aug.H.bottomRightCorner(ns, ns) = 2.0 * cfg.slack_penalty * Eigen::MatrixXd::Identity(ns, ns);
    aug.g = Eigen::VectorXd::Zero(n + ns);
    aug.g.head(n) = qp.g;
    aug.A = Eigen::MatrixXd::Zero(qp.A.rows() + ns, n + ns);
    aug.b = Eigen::VectorXd::Zero(qp.A.rows() + ns);
    aug.A.topLeftCorner(qp.A.rows(), n) = qp.A;
    aug.b.head(qp.A.rows()) = qp.b;
    for (Eigen::Index s = 0; s < ns; ++s) {
      aug.A(slack_rows[static_cast<size_t>(s)], n + s) = 1.0;
      aug.A(qp.A.rows() + s, n + s) = 1.0;
    }
    const QpResult ra = solve_qp(aug);
    out.max_slack = ns > 0 && ra.feasible ? ra.x.tail(ns).maxCoeff() : std::numeric_limits<double>::infinity();
    if (ra.feasible && out.max_slack <= cfg.slack_limit) {
      out.u_star = ra.x.head(n);
      out.status = FilterStatus::kRelaxed;
      for (int a : ra.active) {
        if (a < m) out.active.push_back(a);
      }
    } else {
      out.u_star = Eigen::VectorXd::Zero(n);
      out.status = FilterStatus::kHalted;
    }
  }
  out.rows = std::move(rows);
  out.solve_time = seconds_since(t0);
  return out;
}

SafetyFilter::SafetyFilter(std::shared_ptr<const RobotModel> model, FilterConfig cfg)
    : model_(std::move(model)), cfg_(std::move(cfg)), pool_(cfg_.workers) {
  if (!model_) throw std::invalid_argument("SafetyFilter: null model");
  cfg_.validate();
  for (const auto& a : model_->attachments()) {
    robot_polytopes_.push_back(sample_surface(a.sq, cfg_.n_u, cfg_.n_v));
  }
  u_prev_ = Eigen::VectorXd::Zero(model_->dof());
}

const ConvexPolytope& SafetyFilter::robot_polytope(int attachment) const {
  return robot_polytopes_.at(static_cast<size_t>(attachment));
}

std::shared_ptr<const ConvexPolytope> SafetyFilter::obstacle_polytope(const Superquadric& sq) {
  const std::array<double, 5> key{sq.a1(), sq.a2(), sq.a3(), sq.e1(), sq.e2()};
  auto it = obstacle_polytopes_.find(key);
  if (it == obstacle_polytopes_.end()) {
    it = obstacle_polytopes_
             .emplace(key, std::make_shared<const ConvexPolytope>(sample_surface(sq, cfg_.n_u, cfg_.n_v)))
             .first;
  }
  return it->second;
}

void SafetyFilter::rebuild_pairs(int obstacle_count) {
  slots_.clear();
  const int na = static_cast<int>(model_->attachments().size());
  for (int i = 0; i < na; ++i) {
    for (int o = 0; o < obstacle_count; ++o) slots_.push_back({RowKind::kEnv, i, o, {}, {}});
  }
  if (cfg_.self_collision) {
    for (const auto& [i, j] : model_->self_pairs()) slots_.push_back({RowKind::kSelf, i, j, {}, {}});
  }
  obstacle_count_ = obstacle_count;
}

void SafetyFilter::reset() {
  obstacle_count_ = -1;
  slots_.clear();
  u_prev_ = Eigen::VectorXd::Zero(model_->dof());
  warm_active_.clear();
}

std::vector<PairEvaluation> SafetyFilter::evaluate(const Kinematics& fk,
                                                   std::span<const Obstacle> obstacles,
                                                   bool all_gradients) {
  const int count = static_cast<int>(obstacles.size());
  if (count != obstacle_count_) rebuild_pairs(count);
  std::vector<std::shared_ptr<const ConvexPolytope>> obstacle_shapes;
  std::vector<Pose> obstacle_poses;
  for (const auto& o : obstacles) {
    obstacle_shapes.push_back(obstacle_polytope(o.sq));
    obstacle_poses.push_back(o.state.world_pose());
  }
  std::vector<PairEvaluation> out(slots_.size());
  pool_.run(static_cast<int>(slots_.size()), [&](int k) {
    PairSlot& slot = slots_[static_cast<size_t>(k)];
    PairEvaluation& e = out[static_cast<size_t>(k)];
    e.kind = slot.kind;
    e.first = slot.first;
    e.second = slot.second;
    DistanceQuery q;
    q.shape_a = &robot_polytopes_[static_cast<size_t>(slot.first)];
    q.pose_a = fk.attachments[static_cast<size_t>(slot.first)];
    if (slot.kind == RowKind::kEnv) {
      q.shape_b = obstacle_shapes[static_cast<size_t>(slot.second)].get();
      q.pose_b = obstacle_poses[static_cast<size_t>(slot.second)];
    } else {
      q.shape_b = &robot_polytopes_[static_cast<size_t>(slot.second)];
      q.pose_b = fk.attachments[static_cast<size_t>(slot.second)];
    }
    try {
      e.witness = signed_distance(q, &slot.cache, cfg_.gjk);
      if (all_gradients || e.witness.distance <= cfg_.activation_radius) {
        e.gradient = pose_gradient(q, e.witness, cfg_.smoothing, &slot.cache);
        e.has_gradient = true;
      }
    } catch (const std::runtime_error& err) {
      e.failed = true;
      e.error = err.what();
      if (const auto* nc = dynamic_cast<const DistanceNotConverged*>(&err)) e.witness.distance = nc->bound();
    }
  });
  return out;
}

FilterResult SafetyFilter::step(const Eigen::VectorXd& q, std::span<const Obstacle> obstacles,
                                const Eigen::VectorXd& u_cmd) {
  const int n = model_->dof();
  if (u_cmd.size() != n) throw std::invalid_argument("SafetyFilter::step: u_cmd size mismatch");
  const auto t0 = std::chrono::steady_clock::now();
  const Kinematics fk = forward_kinematics(*model_, q);
  const std::vector<PairEvaluation> pairs = evaluate(fk, obstacles);
  Manipulability mu;
  if (cfg_.manipulability) mu = manipulability(*model_, q, cfg_.mu_gradient);
  const double eval_time = seconds_since(t0);

  const auto t1 = std::chrono::steady_clock::now();
  std::vector<ConstraintRow> rows = assemble(*model_, fk, obstacles, pairs, mu, cfg_);
  // A failed pair keeps its previous row, tightened to forbid approach.
  for (size_t k = 0; k < pairs.size(); ++k) {
    if (!pairs[k].failed) continue;
    const auto& last = slots_[k].last_row;
    if (!last) throw std::runtime_error("SafetyFilter: distance failed with no previous row: " + pairs[k].error);
    ConstraintRow r = *last;
    r.rhs = std::max(r.rhs, 0.0);
    rows.push_back(r);
  }

  // Warm start from the rows that were active last cycle, matched by pair.
  std::vector<int> warm;
  for (int k = 0; k < static_cast<int>(rows.size()); ++k) {
    const auto& r = rows[static_cast<size_t>(k)];
    for (int a : warm_active_) {
      if (a == static_cast<int>(r.kind) * 1000003 + r.first * 1009 + r.second) warm.push_back(k);
    }
  }
  FilterResult result = solve(u_cmd, u_prev_, std::move(rows), task_jacobian(*model_, fk),
                              model_->velocity_limits(), cfg_, warm);
  warm_active_.clear();
  for (int a : result.active) {
    const auto& r = result.rows[static_cast<size_t>(a)];
    warm_active_.push_back(static_cast<int>(r.kind) * 1000003 + r.first * 1009 + r.second);
  }
  result.solve_time = seconds_since(t1);
  result.eval_time = eval_time;
  result.mu = mu.mu;

  for (size_t k = 0; k < pairs.size(); ++k) {
    const PairEvaluation& p = pairs[k];
    const double d = p.witness.distance;
    PairDiagnostic diag{p.kind, p.first, p.second, d, d - cfg_.margin, 0.0, d > cfg_.activation_radius, p.failed};
    for (const auto& r : result.rows) {
      if (r.kind == p.kind && r.first == p.first && r.second == p.second) {
        diag.row_norm = r.row.norm();
        if (!p.failed) slots_[k].last_row = r;
      }
    }
    result.pairs.push_back(diag);
    result.d_min = std::min(result.d_min, d);
    result.h_min = std::min(result.h_min, d - cfg_.margin);
    if (p.kind == RowKind::kEnv) {
      result.d_min_env = std::min(result.d_min_env, d);
    } else {
      result.d_min_self = std::min(result.d_min_self, d);
    }
  }
  u_prev_ = result.u_star;
  return result;
}

}  // namespace sqsafe
