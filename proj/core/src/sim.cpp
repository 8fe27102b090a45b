#include "sqsafe/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <stdexcept>

#include "sqsafe/io.hpp"

namespace sqsafe {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kInterventionThreshold = 1e-6;

// JSON has no infinity; an empty pair class is written as null.
nlohmann::json num(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }
double num_from(const nlohmann::json& j) { return j.is_null() ? kInf : j.get<double>(); }

Vector6d chart_of(const Pose& p) { return p.to_chart(); }

Vector6d vec6_from_json(const nlohmann::json& j) {
  const Eigen::VectorXd v = vecx_from_json(j);
  if (v.size() != 6) throw std::invalid_argument("expected a 6-element array");
  return v;
}

}  // namespace

// ---------------------------------------------------------------- scripts

MotionScript MotionScript::fixed(const Pose& pose) {
  MotionScript m;
  m.base_ = pose;
  return m;
}

MotionScript MotionScript::sinusoid(const Pose& base, const Vector6d& amplitude, double frequency,
                                    double phase) {
  if (!(frequency >= 0.0) || !amplitude.allFinite()) {
    throw std::invalid_argument("MotionScript: invalid sinusoid parameters");
  }
  MotionScript m;
  m.kind_ = Kind::kSinusoid;
  m.base_ = base;
  m.amplitude_ = amplitude;
  m.frequency_ = frequency;
  m.phase_ = phase;
  return m;
}

MotionScript MotionScript::waypoints(std::vector<double> times, std::vector<Pose> poses) {
  if (times.empty() || times.size() != poses.size()) {
    throw std::invalid_argument("MotionScript: waypoint times and poses must be non-empty and equal in size");
  }
  for (size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) throw std::invalid_argument("MotionScript: waypoint times must increase");
  }
  MotionScript m;
  m.kind_ = Kind::kWaypoint;
  m.base_ = poses.front();
  m.times_ = std::move(times);
  m.poses_ = std::move(poses);
  return m;
}

MotionScript MotionScript::from_json(const nlohmann::json& j, const Pose& base) {
  const std::string kind = j.value("kind", "static");
  if (kind == "static") return fixed(base);
  if (kind == "sinusoid") {
    return sinusoid(base, vec6_from_json(j.at("amplitude")), j.at("frequency").get<double>(),
                    j.value("phase", 0.0));
  }
  if (kind == "waypoint") {
    std::vector<double> times;
    std::vector<Pose> poses;
    for (const auto& p : j.at("points")) {
      times.push_back(p.at("t").get<double>());
      poses.push_back(pose_from_json(p.at("pose")));
    }
    return waypoints(std::move(times), std::move(poses));
  }
  throw std::invalid_argument("MotionScript: unknown kind \"" + kind + "\"");
}

nlohmann::json MotionScript::to_json() const {
  switch (kind_) {
    case Kind::kStatic: return {{"kind", "static"}};
    case Kind::kSinusoid:
      return {{"kind", "sinusoid"}, {"amplitude", vec_to_json(amplitude_)}, {"frequency", frequency_},
              {"phase", phase_}};
    case Kind::kWaypoint: {
      auto pts = nlohmann::json::array();
      for (size_t i = 0; i < times_.size(); ++i) pts.push_back({{"t", times_[i]}, {"pose", pose_to_json(poses_[i])}});
      return {{"kind", "waypoint"}, {"points", pts}};
    }
  }
  return {};
}

ObstacleState MotionScript::at(double t) const {
  ObstacleState s;
  switch (kind_) {
    case Kind::kStatic:
      s.pose = chart_of(base_);
      break;
    case Kind::kSinusoid: {
      const double w = 2.0 * std::numbers::pi * frequency_;
      const Vector6d x0 = chart_of(base_);
      s.pose = x0 + amplitude_ * std::sin(w * t + phase_);
      const Vector6d xdot = amplitude_ * w * std::cos(w * t + phase_);
      s.twist.head<3>() = xdot.head<3>();
      s.twist.tail<3>() = so3::left_jacobian(s.pose.tail<3>()) * xdot.tail<3>();
      break;
    }
    case Kind::kWaypoint: {
      if (t <= times_.front()) {
        s.pose = chart_of(poses_.front());
        break;
      }
      if (t >= times_.back()) {
        s.pose = chart_of(poses_.back());
        break;
      }
      const auto it = std::upper_bound(times_.begin(), times_.end(), t);
      const size_t i = static_cast<size_t>(it - times_.begin()) - 1;
      const double dt = times_[i + 1] - times_[i];
      const double s01 = (t - times_[i]) / dt;
      const Pose& a = poses_[i];
      const Pose& b = poses_[i + 1];
      const Eigen::Vector3d dphi = so3::log(b.rotation * a.rotation.transpose());
      const Eigen::Vector3d dp = b.translation - a.translation;
      Pose p;
      p.translation = a.translation + s01 * dp;
      p.rotation = so3::exp(s01 * dphi) * a.rotation;
      s.pose = chart_of(p);
      s.twist.head<3>() = dp / dt;
      s.twist.tail<3>() = dphi / dt;
      break;
    }
  }
  return s;
}

MotionScript MotionScript::transformed(const Pose& offset) const {
  MotionScript m = *this;
  m.base_ = offset * base_;
  for (auto& p : m.poses_) p = offset * p;
  if (kind_ == Kind::kSinusoid && !offset.rotation.isIdentity(1e-15)) {
    // The chart is not equivariant under rotation; only translations keep a
    // sinusoid a sinusoid.
    throw std::invalid_argument("MotionScript: sinusoid scripts can only be translated");
  }
  return m;
}

// ---------------------------------------------------------------- basket

std::vector<Obstacle> build_basket(double l, double thickness, double height, const Pose& pose,
                                   double exponent) {
  if (!(l > 0.0) || !(thickness > 0.0) || !(height > 0.0)) {
    throw std::invalid_argument("build_basket: dimensions must be positive");
  }
  const double t = thickness;
  const double w = 0.5 * l;  // inner width along y
  struct Part {
    const char* name;
    Eigen::Vector3d half;
    Eigen::Vector3d center;
  };
  // Long walls span the full outer length; short walls sit between them.
  const Part parts[] = {
      {"basket_floor", {0.5 * l + t, 0.5 * w + t, 0.5 * t}, {0.0, 0.0, -0.5 * t}},
      {"basket_wall_+x", {0.5 * t, 0.5 * w, 0.5 * height}, {0.5 * l + 0.5 * t, 0.0, 0.5 * height}},
      {"basket_wall_-x", {0.5 * t, 0.5 * w, 0.5 * height}, {-0.5 * l - 0.5 * t, 0.0, 0.5 * height}},
      {"basket_wall_+y", {0.5 * l + t, 0.5 * t, 0.5 * height}, {0.0, 0.5 * w + 0.5 * t, 0.5 * height}},
      {"basket_wall_-y", {0.5 * l + t, 0.5 * t, 0.5 * height}, {0.0, -0.5 * w - 0.5 * t, 0.5 * height}},
  };
  std::vector<Obstacle> out;
  for (const Part& p : parts) {
    Obstacle o{p.name, Superquadric(p.half, exponent, exponent), {}};
    o.state.pose = chart_of(pose * Pose::from_translation(p.center));
    out.push_back(std::move(o));
  }
  return out;
}

// ---------------------------------------------------------------- controller

Vector6d NominalController::jog_twist(double t) const {
  Vector6d v = Vector6d::Zero();
  for (const auto& s : segments) {
    if (t >= s.t0 && t < s.t1) v += s.twist;
  }
  return v;
}

Eigen::Vector3d NominalController::goal(double t) const {
  if (goal_points.empty()) throw std::logic_error("NominalController: no goal points");
  Eigen::Vector3d g;
  if (t <= goal_times.front()) {
    g = goal_points.front();
  } else if (t >= goal_times.back()) {
    g = goal_points.back();
  } else {
    const auto it = std::upper_bound(goal_times.begin(), goal_times.end(), t);
    const size_t i = static_cast<size_t>(it - goal_times.begin()) - 1;
    const double s = (t - goal_times[i]) / (goal_times[i + 1] - goal_times[i]);
    g = goal_points[i] + s * (goal_points[i + 1] - goal_points[i]);
  }
  // Jogs displace the target by their integral.
  for (const auto& s : segments) {
    const double len = std::clamp(t, s.t0, s.t1) - s.t0;
    g += len * s.twist.head<3>();
  }
  return g;
}

// ---------------------------------------------------------------- scenario

namespace {

struct Frames {
  std::map<std::string, Pose> named;

  Pose get(const nlohmann::json& j) const {
    const std::string name = j.value("frame", "world");
    if (name == "world") return Pose::identity();
    const auto it = named.find(name);
    if (it == named.end()) throw std::invalid_argument("scenario: unknown frame \"" + name + "\"");
    return it->second;
  }
};

}  // namespace

Scenario Scenario::from_json(const nlohmann::json& j, const std::filesystem::path& base_dir,
                             std::optional<std::uint64_t> seed) {
  Scenario sc;
  sc.source = j;
  sc.name = j.value("name", "scenario");
  sc.seed = seed ? *seed : j.value("seed", std::uint64_t{0});

  std::filesystem::path robot_path = j.at("robot").get<std::string>();
  if (robot_path.is_relative()) robot_path = base_dir / robot_path;
  auto robot = std::make_shared<RobotModel>(RobotModel::load(robot_path));
  if (j.contains("base")) *robot = robot->with_base(pose_from_json(j.at("base")));
  sc.robot = robot;
  sc.q0 = j.contains("q0") ? vecx_from_json(j.at("q0")) : robot->home();
  if (sc.q0.size() != robot->dof()) throw std::invalid_argument("scenario: q0 size does not match the robot");

  sc.filter = FilterConfig::from_json(j.value("filter", nlohmann::json::object()));
  const double period = j.value("period", sc.filter.period);
  if (j.contains("filter") && j.at("filter").contains("period") && period != sc.filter.period) {
    throw std::invalid_argument("scenario: period disagrees with the filter's control period");
  }
  sc.filter.period = period;
  sc.filter.validate();
  sc.duration = j.value("duration", sc.duration);
  if (!(sc.duration > 0.0)) throw std::invalid_argument("scenario: duration must be positive");

  Frames frames;
  if (j.contains("frames")) {
    for (const auto& [name, p] : j.at("frames").items()) frames.named[name] = pose_from_json(p);
  }
  // Seeded placement noise: uniform translation in a box around a frame.
  if (j.contains("randomize")) {
    const auto& r = j.at("randomize");
    const std::string name = r.at("frame").get<std::string>();
    if (!frames.named.contains(name)) throw std::invalid_argument("scenario: randomize names an unknown frame");
    const Eigen::Vector3d box = vec3_from_json(r.at("translation"));
    std::mt19937_64 rng(sc.seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    Eigen::Vector3d offset;
    for (int i = 0; i < 3; ++i) offset[i] = box[i] * uni(rng);
    frames.named[name].translation += offset;
  }

  if (j.contains("basket")) {
    const auto& b = j.at("basket");
    for (auto& o : build_basket(b.at("l").get<double>(), b.value("thickness", 0.02), b.value("height", 0.15),
                                frames.get(b), b.value("exponent", 0.2))) {
      const Pose p = o.state.world_pose();
      sc.obstacles.push_back({std::move(o), MotionScript::fixed(p)});
    }
  }
  for (const auto& o : j.value("obstacles", nlohmann::json::array())) {
    const Pose frame = frames.get(o);
    const Pose local = o.contains("pose") ? pose_from_json(o.at("pose")) : Pose::identity();
    MotionScript script = MotionScript::from_json(o.value("script", nlohmann::json::object()), local);
    script = script.transformed(frame);
    Obstacle ob{o.value("name", "obstacle_" + std::to_string(sc.obstacles.size())), sq_from_json(o), {}};
    ob.state = script.at(0.0);
    sc.obstacles.push_back({std::move(ob), std::move(script)});
  }

  const Kinematics fk0 = forward_kinematics(*robot, sc.q0);
  const auto& c = j.at("controller");
  const std::string kind = c.at("kind").get<std::string>();
  NominalController& ctl = sc.controller;
  if (kind == "twist") {
    ctl.kind = NominalController::Kind::kTwist;
  } else if (kind == "goal") {
    ctl.kind = NominalController::Kind::kGoal;
  } else if (kind == "external") {
    ctl.kind = NominalController::Kind::kExternal;
  } else {
    throw std::invalid_argument("scenario: unknown controller kind \"" + kind + "\"");
  }
  ctl.gain = c.value("gain", ctl.gain);
  ctl.max_speed = c.value("max_speed", ctl.max_speed);
  ctl.damping = c.value("damping", ctl.damping);
  const Pose cframe = frames.get(c);
  for (const auto& s : c.value("segments", nlohmann::json::array())) {
    JogSegment seg{s.at("t0").get<double>(), s.at("t1").get<double>(), vec6_from_json(s.at("twist"))};
    if (!(seg.t1 > seg.t0)) throw std::invalid_argument("scenario: jog segment with t1 <= t0");
    seg.twist.head<3>() = cframe.rotation * seg.twist.head<3>();
    seg.twist.tail<3>() = cframe.rotation * seg.twist.tail<3>();
    ctl.segments.push_back(seg);
  }
  for (const auto& w : c.value("waypoints", nlohmann::json::array())) {
    const double t = w.at("t").get<double>();
    if (!ctl.goal_times.empty() && !(t > ctl.goal_times.back())) {
      throw std::invalid_argument("scenario: goal waypoint times must increase");
    }
    ctl.goal_times.push_back(t);
    ctl.goal_points.push_back(w.at("p").is_string() ? fk0.ee.translation : cframe.apply(vec3_from_json(w.at("p"))));
  }
  if (ctl.kind == NominalController::Kind::kGoal && ctl.goal_points.empty()) {
    throw std::invalid_argument("scenario: goal controller needs waypoints");
  }
  if (j.contains("completion")) {
    const auto& cp = j.at("completion");
    sc.completion_point = frames.get(cp).apply(vec3_from_json(cp.at("p")));
    sc.completion_tolerance = cp.value("tolerance", sc.completion_tolerance);
  }
  return sc;
}

Scenario Scenario::load(const std::filesystem::path& path, std::optional<std::uint64_t> seed) {
  return from_json(read_json_file(path), path.parent_path(), seed);
}

std::vector<Obstacle> Scenario::obstacles_at(double t) const {
  std::vector<Obstacle> out;
  out.reserve(obstacles.size());
  for (const auto& o : obstacles) {
    Obstacle ob = o.obstacle;
    ob.state = o.script.at(t);
    out.push_back(std::move(ob));
  }
  return out;
}

int Scenario::cycles() const { return static_cast<int>(std::llround(duration / filter.period)); }

// ---------------------------------------------------------------- records

nlohmann::json CycleRecord::to_json() const {
  return {{"k", k},
          {"t", t},
          {"q", vec_to_json(q)},
          {"ee_pose", {{"t", {ee[0], ee[1], ee[2]}}, {"aa", {ee[3], ee[4], ee[5]}}}},
          {"u_nominal", vec_to_json(u_nominal)},
          {"u_filtered", vec_to_json(u_filtered)},
          {"status", to_string(status)},
          {"filter_on", filter_on},
          {"intervention", intervened},
          {"deviation", deviation},
          {"d_min", num(d_min)},
          {"d_min_env", num(d_min_env)},
          {"d_min_self", num(d_min_self)},
          {"h_min", num(h_min)},
          {"mu", mu},
          {"rows", rows},
          {"active", active}};
}

CycleRecord CycleRecord::from_json(const nlohmann::json& j) {
  CycleRecord r;
  r.k = j.at("k").get<int>();
  r.t = j.at("t").get<double>();
  r.q = vecx_from_json(j.at("q"));
  r.ee.head<3>() = vec3_from_json(j.at("ee_pose").at("t"));
  r.ee.tail<3>() = vec3_from_json(j.at("ee_pose").at("aa"));
  r.u_nominal = vecx_from_json(j.at("u_nominal"));
  r.u_filtered = vecx_from_json(j.at("u_filtered"));
  const std::string st = j.at("status").get<std::string>();
  if (st == "optimal") {
    r.status = FilterStatus::kOptimal;
  } else if (st == "relaxed") {
    r.status = FilterStatus::kRelaxed;
  } else if (st == "halted") {
    r.status = FilterStatus::kHalted;
  } else {
    throw std::invalid_argument("CycleRecord: unknown status \"" + st + "\"");
  }
  r.filter_on = j.at("filter_on").get<bool>();
  r.intervened = j.at("intervention").get<bool>();
  r.deviation = j.at("deviation").get<double>();
  r.d_min = num_from(j.at("d_min"));
  r.d_min_env = num_from(j.at("d_min_env"));
  r.d_min_self = num_from(j.at("d_min_self"));
  r.h_min = num_from(j.at("h_min"));
  r.mu = j.at("mu").get<double>();
  r.rows = j.at("rows").get<int>();
  r.active = j.at("active").get<int>();
  return r;
}

bool CycleRecord::operator==(const CycleRecord& o) const {
  return k == o.k && t == o.t && q == o.q && ee == o.ee && u_nominal == o.u_nominal &&
         u_filtered == o.u_filtered && status == o.status && filter_on == o.filter_on &&
         intervened == o.intervened && deviation == o.deviation && d_min == o.d_min &&
         d_min_env == o.d_min_env && d_min_self == o.d_min_self && h_min == o.h_min && mu == o.mu &&
         rows == o.rows && active == o.active;
}

TimingStats TimingStats::of(std::vector<double> samples) {
  TimingStats s;
  if (samples.empty()) return s;
  const double n = static_cast<double>(samples.size());
  for (double x : samples) s.mean += x / n;
  for (double x : samples) s.stddev += (x - s.mean) * (x - s.mean) / n;
  s.stddev = std::sqrt(s.stddev);
  std::sort(samples.begin(), samples.end());
  s.max = samples.back();
  s.p99 = samples[static_cast<size_t>(std::ceil(0.99 * n)) - 1];
  return s;
}

nlohmann::json TimingStats::to_json() const {
  return {{"mean", mean}, {"std", stddev}, {"max", max}, {"p99", p99}};
}

nlohmann::json RunMetrics::to_json() const {
  return {{"scenario", scenario},
          {"filter_on", filter_on},
          {"seed", seed},
          {"cycles", cycles},
          {"d_min", num(d_min)},
          {"d_min_env", num(d_min_env)},
          {"d_min_self", num(d_min_self)},
          {"h_min", num(h_min)},
          {"completed", completed},
          {"t_end", t_end},
          {"intervention_ratio", intervention_ratio},
          {"max_deviation", max_deviation},
          {"margin_violations", margin_violations},
          {"penetrations", penetrations},
          {"relaxed", relaxed},
          {"halted", halted},
          {"cycle_time", cycle_time.to_json()}};
}

// ---------------------------------------------------------------- simulator

Simulator::Simulator(Scenario scenario, bool filter_on, bool keep_log)
    : scenario_(std::move(scenario)),
      filter_on_(filter_on),
      keep_log_(keep_log),
      filter_(scenario_.robot, scenario_.filter) {
  reset();
}

void Simulator::reset() {
  q_ = scenario_.q0;
  r0_ = forward_kinematics(*scenario_.robot, q_).ee.rotation;
  k_ = 0;
  halted_ = false;
  t_complete_.reset();
  log_.clear();
  timing_.clear();
  filter_.reset();
}

bool Simulator::finished() const { return halted_ || k_ > scenario_.cycles(); }

Eigen::VectorXd Simulator::nominal_command(const Kinematics& fk, const Vector6d& twist) const {
  const RobotModel& m = *scenario_.robot;
  const Eigen::MatrixXd J = task_jacobian(m, fk);
  Eigen::VectorXd v(J.rows());
  const auto& rows = m.task_rows();
  for (size_t i = 0; i < rows.size(); ++i) v[static_cast<Eigen::Index>(i)] = twist[rows[i]];
  const Eigen::MatrixXd A = J * J.transpose() + scenario_.controller.damping *
                                                    Eigen::MatrixXd::Identity(J.rows(), J.rows());
  Eigen::VectorXd u = J.transpose() * A.ldlt().solve(v);
  const double s = (u.array().abs() / m.velocity_limits().array()).maxCoeff();
  if (s > 1.0) u /= s;
  return u;
}

Vector6d Simulator::controller_twist(const Kinematics& fk, double t,
                                     const std::optional<Vector6d>& external) const {
  const NominalController& c = scenario_.controller;
  Vector6d v = Vector6d::Zero();
  switch (c.kind) {
    case NominalController::Kind::kTwist:
      v = c.jog_twist(t);
      break;
    case NominalController::Kind::kGoal: {
      v.head<3>() = c.gain * (c.goal(t) - fk.ee.translation) + c.jog_twist(t).head<3>();
      const double speed = v.head<3>().norm();
      if (speed > c.max_speed) v.head<3>() *= c.max_speed / speed;
      v.tail<3>() = c.gain * so3::log(r0_ * fk.ee.rotation.transpose());
      break;
    }
    case NominalController::Kind::kExternal:
      if (external) {
        v.head<3>() = fk.ee.rotation * external->head<3>();
        v.tail<3>() = fk.ee.rotation * external->tail<3>();
      }
      break;
  }
  return v;
}

const CycleRecord& Simulator::tick(const std::optional<Vector6d>& external) {
  if (finished()) throw std::logic_error("Simulator::tick: run is finished");
  const double dt = scenario_.filter.period;
  const double t = time();
  const std::vector<Obstacle> obstacles = scenario_.obstacles_at(t);
  const Kinematics fk = forward_kinematics(*scenario_.robot, q_);

  CycleRecord r;
  r.k = k_;
  r.t = t;
  r.q = q_;
  r.ee = fk.ee.to_chart();
  r.filter_on = filter_on_;
  r.u_nominal = nominal_command(fk, controller_twist(fk, t, external));

  CycleTiming timing;
  if (filter_on_) {
    const FilterResult f = filter_.step(q_, obstacles, r.u_nominal);
    r.u_filtered = f.u_star;
    r.status = f.status;
    r.d_min = f.d_min;
    r.d_min_env = f.d_min_env;
    r.d_min_self = f.d_min_self;
    r.h_min = f.h_min;
    r.mu = f.mu;
    r.rows = static_cast<int>(f.rows.size());
    r.active = static_cast<int>(f.active.size());
    timing = {f.eval_time, f.solve_time};
  } else {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<PairEvaluation> pairs = filter_.evaluate(fk, obstacles);
    timing.eval = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.u_filtered = r.u_nominal;
    r.d_min = r.d_min_env = r.d_min_self = kInf;
    for (const auto& p : pairs) {
      const double d = p.witness.distance;
      r.d_min = std::min(r.d_min, d);
      (p.kind == RowKind::kEnv ? r.d_min_env : r.d_min_self) =
          std::min(p.kind == RowKind::kEnv ? r.d_min_env : r.d_min_self, d);
    }
    r.h_min = r.d_min - scenario_.filter.margin;
    r.mu = manipulability_value(*scenario_.robot, q_);
  }
  r.deviation = (r.u_filtered - r.u_nominal).norm();
  r.intervened = r.deviation > kInterventionThreshold;

  if (!t_complete_ && scenario_.completion_point &&
      (fk.ee.translation - *scenario_.completion_point).norm() <= scenario_.completion_tolerance) {
    t_complete_ = t;
  }
  if (r.status == FilterStatus::kHalted) halted_ = true;
  q_ += dt * r.u_filtered;
  ++k_;
  if (!keep_log_) {
    log_.clear();
    timing_.clear();
  }
  log_.push_back(std::move(r));
  timing_.push_back(timing);
  return log_.back();
}

RunMetrics Simulator::metrics() const {
  RunMetrics m;
  m.scenario = scenario_.name;
  m.filter_on = filter_on_;
  m.seed = scenario_.seed;
  m.cycles = static_cast<int>(log_.size());
  m.d_min = m.d_min_env = m.d_min_self = m.h_min = kInf;
  int interventions = 0;
  for (const auto& r : log_) {
    m.d_min = std::min(m.d_min, r.d_min);
    m.d_min_env = std::min(m.d_min_env, r.d_min_env);
    m.d_min_self = std::min(m.d_min_self, r.d_min_self);
    m.h_min = std::min(m.h_min, r.h_min);
    m.max_deviation = std::max(m.max_deviation, r.deviation);
    interventions += r.intervened ? 1 : 0;
    m.margin_violations += r.h_min < 0.0 ? 1 : 0;
    m.penetrations += r.d_min < 0.0 ? 1 : 0;
    m.relaxed += r.status == FilterStatus::kRelaxed ? 1 : 0;
  }
  m.intervention_ratio = log_.empty() ? 0.0 : static_cast<double>(interventions) / static_cast<double>(log_.size());
  m.halted = halted_;
  m.completed = t_complete_.has_value();
  m.t_end = t_complete_ ? *t_complete_ : (log_.empty() ? 0.0 : log_.back().t);
  std::vector<double> cycle;
  for (const auto& c : timing_) cycle.push_back(c.eval + c.solve);
  m.cycle_time = TimingStats::of(std::move(cycle));
  return m;
}

RunResult run(const Scenario& scenario, bool filter_on) {
  Simulator sim(scenario, filter_on);
  while (!sim.finished()) sim.tick();
  return {sim.metrics(), sim.log(), sim.timing()};
}

// ---------------------------------------------------------------- output

void write_csv(std::ostream& os, const std::vector<CycleRecord>& log) {
  os << std::setprecision(17);
  const Eigen::Index n = log.empty() ? 0 : log.front().q.size();
  os << "k,t";
  for (const char* prefix : {"q", "u_nominal", "u_filtered"}) {
    for (Eigen::Index i = 0; i < n; ++i) os << ',' << prefix << i;
  }
  os << ",ee_x,ee_y,ee_z,ee_rx,ee_ry,ee_rz,status,filter_on,intervention,deviation,"
        "d_min,d_min_env,d_min_self,h_min,mu,rows,active\n";
  for (const auto& r : log) {
    os << r.k << ',' << r.t;
    for (const Eigen::VectorXd* v : {&r.q, &r.u_nominal, &r.u_filtered}) {
      for (Eigen::Index i = 0; i < v->size(); ++i) os << ',' << (*v)[i];
    }
    for (int i = 0; i < 6; ++i) os << ',' << r.ee[i];
    os << ',' << to_string(r.status) << ',' << r.filter_on << ',' << r.intervened << ',' << r.deviation << ','
       << r.d_min << ',' << r.d_min_env << ',' << r.d_min_self << ',' << r.h_min << ',' << r.mu << ','
       << r.rows << ',' << r.active << '\n';
  }
}

void write_jsonl(std::ostream& os, const std::vector<CycleRecord>& log) {
  for (const auto& r : log) os << r.to_json().dump() << '\n';
}

std::vector<CycleRecord> read_jsonl(std::istream& is) {
  std::vector<CycleRecord> log;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    log.push_back(CycleRecord::from_json(nlohmann::json::parse(line)));
  }
  return log;
}

void write_plot_data(std::ostream& os, const std::vector<CycleRecord>& log) {
  os << std::setprecision(17) << "t,d_min,d_min_env,d_min_self,h_min,mu,deviation,intervention,status\n";
  for (const auto& r : log) {
    os << r.t << ',' << r.d_min << ',' << r.d_min_env << ',' << r.d_min_self << ',' << r.h_min << ',' << r.mu << ','
       << r.deviation << ',' << r.intervened << ',' << to_string(r.status) << '\n';
  }
}

void write_timing_csv(std::ostream& os, const std::vector<CycleTiming>& timing) {
  os << std::setprecision(9) << "k,eval_s,solve_s\n";
  for (size_t k = 0; k < timing.size(); ++k) os << k << ',' << timing[k].eval << ',' << timing[k].solve << '\n';
}

void write_run(const std::filesystem::path& dir, const RunResult& result) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(dir / name);
    if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
    return f;
  };
  {
    auto f = open("cycles.csv");
    write_csv(f, result.log);
  }
  {
    auto f = open("cycles.jsonl");
    write_jsonl(f, result.log);
  }
  {
    auto f = open("plot.csv");
    write_plot_data(f, result.log);
  }
  {
    auto f = open("timing.csv");
    write_timing_csv(f, result.timing);
  }
  auto f = open("metrics.json");
  f << result.metrics.to_json().dump(2) << '\n';
}

}  // namespace sqsafe
