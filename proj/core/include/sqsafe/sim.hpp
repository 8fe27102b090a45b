#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sqsafe/safety_filter.hpp"

namespace sqsafe {

/// Time-parameterized obstacle pose with its exact twist.
///
/// sinusoid: chart(t) = base + amplitude * sin(2 pi f t + phase), applied to
/// the translation + axis-angle chart.
/// waypoint: piecewise geodesic interpolation between timed poses; the pose
/// is held before the first and after the last waypoint.
class MotionScript {
 public:
  enum class Kind { kStatic, kWaypoint, kSinusoid };

  static MotionScript fixed(const Pose& pose);
  static MotionScript sinusoid(const Pose& base, const Vector6d& amplitude, double frequency,
                               double phase = 0.0);
  /// Times must be strictly increasing.
  static MotionScript waypoints(std::vector<double> times, std::vector<Pose> poses);
  /// {"kind":"static"} | {"kind":"sinusoid","amplitude":[6],"frequency":f,"phase":p}
  /// | {"kind":"waypoint","points":[{"t":s,"pose":{...}}, ...]}. `base` is
  /// the obstacle's nominal pose.
  static MotionScript from_json(const nlohmann::json& j, const Pose& base);
  nlohmann::json to_json() const;

  ObstacleState at(double t) const;
  Kind kind() const { return kind_; }
  /// Rigidly moves the whole trajectory: every pose P(t) becomes offset * P(t).
  MotionScript transformed(const Pose& offset) const;

 private:
  Kind kind_ = Kind::kStatic;
  Pose base_;
  Vector6d amplitude_ = Vector6d::Zero();
  double frequency_ = 0.0;
  double phase_ = 0.0;
  std::vector<double> times_;
  std::vector<Pose> poses_;
};

/// Open-top box of inner size l x l/2 x height in the frame `pose`: the
/// floor's top face lies on z = 0 and the opening faces +z.
std::vector<Obstacle> build_basket(double l, double thickness = 0.02, double height = 0.15,
                                   const Pose& pose = Pose::identity(), double exponent = 0.2);

struct JogSegment {
  double t0 = 0.0;
  double t1 = 0.0;
  Vector6d twist = Vector6d::Zero();  ///< linear, angular; world frame
};

/// Produces the nominal command u_cmd.
///
/// kTwist replays EE twist segments open loop. kGoal servoes the EE position
/// to a piecewise-linear target (plus the integral of any jog segments) and
/// holds the initial orientation. kExternal takes the twist from the caller.
struct NominalController {
  enum class Kind { kTwist, kGoal, kExternal };
  Kind kind = Kind::kExternal;
  std::vector<JogSegment> segments;
  std::vector<double> goal_times;
  std::vector<Eigen::Vector3d> goal_points;  ///< world frame
  double gain = 2.0;
  double max_speed = 0.25;   ///< m/s cap on the commanded linear twist
  double damping = 1e-3;     ///< damped least-squares regularizer

  Vector6d jog_twist(double t) const;
  Eigen::Vector3d goal(double t) const;
};

struct ScenarioObstacle {
  Obstacle obstacle;
  MotionScript script;
};

struct Scenario {
  std::string name;
  std::shared_ptr<const RobotModel> robot;
  Eigen::VectorXd q0;
  std::vector<ScenarioObstacle> obstacles;
  NominalController controller;
  double duration = 10.0;
  FilterConfig filter;
  std::uint64_t seed = 0;
  std::optional<Eigen::Vector3d> completion_point;
  double completion_tolerance = 0.01;
  nlohmann::json source;  ///< the JSON this scenario was built from

  /// Relative robot paths resolve against `base_dir`. A given `seed`
  /// overrides the file's seed; the seed drives the "randomize" block.
  /// Throws std::invalid_argument on an inconsistent scenario.
  static Scenario from_json(const nlohmann::json& j, const std::filesystem::path& base_dir,
                            std::optional<std::uint64_t> seed = std::nullopt);
  static Scenario load(const std::filesystem::path& path,
                       std::optional<std::uint64_t> seed = std::nullopt);

  std::vector<Obstacle> obstacles_at(double t) const;
  /// Control periods in the run. A full run logs cycles() + 1 records,
  /// t = 0 through t = duration.
  int cycles() const;
};

/// Everything recorded for one control tick. Timing is kept out so logs of
/// identical runs are bit-identical.
struct CycleRecord {
  int k = 0;
  double t = 0.0;
  Eigen::VectorXd q;
  Vector6d ee = Vector6d::Zero();  ///< EE pose chart (translation, axis-angle)
  Eigen::VectorXd u_nominal;
  Eigen::VectorXd u_filtered;
  FilterStatus status = FilterStatus::kOptimal;
  bool filter_on = true;
  bool intervened = false;
  double deviation = 0.0;  ///< |u_filtered - u_nominal|
  double d_min = 0.0;
  double d_min_env = 0.0;
  double d_min_self = 0.0;
  double h_min = 0.0;
  double mu = 0.0;
  int rows = 0;
  int active = 0;

  nlohmann::json to_json() const;
  static CycleRecord from_json(const nlohmann::json& j);
  bool operator==(const CycleRecord& o) const;
};

struct CycleTiming {
  double eval = 0.0;
  double solve = 0.0;
};

struct TimingStats {
  double mean = 0.0;
  double stddev = 0.0;
  double max = 0.0;
  double p99 = 0.0;
  static TimingStats of(std::vector<double> samples);
  nlohmann::json to_json() const;
};

struct RunMetrics {
  std::string scenario;
  bool filter_on = true;
  std::uint64_t seed = 0;
  int cycles = 0;
  double d_min = 0.0;
  double d_min_env = 0.0;
  double d_min_self = 0.0;
  double h_min = 0.0;
  bool completed = false;
  double t_end = 0.0;  ///< completion time, or the last simulated time
  double intervention_ratio = 0.0;
  double max_deviation = 0.0;
  int margin_violations = 0;  ///< cycles with h_min < 0
  int penetrations = 0;       ///< cycles with d_min < 0
  int relaxed = 0;
  bool halted = false;
  TimingStats cycle_time;

  nlohmann::json to_json() const;
};

/// Kinematic world: Euler integration of the (filtered) joint velocity at
/// the control period. Distances are always computed by the filter's
/// pipeline, also when filtering is switched off.
class Simulator {
 public:
  /// With `keep_log` false only the latest record is retained, for
  /// open-ended interactive sessions.
  Simulator(Scenario scenario, bool filter_on, bool keep_log = true);

  /// One control tick at the current time. `external` is the EE twist for
  /// kExternal controllers (EE frame); ignored otherwise.
  const CycleRecord& tick(const std::optional<Vector6d>& external = std::nullopt);
  bool finished() const;
  void reset();
  void set_filter(bool on) { filter_on_ = on; }
  bool filter_on() const { return filter_on_; }

  double time() const { return k_ * scenario_.filter.period; }
  const Eigen::VectorXd& q() const { return q_; }
  const Scenario& scenario() const { return scenario_; }
  const SafetyFilter& filter() const { return filter_; }
  const std::vector<CycleRecord>& log() const { return log_; }
  const std::vector<CycleTiming>& timing() const { return timing_; }
  RunMetrics metrics() const;

  /// Nominal joint velocity for an EE twist (world frame): damped
  /// least-squares over the task rows, scaled uniformly into the box.
  Eigen::VectorXd nominal_command(const Kinematics& fk, const Vector6d& twist) const;

 private:
  Vector6d controller_twist(const Kinematics& fk, double t,
                            const std::optional<Vector6d>& external) const;

  Scenario scenario_;
  bool filter_on_;
  bool keep_log_;
  SafetyFilter filter_;
  Eigen::VectorXd q_;
  Eigen::Matrix3d r0_;
  int k_ = 0;
  bool halted_ = false;
  std::optional<double> t_complete_;
  std::vector<CycleRecord> log_;
  std::vector<CycleTiming> timing_;
};

struct RunResult {
  RunMetrics metrics;
  std::vector<CycleRecord> log;
  std::vector<CycleTiming> timing;
};

RunResult run(const Scenario& scenario, bool filter_on);

void write_csv(std::ostream& os, const std::vector<CycleRecord>& log);
void write_jsonl(std::ostream& os, const std::vector<CycleRecord>& log);
std::vector<CycleRecord> read_jsonl(std::istream& is);
/// Time series behind the distance and intervention plots; a pure function
/// of the log, so it regenerates identically from cycles.jsonl.
void write_plot_data(std::ostream& os, const std::vector<CycleRecord>& log);
void write_timing_csv(std::ostream& os, const std::vector<CycleTiming>& timing);
/// Writes cycles.csv, cycles.jsonl, plot.csv, timing.csv and metrics.json
/// into `dir`.
void write_run(const std::filesystem::path& dir, const RunResult& result);

}  // namespace sqsafe
