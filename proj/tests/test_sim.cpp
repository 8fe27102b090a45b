#include <gtest/gtest.h>

#include <fstream>
#include <numbers>
#include <sstream>

#include "sqsafe/oracle.hpp"
#include "sqsafe/sim.hpp"
#include "support.hpp"

using namespace sqsafe;

namespace {

const Obstacle& named(const std::vector<Obstacle>& obstacles, const std::string& name) {
  for (const auto& o : obstacles) {
    if (o.name == name) return o;
  }
  throw std::out_of_range(name);
}

double wall_gap(const std::vector<Obstacle>& basket, const std::string& a, const std::string& b) {
  const Obstacle& wa = named(basket, a);
  const Obstacle& wb = named(basket, b);
  return oracle::sdf_reference({wa.sq, wa.state.world_pose()}, {wb.sq, wb.state.world_pose()}).distance;
}

Vector6d pose_rate(const MotionScript& m, double t, double h) {
  const Pose p0 = Pose::from_chart(m.at(t - h).pose);
  const Pose p1 = Pose::from_chart(m.at(t + h).pose);
  Vector6d v;
  v << (p1.translation - p0.translation) / (2 * h), so3::log(p1.rotation * p0.rotation.transpose()) / (2 * h);
  return v;
}

std::vector<std::filesystem::path> all_scenarios() {
  std::vector<std::filesystem::path> out;
  for (const auto& dir : {test::data_dir() / "scenarios", test::data_dir() / "scenarios" / "adversarial"}) {
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
      if (e.path().extension() == ".json") out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST(Basket, OpposingWallsAreLApart) {
  for (double l : {0.24, 0.48}) {
    const auto basket = build_basket(l);
    ASSERT_EQ(basket.size(), 5u);
    EXPECT_NEAR(wall_gap(basket, "basket_wall_+x", "basket_wall_-x"), l, 1e-6);
    EXPECT_NEAR(wall_gap(basket, "basket_wall_+y", "basket_wall_-y"), 0.5 * l, 1e-6);
  }
  EXPECT_THROW(build_basket(0.0), std::invalid_argument);
}

TEST(Basket, CentredBodyIsEquidistantFromOpposingWalls) {
  const Pose frame = Pose::from_chart(Point3(0.5, 0.1, 0.2), Point3(0, 0, 0.7));
  const auto basket = build_basket(0.32, 0.02, 0.15, frame);
  const Superquadric ee(0.04, 0.03, 0.05, 0.5, 0.5);
  const Pose at = frame * Pose::from_translation(Point3(0, 0, 0.075));
  auto d = [&](const std::string& name) {
    const Obstacle& w = named(basket, name);
    return oracle::sdf_reference({ee, at}, {w.sq, w.state.world_pose()}).distance;
  };
  EXPECT_NEAR(d("basket_wall_+x"), d("basket_wall_-x"), 1e-9);
  EXPECT_NEAR(d("basket_wall_+y"), d("basket_wall_-y"), 1e-9);
  EXPECT_NEAR(d("basket_wall_+x"), 0.16 - 0.04, 1e-6);
}

TEST(MotionScript, StaticHasZeroTwist) {
  const MotionScript m = MotionScript::fixed(Pose::from_chart(Point3(1, 2, 3), Point3(0.1, 0.2, 0.3)));
  for (double t : {0.0, 1.0, 7.5}) EXPECT_EQ(m.at(t).twist.norm(), 0.0);
}

TEST(MotionScript, SinusoidSpeedAndDerivative) {
  Vector6d amp;
  amp << 0.2, 0.0, 0.0, 0.0, 0.0, 0.0;
  const double f = 0.5;
  const MotionScript lin = MotionScript::sinusoid(Pose::identity(), amp, f);
  EXPECT_NEAR(lin.at(0.0).twist.head<3>().norm(), 2 * std::numbers::pi * f * 0.2, 1e-15);

  amp << 0.1, -0.05, 0.02, 0.3, 0.2, -0.4;
  const MotionScript m = MotionScript::sinusoid(Pose::from_chart(Point3(0.4, 0, 0.3), Point3(0.2, 0.1, 0.5)), amp, 0.7, 0.3);
  for (double t : {0.0, 0.13, 0.9, 2.4}) {
    EXPECT_LT((m.at(t).twist - pose_rate(m, t, 1e-5)).norm(), 1e-6) << "t = " << t;
  }
}

TEST(MotionScript, WaypointTwistMatchesDifferences) {
  const std::vector<Pose> poses{Pose::from_chart(Point3(0, 0, 0), Point3(0, 0, 0)),
                                Pose::from_chart(Point3(0.3, 0.1, 0), Point3(0.2, 0.4, 0.1)),
                                Pose::from_chart(Point3(0.3, -0.2, 0.4), Point3(-0.5, 0.1, 0.9))};
  const MotionScript m = MotionScript::waypoints({0.5, 1.5, 2.0}, poses);
  for (double t : {0.8, 1.2, 1.7, 1.95}) {
    EXPECT_LT((m.at(t).twist - pose_rate(m, t, 1e-3)).norm(), 1e-9) << "t = " << t;
  }
  // Held before the first and after the last waypoint.
  EXPECT_EQ(m.at(0.0).twist.norm(), 0.0);
  EXPECT_EQ(m.at(3.0).twist.norm(), 0.0);
  EXPECT_THROW(MotionScript::waypoints({1.0, 1.0}, {poses[0], poses[1]}), std::invalid_argument);
}

TEST(MotionScript, JsonRoundTrip) {
  Vector6d amp;
  amp << 0.1, 0, 0, 0, 0, 0.5;
  const Pose base = Pose::from_translation(Point3(0.5, 0, 0.3));
  const MotionScript m = MotionScript::sinusoid(base, amp, 0.4, 0.1);
  const MotionScript back = MotionScript::from_json(m.to_json(), base);
  for (double t : {0.0, 0.7, 3.1}) {
    EXPECT_EQ(back.at(t).pose, m.at(t).pose);
    EXPECT_EQ(back.at(t).twist, m.at(t).twist);
  }
}

TEST(CycleRecord, JsonRoundTrip) {
  const Scenario s = Scenario::load(test::scenario_path("dynamic_swing.json"));
  Simulator sim(s, true);
  for (int k = 0; k < 5; ++k) sim.tick();
  for (const auto& r : sim.log()) {
    EXPECT_EQ(CycleRecord::from_json(nlohmann::json::parse(r.to_json().dump())), r);
  }
  std::stringstream ss;
  write_jsonl(ss, sim.log());
  EXPECT_EQ(read_jsonl(ss), sim.log());
}

TEST(Simulator, DeterministicLogsAndConsistentMetrics) {
  Scenario s = Scenario::load(test::scenario_path("basket_l032.json"), 3);
  s.duration = 1.5;
  const RunResult a = run(s, true);
  const RunResult b = run(s, true);
  ASSERT_EQ(a.log.size(), b.log.size());
  EXPECT_TRUE(a.log == b.log);
  std::stringstream ja, jb;
  write_jsonl(ja, a.log);
  write_jsonl(jb, b.log);
  EXPECT_EQ(ja.str(), jb.str());

  double d_min = 1e300;
  int interventions = 0;
  for (const auto& r : a.log) {
    d_min = std::min(d_min, r.d_min);
    interventions += r.intervened;
    EXPECT_EQ(r.intervened, r.deviation > 1e-6);
  }
  EXPECT_EQ(a.metrics.d_min, d_min);
  EXPECT_DOUBLE_EQ(a.metrics.intervention_ratio, static_cast<double>(interventions) / static_cast<double>(a.log.size()));
  EXPECT_EQ(a.metrics.cycles, s.cycles() + 1);
}

TEST(Simulator, SeedMovesTheBasket) {
  const Scenario a = Scenario::load(test::scenario_path("basket_l024.json"), 1);
  const Scenario b = Scenario::load(test::scenario_path("basket_l024.json"), 2);
  const Vector6d pa = a.obstacles_at(0.0).front().state.pose;
  const Vector6d pb = b.obstacles_at(0.0).front().state.pose;
  EXPECT_GT((pa - pb).norm(), 0.0);
  EXPECT_LE((pa - pb).head<3>().cwiseAbs().maxCoeff(), 0.1 + 1e-12);
}

TEST(Simulator, EmptyWorldNeverIntervenes) {
  const RunResult r = run(Scenario::load(test::scenario_path("empty.json")), true);
  EXPECT_EQ(r.metrics.intervention_ratio, 0.0);
  EXPECT_LE(r.metrics.max_deviation, 1e-9);
  EXPECT_TRUE(r.metrics.completed);
}

TEST(Simulator, EveryScenarioStartsSafe) {
  const auto paths = all_scenarios();
  ASSERT_GE(paths.size(), 16u);
  for (const auto& p : paths) {
    const Scenario s = Scenario::load(p);
    EXPECT_EQ(s.q0.size(), s.robot->dof()) << p;
    Simulator sim(s, true);
    const CycleRecord& r = sim.tick();
    EXPECT_GE(r.h_min, 0.0) << p;
    EXPECT_NE(r.status, FilterStatus::kHalted) << p;
  }
}

TEST(Scenario, RejectsInconsistentFiles) {
  const auto dir = test::data_dir() / "scenarios";
  nlohmann::json j = nlohmann::json::parse(std::ifstream(dir / "empty.json"));
  j["period"] = -0.01;
  EXPECT_THROW(Scenario::from_json(j, dir), std::invalid_argument);
  j = nlohmann::json::parse(std::ifstream(dir / "empty.json"));
  j["robot"] = "../robots/missing.json";
  EXPECT_ANY_THROW(Scenario::from_json(j, dir));
  j = nlohmann::json::parse(std::ifstream(dir / "empty.json"));
  j["q0"] = {0.0, 1.0};
  EXPECT_THROW(Scenario::from_json(j, dir), std::invalid_argument);
  EXPECT_ANY_THROW(Scenario::load(dir / "does_not_exist.json"));
}

TEST(PlotData, RegeneratesFromLog) {
  Scenario s = Scenario::load(test::scenario_path("wall_crash.json"));
  s.duration = 0.5;
  const RunResult r = run(s, true);
  std::stringstream direct;
  write_plot_data(direct, r.log);
  std::stringstream jsonl;
  write_jsonl(jsonl, r.log);
  std::stringstream again;
  write_plot_data(again, read_jsonl(jsonl));
  const std::string text = direct.str();
  EXPECT_EQ(text, again.str());
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), static_cast<long>(r.log.size()) + 1);
}

class AdversarialSuite : public ::testing::TestWithParam<std::string> {};

TEST_P(AdversarialSuite, FilterKeepsPositiveDistance) {
  const RunResult r = run(Scenario::load(test::scenario_path("adversarial/" + GetParam())), true);
  EXPECT_GE(r.metrics.d_min, 0.0);
  EXPECT_FALSE(r.metrics.halted);
}

INSTANTIATE_TEST_SUITE_P(Scenarios, AdversarialSuite,
                         ::testing::Values("basket_zigzag.json", "corner.json", "dynamic_approach.json",
                                           "dynamic_lateral.json", "dynamic_swing.json", "narrow_slot.json",
                                           "pillar_sweep.json", "self_fold.json", "shelf_underside.json",
                                           "singularity.json", "table_press.json", "wall_crash.json"),
                         [](const auto& info) { return info.param.substr(0, info.param.size() - 5); });

TEST(Simulator, UnfilteredCrashScenariosPenetrate) {
  for (const char* name : {"wall_crash.json", "basket_l024.json"}) {
    const RunResult r = run(Scenario::load(test::scenario_path(name)), false);
    EXPECT_LT(r.metrics.d_min, 0.0) << name;
  }
}
