#include <benchmark/benchmark.h>

#include <random>

#include "sqsafe/qp.hpp"
#include "sqsafe/safety_filter.hpp"
#include "sqsafe/sim.hpp"
#include "studies.hpp"

using namespace sqsafe;

namespace {

const ConvexPolytope& box200() {
  static const ConvexPolytope p = sample_surface(Superquadric(0.1, 0.08, 0.12, 0.3, 0.3), 200, 200);
  return p;
}

Eigen::Vector3d unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  return Eigen::Vector3d(g(rng), g(rng), g(rng)).normalized();
}

}  // namespace

static void BM_SampleSurface(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(sample_surface(Superquadric(0.1, 0.08, 0.12, 0.3, 0.3), n, n));
}
BENCHMARK(BM_SampleSurface)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

static void BM_SupportCold(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::vector<Eigen::Vector3d> dirs(256);
  for (auto& d : dirs) d = unit(rng);
  size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(box200().support_vertex(dirs[i++ % dirs.size()]));
}
BENCHMARK(BM_SupportCold);

static void BM_SupportExhaustive(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const Eigen::Vector3d d = unit(rng);
  for (auto _ : state) benchmark::DoNotOptimize(box200().support_vertex_exhaustive(d));
}
BENCHMARK(BM_SupportExhaustive);

// Distance and gradient for one pair drifting slowly, as in the control loop.
static void BM_DistanceAndGradient(benchmark::State& state) {
  const bool warm = state.range(0) != 0;
  PairCache cache;
  Pose pb = Pose::from_chart(Eigen::Vector3d(0.35, 0.05, 0.0), Eigen::Vector3d(0.2, 0.4, 0.1));
  int k = 0;
  for (auto _ : state) {
    pb.translation.y() = 0.05 * std::sin(0.01 * k++);
    const DistanceQuery q{&box200(), &box200(), Pose::identity(), pb};
    const WitnessPair w = signed_distance(q, warm ? &cache : nullptr);
    benchmark::DoNotOptimize(pose_gradient(q, w));
  }
}
BENCHMARK(BM_DistanceAndGradient)->Arg(0)->Arg(1);

static void BM_FilterQp(benchmark::State& state) {
  const int rows = static_cast<int>(state.range(0));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  const Eigen::VectorXd u_cmd = Eigen::VectorXd::NullaryExpr(7, [&] { return g(rng); });
  const Eigen::MatrixXd J = Eigen::MatrixXd::NullaryExpr(6, 7, [&] { return g(rng); });
  std::vector<ConstraintRow> r(static_cast<size_t>(rows));
  for (auto& c : r) {
    c.row = Eigen::RowVectorXd::NullaryExpr(7, [&] { return g(rng); });
    c.rhs = -std::abs(g(rng));
  }
  const FilterConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve(u_cmd, Eigen::VectorXd::Zero(7), r, J, Eigen::VectorXd::Constant(7, 2.0), cfg));
  }
}
BENCHMARK(BM_FilterQp)->Arg(10)->Arg(50)->Arg(150);

// Full filter cycle on the arm inside the narrowest basket.
static void BM_FilterCycle(benchmark::State& state) {
  Scenario s = Scenario::load(std::filesystem::path(SQSAFE_DATA_DIR) / "scenarios" / "basket_l024.json");
  s.filter.workers = static_cast<int>(state.range(0));
  Simulator sim(s, true, false);
  for (auto _ : state) {
    if (sim.finished()) sim.reset();
    benchmark::DoNotOptimize(sim.tick());
  }
}
BENCHMARK(BM_FilterCycle)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

// Cycle time against the number of SQ pairs.
static void BM_PairScaling(benchmark::State& state) {
  static studies::PairBenchmark bench(300);
  const int pairs = static_cast<int>(state.range(0));
  const int workers = static_cast<int>(state.range(1));
  for (auto _ : state) {
    const auto p = bench.run(pairs, workers, 1, 0);
    state.SetIterationTime(p.mean);
  }
  state.counters["pairs"] = pairs;
}
BENCHMARK(BM_PairScaling)
    ->ArgsProduct({{8, 32, 64, 128, 256, 300}, {1, 4}})
    ->UseManualTime()
    ->Unit(benchmark::kMillisecond);

// The packaged benchmark_main archive carries LTO bytecode from another compiler.
BENCHMARK_MAIN();
