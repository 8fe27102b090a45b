#include <gtest/gtest.h>

#include "studies.hpp"

using namespace sqsafe;
using namespace sqsafe::studies;

TEST(RSquared, LineAndNoise) {
  EXPECT_NEAR(r_squared({1, 2, 3, 4}, {3, 5, 7, 9}), 1.0, 1e-15);
  EXPECT_NEAR(r_squared({1, 2, 3, 4}, {1, -1, 1, -1}), 0.2, 1e-12);
  EXPECT_THROW(r_squared({1, 2}, {1}), std::invalid_argument);
}

TEST(PairBenchmark, ZeroPairsCostsAlmostNothing) {
  PairBenchmark bench(8, 7, 60, 4);
  const BenchPoint p = bench.run(0, 1, 20);
  EXPECT_EQ(p.pairs, 0);
  EXPECT_LT(p.mean, 1e-4);
  const BenchPoint q = bench.run(8, 1, 5);
  EXPECT_GT(q.mean, p.mean);
  EXPECT_THROW(bench.run(9, 1, 5), std::invalid_argument);
}

TEST(FigTwo, SurrogateBlowsUpWhileDistanceGradientStaysUnit) {
  const auto samples = figtwo(7, -3.0, 3.0, 100);
  ASSERT_EQ(samples.size(), 7u);
  double peak = 0.0;
  for (const auto& s : samples) {
    EXPECT_TRUE(s.converged);
    EXPECT_GT(s.d, 0.0);
    EXPECT_NEAR(s.grad_norm, 1.0, 0.1);
    peak = std::max({peak, std::abs(s.f_star), std::abs(s.df_dx)});
  }
  EXPECT_GT(peak, 1e4);
}

TEST(GradStudy, SphereCellWithinOnePercent) {
  GradStudy study(200);
  const GradCell c = study.cell(1.0, Orientation::kFaceFace, 0.5, 1e-8);
  EXPECT_TRUE(c.converged);
  EXPECT_NEAR(c.reference, 1.0, 1e-3);
  EXPECT_LE(c.rel_error, 0.01);
}
