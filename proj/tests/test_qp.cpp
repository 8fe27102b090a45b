#include <gtest/gtest.h>

#include <random>

#include "sqsafe/oracle.hpp"
#include "sqsafe/qp.hpp"

using namespace sqsafe;

namespace {

// Random strictly convex QP with a known interior point, so it is feasible.
QpProblem random_qp(std::mt19937_64& rng, int n, int m) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd L(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) L(i, j) = g(rng);
  }
  QpProblem p;
  p.H = L * L.transpose() + Eigen::MatrixXd::Identity(n, n);
  p.g = Eigen::VectorXd::NullaryExpr(n, [&] { return 3.0 * g(rng); });
  p.A = Eigen::MatrixXd::NullaryExpr(m, n, [&] { return g(rng); });
  const Eigen::VectorXd x0 = Eigen::VectorXd::NullaryExpr(n, [&] { return g(rng); });
  p.b = p.A * x0 - Eigen::VectorXd::NullaryExpr(m, [&] { return std::abs(g(rng)); });
  return p;
}

}  // namespace

TEST(SolveQp, Unconstrained) {
  QpProblem p;
  p.H = Eigen::Matrix2d{{2, 0.5}, {0.5, 1}};
  p.g = Eigen::Vector2d(1, -1);
  p.A.resize(0, 2);
  p.b.resize(0);
  const QpResult r = solve_qp(p);
  ASSERT_TRUE(r.feasible);
  EXPECT_LT((r.x - p.H.ldlt().solve(-p.g)).norm(), 1e-12);
}

TEST(SolveQp, OneDimensionalClamp) {
  // min (1+1)(u - 1)^2
  QpProblem p;
  p.H = Eigen::MatrixXd::Constant(1, 1, 4.0);
  p.g = Eigen::VectorXd::Constant(1, -4.0);
  p.A = Eigen::MatrixXd::Constant(1, 1, 1.0);
  p.b = Eigen::VectorXd::Constant(1, 0.2);
  EXPECT_NEAR(solve_qp(p).x[0], 1.0, 1e-14);
  p.b[0] = 2.0;
  const QpResult r = solve_qp(p);
  EXPECT_NEAR(r.x[0], 2.0, 1e-14);
  ASSERT_EQ(r.active.size(), 1u);
  EXPECT_NEAR(r.multipliers[0], 4.0, 1e-12);
}

TEST(SolveQp, DetectsInfeasibility) {
  QpProblem p;
  p.H = Eigen::MatrixXd::Identity(1, 1);
  p.g = Eigen::VectorXd::Zero(1);
  p.A = Eigen::MatrixXd(2, 1);
  p.A << 1, -1;
  p.b = Eigen::Vector2d(1, 0);  // u >= 1 and u <= 0
  EXPECT_FALSE(solve_qp(p).feasible);
}

TEST(SolveQp, RejectsIndefiniteHessian) {
  QpProblem p;
  p.H = Eigen::Matrix2d{{1, 0}, {0, -1}};
  p.g = Eigen::Vector2d::Zero();
  p.A.resize(0, 2);
  p.b.resize(0);
  EXPECT_THROW(solve_qp(p), std::invalid_argument);
}

TEST(SolveQp, MatchesReferenceOnRandomInstances) {
  std::mt19937_64 rng(51);
  for (int t = 0; t < 100; ++t) {
    const int n = 1 + t % 7;
    const QpProblem p = random_qp(rng, n, 1 + (t * 7) % 50);
    const QpResult r = solve_qp(p);
    const oracle::QpReferenceResult ref = oracle::qp_reference(p);
    ASSERT_TRUE(r.feasible);
    ASSERT_TRUE(ref.feasible);
    EXPECT_LT((r.x - ref.x).norm(), 1e-6) << "instance " << t;
    EXPECT_GE((p.A * r.x - p.b).minCoeff(), -1e-8);
  }
}

TEST(SolveQp, WarmStartAndRowScaling) {
  std::mt19937_64 rng(52);
  const QpProblem p = random_qp(rng, 7, 40);
  const QpResult cold = solve_qp(p);
  const QpResult warm = solve_qp(p, cold.active);
  EXPECT_LT((cold.x - warm.x).norm(), 1e-10);
  EXPECT_LE(warm.iterations, cold.iterations);
  QpProblem scaled = p;
  std::uniform_real_distribution<double> s(0.01, 100.0);
  for (int i = 0; i < p.A.rows(); ++i) {
    const double k = s(rng);
    scaled.A.row(i) *= k;
    scaled.b[i] *= k;
  }
  EXPECT_LT((solve_qp(scaled).x - cold.x).norm(), 1e-8);
}
