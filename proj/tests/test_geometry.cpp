#include <gtest/gtest.h>

#include <numbers>

#include "sqsafe/geometry.hpp"
#include "support.hpp"

using namespace sqsafe;

TEST(So3, ExpLogRoundTrip) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector3d phi = test::random_unit(rng) * (0.01 + 3.1 * i / 200.0);
    EXPECT_LT((so3::log(so3::exp(phi)) - phi).norm(), 1e-9) << phi.transpose();
  }
}

TEST(So3, LogNearPi) {
  const Eigen::Vector3d phi = Eigen::Vector3d(1, 2, -1).normalized() * (std::numbers::pi - 1e-7);
  const Eigen::Matrix3d R = so3::exp(phi);
  EXPECT_LT((so3::exp(so3::log(R)) - R).norm(), 1e-8);
  EXPECT_NEAR(so3::log(so3::exp(Eigen::Vector3d(0, 0, std::numbers::pi))).norm(), std::numbers::pi, 1e-12);
}

TEST(So3, LeftJacobianMatchesDerivativeOfExp) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 50; ++i) {
    const Eigen::Vector3d phi = test::random_unit(rng) * 2.5 * (i + 1) / 50.0;
    const Eigen::Vector3d dphi = test::random_unit(rng);
    const double h = 1e-6;
    const Eigen::Matrix3d dR = (so3::exp(phi + h * dphi) - so3::exp(phi - h * dphi)) / (2 * h);
    const Eigen::Matrix3d expected = so3::hat(so3::left_jacobian(phi) * dphi) * so3::exp(phi);
    EXPECT_LT((dR - expected).norm(), 1e-8);
    EXPECT_LT((so3::left_jacobian(phi) * so3::left_jacobian_inverse(phi) - Eigen::Matrix3d::Identity()).norm(), 1e-10);
  }
}

TEST(So3, LeftJacobianInverseThrowsAtPi) {
  EXPECT_THROW(so3::left_jacobian_inverse(Eigen::Vector3d(0, std::numbers::pi, 0)), std::domain_error);
}

TEST(Pose, ChartRoundTrip) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    const Pose p = test::random_pose(rng);
    const Pose back = Pose::from_chart(p.to_chart());
    EXPECT_LT((back.translation - p.translation).norm(), 1e-12);
    EXPECT_LT((back.rotation - p.rotation).norm(), 1e-10);
    EXPECT_TRUE(p.is_valid());
  }
}

TEST(Pose, CompositionAndInverse) {
  std::mt19937_64 rng(4);
  const Pose a = test::random_pose(rng);
  const Pose b = test::random_pose(rng);
  const Eigen::Vector3d p(0.3, -0.2, 0.7);
  EXPECT_LT(((a * b).apply(p) - a.apply(b.apply(p))).norm(), 1e-12);
  const Pose id = a * a.inverse();
  EXPECT_LT(id.translation.norm(), 1e-12);
  EXPECT_LT((id.rotation - Eigen::Matrix3d::Identity()).norm(), 1e-12);
}

TEST(Pose, LeftPerturbation) {
  const Pose p = Pose::from_chart(Eigen::Vector3d(1, 2, 3), Eigen::Vector3d(0.1, 0.2, 0.3));
  Vector6d d;
  d << 0.1, 0, 0, 0, 0, 0.2;
  const Pose q = p.perturbed(d);
  EXPECT_LT((q.translation - Eigen::Vector3d(1.1, 2, 3)).norm(), 1e-15);
  EXPECT_LT((q.rotation - so3::exp(Eigen::Vector3d(0, 0, 0.2)) * p.rotation).norm(), 1e-15);
}

TEST(Pose, DetectsInvalidRotation) {
  Pose p;
  p.rotation(0, 0) = 1.1;
  EXPECT_FALSE(p.is_valid());
  p.rotation = -Eigen::Matrix3d::Identity();
  EXPECT_FALSE(p.is_valid());
}
