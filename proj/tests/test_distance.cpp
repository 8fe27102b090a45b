#include <gtest/gtest.h>

#include <numbers>

#include "sqsafe/distance.hpp"
#include "support.hpp"

using namespace sqsafe;

namespace {

const ConvexPolytope& unit_sphere() {
  static const ConvexPolytope p = sample_surface(Superquadric(1, 1, 1, 1, 1), 200, 200);
  return p;
}

double chord_error(const ConvexPolytope& p) { return p.shape().max_axis() * (1.0 - std::cos(p.max_neighbor_angle())); }

double max_edge(const ConvexPolytope& p) {
  double e = 0.0;
  for (int i = 0; i < p.size(); ++i) {
    for (int j : p.neighbors(i)) e = std::max(e, (p.vertex(i) - p.vertex(j)).norm());
  }
  return e;
}

}  // namespace

TEST(Support, SphereAndTranslation) {
  const auto s = support(unit_sphere(), Pose::identity(), Point3(1, 0, 0));
  EXPECT_LT((s.point - Point3(1, 0, 0)).norm(), 1e-6);
  const auto t = support(unit_sphere(), Pose::from_translation(Point3(2, 0, 0)), Point3(1, 0, 0));
  EXPECT_LT((t.point - Point3(3, 0, 0)).norm(), 1e-6);
  EXPECT_THROW(support(unit_sphere(), Pose::identity(), Point3::Zero()), std::invalid_argument);
}

TEST(Support, BoxCornerMatchesExhaustiveScan) {
  const ConvexPolytope box = sample_surface(Superquadric(0.3, 0.3, 0.3, 0.2, 0.2), 200, 200);
  const Point3 dir = Point3(1, 1, 1).normalized();
  const auto s = support(box, Pose::identity(), dir);
  EXPECT_EQ(s.vertex_id, box.support_vertex_exhaustive(dir));
  EXPECT_GT(s.point.minCoeff(), 0.25);
}

TEST(Support, TieBreaksToLowestId) {
  // Poles are unique, but a direction orthogonal to the axis hits a ring
  // of equal projections on a cylinder-like shape.
  const ConvexPolytope cyl = sample_surface(Superquadric(0.1, 0.1, 0.3, 0.1, 1.0), 40, 40);
  const Point3 dir(1, 0, 0);
  const int v = support(cyl, Pose::identity(), dir).vertex_id;
  const double best = cyl.vertex(v).dot(dir);
  for (int i = 0; i < v; ++i) EXPECT_LT(cyl.vertex(i).dot(dir), best);
}

TEST(SignedDistance, SeparatedSpheres) {
  const DistanceQuery q{&unit_sphere(), &unit_sphere(), Pose::identity(), Pose::from_translation(Point3(3, 0, 0))};
  const WitnessPair w = signed_distance(q);
  EXPECT_NEAR(w.distance, 1.0, 2 * chord_error(unit_sphere()));
  EXPECT_NEAR(w.separation.norm(), w.distance, 1e-9);
  EXPECT_LT((w.separation - (w.point_a - w.point_b)).norm(), 1e-12);
}

TEST(SignedDistance, PenetratingSpheres) {
  const DistanceQuery q{&unit_sphere(), &unit_sphere(), Pose::identity(), Pose::from_translation(Point3(1, 0, 0))};
  const WitnessPair w = signed_distance(q);
  EXPECT_TRUE(w.penetrating());
  EXPECT_NEAR(w.distance, -1.0, 2 * chord_error(unit_sphere()));
  EXPECT_NEAR(w.separation.norm(), -w.distance, 1e-6);
}

TEST(SignedDistance, TwoBoxPairMatchesFrozenReference) {
  // Constrained-optimisation reference for this pose, computed once by
  // oracle::sdf_reference and frozen.
  constexpr double kReference = 1.402467447128;
  const ConvexPolytope a = sample_surface(Superquadric(0.5, 1.5, 1.0, 0.2, 0.2), 200, 200);
  const ConvexPolytope b = sample_surface(Superquadric(1.0, 0.5, 1.0, 0.2, 0.2), 200, 200);
  const DistanceQuery q{&a, &b, Pose::from_chart(Point3::Zero(), Point3(0, 0, std::numbers::pi / 3)),
                        Pose::from_chart(Point3(0, 3, 0), Point3(0, 0, -std::numbers::pi / 4))};
  const WitnessPair w = signed_distance(q);
  EXPECT_GT(w.distance, 0.0);
  EXPECT_NEAR(w.distance, kReference, 1e-3);
}

class RandomPairs : public ::testing::Test {
 protected:
  void SetUp() override {
    std::mt19937_64 rng(21);
    for (int i = 0; i < 6; ++i) shapes.push_back(sample_surface(test::random_sq(rng), 60, 60));
  }
  std::vector<ConvexPolytope> shapes;
};

TEST_F(RandomPairs, SymmetryRigidInvarianceAndTranslation) {
  std::mt19937_64 rng(22);
  int checked = 0;
  for (int i = 0; i < 60; ++i) {
    const ConvexPolytope& a = shapes[static_cast<size_t>(i % 6)];
    const ConvexPolytope& b = shapes[static_cast<size_t>((i + 1) % 6)];
    const Pose pa = test::random_pose(rng, 0.15);
    const Pose pb = test::random_pose(rng, 0.15);
    const WitnessPair ab = signed_distance({&a, &b, pa, pb});
    // Deep penetrations of thin shapes are out of scope for EPA accuracy.
    const double shallow = 0.5 * std::min(a.shape().axes().minCoeff(), b.shape().axes().minCoeff());
    if (ab.distance < -shallow) continue;
    ++checked;
    const WitnessPair ba = signed_distance({&b, &a, pb, pa});
    EXPECT_NEAR(ab.distance, ba.distance, 1e-7);
    if (ab.distance > 0.0) {
      EXPECT_LT((ab.point_a - ba.point_b).norm(), 1e-6);
      EXPECT_LT((ab.point_b - ba.point_a).norm(), 1e-6);
    }

    const Pose g = test::random_pose(rng, 2.0);
    EXPECT_NEAR(signed_distance({&a, &b, g * pa, g * pb}).distance, ab.distance, 1e-9);

    if (ab.distance > 1e-4) {
      // Moving B away along the separation normal adds exactly t.
      const Point3 n = ab.separation.normalized();
      Pose moved = pb;
      moved.translation -= 0.05 * n;
      EXPECT_NEAR(signed_distance({&a, &b, pa, moved}).distance, ab.distance + 0.05, 1e-9);
    }
  }
  EXPECT_GE(checked, 40);
}

TEST_F(RandomPairs, WitnessesOnHullsAndBruteForceAgreement) {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 30; ++i) {
    const ConvexPolytope& a = shapes[static_cast<size_t>(i % 6)];
    const ConvexPolytope& b = shapes[static_cast<size_t>((i + 2) % 6)];
    const Pose pa = Pose::from_chart(Point3::Zero(), test::random_unit(rng));
    const Pose pb = Pose::from_chart(test::random_unit(rng) * 0.5, test::random_unit(rng));
    const WitnessPair w = signed_distance({&a, &b, pa, pb});
    ASSERT_GT(w.distance, 0.0);
    // The witness of A maximises <p, -n> over hull A; same for B along n.
    const Point3 n = w.separation.normalized();
    EXPECT_NEAR(w.point_a.dot(-n), support(a, pa, -n).point.dot(-n), 1e-9);
    EXPECT_NEAR(w.point_b.dot(n), support(b, pb, n).point.dot(n), 1e-9);

    double brute = std::numeric_limits<double>::infinity();
    for (const Point3& va : a.vertices()) {
      const Point3 wa = pa.apply(va);
      for (const Point3& vb : b.vertices()) brute = std::min(brute, (wa - pb.apply(vb)).norm());
    }
    EXPECT_LE(w.distance, brute + 1e-12);
    // The closest vertex pair sits at most an edge sideways from the witnesses.
    const double lateral = max_edge(a) + max_edge(b);
    EXPECT_LE(brute - w.distance, lateral * lateral / (2.0 * w.distance) + 1e-12);
  }
}

TEST(SignedDistance, WarmStartGivesSameAnswer) {
  std::mt19937_64 rng(24);
  const ConvexPolytope a = sample_surface(test::random_sq(rng), 100, 100);
  const ConvexPolytope b = sample_surface(test::random_sq(rng), 100, 100);
  PairCache cache;
  for (int k = 0; k < 50; ++k) {
    const Pose pb = Pose::from_chart(Point3(0.35 + 0.1 * std::sin(0.2 * k), 0.05 * k / 50.0, 0), Point3(0, 0.02 * k, 0));
    const DistanceQuery q{&a, &b, Pose::identity(), pb};
    EXPECT_NEAR(signed_distance(q, &cache).distance, signed_distance(q).distance, 1e-9);
  }
  EXPECT_TRUE(cache.has_direction);
}

TEST(SignedDistance, TouchingShapesReportZero) {
  const ConvexPolytope box = sample_surface(Superquadric(0.1, 0.1, 0.1, 0.1, 0.1), 40, 40);
  double xmax = 0.0;
  for (const Point3& v : box.vertices()) xmax = std::max(xmax, v.x());
  const WitnessPair w = signed_distance({&box, &box, Pose::identity(), Pose::from_translation(Point3(2 * xmax, 0, 0))});
  EXPECT_NEAR(w.distance, 0.0, 1e-9);
}
