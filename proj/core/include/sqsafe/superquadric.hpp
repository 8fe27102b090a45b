#pragma once

#include <array>
#include <memory>
#include <vector>

#include "sqsafe/geometry.hpp"
#include "sqsafe/kdtree.hpp"

namespace sqsafe {

/// Convex superquadric with semi-axes (a1, a2, a3) and shape exponents
/// (e1, e2). e1 shapes the latitude (z) profile, e2 the cross-section.
class Superquadric {
 public:
  static constexpr double kMinExponent = 0.05;
  static constexpr double kMaxExponent = 2.0;

  /// Throws std::invalid_argument for non-positive axes or exponents
  /// outside [kMinExponent, kMaxExponent].
  Superquadric(double a1, double a2, double a3, double e1, double e2);
  Superquadric(const Eigen::Vector3d& axes, double e1, double e2)
      : Superquadric(axes.x(), axes.y(), axes.z(), e1, e2) {}

  double a1() const { return a_.x(); }
  double a2() const { return a_.y(); }
  double a3() const { return a_.z(); }
  double e1() const { return e1_; }
  double e2() const { return e2_; }
  const Eigen::Vector3d& axes() const { return a_; }
  double max_axis() const { return a_.maxCoeff(); }
  /// Radius of the sphere around the origin that encloses the solid.
  double bounding_radius() const;

  bool operator==(const Superquadric&) const = default;

 private:
  Eigen::Vector3d a_;
  double e1_;
  double e2_;
};

/// Inside-outside function in the superquadric's own frame: negative
/// inside, zero on the boundary, positive outside. Absolute values are
/// taken before the fractional powers, so the function is even in each
/// coordinate.
double implicit_value(const Superquadric& sq, const Point3& p);

/// Analytic gradient of implicit_value; zero at the origin.
Eigen::Vector3d implicit_gradient(const Superquadric& sq, const Point3& p);

enum class SamplingMode {
  kEqualDistance,  ///< approximately equal arc length along u and v
  kUniformAngle,   ///< uniform steps in the parametric angles
};

/// Vertex sampling of a superquadric surface with the grid adjacency kept
/// alongside, plus a k-d tree for nearest-vertex queries.
///
/// Layout: vertex 0 is the south pole (u = -pi/2), then (n_u - 2) rings of
/// n_v vertices, then the north pole. Interior vertices have exactly eight
/// grid neighbours; each pole is adjacent to its whole ring.
class ConvexPolytope {
 public:
  const Superquadric& shape() const { return shape_; }
  const std::vector<Point3>& vertices() const { return vertices_; }
  const Point3& vertex(int id) const { return vertices_[static_cast<size_t>(id)]; }
  int size() const { return static_cast<int>(vertices_.size()); }
  int rings() const { return rings_; }
  int ring_size() const { return ring_size_; }

  /// Neighbour ids of `id` in the sampling grid.
  std::vector<int> neighbors(int id) const;
  template <typename Fn>
  void for_each_neighbor(int id, Fn&& fn) const;

  /// Ids within `depth` hops of `seed` over the grid graph, seed first,
  /// in breadth-first order.
  std::vector<int> neighborhood(int seed, int depth) const;

  int nearest_vertex(const Point3& p) const { return tree_->nearest(p); }

  /// Local-frame support: argmax_v <v, dir> with lowest-id tie-break.
  /// Hill-climbs over the grid graph from the better of `hint` (if >= 0)
  /// and the precomputed support of the nearest tabulated direction.
  int support_vertex(const Eigen::Vector3d& dir, int hint = -1) const;

  /// Brute-force scan over all vertices; same tie-break as support_vertex.
  int support_vertex_exhaustive(const Eigen::Vector3d& dir) const;

  /// Largest angle (radians, seen from the origin) between two vertices
  /// adjacent in the grid; used to bound the sampling error.
  double max_neighbor_angle() const;

  double mesh_tolerance() const { return mesh_tolerance_; }

 private:
  friend ConvexPolytope sample_surface(const Superquadric&, int, int, SamplingMode, double);
  ConvexPolytope(Superquadric sq) : shape_(std::move(sq)) {}

  int ring_vertex(int ring, int col) const;
  int climb(const Eigen::Vector3d& dir, int start) const;

  Superquadric shape_;
  std::vector<Point3> vertices_;
  int rings_ = 0;
  int ring_size_ = 0;
  double mesh_tolerance_ = 0.0;
  std::shared_ptr<const KdTree> tree_;
  // Coarse support table: unit directions (indexed by a k-d tree) and
  // their support vertex ids.
  std::shared_ptr<const KdTree> direction_tree_;
  std::shared_ptr<const std::vector<int>> direction_support_;
};

/// Samples the superquadric surface into a polytope. Every vertex is an
/// exact surface point (|implicit_value| <= mesh_tolerance is checked and
/// throws std::runtime_error otherwise). Requires n_u, n_v >= 4.
ConvexPolytope sample_surface(const Superquadric& sq, int n_u, int n_v,
                              SamplingMode mode = SamplingMode::kEqualDistance,
                              double mesh_tolerance = 1e-6);

template <typename Fn>
void ConvexPolytope::for_each_neighbor(int id, Fn&& fn) const {
  const int last = size() - 1;
  if (id == 0 || id == last) {
    const int ring = (id == 0) ? 0 : rings_ - 1;
    for (int c = 0; c < ring_size_; ++c) fn(ring_vertex(ring, c));
    return;
  }
  const int ring = (id - 1) / ring_size_;
  const int col = (id - 1) % ring_size_;
  for (int dr = -1; dr <= 1; ++dr) {
    const int r = ring + dr;
    if (r < 0) {
      fn(0);
      continue;
    }
    if (r >= rings_) {
      fn(last);
      continue;
    }
    for (int dc = -1; dc <= 1; ++dc) {
      if (dr == 0 && dc == 0) continue;
      fn(ring_vertex(r, (col + dc + ring_size_) % ring_size_));
    }
  }
}

}  // namespace sqsafe
