#include "sqsafe/superquadric.hpp"

#include <algorithm>
#include <unordered_set>
#include <cstdint>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace sqsafe {
namespace {

double signed_pow(double x, double p) { return std::copysign(std::pow(std::abs(x), p), x); }

struct ProfilePoint {
  double x;
  double y;
};

// Point on the unit superellipse |x|^(2/e) + |y|^(2/e) = 1 along polar angle eta.
ProfilePoint radial_point(double eta, double e) {
  const double c = std::cos(eta);
  const double s = std::sin(eta);
  const double q = 2.0 / e;
  // Normalize by the larger component first to keep the power sum in range.
  const double m = std::max(std::abs(c), std::abs(s));
  const double sum = std::pow(std::abs(c) / m, q) + std::pow(std::abs(s) / m, q);
  const double r = 1.0 / (m * std::pow(sum, 1.0 / q));
  return {r * c, r * s};
}

// Arc length of the superellipse scaled by (sx, sy) on a dense polar grid
// over [begin, end]; eta and arc are filled in step.
void dense_arc(double e, double sx, double sy, double begin, double end, int dense,
               std::vector<double>& eta, std::vector<double>& arc) {
  eta.assign(static_cast<size_t>(dense) + 1, begin);
  arc.assign(static_cast<size_t>(dense) + 1, 0.0);
  ProfilePoint prev = radial_point(begin, e);
  for (int k = 1; k <= dense; ++k) {
    eta[static_cast<size_t>(k)] = begin + (end - begin) * k / dense;
    const ProfilePoint p = radial_point(eta[static_cast<size_t>(k)], e);
    arc[static_cast<size_t>(k)] = arc[static_cast<size_t>(k) - 1] + std::hypot(sx * (p.x - prev.x), sy * (p.y - prev.y));
    prev = p;
  }
}

// Points on the unit superellipse through the polar angles `breaks`,
// equally spaced in arc length (on the curve scaled by (sx, sy)) within
// each segment. The breaks are the symmetry points of the profile, where
// the curve is sharpest for exponents near 2, so they are always sampled.
// `intervals` are shared between segments in proportion to their length.
// With `closed` the last break is the first one again and is not repeated.
std::vector<ProfilePoint> equal_arc_profile(double e, double sx, double sy,
                                            const std::vector<double>& breaks, int intervals,
                                            bool closed) {
  const size_t segments = breaks.size() - 1;
  const int dense = std::max(4096, 32 * intervals);
  std::vector<std::vector<double>> etas(segments);
  std::vector<std::vector<double>> arcs(segments);
  double total = 0.0;
  for (size_t k = 0; k < segments; ++k) {
    dense_arc(e, sx, sy, breaks[k], breaks[k + 1], dense, etas[k], arcs[k]);
    total += arcs[k].back();
  }
  // Largest-remainder split with at least one interval per segment.
  std::vector<int> share(segments, 1);
  int left = intervals - static_cast<int>(segments);
  std::vector<std::pair<double, size_t>> remainders;
  for (size_t k = 0; k < segments; ++k) {
    const double ideal = left * arcs[k].back() / total;
    share[k] += static_cast<int>(std::floor(ideal));
    remainders.emplace_back(ideal - std::floor(ideal), k);
  }
  int assigned = 0;
  for (int c : share) assigned += c;
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& l, const auto& r) { return l.first > r.first; });
  for (size_t i = 0; assigned < intervals; ++i, ++assigned) ++share[remainders[i % segments].second];

  std::vector<ProfilePoint> out;
  for (size_t k = 0; k < segments; ++k) {
    const auto& eta = etas[k];
    const auto& arc = arcs[k];
    size_t j = 0;
    for (int i = 0; i < share[k]; ++i) {
      const double target = arc.back() * i / share[k];
      while (j + 1 < arc.size() && arc[j + 1] < target) ++j;
      double angle = eta[j];
      if (i > 0 && j + 1 < arc.size() && arc[j + 1] > arc[j]) {
        angle += (target - arc[j]) / (arc[j + 1] - arc[j]) * (eta[j + 1] - eta[j]);
      }
      out.push_back(radial_point(i == 0 ? breaks[k] : angle, e));
    }
  }
  if (!closed) out.push_back(radial_point(breaks.back(), e));
  return out;
}

std::vector<ProfilePoint> uniform_angle_profile(double e, double begin, double end, int count,
                                                bool closed) {
  const int intervals = closed ? count : count - 1;
  std::vector<ProfilePoint> out;
  out.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double a = begin + (end - begin) * i / intervals;
    out.push_back({signed_pow(std::cos(a), e), signed_pow(std::sin(a), e)});
  }
  return out;
}

}  // namespace

Superquadric::Superquadric(double a1, double a2, double a3, double e1, double e2)
    : a_(a1, a2, a3), e1_(e1), e2_(e2) {
  if (!(a1 > 0.0) || !(a2 > 0.0) || !(a3 > 0.0) || !a_.allFinite()) {
    throw std::invalid_argument("Superquadric: semi-axes must be positive and finite");
  }
  for (double e : {e1, e2}) {
    if (!(e >= kMinExponent)) {
      throw std::invalid_argument("Superquadric: exponent " + std::to_string(e) +
                                  " below minimum " + std::to_string(kMinExponent));
    }
    if (!(e <= kMaxExponent)) {
      throw std::invalid_argument("Superquadric: exponent " + std::to_string(e) +
                                  " outside the convex regime (e <= 2)");
    }
  }
}

double Superquadric::bounding_radius() const { return a_.norm(); }

double implicit_value(const Superquadric& sq, const Point3& p) {
  const double xy = std::pow(std::abs(p.x() / sq.a1()), 2.0 / sq.e2()) +
                    std::pow(std::abs(p.y() / sq.a2()), 2.0 / sq.e2());
  const double z = std::pow(std::abs(p.z() / sq.a3()), 2.0 / sq.e1());
  return std::pow(xy, sq.e2() / sq.e1()) + z - 1.0;
}

Eigen::Vector3d implicit_gradient(const Superquadric& sq, const Point3& p) {
  const double q2 = 2.0 / sq.e2();
  const double q1 = 2.0 / sq.e1();
  const double xn = std::abs(p.x() / sq.a1());
  const double yn = std::abs(p.y() / sq.a2());
  const double zn = std::abs(p.z() / sq.a3());
  const double xy = std::pow(xn, q2) + std::pow(yn, q2);
  Eigen::Vector3d g = Eigen::Vector3d::Zero();
  if (xy > 0.0) {
    const double outer = (sq.e2() / sq.e1()) * std::pow(xy, sq.e2() / sq.e1() - 1.0);
    if (xn > 0.0) g.x() = outer * q2 * std::pow(xn, q2 - 1.0) / sq.a1();
    if (yn > 0.0) g.y() = outer * q2 * std::pow(yn, q2 - 1.0) / sq.a2();
    g.x() = std::copysign(g.x(), p.x());
    g.y() = std::copysign(g.y(), p.y());
  }
  if (zn > 0.0) g.z() = std::copysign(q1 * std::pow(zn, q1 - 1.0) / sq.a3(), p.z());
  return g;
}

ConvexPolytope sample_surface(const Superquadric& sq, int n_u, int n_v, SamplingMode mode,
                              double mesh_tolerance) {
  if (n_u < 4 || n_v < 4) {
    throw std::invalid_argument("sample_surface: n_u and n_v must be at least 4");
  }
  constexpr double pi = std::numbers::pi;
  std::vector<ProfilePoint> lat;
  std::vector<ProfilePoint> lon;
  if (mode == SamplingMode::kEqualDistance) {
    const double radial = 0.5 * (sq.a1() + sq.a2());
    lat = equal_arc_profile(sq.e1(), radial, sq.a3(), {-pi / 2, 0.0, pi / 2}, n_u - 1, false);
    lon = equal_arc_profile(sq.e2(), sq.a1(), sq.a2(), {-pi, -pi / 2, 0.0, pi / 2, pi}, n_v, true);
  } else {
    lat = uniform_angle_profile(sq.e1(), -pi / 2, pi / 2, n_u, false);
    lon = uniform_angle_profile(sq.e2(), -pi, pi, n_v, true);
  }

  ConvexPolytope poly(sq);
  poly.rings_ = n_u - 2;
  poly.ring_size_ = n_v;
  poly.mesh_tolerance_ = mesh_tolerance;
  auto& verts = poly.vertices_;
  verts.reserve(static_cast<size_t>(poly.rings_ * n_v + 2));
  verts.emplace_back(0.0, 0.0, -sq.a3());
  for (int i = 1; i + 1 < n_u; ++i) {
    const ProfilePoint& u = lat[static_cast<size_t>(i)];
    for (const ProfilePoint& v : lon) {
      verts.emplace_back(sq.a1() * u.x * v.x, sq.a2() * u.x * v.y, sq.a3() * u.y);
    }
  }
  verts.emplace_back(0.0, 0.0, sq.a3());

  for (const Point3& v : verts) {
    const double f = implicit_value(sq, v);
    if (!(std::abs(f) <= mesh_tolerance)) {
      throw std::runtime_error("sample_surface: vertex off the surface, |f| = " +
                               std::to_string(std::abs(f)));
    }
  }
  poly.tree_ = std::make_shared<const KdTree>(std::span<const Eigen::Vector3d>(verts));

  // Fibonacci-sphere direction table. Entries are found by a strided scan
  // followed by a climb, which is exact for these grids and far cheaper
  // than a full scan per direction.
  constexpr int kDirections = 2048;
  std::vector<Eigen::Vector3d> dirs;
  dirs.reserve(kDirections);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < kDirections; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / kDirections;
    const double r = std::sqrt(1.0 - z * z);
    dirs.emplace_back(r * std::cos(golden * i), r * std::sin(golden * i), z);
  }
  auto table = std::make_shared<std::vector<int>>();
  table->reserve(kDirections);
  const int stride = std::max(1, poly.size() / 1024);
  for (const auto& d : dirs) {
    int best = 0;
    double best_val = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < poly.size(); i += stride) {
      const double v = verts[static_cast<size_t>(i)].dot(d);
      if (v > best_val) {
        best_val = v;
        best = i;
      }
    }
    table->push_back(poly.climb(d, best));
  }
  poly.direction_tree_ = std::make_shared<const KdTree>(std::span<const Eigen::Vector3d>(dirs));
  poly.direction_support_ = std::move(table);
  return poly;
}

int ConvexPolytope::ring_vertex(int ring, int col) const { return 1 + ring * ring_size_ + col; }

std::vector<int> ConvexPolytope::neighbors(int id) const {
  std::vector<int> out;
  for_each_neighbor(id, [&](int n) { out.push_back(n); });
  return out;
}

std::vector<int> ConvexPolytope::neighborhood(int seed, int depth) const {
  // Per-thread scratch stamped with a call counter, so nothing is cleared
  // between calls.
  thread_local std::vector<std::uint64_t> stamp;
  thread_local std::vector<int> level;
  thread_local std::uint64_t call = 0;
  const auto n = static_cast<size_t>(size());
  if (stamp.size() < n) {
    stamp.resize(n, 0);
    level.resize(n, 0);
  }
  ++call;
  std::vector<int> order{seed};
  order.reserve(static_cast<size_t>((2 * depth + 1) * (2 * depth + 1)));
  stamp[static_cast<size_t>(seed)] = call;
  level[static_cast<size_t>(seed)] = 0;
  for (size_t head = 0; head < order.size(); ++head) {
    const int cur = order[head];
    const int lv = level[static_cast<size_t>(cur)];
    if (lv >= depth) continue;
    for_each_neighbor(cur, [&](int nb) {
      const auto i = static_cast<size_t>(nb);
      if (stamp[i] != call) {
        stamp[i] = call;
        level[i] = lv + 1;
        order.push_back(nb);
      }
    });
  }
  return order;
}

int ConvexPolytope::support_vertex(const Eigen::Vector3d& dir, int hint) const {
  int start = (*direction_support_)[static_cast<size_t>(direction_tree_->nearest(dir.normalized()))];
  if (hint >= 0 && hint < size()) {
    const double sv = vertex(start).dot(dir);
    const double hv = vertex(hint).dot(dir);
    if (hv > sv || (hv == sv && hint < start)) start = hint;
  }
  return climb(dir, start);
}

int ConvexPolytope::climb(const Eigen::Vector3d& dir, int start) const {
  int cur = start;
  double val = vertex(cur).dot(dir);
  for (;;) {
    int best = cur;
    double best_val = val;
    for_each_neighbor(cur, [&](int n) {
      const double v = vertex(n).dot(dir);
      if (v > best_val || (v == best_val && n < best)) {
        best = n;
        best_val = v;
      }
    });
    if (best == cur) break;
    cur = best;
    val = best_val;
  }
  // Exact ties need not be adjacent in the sampling graph (flat faces put
  // interior samples a rounding error below the hull), so flood the
  // near-tie region and keep the lowest id among exact ties.
  const double floor_val = val - 1e-12 * shape_.max_axis();
  bool near = false;
  for_each_neighbor(cur, [&](int n) { near = near || vertex(n).dot(dir) >= floor_val; });
  if (!near) return cur;
  std::vector<int> stack{cur};
  std::unordered_set<int> seen{cur};
  int lowest = cur;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for_each_neighbor(v, [&](int n) {
      const double nv = vertex(n).dot(dir);
      if (nv < floor_val || !seen.insert(n).second) return;
      stack.push_back(n);
      if (nv > val) {
        val = nv;
        lowest = n;
      } else if (nv == val) {
        lowest = std::min(lowest, n);
      }
    });
  }
  return lowest;
}

int ConvexPolytope::support_vertex_exhaustive(const Eigen::Vector3d& dir) const {
  int best = 0;
  double best_val = vertex(0).dot(dir);
  for (int i = 1; i < size(); ++i) {
    const double v = vertex(i).dot(dir);
    if (v > best_val) {  // strict: ties keep the lower id
      best = i;
      best_val = v;
    }
  }
  return best;
}

double ConvexPolytope::max_neighbor_angle() const {
  double worst = 0.0;
  for (int i = 0; i < size(); ++i) {
    const Point3& a = vertex(i);
    for_each_neighbor(i, [&](int n) {
      const Point3& b = vertex(n);
      const double c = std::clamp(a.dot(b) / (a.norm() * b.norm()), -1.0, 1.0);
      worst = std::max(worst, std::acos(c));
    });
  }
  return worst;
}

}  // namespace sqsafe
