#include "sqsafe/distance.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

namespace sqsafe {

SupportPoint support(const ConvexPolytope& shape, const Pose& pose, const Point3& direction,
                     int hint) {
  if (!(direction.squaredNorm() > 0.0) || !direction.allFinite()) {
    throw std::invalid_argument("support: direction must be nonzero and finite");
  }
  const int id = shape.support_vertex(pose.rotation.transpose() * direction, hint);
  return {pose.apply(shape.vertex(id)), id};
}

namespace {

struct MVertex {
  Eigen::Vector3d w;  // a - b
  Eigen::Vector3d a;
  Eigen::Vector3d b;
  int ia;
  int ib;
};

struct Closest {
  Eigen::Vector3d point;
  std::array<double, 4> bary{};
  int mask = 0;  // bit k set when vertex k keeps a nonzero weight
};

Closest closest_on_segment(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const Eigen::Vector3d ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0.0 ? std::clamp(-a.dot(ab) / len2, 0.0, 1.0) : 0.0;
  Closest c;
  if (t <= 0.0) {
    c.point = a;
    c.bary = {1.0, 0.0, 0.0, 0.0};
    c.mask = 0b01;
  } else if (t >= 1.0) {
    c.point = b;
    c.bary = {0.0, 1.0, 0.0, 0.0};
    c.mask = 0b10;
  } else {
    c.point = a + t * ab;
    c.bary = {1.0 - t, t, 0.0, 0.0};
    c.mask = 0b11;
  }
  return c;
}

// Closest point of triangle abc to the origin with barycentric weights
// (region tests after Ericson, Real-Time Collision Detection 5.1.5).
Closest closest_on_triangle(const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                            const Eigen::Vector3d& c) {
  const Eigen::Vector3d ab = b - a;
  const Eigen::Vector3d ac = c - a;
  const double d1 = -ab.dot(a);
  const double d2 = -ac.dot(a);
  Closest r;
  if (d1 <= 0.0 && d2 <= 0.0) {
    r.point = a;
    r.bary = {1, 0, 0, 0};
    r.mask = 0b001;
    return r;
  }
  const double d3 = -ab.dot(b);
  const double d4 = -ac.dot(b);
  if (d3 >= 0.0 && d4 <= d3) {
    r.point = b;
    r.bary = {0, 1, 0, 0};
    r.mask = 0b010;
    return r;
  }
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    r.point = a + v * ab;
    r.bary = {1 - v, v, 0, 0};
    r.mask = 0b011;
    return r;
  }
  const double d5 = -ab.dot(c);
  const double d6 = -ac.dot(c);
  if (d6 >= 0.0 && d5 <= d6) {
    r.point = c;
    r.bary = {0, 0, 1, 0};
    r.mask = 0b100;
    return r;
  }
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    r.point = a + w * ac;
    r.bary = {1 - w, 0, w, 0};
    r.mask = 0b101;
    return r;
  }
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    r.point = b + w * (c - b);
    r.bary = {0, 1 - w, w, 0};
    r.mask = 0b110;
    return r;
  }
  const double sum = va + vb + vc;
  if (!(std::abs(sum) > 0.0)) {
    // Degenerate (collinear) triangle: best of its edges.
    Closest best = closest_on_segment(a, b);
    Closest e2 = closest_on_segment(a, c);
    if (e2.point.squaredNorm() < best.point.squaredNorm()) {
      best = e2;
      best.bary = {e2.bary[0], 0, e2.bary[1], 0};
      best.mask = (e2.mask & 1) | ((e2.mask & 2) << 1);
    }
    Closest e3 = closest_on_segment(b, c);
    if (e3.point.squaredNorm() < best.point.squaredNorm()) {
      best = e3;
      best.bary = {0, e3.bary[0], e3.bary[1], 0};
      best.mask = e3.mask << 1;
    }
    return best;
  }
  const double v = vb / sum;
  const double w = vc / sum;
  r.point = a + ab * v + ac * w;
  r.bary = {1 - v - w, v, w, 0};
  r.mask = 0b111;
  return r;
}

// Returns mask 0b1111 when the origin is inside the tetrahedron.
Closest closest_on_tetrahedron(const std::array<Eigen::Vector3d, 4>& p) {
  static constexpr std::array<std::array<int, 4>, 4> kFaces{{
      {0, 1, 2, 3}, {0, 2, 3, 1}, {0, 3, 1, 2}, {1, 3, 2, 0}}};  // three face ids + opposite
  const double volume = (p[1] - p[0]).cross(p[2] - p[0]).dot(p[3] - p[0]);
  const bool degenerate = std::abs(volume) < 1e-18;
  Closest best;
  double best_d2 = std::numeric_limits<double>::infinity();
  bool outside_any = false;
  for (const auto& f : kFaces) {
    const Eigen::Vector3d& a = p[f[0]];
    const Eigen::Vector3d& b = p[f[1]];
    const Eigen::Vector3d& c = p[f[2]];
    const Eigen::Vector3d n = (b - a).cross(c - a);
    const double side_origin = -n.dot(a);
    const double side_opposite = n.dot(p[f[3]] - a);
    const bool outside = degenerate || side_origin * side_opposite < 0.0;
    if (!outside) continue;
    outside_any = true;
    const Closest tri = closest_on_triangle(a, b, c);
    const double d2 = tri.point.squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best.point = tri.point;
      best.bary = {0, 0, 0, 0};
      best.mask = 0;
      for (int k = 0; k < 3; ++k) {
        best.bary[f[k]] = tri.bary[k];
        if (tri.mask & (1 << k)) best.mask |= 1 << f[k];
      }
    }
  }
  if (!outside_any) {
    best.point.setZero();
    best.mask = 0b1111;
  }
  return best;
}

class Minkowski {
 public:
  Minkowski(const DistanceQuery& q, int hint_a, int hint_b)
      : q_(q), hint_a_(hint_a), hint_b_(hint_b) {}

  // Support of A - B in direction d.
  MVertex operator()(const Eigen::Vector3d& d) {
    const SupportPoint sa = support(*q_.shape_a, q_.pose_a, d, hint_a_);
    const SupportPoint sb = support(*q_.shape_b, q_.pose_b, -d, hint_b_);
    hint_a_ = sa.vertex_id;
    hint_b_ = sb.vertex_id;
    return {sa.point - sb.point, sa.point, sb.point, sa.vertex_id, sb.vertex_id};
  }

 private:
  const DistanceQuery& q_;
  int hint_a_;
  int hint_b_;
};

void fill_witness(WitnessPair& out, const std::vector<MVertex>& verts, const int* ids,
                  const double* bary, int count) {
  out.point_a.setZero();
  out.point_b.setZero();
  double best = -1.0;
  for (int k = 0; k < count; ++k) {
    const MVertex& m = verts[static_cast<size_t>(ids[k])];
    out.point_a += bary[k] * m.a;
    out.point_b += bary[k] * m.b;
    if (bary[k] > best) {
      best = bary[k];
      out.vertex_a = m.ia;
      out.vertex_b = m.ib;
    }
  }
  out.separation = out.point_a - out.point_b;
}

struct Face {
  std::array<int, 3> v;
  Eigen::Vector3d n;
  double dist;
  bool alive;
};

WitnessPair run_epa(std::vector<MVertex> verts, Minkowski& support_m, const GjkSettings& s,
                    int gjk_iterations) {
  const Eigen::Vector3d centroid =
      0.25 * (verts[0].w + verts[1].w + verts[2].w + verts[3].w);
  std::vector<Face> faces;
  auto add_face = [&](int i, int j, int k) {
    const Eigen::Vector3d& a = verts[static_cast<size_t>(i)].w;
    Eigen::Vector3d n = (verts[static_cast<size_t>(j)].w - a).cross(verts[static_cast<size_t>(k)].w - a);
    const double len = n.norm();
    if (len > 0.0) n /= len;
    if (n.dot(a - centroid) < 0.0) {
      n = -n;
      std::swap(j, k);
    }
    faces.push_back({{i, j, k}, n, std::max(0.0, n.dot(a)), true});
  };
  add_face(0, 1, 2);
  add_face(0, 3, 1);
  add_face(0, 2, 3);
  add_face(1, 3, 2);

  int iterations = gjk_iterations;
  std::vector<std::pair<int, int>> horizon;
  for (;;) {
    int best = -1;
    int alive = 0;
    for (int f = 0; f < static_cast<int>(faces.size()); ++f) {
      if (!faces[static_cast<size_t>(f)].alive) continue;
      ++alive;
      if (best < 0 || faces[static_cast<size_t>(f)].dist < faces[static_cast<size_t>(best)].dist) best = f;
    }
    const Face face = faces[static_cast<size_t>(best)];
    ++iterations;
    const MVertex w = support_m(face.n);
    const bool duplicate = std::any_of(verts.begin(), verts.end(), [&](const MVertex& m) {
      return m.ia == w.ia && m.ib == w.ib;
    });
    if (duplicate || w.w.dot(face.n) - face.dist <= s.epa_tolerance) {
      // Coplanar neighbours tie on plane distance; the foot of the origin
      // lies in only one of them, and the others would clamp to an edge.
      Face pick = face;
      Closest c = closest_on_triangle(verts[static_cast<size_t>(face.v[0])].w,
                                      verts[static_cast<size_t>(face.v[1])].w,
                                      verts[static_cast<size_t>(face.v[2])].w);
      for (const Face& f : faces) {
        if (!f.alive || f.dist > face.dist + s.epa_tolerance) continue;
        const Closest cf = closest_on_triangle(verts[static_cast<size_t>(f.v[0])].w,
                                               verts[static_cast<size_t>(f.v[1])].w,
                                               verts[static_cast<size_t>(f.v[2])].w);
        if (cf.point.squaredNorm() < c.point.squaredNorm()) {
          c = cf;
          pick = f;
        }
      }
      WitnessPair out;
      const int ids[3] = {pick.v[0], pick.v[1], pick.v[2]};
      const double bary[3] = {c.bary[0], c.bary[1], c.bary[2]};
      fill_witness(out, verts, ids, bary, 3);
      out.distance = -out.separation.norm();
      out.iterations = iterations;
      return out;
    }
    if (alive > s.epa_max_faces) {
      throw DistanceNotConverged("EPA: face budget exhausted", -face.dist);
    }
    const int wi = static_cast<int>(verts.size());
    verts.push_back(w);
    horizon.clear();
    for (Face& f : faces) {
      if (!f.alive) continue;
      if (f.n.dot(w.w - verts[static_cast<size_t>(f.v[0])].w) <= 0.0) continue;
      f.alive = false;
      for (int e = 0; e < 3; ++e) {
        const int a = f.v[static_cast<size_t>(e)];
        const int b = f.v[static_cast<size_t>((e + 1) % 3)];
        auto rev = std::find(horizon.begin(), horizon.end(), std::make_pair(b, a));
        if (rev != horizon.end()) {
          horizon.erase(rev);
        } else {
          horizon.emplace_back(a, b);
        }
      }
    }
    for (const auto& [a, b] : horizon) add_face(a, b, wi);
    if (faces.size() > 4 * static_cast<size_t>(s.epa_max_faces)) {
      std::erase_if(faces, [](const Face& f) { return !f.alive; });
    }
  }
}

// Grows a simplex whose hull touches the origin into a tetrahedron by
// adding support points off its affine hull. Returns false when M is flat.
bool expand_to_tetrahedron(std::vector<MVertex>& simplex, Minkowski& support_m) {
  constexpr double kOffHull = 1e-12;
  while (simplex.size() < 4) {
    std::vector<Eigen::Vector3d> candidates;
    if (simplex.size() == 1) {
      for (int k = 0; k < 3; ++k) {
        candidates.push_back(Eigen::Vector3d::Unit(k));
        candidates.push_back(-Eigen::Vector3d::Unit(k));
      }
    } else if (simplex.size() == 2) {
      const Eigen::Vector3d line = (simplex[1].w - simplex[0].w).normalized();
      int axis = 0;
      line.cwiseAbs().minCoeff(&axis);
      const Eigen::Vector3d p1 = line.cross(Eigen::Vector3d::Unit(axis)).normalized();
      const Eigen::Vector3d p2 = line.cross(p1);
      candidates = {p1, -p1, p2, -p2};
    } else {
      const Eigen::Vector3d n =
          (simplex[1].w - simplex[0].w).cross(simplex[2].w - simplex[0].w).normalized();
      candidates = {n, -n};
    }
    bool grown = false;
    for (const auto& d : candidates) {
      const MVertex w = support_m(d);
      double off = 0.0;
      if (simplex.size() == 1) {
        off = (w.w - simplex[0].w).norm();
      } else if (simplex.size() == 2) {
        const Eigen::Vector3d line = (simplex[1].w - simplex[0].w).normalized();
        off = (w.w - simplex[0].w).cross(line).norm();
      } else {
        off = std::abs(d.dot(w.w - simplex[0].w));
      }
      if (off > kOffHull) {
        simplex.push_back(w);
        grown = true;
        break;
      }
    }
    if (!grown) return false;
  }
  return true;
}

}  // namespace

WitnessPair signed_distance(const DistanceQuery& q, PairCache* cache, const GjkSettings& s) {
  if (q.shape_a == nullptr || q.shape_b == nullptr || q.shape_a->size() == 0 ||
      q.shape_b->size() == 0) {
    throw std::invalid_argument("signed_distance: both polytopes must be non-empty");
  }
  Minkowski support_m(q, cache ? cache->hint_a : -1, cache ? cache->hint_b : -1);

  // Search direction for the first support: towards the origin of M.
  Eigen::Vector3d dir = q.pose_b.translation - q.pose_a.translation;
  if (cache && cache->has_direction) dir = -cache->direction;
  if (dir.squaredNorm() < 1e-24) dir = Eigen::Vector3d::UnitX();

  std::vector<MVertex> simplex{support_m(dir)};
  std::array<double, 4> bary{1.0, 0.0, 0.0, 0.0};
  Eigen::Vector3d v = simplex[0].w;
  double gap = std::numeric_limits<double>::infinity();
  WitnessPair out;

  auto finish = [&](int iterations) {
    std::vector<MVertex> verts = simplex;
    std::array<int, 4> ids{0, 1, 2, 3};
    fill_witness(out, verts, ids.data(), bary.data(), static_cast<int>(simplex.size()));
    out.distance = out.separation.norm();
    out.iterations = iterations;
  };

  for (int it = 1; it <= s.max_iterations; ++it) {
    const double vnorm = v.norm();
    if (vnorm <= s.contact_tolerance) {
      // The origin touches the simplex. Only a confirmed shallow EPA depth
      // counts as contact; a deep overlap can also land here when the
      // simplex is degenerate.
      finish(it);
      std::vector<MVertex> grown = simplex;
      if (expand_to_tetrahedron(grown, support_m)) {
        const WitnessPair epa = run_epa(grown, support_m, s, it);
        if (-epa.distance > s.contact_tolerance) {
          out = epa;
          break;
        }
      }
      out.distance = 0.0;
      break;
    }
    const MVertex w = support_m(-v);
    gap = vnorm - v.dot(w.w) / vnorm;
    const bool duplicate = std::any_of(simplex.begin(), simplex.end(), [&](const MVertex& m) {
      return m.ia == w.ia && m.ib == w.ib;
    });
    if (gap <= s.tolerance || duplicate) {
      finish(it);
      break;
    }
    simplex.push_back(w);
    Closest c;
    switch (simplex.size()) {
      case 2: c = closest_on_segment(simplex[0].w, simplex[1].w); break;
      case 3: c = closest_on_triangle(simplex[0].w, simplex[1].w, simplex[2].w); break;
      default:
        c = closest_on_tetrahedron({simplex[0].w, simplex[1].w, simplex[2].w, simplex[3].w});
        break;
    }
    if (c.mask == 0b1111) {
      out = run_epa(simplex, support_m, s, it);
      break;
    }
    std::vector<MVertex> reduced;
    std::array<double, 4> kept{};
    for (size_t k = 0; k < simplex.size(); ++k) {
      if (c.mask & (1 << k)) {
        kept[reduced.size()] = c.bary[k];
        reduced.push_back(simplex[k]);
      }
    }
    simplex = std::move(reduced);
    bary = kept;
    const double progress = vnorm - c.point.norm();
    v = c.point;
    if (progress <= 1e-15 * std::max(1.0, vnorm)) {
      finish(it);
      break;
    }
    if (it == s.max_iterations) {
      throw DistanceNotConverged("GJK: iteration budget exhausted", v.norm());
    }
  }

  if (cache) {
    cache->hint_a = out.vertex_a;
    cache->hint_b = out.vertex_b;
    const double len = out.separation.norm();
    if (len > 1e-6) {
      cache->direction = (out.distance < 0.0 ? -1.0 : 1.0) * out.separation / len;
      cache->has_direction = true;
    }
  }
  return out;
}

}  // namespace sqsafe
