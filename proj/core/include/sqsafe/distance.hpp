#pragma once

#include <stdexcept>
#include <string>

#include "sqsafe/superquadric.hpp"

namespace sqsafe {

/// Two posed polytopes. The polytopes are borrowed and must outlive the query.
struct DistanceQuery {
  const ConvexPolytope* shape_a = nullptr;
  const ConvexPolytope* shape_b = nullptr;
  Pose pose_a;
  Pose pose_b;
};

struct WitnessPair {
  double distance = 0.0;      ///< > 0 separated, < 0 penetrating
  Point3 point_a;             ///< world frame, on the boundary of hull A
  Point3 point_b;             ///< world frame, on the boundary of hull B
  Point3 separation;          ///< point_a - point_b
  int vertex_a = -1;          ///< dominant support vertex of A in the final simplex
  int vertex_b = -1;
  int iterations = 0;         ///< GJK plus EPA iterations
  bool penetrating() const { return distance < 0.0; }
};

struct SupportPoint {
  Point3 point;
  int vertex_id;
};

/// Per-pair state carried between control cycles. Owned by one worker.
struct PairCache {
  int hint_a = -1;
  int hint_b = -1;
  Eigen::Vector3d direction = Eigen::Vector3d::Zero();  ///< last unit B->A separation normal
  bool has_direction = false;
};

struct GjkSettings {
  double tolerance = 1e-10;     ///< duality-gap stop, metres
  int max_iterations = 128;
  double epa_tolerance = 1e-8;  ///< expansion stop, metres
  int epa_max_faces = 256;
  double contact_tolerance = 1e-10;
};

/// Raised when GJK or EPA exhausts its budget; carries the best bound seen.
class DistanceNotConverged : public std::runtime_error {
 public:
  DistanceNotConverged(const std::string& what, double bound)
      : std::runtime_error(what), bound_(bound) {}
  double bound() const { return bound_; }

 private:
  double bound_;
};

/// World-frame support point of a posed polytope: argmax over vertices of
/// <v_world, direction>. Throws std::invalid_argument for a zero direction.
SupportPoint support(const ConvexPolytope& shape, const Pose& pose, const Point3& direction,
                     int hint = -1);

/// Signed distance between two posed polytopes: GJK when separated, EPA
/// when overlapping. `cache`, when given, seeds support queries and the
/// initial search direction and is updated on return.
WitnessPair signed_distance(const DistanceQuery& q, PairCache* cache = nullptr,
                            const GjkSettings& settings = {});

}  // namespace sqsafe
