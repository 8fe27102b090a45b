#pragma once

#include "sqsafe/distance.hpp"

namespace sqsafe {

struct SmoothingConfig {
  double temperature = 1e-8;  ///< softmax temperature epsilon
  int neighborhood_depth = 8;
};

/// Gradients of one signed-distance query.
///
/// j_a and j_b are taken w.r.t. each shape's own world pose under a left
/// perturbation (translation += dt, rotation = exp(dtheta) * rotation).
/// j_x is taken w.r.t. the pose of B relative to A, perturbed in A's frame.
struct DistanceJacobian {
  RowVector6d j_x = RowVector6d::Zero();
  RowVector6d j_a = RowVector6d::Zero();
  RowVector6d j_b = RowVector6d::Zero();
  Eigen::Matrix3d system = Eigen::Matrix3d::Identity();  ///< df/d(dp) at the solution
  Eigen::Vector3d normal = Eigen::Vector3d::UnitX();     ///< unit B->A normal used
};

/// Softmax Hessian surrogate (1/eps)(V diag(a) V^T - (V a)(V a)^T) with
/// a = softmax(V^T x / eps). Columns of V are vertex positions. Throws
/// std::invalid_argument for fewer than two columns or eps <= 0.
Eigen::Matrix3d hessian_surrogate(const Eigen::Matrix3Xd& V, const Eigen::Vector3d& x,
                                  double eps);

/// Surrogate of the support-function Hessian of `shape` at local-frame
/// argument `x`, built from the vertices within cfg.neighborhood_depth hops
/// of `witness_vertex`.
Eigen::Matrix3d hessian_surrogate(const ConvexPolytope& shape, int witness_vertex,
                                  const Eigen::Vector3d& x, const SmoothingConfig& cfg = {});

/// Separation vectors shorter than this fall back to a cached or
/// centroid-difference normal.
inline constexpr double kDistanceFloor = 1e-6;

/// Pose gradient of the signed distance by implicit differentiation of the
/// support-point stationarity condition. `cache` supplies the fallback
/// normal at contact. Throws std::runtime_error when the 3x3 system is
/// singular.
DistanceJacobian pose_gradient(const DistanceQuery& q, const WitnessPair& w,
                               const SmoothingConfig& cfg = {}, const PairCache* cache = nullptr);

}  // namespace sqsafe
