#include "sqsafe/smoothing.hpp"

#include <cmath>
#include <stdexcept>

namespace sqsafe {

Eigen::Matrix3d hessian_surrogate(const Eigen::Matrix3Xd& V, const Eigen::Vector3d& x,
                                  double eps) {
  if (V.cols() < 2) throw std::invalid_argument("hessian_surrogate: need at least two vertices");
  if (!(eps > 0.0)) throw std::invalid_argument("hessian_surrogate: temperature must be positive");
  const Eigen::VectorXd z = V.transpose() * x / eps;
  const double zmax = z.maxCoeff();
  // Weights below exp(-700) are zero in double precision anyway; skipping
  // them avoids libm's slow underflow path.
  Eigen::VectorXd a(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double t = z[i] - zmax;
    a[i] = t > -700.0 ? std::exp(t) : 0.0;
  }
  a /= a.sum();
  const Eigen::Vector3d va = V * a;
  const Eigen::Matrix3d vdv = V * a.asDiagonal() * V.transpose();
  Eigen::Matrix3d h = (vdv - va * va.transpose()) / eps;
  return 0.5 * (h + h.transpose());
}

Eigen::Matrix3d hessian_surrogate(const ConvexPolytope& shape, int witness_vertex,
                                  const Eigen::Vector3d& x, const SmoothingConfig& cfg) {
  if (witness_vertex < 0 || witness_vertex >= shape.size()) {
    throw std::invalid_argument("hessian_surrogate: witness vertex out of range");
  }
  if (cfg.neighborhood_depth < 1) {
    throw std::invalid_argument("hessian_surrogate: neighborhood depth must be >= 1");
  }
  if (!(x.squaredNorm() > 0.0)) throw std::invalid_argument("hessian_surrogate: zero direction");
  const std::vector<int> ids = shape.neighborhood(witness_vertex, cfg.neighborhood_depth);
  Eigen::Matrix3Xd V(3, static_cast<Eigen::Index>(ids.size()));
  for (size_t k = 0; k < ids.size(); ++k) V.col(static_cast<Eigen::Index>(k)) = shape.vertex(ids[k]);
  return hessian_surrogate(V, x, cfg.temperature);
}

DistanceJacobian pose_gradient(const DistanceQuery& q, const WitnessPair& w,
                               const SmoothingConfig& cfg, const PairCache* cache) {
  const double s = w.distance < 0.0 ? -1.0 : 1.0;
  const double m = w.separation.norm();
  Eigen::Vector3d nu;
  if (m > kDistanceFloor) {
    nu = s * w.separation / m;
  } else if (cache && cache->has_direction) {
    nu = cache->direction.normalized();
  } else {
    nu = q.pose_a.translation - q.pose_b.translation;
    if (nu.squaredNorm() < 1e-24) nu = Eigen::Vector3d::UnitX();
    nu.normalize();
  }

  // World-frame support Hessians at the arguments -m nu (A) and +m nu (B).
  // Below the floor the unit normal stands in for the argument; the
  // Hessian terms scale out of the rotation blocks through m anyway.
  const double scale = m > kDistanceFloor ? m : 1.0;
  const Eigen::Matrix3d& Ra = q.pose_a.rotation;
  const Eigen::Matrix3d& Rb = q.pose_b.rotation;
  const Eigen::Matrix3d Ha =
      Ra * hessian_surrogate(*q.shape_a, w.vertex_a, Ra.transpose() * (-scale * nu), cfg) *
      Ra.transpose();
  const Eigen::Matrix3d Hb =
      Rb * hessian_surrogate(*q.shape_b, w.vertex_b, Rb.transpose() * (scale * nu), cfg) *
      Rb.transpose();

  const Eigen::Matrix3d M = Eigen::Matrix3d::Identity() + s * (Ha + Hb);
  const Eigen::Vector3d ra = w.point_a - q.pose_a.translation;
  const Eigen::Vector3d rb = w.point_b - q.pose_b.translation;
  const Eigen::Matrix3d nx = so3::hat(nu);

  Eigen::Matrix<double, 3, 6> dfa;
  dfa << -Eigen::Matrix3d::Identity(), so3::hat(ra) + m * Ha * nx;
  Eigen::Matrix<double, 3, 6> dfb;
  dfb << Eigen::Matrix3d::Identity(), -so3::hat(rb) + m * Hb * nx;

  // Row vector y^T = -nu^T M^{-1}, solved as M^T y = -nu.
  const Eigen::FullPivLU<Eigen::Matrix3d> lu(M.transpose());
  if (!lu.isInvertible() || !(std::abs(lu.determinant()) > 1e-300)) {
    throw std::runtime_error("pose_gradient: singular stationarity system");
  }
  const Eigen::Vector3d y = lu.solve(-nu);

  DistanceJacobian out;
  out.system = M;
  out.normal = nu;
  out.j_a = y.transpose() * dfa;
  out.j_b = y.transpose() * dfb;
  out.j_x.head<3>() = out.j_b.head<3>() * Ra;
  out.j_x.tail<3>() = out.j_b.tail<3>() * Ra;
  if (!out.j_a.allFinite() || !out.j_b.allFinite()) {
    throw std::runtime_error("pose_gradient: non-finite gradient");
  }
  return out;
}

}  // namespace sqsafe
