#pragma once

#include <span>

#include "sqsafe/superquadric.hpp"

namespace sqsafe {

struct PosedSq {
  Superquadric sq;
  Pose pose;

  /// Implicit value of `world_point` in this SQ's frame.
  double implicit_at(const Point3& world_point) const;
  /// World-frame axis-aligned bounds of the SQ's bounding box.
  Eigen::AlignedBox3d world_bounds() const;
};

struct VoxelMetrics {
  double coverage = 0.0;       ///< |V_R ∩ V_C| / |V_R|
  double over_approx = 0.0;    ///< |V_C \ V_R| / |V_R|
  long long reference_voxels = 0;
  long long model_voxels = 0;
  long long intersection_voxels = 0;
};

/// Voxelizes the joint bounding region of both sets at resolution `delta`
/// and compares occupancy, a voxel counting as occupied when its centre lies
/// inside (f <= 0) any SQ of the set. Throws std::invalid_argument for
/// delta <= 0 and std::domain_error when the reference occupies no voxel.
VoxelMetrics voxel_metrics(std::span<const PosedSq> model, std::span<const PosedSq> reference,
                           double delta);

}  // namespace sqsafe
