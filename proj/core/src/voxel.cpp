#include "sqsafe/voxel.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace sqsafe {

double PosedSq::implicit_at(const Point3& world_point) const {
  return implicit_value(sq, pose.rotation.transpose() * (world_point - pose.translation));
}

Eigen::AlignedBox3d PosedSq::world_bounds() const {
  const Eigen::Vector3d half = pose.rotation.cwiseAbs() * sq.axes();
  return {pose.translation - half, pose.translation + half};
}

namespace {

struct Occupancy {
  std::span<const PosedSq> shapes;
  std::vector<Eigen::AlignedBox3d> bounds;

  explicit Occupancy(std::span<const PosedSq> s) : shapes(s) {
    bounds.reserve(s.size());
    for (const auto& p : s) bounds.push_back(p.world_bounds());
  }

  bool contains(const Point3& c) const {
    for (size_t i = 0; i < shapes.size(); ++i) {
      if (bounds[i].contains(c) && shapes[i].implicit_at(c) <= 0.0) return true;
    }
    return false;
  }
};

}  // namespace

VoxelMetrics voxel_metrics(std::span<const PosedSq> model, std::span<const PosedSq> reference,
                           double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("voxel_metrics: resolution must be positive");
  Eigen::AlignedBox3d region;
  for (const auto& s : model) region.extend(s.world_bounds());
  for (const auto& s : reference) region.extend(s.world_bounds());
  if (region.isEmpty()) throw std::domain_error("voxel_metrics: reference occupies no voxels");

  // Grid anchored at the region corner, padded by one voxel on each side.
  const Eigen::Vector3d origin = region.min() - Eigen::Vector3d::Constant(delta);
  const Eigen::Vector3d extent = region.sizes() + Eigen::Vector3d::Constant(2.0 * delta);
  const Eigen::Vector3i counts = (extent / delta).array().ceil().cast<int>();

  const Occupancy in_model(model);
  const Occupancy in_ref(reference);
  VoxelMetrics m;
  for (int i = 0; i < counts.x(); ++i) {
    for (int j = 0; j < counts.y(); ++j) {
      for (int k = 0; k < counts.z(); ++k) {
        const Point3 c = origin + delta * Eigen::Vector3d(i + 0.5, j + 0.5, k + 0.5);
        const bool r = in_ref.contains(c);
        const bool cm = in_model.contains(c);
        m.reference_voxels += r;
        m.model_voxels += cm;
        m.intersection_voxels += (r && cm);
      }
    }
  }
  if (m.reference_voxels == 0) throw std::domain_error("voxel_metrics: reference occupies no voxels");
  const double ref = static_cast<double>(m.reference_voxels);
  m.coverage = static_cast<double>(m.intersection_voxels) / ref;
  m.over_approx = static_cast<double>(m.model_voxels - m.intersection_voxels) / ref;
  return m;
}

}  // namespace sqsafe
