#pragma once

#include <filesystem>
#include <random>

#include "sqsafe/geometry.hpp"
#include "sqsafe/superquadric.hpp"

namespace sqsafe::test {

inline std::filesystem::path data_dir() { return SQSAFE_DATA_DIR; }
inline std::filesystem::path scenario_path(const std::string& name) { return data_dir() / "scenarios" / name; }

inline Eigen::Vector3d random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::Vector3d v(g(rng), g(rng), g(rng));
  return v.normalized();
}

inline Pose random_pose(std::mt19937_64& rng, double spread = 1.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, 3.0);
  return Pose::from_chart(Eigen::Vector3d(u(rng), u(rng), u(rng)) * spread, random_unit(rng) * angle(rng));
}

inline Superquadric random_sq(std::mt19937_64& rng, double a_min = 0.05, double a_max = 0.15, double e_min = 0.3,
                              double e_max = 2.0) {
  std::uniform_real_distribution<double> a(a_min, a_max);
  std::uniform_real_distribution<double> e(e_min, e_max);
  return Superquadric(a(rng), a(rng), a(rng), e(rng), e(rng));
}

}  // namespace sqsafe::test
