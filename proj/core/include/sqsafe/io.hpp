#pragma once

#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "sqsafe/voxel.hpp"

namespace sqsafe {

// Wire format shared by SQ-set files, scenario files and the teleop
// protocol:
//   pose: {"t":[x,y,z],"aa":[rx,ry,rz]}
//   sq:   {"a":[a1,a2,a3],"e":[e1,e2],"pose":{...}}
//   set:  {"sqs":[sq, ...]}

nlohmann::json pose_to_json(const Pose& pose);
Pose pose_from_json(const nlohmann::json& j);

nlohmann::json sq_to_json(const Superquadric& sq);
Superquadric sq_from_json(const nlohmann::json& j);

nlohmann::json posed_sq_to_json(const PosedSq& s);
PosedSq posed_sq_from_json(const nlohmann::json& j);

nlohmann::json sq_set_to_json(std::span<const PosedSq> set);
std::vector<PosedSq> sq_set_from_json(const nlohmann::json& j);

Eigen::Vector3d vec3_from_json(const nlohmann::json& j);
nlohmann::json vec_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vecx_from_json(const nlohmann::json& j);

/// Reads and parses a JSON file; throws std::runtime_error with the path on failure.
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace sqsafe
