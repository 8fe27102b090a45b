#include "sqsafe/io.hpp"

#include <fstream>
#include <stdexcept>

namespace sqsafe {

Eigen::Vector3d vec3_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument("expected a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

nlohmann::json vec_to_json(const Eigen::VectorXd& v) {
  auto arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Eigen::VectorXd vecx_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw std::invalid_argument("expected an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

nlohmann::json pose_to_json(const Pose& pose) {
  const Vector6d x = pose.to_chart();
  return {{"t", {x[0], x[1], x[2]}}, {"aa", {x[3], x[4], x[5]}}};
}

Pose pose_from_json(const nlohmann::json& j) {
  const Eigen::Vector3d t = j.contains("t") ? vec3_from_json(j.at("t")) : Eigen::Vector3d::Zero();
  const Eigen::Vector3d aa = j.contains("aa") ? vec3_from_json(j.at("aa")) : Eigen::Vector3d::Zero();
  return Pose::from_chart(t, aa);
}

nlohmann::json sq_to_json(const Superquadric& sq) {
  return {{"a", {sq.a1(), sq.a2(), sq.a3()}}, {"e", {sq.e1(), sq.e2()}}};
}

Superquadric sq_from_json(const nlohmann::json& j) {
  const auto& e = j.at("e");
  if (!e.is_array() || e.size() != 2) throw std::invalid_argument("sq: \"e\" must hold two exponents");
  return {vec3_from_json(j.at("a")), e[0].get<double>(), e[1].get<double>()};
}

nlohmann::json posed_sq_to_json(const PosedSq& s) {
  auto j = sq_to_json(s.sq);
  j["pose"] = pose_to_json(s.pose);
  return j;
}

PosedSq posed_sq_from_json(const nlohmann::json& j) {
  return {sq_from_json(j), j.contains("pose") ? pose_from_json(j.at("pose")) : Pose::identity()};
}

nlohmann::json sq_set_to_json(std::span<const PosedSq> set) {
  auto arr = nlohmann::json::array();
  for (const auto& s : set) arr.push_back(posed_sq_to_json(s));
  return {{"sqs", arr}};
}

std::vector<PosedSq> sq_set_from_json(const nlohmann::json& j) {
  std::vector<PosedSq> out;
  for (const auto& s : j.at("sqs")) out.push_back(posed_sq_from_json(s));
  return out;
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

}  // namespace sqsafe
