#include "sqsafe/teleop.hpp"

#include <cmath>

#include "sqsafe/io.hpp"

namespace sqsafe {

bool CommandQueue::push(std::string frame) {
  std::lock_guard lock(mu_);
  bool kept = true;
  if (frames_.size() >= capacity_) {
    frames_.pop_front();
    ++dropped_;
    kept = false;
  }
  frames_.push_back(std::move(frame));
  return kept;
}

std::deque<std::string> CommandQueue::drain() {
  std::lock_guard lock(mu_);
  std::deque<std::string> out;
  out.swap(frames_);
  return out;
}

std::size_t CommandQueue::dropped() const {
  std::lock_guard lock(mu_);
  return dropped_;
}

void LatestFrame::publish(std::string frame) {
  std::lock_guard lock(mu_);
  frame_ = std::move(frame);
}

std::optional<std::string> LatestFrame::take() {
  std::lock_guard lock(mu_);
  std::optional<std::string> out;
  out.swap(frame_);
  return out;
}

namespace {
constexpr double kSessionLength = 1e7;  // seconds; sessions are open-ended
}  // namespace

nlohmann::json error_frame(const std::string& msg) { return {{"type", "error"}, {"msg", msg}}; }

TeleopSession::TeleopSession(Scenario scenario, Options options)
    : scenario_(std::move(scenario)), options_(options) {
  if (!(options_.broadcast_rate > 0.0)) throw std::invalid_argument("TeleopSession: broadcast rate must be positive");
  scenario_.controller.kind = NominalController::Kind::kExternal;
  scenario_.duration = kSessionLength;
  sim_ = std::make_unique<Simulator>(scenario_, options_.filter_on, false);
}

std::optional<nlohmann::json> TeleopSession::handle_message(const std::string& text, Clock::time_point now) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    return error_frame("malformed JSON");
  }
  if (!j.is_object() || !j.contains("type") || !j.at("type").is_string()) {
    return error_frame("message needs a string \"type\"");
  }
  const std::string type = j.at("type").get<std::string>();
  if (type == "jog") {
    const auto it = j.find("twist");
    if (it == j.end() || !it->is_array() || it->size() != 6) return error_frame("jog needs a 6-element \"twist\"");
    Vector6d v;
    for (int i = 0; i < 6; ++i) {
      if (!(*it)[static_cast<size_t>(i)].is_number()) return error_frame("jog twist must be numeric");
      v[i] = (*it)[static_cast<size_t>(i)].get<double>();
    }
    if (!v.allFinite()) return error_frame("jog twist must be finite");
    long seq = last_seq_ + 1;
    if (j.contains("seq")) {
      if (!j.at("seq").is_number_integer()) return error_frame("jog seq must be an integer");
      seq = j.at("seq").get<long>();
    }
    // Out-of-order jogs are ignored; the newest command wins.
    if (seq <= last_seq_) return std::nullopt;
    last_seq_ = seq;
    twist_ = v;
    received_ = now;
    return std::nullopt;
  }
  if (type == "reset") {
    sim_->reset();
    twist_.setZero();
    received_.reset();
    next_broadcast_ = 0.0;
    return std::nullopt;
  }
  if (type == "set_filter") {
    if (!j.contains("on") || !j.at("on").is_boolean()) return error_frame("set_filter needs a boolean \"on\"");
    sim_->set_filter(j.at("on").get<bool>());
    return std::nullopt;
  }
  return error_frame("unknown message type \"" + type + "\"");
}

void TeleopSession::disconnect() {
  twist_.setZero();
  received_.reset();
}

Vector6d TeleopSession::active_twist(Clock::time_point now) const {
  if (!received_ || now - *received_ > options_.stale_after) return Vector6d::Zero();
  return twist_;
}

std::optional<nlohmann::json> TeleopSession::tick(Clock::time_point now) {
  if (sim_->finished()) {
    // Sessions are open-ended; a halted or elapsed run holds still until reset.
    return std::nullopt;
  }
  const CycleRecord& r = sim_->tick(active_twist(now));
  if (r.t + 1e-12 < next_broadcast_) return std::nullopt;
  next_broadcast_ += 1.0 / options_.broadcast_rate;
  return state_frame(r);
}

nlohmann::json TeleopSession::state_frame(const CycleRecord& record) const {
  nlohmann::json j = record.to_json();
  j["type"] = "state";
  auto obstacles = nlohmann::json::array();
  for (const auto& o : scenario_.obstacles_at(record.t)) {
    nlohmann::json s = sq_to_json(o.sq);
    s["name"] = o.name;
    s["pose"] = pose_to_json(o.state.world_pose());
    obstacles.push_back(std::move(s));
  }
  j["obstacles"] = std::move(obstacles);
  auto robot = nlohmann::json::array();
  const RobotModel& m = *scenario_.robot;
  const Kinematics fk = forward_kinematics(m, record.q);
  for (size_t i = 0; i < m.attachments().size(); ++i) {
    nlohmann::json s = sq_to_json(m.attachments()[i].sq);
    s["name"] = m.attachments()[i].name;
    s["pose"] = pose_to_json(fk.attachments[i]);
    robot.push_back(std::move(s));
  }
  j["robot_sqs"] = std::move(robot);
  return j;
}

}  // namespace sqsafe
