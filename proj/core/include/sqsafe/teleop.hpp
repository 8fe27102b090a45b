#pragma once

#include <chrono>
#include <cstddef>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "sqsafe/sim.hpp"

namespace sqsafe {

/// Bounded multi-producer queue of raw client frames. When full the oldest
/// frame is dropped, so a flooding client cannot grow memory or delay the
/// control loop.
class CommandQueue {
 public:
  explicit CommandQueue(std::size_t capacity = 64) : capacity_(capacity) {}
  /// Returns false when an old frame had to be dropped.
  bool push(std::string frame);
  std::deque<std::string> drain();
  std::size_t dropped() const;

 private:
  mutable std::mutex mu_;
  std::deque<std::string> frames_;
  std::size_t capacity_;
  std::size_t dropped_ = 0;
};

/// Holds the newest outgoing frame; older unsent frames are overwritten.
class LatestFrame {
 public:
  void publish(std::string frame);
  std::optional<std::string> take();

 private:
  std::mutex mu_;
  std::optional<std::string> frame_;
};

/// Control-side state of one operator session. Not thread-safe: owned by
/// the control loop, fed through CommandQueue.
///
/// Client frames:
///   {"type":"jog","twist":[vx,vy,vz,wx,wy,wz],"seq":int}   (EE frame)
///   {"type":"reset"}
///   {"type":"set_filter","on":bool}
/// Server frames: "state" (see state_frame) and {"type":"error","msg":...}.
class TeleopSession {
 public:
  using Clock = std::chrono::steady_clock;

  struct Options {
    bool filter_on = true;
    double broadcast_rate = 30.0;                        ///< Hz
    Clock::duration stale_after = std::chrono::milliseconds(200);
  };

  TeleopSession(Scenario scenario, Options options);

  /// Applies one client frame. Returns an error frame when it is rejected.
  std::optional<nlohmann::json> handle_message(const std::string& text, Clock::time_point now);
  /// Drops the operator: the command decays to zero immediately.
  void disconnect();

  /// Advances the simulation by one control period. Returns the state
  /// frame when a broadcast is due at this tick.
  std::optional<nlohmann::json> tick(Clock::time_point now);

  /// EE-frame twist in force at `now`: the latest jog, or zero once it is
  /// older than the stale limit.
  Vector6d active_twist(Clock::time_point now) const;

  nlohmann::json state_frame(const CycleRecord& record) const;
  const Simulator& simulator() const { return *sim_; }
  long last_seq() const { return last_seq_; }

 private:
  Scenario scenario_;
  Options options_;
  std::unique_ptr<Simulator> sim_;
  Vector6d twist_ = Vector6d::Zero();
  std::optional<Clock::time_point> received_;
  long last_seq_ = -1;
  double next_broadcast_ = 0.0;
};

nlohmann::json error_frame(const std::string& msg);

}  // namespace sqsafe
