#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include <boost/asio/io_context.hpp>
#include <boost/asio/ip/tcp.hpp>

#include "sqsafe/teleop.hpp"

namespace sqsafe {

/// WebSocket front end of a TeleopSession. Two threads: the control loop
/// owns the session and ticks it at the filter period; the network thread
/// runs Asio and only touches the bounded queues between them. One operator
/// at a time; further clients get an error frame and are closed.
class TeleopServer {
 public:
  struct Options {
    std::string address = "127.0.0.1";
    std::uint16_t port = 8765;  ///< 0 picks a free port
    TeleopSession::Options session;
  };

  struct Stats {
    std::uint64_t ticks = 0;
    std::uint64_t overruns = 0;   ///< cycles that finished after their deadline
    std::uint64_t broadcasts = 0;
    std::uint64_t rejected = 0;   ///< connections turned away
    double max_cycle = 0.0;       ///< seconds
  };

  TeleopServer(Scenario scenario, Options options);
  ~TeleopServer();
  TeleopServer(const TeleopServer&) = delete;
  TeleopServer& operator=(const TeleopServer&) = delete;

  /// Binds and starts both threads. Throws on a busy port.
  void start();
  void stop();

  std::uint16_t port() const { return bound_port_; }
  Stats stats() const;

 private:
  class Connection;
  friend class Connection;

  void accept();
  void control_loop();
  void kick();
  void on_disconnect(const Connection* c);
  std::deque<std::string> take_errors();

  Scenario scenario_;
  Options options_;
  double period_ = 0.01;

  boost::asio::io_context ioc_;
  boost::asio::ip::tcp::acceptor acceptor_;
  std::shared_ptr<Connection> active_;  // network thread only
  std::uint16_t bound_port_ = 0;

  CommandQueue commands_;
  LatestFrame latest_;
  std::mutex errors_mu_;
  std::deque<std::string> errors_;
  std::atomic<bool> disconnected_{false};
  std::atomic<bool> running_{false};

  std::thread io_thread_;
  std::thread control_thread_;

  mutable std::mutex stats_mu_;
  Stats stats_;
};

}  // namespace sqsafe
