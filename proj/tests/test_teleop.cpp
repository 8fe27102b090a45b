#include <gtest/gtest.h>

#include <thread>

#include <boost/asio/connect.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "server.hpp"
#include "sqsafe/teleop.hpp"
#include "support.hpp"

using namespace sqsafe;
using namespace std::chrono_literals;
using Clock = TeleopSession::Clock;

namespace {

Scenario basket() { return Scenario::load(test::scenario_path("basket_l040.json"), 1); }

std::string jog(const Vector6d& v, long seq) {
  return nlohmann::json{{"type", "jog"}, {"twist", {v[0], v[1], v[2], v[3], v[4], v[5]}}, {"seq", seq}}.dump();
}

// EE-frame jog direction that drives the arm hardest into the basket,
// found offline on the same deterministic session.
Vector6d wall_jog() {
  Vector6d best = Vector6d::Zero();
  double worst_d = 1e300;
  for (int axis = 0; axis < 3; ++axis) {
    for (double sign : {-1.0, 1.0}) {
      Vector6d v = Vector6d::Zero();
      v[axis] = 0.2 * sign;
      TeleopSession s(basket(), {});
      const auto t0 = Clock::time_point{};
      double d = 1e300;
      for (int k = 0; k < 300; ++k) {
        const auto now = t0 + k * 10ms;
        s.handle_message(jog(v, k), now);
        s.tick(now);
        d = std::min(d, s.simulator().log().back().d_min);
      }
      if (d < worst_d) {
        worst_d = d;
        best = v;
      }
    }
  }
  return best;
}

namespace beast = boost::beast;
namespace websocket = beast::websocket;
namespace net = boost::asio;

class Client {
 public:
  explicit Client(std::uint16_t port) : ws_(ioc_) {
    net::ip::tcp::resolver resolver(ioc_);
    beast::get_lowest_layer(ws_).connect(*resolver.resolve("127.0.0.1", std::to_string(port)).begin());
    ws_.handshake("127.0.0.1:" + std::to_string(port), "/");
    ws_.text(true);
  }

  void send(const std::string& text) { ws_.write(net::buffer(text)); }

  /// Next frame, or nothing on close, error or timeout. A timeout leaves the
  /// stream unusable, so it is only expected at the end of a conversation.
  std::optional<nlohmann::json> read(Clock::duration timeout = 2s) {
    beast::flat_buffer buf;
    std::optional<nlohmann::json> out;
    bool done = false;
    ws_.async_read(buf, [&](beast::error_code ec, std::size_t) {
      done = true;
      if (!ec) out = nlohmann::json::parse(beast::buffers_to_string(buf.data()));
    });
    ioc_.restart();
    ioc_.run_for(timeout);
    if (!done) {
      beast::get_lowest_layer(ws_).cancel();
      ioc_.restart();
      ioc_.run();
    }
    return out;
  }

  /// Reads until a frame of `type` arrives.
  std::optional<nlohmann::json> read_type(const std::string& type, int max_frames = 200) {
    for (int i = 0; i < max_frames; ++i) {
      auto f = read();
      if (!f) return std::nullopt;
      if (f->at("type") == type) return f;
    }
    return std::nullopt;
  }

  void drop() {
    beast::error_code ec;
    beast::get_lowest_layer(ws_).socket().close(ec);
  }

 private:
  net::io_context ioc_;
  websocket::stream<beast::tcp_stream> ws_;
};

TeleopServer::Options ephemeral() {
  TeleopServer::Options o;
  o.port = 0;
  return o;
}

}  // namespace

TEST(CommandQueue, DropsOldestWhenFull) {
  CommandQueue q(2);
  EXPECT_TRUE(q.push("a"));
  EXPECT_TRUE(q.push("b"));
  EXPECT_FALSE(q.push("c"));
  EXPECT_EQ(q.dropped(), 1u);
  const auto frames = q.drain();
  ASSERT_EQ(frames.size(), 2u);
  EXPECT_EQ(frames[0], "b");
  EXPECT_EQ(frames[1], "c");
  EXPECT_TRUE(q.drain().empty());
}

TEST(LatestFrame, KeepsNewestOnly) {
  LatestFrame f;
  EXPECT_FALSE(f.take());
  f.publish("1");
  f.publish("2");
  EXPECT_EQ(f.take(), "2");
  EXPECT_FALSE(f.take());
}

TEST(TeleopSession, RejectsMalformedMessages) {
  TeleopSession s(basket(), {});
  const auto now = Clock::now();
  for (const char* bad : {"not json", "[1,2]", R"({"kind":"jog"})", R"({"type":"fly"})",
                          R"({"type":"jog","twist":[1,2,3]})", R"({"type":"jog","twist":[0,0,0,0,0,"x"]})",
                          R"({"type":"jog","twist":[0,0,0,0,0,0],"seq":1.5})", R"({"type":"set_filter"})"}) {
    const auto err = s.handle_message(bad, now);
    ASSERT_TRUE(err) << bad;
    EXPECT_EQ(err->at("type"), "error");
    EXPECT_TRUE(err->at("msg").is_string());
  }
  EXPECT_EQ(s.active_twist(now), Vector6d::Zero());
  EXPECT_FALSE(s.handle_message(R"({"type":"set_filter","on":false})", now));
  EXPECT_FALSE(s.simulator().filter_on());
}

TEST(TeleopSession, OutOfOrderJogsAreIgnored) {
  TeleopSession s(basket(), {});
  const auto now = Clock::now();
  Vector6d a = Vector6d::Zero(), b = Vector6d::Zero();
  a[0] = 0.1;
  b[1] = 0.1;
  EXPECT_FALSE(s.handle_message(jog(a, 5), now));
  EXPECT_FALSE(s.handle_message(jog(b, 3), now));
  EXPECT_EQ(s.active_twist(now), a);
  EXPECT_EQ(s.last_seq(), 5);
  EXPECT_FALSE(s.handle_message(jog(b, 6), now));
  EXPECT_EQ(s.active_twist(now), b);
}

TEST(TeleopSession, StaleCommandsDecayToZero) {
  TeleopSession s(basket(), {});
  const auto t0 = Clock::now();
  Vector6d v = Vector6d::Zero();
  v[2] = -0.1;
  s.handle_message(jog(v, 0), t0);
  EXPECT_EQ(s.active_twist(t0 + 150ms), v);
  EXPECT_EQ(s.active_twist(t0 + 200ms), v);
  EXPECT_EQ(s.active_twist(t0 + 201ms), Vector6d::Zero());
  s.handle_message(jog(v, 1), t0);
  s.disconnect();
  EXPECT_EQ(s.active_twist(t0), Vector6d::Zero());
}

TEST(TeleopSession, BroadcastsAtThirtyHertz) {
  TeleopSession s(basket(), {});
  const auto t0 = Clock::now();
  int frames = 0;
  for (int k = 0; k < 100; ++k) frames += s.tick(t0 + k * 10ms).has_value();
  EXPECT_EQ(frames, 30);
}

TEST(TeleopSession, StateFrameIsTheCycleRecord) {
  TeleopSession s(basket(), {});
  const auto t0 = Clock::now();
  Vector6d v = Vector6d::Zero();
  v[0] = 0.05;
  for (int k = 0; k < 40; ++k) {
    s.handle_message(jog(v, k), t0 + k * 10ms);
    const auto frame = s.tick(t0 + k * 10ms);
    if (!frame) continue;
    const nlohmann::json wire = nlohmann::json::parse(frame->dump());
    EXPECT_EQ(wire.at("type"), "state");
    EXPECT_EQ(CycleRecord::from_json(wire), s.simulator().log().back());
    EXPECT_EQ(wire.at("obstacles").size(), 5u);
    EXPECT_EQ(wire.at("robot_sqs").size(), s.simulator().scenario().robot->attachments().size());
    for (const char* key : {"q", "ee_pose", "u_nominal", "u_filtered", "h_min", "d_min", "mu", "status"}) {
      EXPECT_TRUE(wire.contains(key)) << key;
    }
  }
}

TEST(TeleopSession, ZeroJogHoldsStill) {
  TeleopSession s(basket(), {});
  const auto t0 = Clock::now();
  const Eigen::VectorXd q0 = s.simulator().q();
  for (int k = 0; k < 50; ++k) {
    s.handle_message(jog(Vector6d::Zero(), k), t0 + k * 10ms);
    s.tick(t0 + k * 10ms);
    EXPECT_FALSE(s.simulator().log().back().intervened);
  }
  EXPECT_EQ(s.simulator().q(), q0);
}

TEST(TeleopServer, StreamsStationaryStateForZeroJogs) {
  TeleopServer server(basket(), ephemeral());
  server.start();
  Client c(server.port());
  for (int i = 0; i < 20; ++i) {
    c.send(jog(Vector6d::Zero(), i));
    auto f = c.read_type("state");
    ASSERT_TRUE(f);
    EXPECT_FALSE(f->at("intervention").get<bool>());
    for (const auto& u : f->at("u_filtered")) EXPECT_EQ(u.get<double>(), 0.0);
  }
  server.stop();
}

TEST(TeleopServer, JogIntoWallIsFilteredAndStaysSafe) {
  const Vector6d v = wall_jog();
  TeleopServer server(basket(), ephemeral());
  server.start();
  Client c(server.port());
  bool intervened = false;
  double h_min = 1e300;
  int frames = 0;
  // Jog at about the broadcast rate for three seconds.
  for (long seq = 0; frames < 90; ++seq) {
    c.send(jog(v, seq));
    auto f = c.read_type("state");
    ASSERT_TRUE(f);
    ++frames;
    Eigen::VectorXd un(f->at("u_nominal").size()), uf(f->at("u_filtered").size());
    for (Eigen::Index i = 0; i < un.size(); ++i) {
      un[i] = f->at("u_nominal")[static_cast<size_t>(i)].get<double>();
      uf[i] = f->at("u_filtered")[static_cast<size_t>(i)].get<double>();
    }
    intervened = intervened || (uf - un).norm() > 1e-6;
    h_min = std::min(h_min, f->at("h_min").get<double>());
  }
  server.stop();
  EXPECT_TRUE(intervened);
  EXPECT_GE(h_min, 0.0);
}

TEST(TeleopServer, SecondClientIsRejected) {
  TeleopServer server(basket(), ephemeral());
  server.start();
  Client first(server.port());
  ASSERT_TRUE(first.read_type("state"));
  Client second(server.port());
  const auto f = second.read();
  ASSERT_TRUE(f);
  EXPECT_EQ(f->at("type"), "error");
  EXPECT_FALSE(second.read());  // closed by the server
  EXPECT_EQ(server.stats().rejected, 1u);
  // The operator is unaffected.
  EXPECT_TRUE(first.read_type("state"));
  server.stop();
}

TEST(TeleopServer, MalformedMessageGetsErrorFrame) {
  TeleopServer server(basket(), ephemeral());
  server.start();
  Client c(server.port());
  c.send("{not json");
  const auto f = c.read_type("error");
  ASSERT_TRUE(f);
  EXPECT_EQ(f->at("msg"), "malformed JSON");
  EXPECT_TRUE(c.read_type("state"));
  server.stop();
}

TEST(TeleopServer, DisconnectDoesNotStallTheControlLoop) {
  TeleopServer server(basket(), ephemeral());
  server.start();
  auto ticks_over = [&](Clock::duration window) {
    const auto before = server.stats().ticks;
    std::this_thread::sleep_for(window);
    return static_cast<double>(server.stats().ticks - before);
  };
  std::optional<Client> c(std::in_place, server.port());
  for (int i = 0; i < 10; ++i) {
    c->send(jog(Vector6d::Zero(), i));
    ASSERT_TRUE(c->read_type("state"));
  }
  const double connected = ticks_over(1s);
  c->drop();
  c.reset();
  const double dropped = ticks_over(1s);
  server.stop();
  EXPECT_GT(connected, 50.0);
  EXPECT_NEAR(dropped, connected, 0.1 * connected);
}

TEST(TeleopServer, ReconnectAfterDrop) {
  TeleopServer server(basket(), ephemeral());
  server.start();
  {
    Client c(server.port());
    ASSERT_TRUE(c.read_type("state"));
    c.drop();
  }
  std::this_thread::sleep_for(100ms);
  Client again(server.port());
  EXPECT_TRUE(again.read_type("state"));
  EXPECT_EQ(server.stats().rejected, 0u);
  server.stop();
}
