#include "server.hpp"

#include <chrono>
#include <future>
#include <utility>

#include <boost/asio/post.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

namespace sqsafe {

namespace beast = boost::beast;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

namespace {
constexpr std::size_t kMaxPendingErrors = 16;
}  // namespace

class TeleopServer::Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, TeleopServer& server, bool primary)
      : ws_(std::move(socket)), server_(server), primary_(primary) {}

  void start() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.read_message_max(64 * 1024);
    ws_.async_accept(beast::bind_front_handler(&Connection::on_accept, shared_from_this()));
  }

  /// Sends whatever is pending: error frames first, then the latest state.
  void kick() {
    if (busy_ || closed_ || !open_) return;
    if (!primary_) return;
    std::deque<std::string> errors = server_.take_errors();
    for (auto& e : errors) pending_.push_back(std::move(e));
    if (pending_.empty()) {
      std::optional<std::string> state = server_.latest_.take();
      if (!state) return;
      pending_.push_back(std::move(*state));
    }
    write_front();
  }

  void close() {
    if (closed_) return;
    closed_ = true;
    beast::error_code ec;
    beast::get_lowest_layer(ws_).socket().close(ec);
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return fail();
    open_ = true;
    if (!primary_) {
      pending_.push_back(error_frame("session already has an operator").dump());
      close_after_write_ = true;
      write_front();
      return;
    }
    read();
    kick();
  }

  void read() { ws_.async_read(buffer_, beast::bind_front_handler(&Connection::on_read, shared_from_this())); }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) return fail();
    server_.commands_.push(beast::buffers_to_string(buffer_.data()));
    buffer_.consume(buffer_.size());
    read();
  }

  void write_front() {
    busy_ = true;
    writing_ = std::move(pending_.front());
    pending_.pop_front();
    ws_.text(true);
    ws_.async_write(net::buffer(writing_), beast::bind_front_handler(&Connection::on_write, shared_from_this()));
  }

  void on_write(beast::error_code ec, std::size_t) {
    busy_ = false;
    if (ec) return fail();
    if (!pending_.empty()) return write_front();
    if (close_after_write_) {
      ws_.async_close(websocket::close_code::try_again_later,
                      [self = shared_from_this()](beast::error_code) { self->closed_ = true; });
      return;
    }
    kick();
  }

  void fail() {
    const bool was_closed = closed_;
    close();
    if (!was_closed && primary_) server_.on_disconnect(this);
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  TeleopServer& server_;
  bool primary_;
  bool open_ = false;
  bool busy_ = false;
  bool closed_ = false;
  bool close_after_write_ = false;
  std::deque<std::string> pending_;
  std::string writing_;
};

TeleopServer::TeleopServer(Scenario scenario, Options options)
    : scenario_(std::move(scenario)), options_(std::move(options)), acceptor_(ioc_) {
  period_ = scenario_.filter.period;
}

TeleopServer::~TeleopServer() { stop(); }

void TeleopServer::start() {
  if (running_) return;
  const tcp::endpoint ep(net::ip::make_address(options_.address), options_.port);
  acceptor_.open(ep.protocol());
  acceptor_.set_option(net::socket_base::reuse_address(true));
  acceptor_.bind(ep);
  acceptor_.listen();
  bound_port_ = acceptor_.local_endpoint().port();
  running_ = true;
  accept();
  io_thread_ = std::thread([this] { ioc_.run(); });
  control_thread_ = std::thread([this] { control_loop(); });
}

void TeleopServer::stop() {
  if (!running_.exchange(false)) return;
  if (control_thread_.joinable()) control_thread_.join();
  std::promise<void> closed;
  net::post(ioc_, [this, &closed] {
    beast::error_code ec;
    acceptor_.close(ec);
    if (active_) active_->close();
    active_.reset();
    closed.set_value();
  });
  closed.get_future().wait();
  ioc_.stop();
  if (io_thread_.joinable()) io_thread_.join();
}

TeleopServer::Stats TeleopServer::stats() const {
  std::lock_guard lock(stats_mu_);
  return stats_;
}

void TeleopServer::accept() {
  acceptor_.async_accept([this](beast::error_code ec, tcp::socket socket) {
    if (ec) {
      if (acceptor_.is_open()) accept();
      return;
    }
    const bool primary = !active_;
    auto c = std::make_shared<Connection>(std::move(socket), *this, primary);
    if (primary) {
      active_ = c;
    } else {
      std::lock_guard lock(stats_mu_);
      ++stats_.rejected;
    }
    c->start();
    accept();
  });
}

void TeleopServer::kick() {
  net::post(ioc_, [this] {
    if (active_) active_->kick();
  });
}

void TeleopServer::on_disconnect(const Connection* c) {
  if (active_.get() != c) return;
  active_.reset();
  disconnected_ = true;
}

std::deque<std::string> TeleopServer::take_errors() {
  std::lock_guard lock(errors_mu_);
  std::deque<std::string> out;
  out.swap(errors_);
  return out;
}

void TeleopServer::control_loop() {
  using Clock = TeleopSession::Clock;
  TeleopSession session(scenario_, options_.session);
  const auto period = std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(period_));
  auto deadline = Clock::now();
  while (running_) {
    const auto start = Clock::now();
    if (disconnected_.exchange(false)) {
      commands_.drain();
      session.disconnect();
    }
    bool errors = false;
    for (const std::string& text : commands_.drain()) {
      if (auto err = session.handle_message(text, start)) {
        std::lock_guard lock(errors_mu_);
        if (errors_.size() >= kMaxPendingErrors) errors_.pop_front();
        errors_.push_back(err->dump());
        errors = true;
      }
    }
    const std::optional<nlohmann::json> frame = session.tick(start);
    if (frame) latest_.publish(frame->dump());
    if (frame || errors) kick();

    const auto end = Clock::now();
    deadline += period;
    {
      std::lock_guard lock(stats_mu_);
      ++stats_.ticks;
      if (frame) ++stats_.broadcasts;
      stats_.max_cycle = std::max(stats_.max_cycle, std::chrono::duration<double>(end - start).count());
      if (end > deadline) ++stats_.overruns;
    }
    // After an overrun the schedule restarts from now instead of bursting to
    // catch up.
    if (end > deadline) deadline = end;
    std::this_thread::sleep_until(deadline);
  }
}

}  // namespace sqsafe
