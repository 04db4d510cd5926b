#include "shoal/bridge.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <ctime>
#include <deque>
#include <future>
#include <json.hpp>
#include <mutex>
#include <thread>

namespace shoal {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using Clock = std::chrono::steady_clock;
using ojson = nlohmann::ordered_json;

void validate(const BridgeConfig& b) {
  if (!(b.state_hz > 0.0)) fail(ErrorKind::Validation, "bridge state rate must be positive");
  if (!(b.control_period > 0.0)) fail(ErrorKind::Validation, "bridge control period must be positive");
  if (b.control_period < 1.0 / b.state_hz)
    fail(ErrorKind::Validation, "bridge control period is shorter than the state period");
  if (!(b.staleness_ms > 0.0)) fail(ErrorKind::Validation, "bridge staleness limit must be positive");
}

namespace {

ojson points(const std::vector<Vec2>& pts) {
  ojson a = ojson::array();
  for (const auto& p : pts) a.push_back(ojson::array({p.x, p.y}));
  return a;
}

ojson occupancy_json(const OccupancyResult& o) {
  return {{"target", o.target_pct}, {"intermediate", o.intermediate_pct}, {"opposite", o.opposite_pct}};
}

std::string error_frame(std::string_view code, std::string_view message) {
  return ojson{{"type", "error"}, {"protocol", kWireProtocol}, {"code", code}, {"message", message}}.dump();
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Snapshot {
  std::uint64_t seq = 0;
  std::vector<Vec2> fish;
  Clock::time_point at;
};

class Connection;

// State shared between the io thread and the control loop.
struct Shared {
  std::mutex m;
  std::condition_variable cv;
  bool hello = false;
  bool closed = false;  // client gone or session ended
  bool stopping = false;
  std::string close_reason;
  std::uint32_t n_fish = 0;
  std::uint32_t min_fish = 1;
  std::optional<Snapshot> latest;
  std::uint64_t last_seq = 0;
  std::shared_ptr<Connection> primary;
  std::string hello_reply;
};

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, Shared& shared, bool primary)
      : ws_(std::move(socket)), shared_(shared), primary_(primary) {}

  void start() {
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) { self->on_accept(ec); });
  }

  // Callable from any thread. Runs inline on the io thread, which keeps frames in call order.
  void send(std::string text, bool then_close = false) {
    asio::dispatch(ws_.get_executor(), [self = shared_from_this(), text = std::move(text), then_close]() mutable {
      if (self->closing_) return;
      self->outbox_.push_back(std::move(text));
      if (then_close) self->close_after_flush_ = true;
      if (!self->writing_) self->do_write();
    });
  }

  void close() {
    asio::dispatch(ws_.get_executor(), [self = shared_from_this()] {
      self->close_after_flush_ = true;
      if (!self->writing_) self->do_close();
    });
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    if (!primary_) {
      send(error_frame("busy", "a session is already connected; only one client is served"), true);
      return;
    }
    do_read();
  }

  void do_read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
  }

  void on_read(beast::error_code ec) {
    if (ec) {
      disconnect("client disconnected");
      return;
    }
    std::string text = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    if (handle(text)) do_read();
  }

  // Returns false when the connection should stop reading.
  bool handle(const std::string& text) {
    ojson j;
    try {
      j = ojson::parse(text);
      if (!j.is_object()) throw std::runtime_error("frame is not a JSON object");
    } catch (const std::exception& e) {
      return reject_and_close("malformed", std::string("unparseable frame: ") + e.what());
    }
    const std::string type = j.value("type", "");
    try {
      if (type == "hello") return on_hello(j);
      if (type == "state") return on_state(j);
    } catch (const nlohmann::json::exception& e) {
      return reject_and_close("malformed", std::string("bad ") + type + " frame: " + e.what());
    }
    return reject_and_close("malformed", "unknown frame type '" + type + "'");
  }

  bool on_hello(const ojson& j) {
    const int proto = j.at("protocol").get<int>();
    const auto n = j.at("n_fish").get<std::int64_t>();
    std::string reply;
    {
      std::lock_guard lk(shared_.m);
      if (shared_.hello) {
        send(error_frame("protocol", "duplicate hello"));
        return true;
      }
    }
    if (proto != kWireProtocol)
      return reject_and_close("protocol", "protocol version " + std::to_string(proto) + " not supported (server speaks " +
                                              std::to_string(kWireProtocol) + ")");
    std::uint32_t min_fish = 1;
    {
      std::lock_guard lk(shared_.m);
      min_fish = shared_.min_fish;
    }
    if (n < static_cast<std::int64_t>(min_fish))
      return reject_and_close("protocol", "n_fish must be at least " + std::to_string(min_fish));
    {
      std::lock_guard lk(shared_.m);
      reply = shared_.hello_reply;
    }
    send(std::move(reply));
    {
      std::lock_guard lk(shared_.m);
      shared_.hello = true;
      shared_.n_fish = static_cast<std::uint32_t>(n);
    }
    shared_.cv.notify_all();
    return true;
  }

  bool on_state(const ojson& j) {
    const auto seq = j.at("seq").get<std::uint64_t>();
    const auto& arr = j.at("fish");
    if (!arr.is_array()) throw nlohmann::json::type_error::create(302, "fish must be an array", nullptr);
    std::vector<Vec2> fish;
    for (const auto& p : arr) {
      if (!p.is_array() || p.size() != 2) throw nlohmann::json::type_error::create(302, "fish entries must be [x, y]", nullptr);
      fish.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    }
    std::unique_lock lk(shared_.m);
    if (!shared_.hello) {
      lk.unlock();
      return reject_and_close("protocol", "state frame before hello");
    }
    if (seq <= shared_.last_seq) {
      const std::string msg = "sequence " + std::to_string(seq) + " not after " + std::to_string(shared_.last_seq);
      lk.unlock();
      send(error_frame("sequence", msg));
      return true;
    }
    if (fish.size() != shared_.n_fish) {
      const std::string msg =
          "expected " + std::to_string(shared_.n_fish) + " fish, got " + std::to_string(fish.size());
      lk.unlock();
      send(error_frame("count", msg));
      return true;
    }
    for (const auto& f : fish) {
      if (!(in_unit_square(f) && std::isfinite(f.x) && std::isfinite(f.y))) {
        lk.unlock();
        send(error_frame("bounds", "fish position (" + format_double(f.x) + ", " + format_double(f.y) +
                                       ") outside [0,1]x[0,1]"));
        return true;
      }
    }
    shared_.last_seq = seq;
    shared_.latest = Snapshot{seq, std::move(fish), Clock::now()};
    lk.unlock();
    shared_.cv.notify_all();
    return true;
  }

  bool reject_and_close(std::string_view code, const std::string& msg) {
    send(error_frame(code, msg), true);
    disconnect(msg);
    return false;
  }

  void disconnect(const std::string& reason) {
    if (!primary_) return;
    {
      std::lock_guard lk(shared_.m);
      if (!shared_.closed) {
        shared_.closed = true;
        shared_.close_reason = reason;
      }
    }
    shared_.cv.notify_all();
  }

  void do_write() {
    if (outbox_.empty()) {
      writing_ = false;
      if (close_after_flush_) do_close();
      return;
    }
    writing_ = true;
    ws_.text(true);
    ws_.async_write(asio::buffer(outbox_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->outbox_.pop_front();
      if (ec) {
        self->writing_ = false;
        self->outbox_.clear();
        self->disconnect("write failed: " + ec.message());
        return;
      }
      self->do_write();
    });
  }

  void do_close() {
    if (closing_) return;
    closing_ = true;
    ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) {});
  }

  websocket::stream<tcp::socket> ws_;
  beast::flat_buffer buffer_;
  Shared& shared_;
  bool primary_;
  std::deque<std::string> outbox_;
  bool writing_ = false;
  bool close_after_flush_ = false;
  bool closing_ = false;
};

}  // namespace

std::string agents_frame(std::uint32_t steps_done, TargetEnd target, bool stale, const std::vector<Vec2>& agents,
                         const std::vector<Vec2>& images, const std::vector<std::vector<Vec2>>& image_track,
                         const std::vector<int>& actions, const std::optional<RewardBreakdown>& reward,
                         const OccupancyResult& occupancy) {
  ojson j;
  j["type"] = "agents";
  j["protocol"] = kWireProtocol;
  j["step"] = steps_done;
  j["target"] = to_string(target);
  j["stale"] = stale;
  j["agents"] = points(agents);
  j["images"] = points(images);
  ojson track = ojson::array();
  for (const auto& t : image_track) track.push_back(points(t));
  j["image_track"] = std::move(track);
  j["actions"] = actions;
  if (reward)
    j["reward"] = {{"base", reward->base}, {"school", reward->school}, {"direction", reward->direction}, {"beta", reward->beta}};
  else
    j["reward"] = nullptr;
  j["occupancy"] = occupancy_json(occupancy);
  return j.dump();
}

struct BridgeServer::Impl {
  PolicyPair policies;
  RunConfig cfg;
  BridgeConfig bridge;
  std::optional<std::filesystem::path> log_path;
  asio::io_context ioc{1};
  tcp::acceptor acceptor{ioc};
  Shared shared;
  std::thread io_thread;

  void do_accept() {
    acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      std::shared_ptr<Connection> conn;
      {
        std::lock_guard lk(shared.m);
        const bool primary = !shared.primary && !shared.stopping;
        conn = std::make_shared<Connection>(std::move(socket), shared, primary);
        if (primary) shared.primary = conn;
      }
      conn->start();
      do_accept();
    });
  }

  std::promise<void> io_done;

  // Closes the listener and the client, letting queued frames drain for a bounded time.
  void shutdown_io() {
    if (!io_thread.joinable()) return;
    asio::post(ioc, [this] {
      beast::error_code ec;
      acceptor.close(ec);
    });
    std::shared_ptr<Connection> conn;
    {
      std::lock_guard lk(shared.m);
      conn = shared.primary;
    }
    if (conn) conn->close();
    if (io_done.get_future().wait_for(std::chrono::seconds(2)) != std::future_status::ready) ioc.stop();
    io_thread.join();
  }
};

BridgeServer::BridgeServer(const PolicyPair& policies, const RunConfig& cfg, const BridgeConfig& bridge,
                           std::optional<std::filesystem::path> log_path)
    : impl_(std::make_unique<Impl>()) {
  validate(cfg);
  validate(bridge);
  impl_->policies = policies;
  impl_->cfg = cfg;
  impl_->bridge = bridge;
  impl_->log_path = std::move(log_path);
  try {
    const tcp::endpoint ep(asio::ip::make_address(bridge.address), bridge.port);
    impl_->acceptor.open(ep.protocol());
    impl_->acceptor.set_option(asio::socket_base::reuse_address(true));
    impl_->acceptor.bind(ep);
    impl_->acceptor.listen();
  } catch (const boost::system::system_error& e) {
    fail(ErrorKind::Network, "cannot listen on " + bridge.address + ":" + std::to_string(bridge.port) + ": " + e.what());
  }
}

BridgeServer::~BridgeServer() {
  stop();
  if (impl_->io_thread.joinable()) {
    impl_->ioc.stop();
    impl_->io_thread.join();
  }
}

std::uint16_t BridgeServer::port() const { return impl_->acceptor.local_endpoint().port(); }

void BridgeServer::stop() {
  {
    std::lock_guard lk(impl_->shared.m);
    impl_->shared.stopping = true;
  }
  impl_->shared.cv.notify_all();
}

ServeResult BridgeServer::run() {
  Impl& im = *impl_;
  Shared& sh = im.shared;
  SessionRunner runner(im.policies, im.cfg);
  {
    ojson hello{{"type", "hello"},
                {"protocol", kWireProtocol},
                {"server", "shoal"},
                {"total_steps", im.cfg.protocol.total_steps},
                {"switch_every", im.cfg.protocol.switch_every},
                {"control_period", im.bridge.control_period},
                {"state_hz", im.bridge.state_hz},
                {"staleness_ms", im.bridge.staleness_ms},
                {"agents", runner.agent_count()},
                {"images", runner.images().size()}};
    sh.hello_reply = hello.dump();
    sh.min_fish = static_cast<std::uint32_t>(runner.agent_count());
  }
  im.do_accept();
  im.io_thread = std::thread([&im] {
    im.ioc.run();
    im.io_done.set_value();
  });

  ServeResult res;
  res.log.header = runner.header(SourceKind::Live);

  std::unique_lock lk(sh.m);
  sh.cv.wait(lk, [&] { return sh.hello || sh.closed || sh.stopping; });
  if (!sh.hello) {
    res.reason = sh.stopping ? "stopped before a client connected" : sh.close_reason;
    lk.unlock();
    im.shutdown_io();
    return res;
  }
  auto conn = sh.primary;
  lk.unlock();

  const auto start = Clock::now();
  res.log.header.start_timestamp = utc_now();
  std::size_t zone_counts[3] = {0, 0, 0};
  auto occupancy = [&] {
    OccupancyResult o;
    const double n = static_cast<double>(zone_counts[0] + zone_counts[1] + zone_counts[2]);
    if (n > 0) {
      o.target_pct = 100.0 * zone_counts[0] / n;
      o.intermediate_pct = 100.0 * zone_counts[1] / n;
      o.opposite_pct = 100.0 * zone_counts[2] / n;
    }
    return o;
  };
  conn->send(agents_frame(0, target_for_step(im.cfg.protocol, 0), false, runner.agent_positions(), runner.images(), {},
                          {}, std::nullopt, occupancy()));

  const auto period = std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(im.bridge.control_period));
  const auto staleness =
      std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double, std::milli>(im.bridge.staleness_ms));
  std::uint64_t consumed = 0;
  auto tick = start + period;
  while (!runner.done()) {
    lk.lock();
    const bool interrupted = sh.cv.wait_until(lk, tick, [&] { return sh.closed || sh.stopping; });
    if (interrupted) break;
    auto fresh = [&] { return sh.latest && sh.latest->seq > consumed && Clock::now() - sh.latest->at <= staleness; };
    const bool got = sh.cv.wait_for(lk, staleness, [&] { return sh.closed || sh.stopping || fresh(); });
    if (sh.closed || sh.stopping) break;
    std::optional<std::vector<Vec2>> fish;
    if (got) {
      fish = sh.latest->fish;
      consumed = sh.latest->seq;
    }
    lk.unlock();

    const double elapsed = std::chrono::duration<double>(Clock::now() - start).count();
    if (fish) {
      auto out = runner.step(*fish, elapsed);
      ++zone_counts[static_cast<int>(classify_zone(centroid(*fish).x, out.record.target_end))];
      conn->send(agents_frame(runner.next_step(), out.record.target_end, false, runner.agent_positions(),
                              runner.images(), out.image_track, out.record.actions, out.record.rewards, occupancy()));
      res.log.records.push_back(std::move(out.record));
    } else {
      const std::uint32_t s = runner.next_step();
      conn->send(agents_frame(s, target_for_step(im.cfg.protocol, std::min(s, im.cfg.protocol.total_steps - 1)), true,
                              runner.agent_positions(), runner.images(), {}, {}, std::nullopt, occupancy()));
    }
    tick += period;
    if (tick < Clock::now()) tick = Clock::now();
  }
  if (lk.owns_lock()) lk.unlock();

  res.completed = runner.done();
  {
    std::lock_guard g(sh.m);
    res.reason = res.completed ? "completed" : (sh.stopping ? "stopped" : sh.close_reason);
    sh.closed = true;
  }
  if (im.log_path) write_log(res.log, *im.log_path);

  ojson end{{"type", "end"},
            {"protocol", kWireProtocol},
            {"completed", res.completed},
            {"reason", res.reason},
            {"steps", res.log.records.size()},
            {"occupancy", occupancy_json(occupancy())},
            {"log", im.log_path ? ojson(im.log_path->string()) : ojson(nullptr)}};
  conn->send(end.dump(), true);
  im.shutdown_io();
  return res;
}

}  // namespace shoal
