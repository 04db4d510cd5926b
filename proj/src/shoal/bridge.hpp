#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "shoal/analytics.hpp"
#include "shoal/session.hpp"

namespace shoal {

inline constexpr int kWireProtocol = 1;

struct BridgeConfig {
  std::string address = "127.0.0.1";
  std::uint16_t port = 8765;  // 0 picks a free port
  double state_hz = 10.0;
  double control_period = 1.2;  // seconds of wall time per protocol step
  double staleness_ms = 1000.0;
};

void validate(const BridgeConfig& b);

struct ServeResult {
  SessionLog log;
  bool completed = false;  // false when the client left or the server was stopped early
  std::string reason;
};

/// Single-client WebSocket policy server. The socket runs on its own io
/// thread; run() is the control loop and the only writer of session state.
class BridgeServer {
 public:
  BridgeServer(const PolicyPair& policies, const RunConfig& cfg, const BridgeConfig& bridge,
               std::optional<std::filesystem::path> log_path = std::nullopt);
  ~BridgeServer();
  BridgeServer(const BridgeServer&) = delete;
  BridgeServer& operator=(const BridgeServer&) = delete;

  /// Port actually bound; useful with port 0.
  std::uint16_t port() const;

  /// Blocks until the session completes, the client disconnects or stop() is called.
  /// The log (partial or complete) is written to log_path if one was given.
  ServeResult run();

  /// Safe from any thread or a signal-watching thread.
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// JSON text of an agents frame; exposed for tests and clients.
std::string agents_frame(std::uint32_t steps_done, TargetEnd target, bool stale, const std::vector<Vec2>& agents,
                         const std::vector<Vec2>& images, const std::vector<std::vector<Vec2>>& image_track,
                         const std::vector<int>& actions, const std::optional<RewardBreakdown>& reward,
                         const OccupancyResult& occupancy);

}  // namespace shoal
