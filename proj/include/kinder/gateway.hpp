#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kinder/curriculum.hpp"
#include "kinder/learner.hpp"
#include "kinder/session.hpp"

namespace kinder {

inline constexpr std::string_view kProtocol = "kinder/1";

struct GatewayConfig {
  std::string bind = "127.0.0.1";
  std::uint16_t port = 0;  // 0 picks a free port
  /// WebSocket listener carrying the same records, one per text frame.
  std::optional<std::uint16_t> ws_port;
  /// Ticks per second; empty runs as fast as the learner answers.
  std::optional<double> speed;
  bool start_paused = false;
  std::chrono::milliseconds heartbeat{5000};
  /// Lift the per-call wall-clock budget for machine learners too (humans
  /// never have one).
  bool suspend_machine_budget = false;
};

/// Runs one session and exposes it over newline-delimited JSON records.
/// The tick loop lives on its own thread and is the only code that touches
/// simulation state; client commands are queued and applied between ticks.
class Gateway {
public:
  /// With a null `learner` the learner seat is open to one remote client
  /// and the session waits for it.
  Gateway(SessionConfig session, std::unique_ptr<EpisodeSource> source, std::unique_ptr<Learner> learner,
          GatewayConfig config = {});
  ~Gateway();
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  /// Binds the listeners and starts the network and loop threads.
  void start();
  std::uint16_t port() const;
  std::optional<std::uint16_t> ws_port() const;

  /// Blocks until the session ends and pending records are flushed.
  SessionReport wait();
  /// Ends the session early and closes every connection.
  void stop();

  std::vector<TickFrame> frames() const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Blocking line-oriented client, enough for tools and tests.
class GatewayClient {
public:
  GatewayClient(const std::string& host, std::uint16_t port);
  ~GatewayClient();
  GatewayClient(const GatewayClient&) = delete;
  GatewayClient& operator=(const GatewayClient&) = delete;

  void send(const nlohmann::json& record);
  /// Next record, or nullopt once the server closed the connection.
  std::optional<nlohmann::json> receive();
  /// Sends the attach handshake and returns the server's answer.
  nlohmann::json attach(std::string_view role, std::string_view mode = "machine",
                        std::string_view protocol = kProtocol);
  void close();

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct RemoteRun {
  std::vector<TickFrame> frames;  // rebuilt from tick and learner_output events
  std::vector<nlohmann::json> events;
  std::optional<nlohmann::json> report;
};

/// Attaches `learner` to the seat and answers every tick until the session
/// ends. Throws std::runtime_error when the server refuses the seat.
RemoteRun drive_remote_learner(const std::string& host, std::uint16_t port, Learner& learner);

}  // namespace kinder
