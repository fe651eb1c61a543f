#include "kinder/gateway.hpp"

#include <atomic>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <set>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "kinder/channel.hpp"

namespace kinder {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using nlohmann::json;

namespace {

constexpr std::size_t kMaxRecord = 1 << 16;
// Pace used for a human seat when no speed was configured.
constexpr double kHumanSpeed = 20.0;

std::string symbol_text(char c) { return std::string(1, c); }

std::string_view direction_name(Direction d) { return d == Direction::Input ? "input" : "output"; }

json episode_json(const EpisodeRecord& e) {
  return {{"index", e.index},         {"id", e.instance_id}, {"script", e.script_id},
          {"level", e.level},         {"start", e.start},    {"end", e.end},
          {"verdict", verdict_name(e.verdict)}, {"finished", e.finished}, {"timeoff", e.timeoff()}};
}

}  // namespace

// ---------------------------------------------------------------------------
// Connections
// ---------------------------------------------------------------------------

class Connection;

/// What connections need from the gateway.
class Hub {
public:
  virtual ~Hub() = default;
  virtual void on_record(const std::shared_ptr<Connection>& from, std::string text) = 0;
  virtual void on_disconnect(const std::shared_ptr<Connection>& conn) = 0;
  virtual std::chrono::milliseconds heartbeat() const = 0;
  virtual std::uint64_t current_tick() const = 0;
};

class Connection : public std::enable_shared_from_this<Connection> {
public:
  enum class Role { None, Observer, Learner };

  Connection(Hub& hub, asio::any_io_executor executor) : hub_(hub), executor_(executor), heartbeat_(executor) {}
  virtual ~Connection() = default;

  void start() {
    asio::dispatch(executor_, [self = shared_from_this()] { self->open(); });
  }

  /// Thread-safe; records go out in the order send() was called.
  void send(std::string record) {
    asio::post(executor_, [self = shared_from_this(), record = std::move(record)]() mutable {
      if (self->closed_) return;
      self->queue_.push_back(std::move(record));
      if (!self->writing_) self->write_next();
    });
  }

  void close_after_flush() {
    asio::post(executor_, [self = shared_from_this()] {
      self->closing_ = true;
      if (!self->writing_) self->fail();
    });
  }

  // Guarded by the gateway mutex.
  Role role = Role::None;
  bool human = false;

protected:
  virtual void open() = 0;
  virtual void async_write_one(const std::string& record, std::function<void(beast::error_code)> done) = 0;
  virtual void async_read_one(std::function<void(beast::error_code, std::string)> done) = 0;
  virtual void shutdown() = 0;

  void begin() {
    arm_heartbeat();
    read_loop();
  }

  void fail() {
    if (closed_) return;
    closed_ = true;
    heartbeat_.cancel();
    shutdown();
    hub_.on_disconnect(shared_from_this());
  }

private:
  void write_next() {
    if (queue_.empty()) {
      writing_ = false;
      if (closing_) fail();
      return;
    }
    writing_ = true;
    async_write_one(queue_.front(), [self = shared_from_this()](beast::error_code ec) {
      if (ec) {
        self->fail();
        return;
      }
      if (!self->queue_.empty()) self->queue_.pop_front();
      self->arm_heartbeat();
      self->write_next();
    });
  }

  void arm_heartbeat() {
    if (closed_) return;
    heartbeat_.expires_after(hub_.heartbeat());
    heartbeat_.async_wait([self = shared_from_this()](beast::error_code ec) {
      if (ec || self->closed_) return;
      self->send(json{{"type", "heartbeat"}, {"tick", self->hub_.current_tick()}}.dump());
    });
  }

  void read_loop() {
    async_read_one([self = shared_from_this()](beast::error_code ec, std::string text) {
      if (ec) {
        self->fail();
        return;
      }
      self->hub_.on_record(self, std::move(text));
      if (!self->closed_ && !self->closing_) self->read_loop();
    });
  }

  Hub& hub_;
  asio::any_io_executor executor_;
  asio::steady_timer heartbeat_;
  std::deque<std::string> queue_;
  bool writing_ = false;
  bool closing_ = false;
  bool closed_ = false;
};

namespace {

class LineConnection : public Connection {
public:
  LineConnection(Hub& hub, tcp::socket socket)
      : Connection(hub, socket.get_executor()), socket_(std::move(socket)), buffer_(kMaxRecord) {}

protected:
  void open() override { begin(); }

  void async_write_one(const std::string& record, std::function<void(beast::error_code)> done) override {
    std::array<asio::const_buffer, 2> buffers{asio::buffer(record), asio::buffer("\n", 1)};
    asio::async_write(socket_, buffers, [done = std::move(done)](beast::error_code ec, std::size_t) { done(ec); });
  }

  void async_read_one(std::function<void(beast::error_code, std::string)> done) override {
    asio::async_read_until(socket_, buffer_, '\n',
                           [this, self = shared_from_this(), done = std::move(done)](beast::error_code ec, std::size_t n) {
                             if (ec) {
                               done(ec, {});
                               return;
                             }
                             std::string line(asio::buffers_begin(buffer_.data()),
                                              asio::buffers_begin(buffer_.data()) + static_cast<std::ptrdiff_t>(n - 1));
                             buffer_.consume(n);
                             if (!line.empty() && line.back() == '\r') line.pop_back();
                             done({}, std::move(line));
                           });
  }

  void shutdown() override {
    beast::error_code ignored;
    socket_.shutdown(tcp::socket::shutdown_both, ignored);
    socket_.close(ignored);
  }

private:
  tcp::socket socket_;
  asio::streambuf buffer_;
};

class WebSocketConnection : public Connection {
public:
  WebSocketConnection(Hub& hub, tcp::socket socket)
      : Connection(hub, socket.get_executor()), ws_(std::move(socket)) {}

protected:
  void open() override {
    ws_.read_message_max(kMaxRecord);
    ws_.async_accept([self = std::static_pointer_cast<WebSocketConnection>(shared_from_this())](beast::error_code ec) {
      if (ec) {
        self->fail();
        return;
      }
      self->ws_.text(true);
      self->begin();
    });
  }

  void async_write_one(const std::string& record, std::function<void(beast::error_code)> done) override {
    ws_.async_write(asio::buffer(record), [done = std::move(done)](beast::error_code ec, std::size_t) { done(ec); });
  }

  void async_read_one(std::function<void(beast::error_code, std::string)> done) override {
    ws_.async_read(buffer_, [this, self = shared_from_this(), done = std::move(done)](beast::error_code ec, std::size_t) {
      if (ec) {
        done(ec, {});
        return;
      }
      std::string text = beast::buffers_to_string(buffer_.data());
      buffer_.consume(buffer_.size());
      done({}, std::move(text));
    });
  }

  void shutdown() override {
    beast::error_code ignored;
    beast::get_lowest_layer(ws_).socket().shutdown(tcp::socket::shutdown_both, ignored);
    beast::get_lowest_layer(ws_).close();
  }

private:
  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

struct Gateway::Impl : Hub, SessionObserver {
  struct Command {
    enum class Kind { Join, Leave, Record };
    Kind kind;
    std::shared_ptr<Connection> from;
    json record;
  };

  /// Stands in for the learner inside the session.
  class Proxy : public Learner, public EpisodeAware {
  public:
    explicit Proxy(Impl& impl) : impl_(impl) {}
    void on_episode(const EpisodeView& view) override {
      if (auto* aware = dynamic_cast<EpisodeAware*>(impl_.local.get())) aware->on_episode(view);
    }
    char next(char input, int reward) override { return impl_.learner_next(input, reward); }
    void on_session_start(std::uint64_t seed) override {
      if (impl_.local) impl_.local->on_session_start(seed);
    }
    void on_session_end() override {
      if (impl_.local) impl_.local->on_session_end();
    }
    std::string name() const override { return impl_.local ? impl_.local->name() : "remote"; }
    bool timed() const override { return impl_.learner_timed(); }

  private:
    Impl& impl_;
  };

  Impl(SessionConfig session_config, std::unique_ptr<EpisodeSource> source, std::unique_ptr<Learner> learner,
       GatewayConfig config)
      : session_config(session_config),
        source(std::move(source)),
        local(std::move(learner)),
        config(std::move(config)),
        proxy(*this),
        acceptor(ioc),
        ws_acceptor(ioc) {
    paused = this->config.start_paused;
    speed = this->config.speed;
  }

  // -- Hub (network thread) --------------------------------------------------

  std::chrono::milliseconds heartbeat() const override { return config.heartbeat; }
  std::uint64_t current_tick() const override { return tick.load(); }

  void reject(const std::shared_ptr<Connection>& conn, std::string code, std::string message, json extra = {}) {
    json record = {{"type", "error"}, {"code", std::move(code)}, {"message", std::move(message)}};
    for (auto& [k, v] : extra.items()) record[k] = v;
    conn->send(record.dump());
    conn->close_after_flush();
  }

  void on_record(const std::shared_ptr<Connection>& from, std::string text) override {
    json record;
    try {
      record = json::parse(text);
    } catch (const json::exception&) {
      reject(from, "protocol_violation", "record is not valid JSON");
      return;
    }
    if (!record.is_object() || !record.contains("type") || !record["type"].is_string()) {
      reject(from, "protocol_violation", "record needs a string \"type\"");
      return;
    }
    const std::string type = record["type"];
    std::lock_guard lock(mu);
    if (from->role == Connection::Role::None) {
      if (type != "attach") {
        reject(from, "protocol_violation", "first record must be attach");
        return;
      }
      const std::string protocol = record.value("protocol", std::string{});
      if (protocol != kProtocol) {
        reject(from, "version_mismatch", "unsupported protocol version",
               {{"server_protocol", kProtocol}, {"client_protocol", protocol}});
        return;
      }
      const std::string role = record.value("role", std::string{});
      if (role == "observer") {
        from->role = Connection::Role::Observer;
      } else if (role == "learner") {
        const std::string mode = record.value("mode", std::string("machine"));
        if (mode != "machine" && mode != "human") {
          reject(from, "protocol_violation", "mode must be machine or human");
          return;
        }
        if (local || seat) {
          reject(from, "seat_taken", local ? "the session runs an in-process learner" : "another learner is attached");
          return;
        }
        from->role = Connection::Role::Learner;
        from->human = mode == "human";
        seat = from;
      } else {
        reject(from, "protocol_violation", "role must be learner or observer");
        return;
      }
      commands.push_back({Command::Kind::Join, from, std::move(record)});
      cv.notify_all();
      return;
    }

    std::string problem;
    const bool is_seat = from == seat;
    if (type == "human_output") {
      if (!is_seat || !from->human) problem = "human_output needs the human learner seat";
      else if (!record.contains("text") || !record["text"].is_string()) problem = "human_output needs text";
    } else if (type == "learner_output") {
      if (!is_seat || from->human) problem = "learner_output needs the machine learner seat";
      else if (!record.contains("tick") || !record["tick"].is_number_unsigned() || !record.contains("symbol") ||
               !record["symbol"].is_string() || record["symbol"].get<std::string>().size() != 1) {
        problem = "learner_output needs tick and a one-symbol string";
      }
    } else if (type == "step") {
      if (!record.contains("n") || !record["n"].is_number_unsigned() || record["n"].get<std::uint64_t>() == 0) {
        problem = "step needs a positive n";
      }
    } else if (type == "set_speed") {
      if (!record.contains("ticks_per_second") ||
          !(record["ticks_per_second"].is_null() ||
            (record["ticks_per_second"].is_number() && record["ticks_per_second"].get<double>() >= 0))) {
        problem = "set_speed needs ticks_per_second >= 0 or null";
      }
    } else if (type != "pause" && type != "resume") {
      problem = "unknown command '" + type + "'";
    }
    if (!problem.empty()) {
      if (is_seat) release_seat();
      subscribers.erase(from);
      reject(from, "protocol_violation", problem);
      return;
    }
    commands.push_back({Command::Kind::Record, from, std::move(record)});
    cv.notify_all();
  }

  void on_disconnect(const std::shared_ptr<Connection>& conn) override {
    std::lock_guard lock(mu);
    subscribers.erase(conn);
    connections.erase(conn);
    if (conn == seat) release_seat();
    cv.notify_all();
  }

  // Caller holds `mu`.
  void release_seat() {
    seat.reset();
    commands.push_back({Command::Kind::Leave, nullptr, {}});
  }

  // -- loop thread -------------------------------------------------------------

  // Caller holds `mu`.
  void broadcast(json record) {
    record["seq"] = ++seq;
    const std::string text = record.dump();
    for (const auto& conn : subscribers) conn->send(text);
  }

  void emit(json record) {
    std::lock_guard lock(mu);
    broadcast(std::move(record));
  }

  json control_record() const {
    return {{"type", "control"},
            {"tick", tick.load()},
            {"paused", paused},
            {"speed", speed ? json(*speed) : json(nullptr)}};
  }

  json state_record() const {
    json record = {{"type", "state"}, {"seq", seq}, {"tick", tick.load()}, {"paused", paused},
                   {"speed", speed ? json(*speed) : json(nullptr)}};
    record["world"] = session->tick() > 0 || session->current_episode() ? to_json(snapshot(session->world())) : json(nullptr);
    auto episode = session->current_episode();
    record["episode"] = episode ? episode_json(*episode) : json(nullptr);
    const auto& ledger = session->ledger();
    const auto t = session->tick();
    record["ledger"] = {{"cumulative", ledger.cumulative()},
                        {"average", t > 0 ? static_cast<double>(ledger.cumulative()) / static_cast<double>(t) : 0.0}};
    json lines = json::array();
    for (const auto& line : transcript(session->frames())) {
      lines.push_back({{"tick", line.tick}, {"direction", direction_name(line.direction)}, {"raw", line.raw}});
    }
    record["transcript"] = std::move(lines);
    record["pending"] = human_buffer.size();
    if (awaiting) {
      record["awaiting"] = {{"tick", awaiting->tick}, {"input", symbol_text(awaiting->input)}, {"reward", awaiting->reward}};
    }
    return record;
  }

  json welcome_record(const Connection& conn) const {
    return {{"type", "welcome"},
            {"protocol", kProtocol},
            {"role", conn.role == Connection::Role::Learner ? "learner" : "observer"},
            {"mode", conn.human ? "human" : "machine"},
            {"session",
             {{"seed", session_config.seed}, {"ticks", session_config.ticks}, {"learner", proxy.name()}}}};
  }

  // Caller holds `mu`.
  void apply(Command& command) {
    switch (command.kind) {
      case Command::Kind::Join:
        if (command.from->role == Connection::Role::None) return;
        command.from->send(welcome_record(*command.from).dump());
        command.from->send(state_record().dump());
        subscribers.insert(command.from);
        return;
      case Command::Kind::Leave:
        return;
      case Command::Kind::Record:
        break;
    }
    const auto& r = command.record;
    const std::string type = r["type"];
    if (type == "human_output") {
      if (command.from != seat) return;
      for (char c : r["text"].get<std::string>()) human_buffer.push_back(c);
    } else if (type == "learner_output") {
      if (command.from != seat) return;
      const auto t = r["tick"].get<std::uint64_t>();
      if (!awaiting || awaiting->tick != t) {
        release_seat();
        subscribers.erase(command.from);
        reject(command.from, "protocol_violation", "learner_output for tick " + std::to_string(t) + " was not requested");
        return;
      }
      machine_output = r["symbol"].get<std::string>().front();
    } else if (type == "pause") {
      paused = true;
      step_credit = 0;
      broadcast(control_record());
    } else if (type == "resume") {
      paused = false;
      step_credit = 0;
      broadcast(control_record());
    } else if (type == "step") {
      paused = true;
      step_credit += r["n"].get<std::uint64_t>();
      broadcast(control_record());
    } else if (type == "set_speed") {
      if (r["ticks_per_second"].is_null()) {
        speed.reset();
      } else {
        speed = r["ticks_per_second"].get<double>();
      }
      broadcast(control_record());
    }
  }

  // Caller holds `mu`.
  void drain() {
    while (!commands.empty()) {
      auto command = std::move(commands.front());
      commands.pop_front();
      apply(command);
    }
  }

  std::optional<double> effective_speed() const {
    if (speed) return speed;
    if (!local && seat && seat->human) return kHumanSpeed;
    return std::nullopt;
  }

  // Caller holds `mu`.
  bool runnable() const {
    if (stopping) return false;
    if (paused && step_credit == 0) return false;
    if (!local && !seat) return false;
    if (auto s = effective_speed(); s && *s <= 0) return false;
    return true;
  }

  bool learner_timed() const {
    if (local) return local->timed();
    std::lock_guard lock(mu);
    if (seat && seat->human) return false;
    return !config.suspend_machine_budget;
  }

  char learner_next(char input, int reward) {
    const auto t = session->tick();
    emit({{"type", "tick"}, {"tick", t}, {"input", symbol_text(input)}, {"reward", reward}});
    if (local) return local->next(input, reward);

    std::unique_lock lock(mu);
    awaiting = Awaiting{t, input, reward};
    machine_output.reset();
    while (true) {
      drain();
      if (stopping) break;
      if (seat && seat->human) {
        char out = kSilence;
        if (!human_buffer.empty()) {
          out = human_buffer.front();
          human_buffer.pop_front();
        }
        awaiting.reset();
        return out;
      }
      if (machine_output) {
        awaiting.reset();
        return *machine_output;
      }
      cv.wait(lock, [&] { return !commands.empty() || stopping; });
    }
    awaiting.reset();
    return kSilence;
  }

  // SessionObserver
  void on_tick(const TickFrame& frame) override {
    std::lock_guard lock(mu);
    json record = {{"type", "learner_output"}, {"tick", frame.tick}, {"symbol", symbol_text(frame.output)}};
    if (!local && seat && seat->human) record["pending"] = human_buffer.size();
    broadcast(std::move(record));
    tick.store(frame.tick + 1);
  }
  void on_message(std::uint64_t t, Direction direction, const Message& message) override {
    json record = {{"type", "message_complete"}, {"tick", t},         {"direction", direction_name(direction)},
                   {"speaker", agent_name(message.speaker)},         {"text", message.body}, {"raw", message.raw}};
    if (message.addressee) record["addressee"] = agent_name(*message.addressee);
    emit(std::move(record));
  }
  void on_snapshot(std::uint64_t t, const WorldSnapshot& s) override {
    emit({{"type", "world_snapshot"}, {"tick", t}, {"world", to_json(s)}});
  }
  void on_task_event(std::uint64_t t, const EpisodeRecord& episode) override {
    emit({{"type", "task_event"}, {"tick", t}, {"episode", episode_json(episode)}});
  }
  void on_ledger(std::uint64_t t, long long cumulative, double average) override {
    emit({{"type", "ledger_update"}, {"tick", t}, {"cumulative", cumulative}, {"average", average}});
  }

  void loop() {
    using clock = std::chrono::steady_clock;
    auto last_tick = clock::now();
    while (true) {
      {
        std::unique_lock lock(mu);
        drain();
        if (stopping || session->done()) break;
        if (!runnable()) {
          cv.wait(lock, [&] { return !commands.empty() || stopping; });
          continue;
        }
        if (auto s = effective_speed()) {
          const auto due = last_tick + std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(1.0 / *s));
          if (clock::now() < due) {
            cv.wait_until(lock, due, [&] { return !commands.empty() || stopping; });
            if (clock::now() < due) continue;
          }
        }
        if (paused && step_credit > 0) --step_credit;
      }
      last_tick = clock::now();
      session->step();
    }
    report = session->report();
    std::lock_guard lock(mu);
    broadcast({{"type", "session_end"}, {"tick", session->tick()}, {"report", to_json(*report)}});
    ended = true;
    for (const auto& conn : connections) conn->close_after_flush();
    cv.notify_all();
  }

  void accept(tcp::acceptor& acceptor, bool websocket) {
    acceptor.async_accept(asio::make_strand(ioc), [this, &acceptor, websocket](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      beast::error_code ignored;
      socket.set_option(tcp::no_delay(true), ignored);
      std::shared_ptr<Connection> conn;
      if (websocket) {
        conn = std::make_shared<WebSocketConnection>(*this, std::move(socket));
      } else {
        conn = std::make_shared<LineConnection>(*this, std::move(socket));
      }
      bool open;
      {
        std::lock_guard lock(mu);
        open = !ended;
        if (open) connections.insert(conn);
      }
      conn->start();
      if (!open) {
        // late arrivals still get the final word
        conn->send(json{{"type", "error"}, {"code", "session_over"}, {"message", "the session has ended"}}.dump());
        conn->close_after_flush();
      }
      accept(acceptor, websocket);
    });
  }

  static void listen(tcp::acceptor& acceptor, const std::string& bind, std::uint16_t port) {
    tcp::endpoint endpoint(asio::ip::make_address(bind), port);
    acceptor.open(endpoint.protocol());
    acceptor.set_option(asio::socket_base::reuse_address(true));
    acceptor.bind(endpoint);
    acceptor.listen();
  }

  SessionConfig session_config;
  std::unique_ptr<EpisodeSource> source;
  std::unique_ptr<Learner> local;
  GatewayConfig config;
  Proxy proxy;
  std::unique_ptr<Session> session;
  std::optional<SessionReport> report;

  asio::io_context ioc;
  tcp::acceptor acceptor;
  tcp::acceptor ws_acceptor;
  std::thread network;
  std::thread looper;
  bool started = false;
  bool joined = false;

  mutable std::mutex mu;
  std::condition_variable cv;
  std::deque<Command> commands;
  std::set<std::shared_ptr<Connection>> connections;
  std::set<std::shared_ptr<Connection>> subscribers;
  std::shared_ptr<Connection> seat;
  bool stopping = false;
  bool ended = false;
  std::atomic<std::uint64_t> tick{0};
  std::uint64_t seq = 0;

  bool paused = false;
  std::uint64_t step_credit = 0;
  std::optional<double> speed;
  std::deque<char> human_buffer;
  struct Awaiting {
    std::uint64_t tick;
    char input;
    int reward;
  };
  std::optional<Awaiting> awaiting;
  std::optional<char> machine_output;
};

Gateway::Gateway(SessionConfig session, std::unique_ptr<EpisodeSource> source, std::unique_ptr<Learner> learner,
                 GatewayConfig config)
    : impl_(std::make_unique<Impl>(session, std::move(source), std::move(learner), std::move(config))) {}

Gateway::~Gateway() {
  if (impl_->started && !impl_->joined) stop();
}

void Gateway::start() {
  auto& impl = *impl_;
  if (impl.started) return;
  impl.session = std::make_unique<Session>(impl.session_config, *impl.source, impl.proxy);
  impl.session->add_observer(&impl);
  Impl::listen(impl.acceptor, impl.config.bind, impl.config.port);
  impl.accept(impl.acceptor, false);
  if (impl.config.ws_port) {
    Impl::listen(impl.ws_acceptor, impl.config.bind, *impl.config.ws_port);
    impl.accept(impl.ws_acceptor, true);
  }
  impl.started = true;
  impl.network = std::thread([&impl] {
    auto guard = asio::make_work_guard(impl.ioc);
    impl.ioc.run();
  });
  impl.looper = std::thread([&impl] { impl.loop(); });
}

std::uint16_t Gateway::port() const { return impl_->acceptor.local_endpoint().port(); }

std::optional<std::uint16_t> Gateway::ws_port() const {
  if (!impl_->ws_acceptor.is_open()) return std::nullopt;
  return impl_->ws_acceptor.local_endpoint().port();
}

SessionReport Gateway::wait() {
  auto& impl = *impl_;
  if (!impl.started) throw std::logic_error("gateway not started");
  if (!impl.joined) {
    impl.looper.join();
    {
      std::unique_lock lock(impl.mu);
      impl.cv.wait_for(lock, std::chrono::seconds(2), [&] { return impl.connections.empty(); });
    }
    asio::post(impl.ioc, [&impl] {
      beast::error_code ignored;
      impl.acceptor.close(ignored);
      impl.ws_acceptor.close(ignored);
      impl.ioc.stop();
    });
    impl.network.join();
    impl.joined = true;
  }
  return *impl.report;
}

void Gateway::stop() {
  {
    std::lock_guard lock(impl_->mu);
    impl_->stopping = true;
    impl_->cv.notify_all();
  }
  wait();
}

std::vector<TickFrame> Gateway::frames() const {
  if (!impl_->session) return {};
  return impl_->session->frames();
}

// ---------------------------------------------------------------------------
// Client
// ---------------------------------------------------------------------------

struct GatewayClient::Impl {
  asio::io_context ioc;
  tcp::socket socket{ioc};
  asio::streambuf buffer;
};

GatewayClient::GatewayClient(const std::string& host, std::uint16_t port) : impl_(std::make_unique<Impl>()) {
  tcp::resolver resolver(impl_->ioc);
  asio::connect(impl_->socket, resolver.resolve(host, std::to_string(port)));
  impl_->socket.set_option(tcp::no_delay(true));
}

GatewayClient::~GatewayClient() { close(); }

void GatewayClient::send(const json& record) {
  const std::string line = record.dump() + "\n";
  asio::write(impl_->socket, asio::buffer(line));
}

std::optional<json> GatewayClient::receive() {
  beast::error_code ec;
  const auto n = asio::read_until(impl_->socket, impl_->buffer, '\n', ec);
  if (ec) return std::nullopt;
  std::string line(asio::buffers_begin(impl_->buffer.data()),
                   asio::buffers_begin(impl_->buffer.data()) + static_cast<std::ptrdiff_t>(n - 1));
  impl_->buffer.consume(n);
  return json::parse(line);
}

json GatewayClient::attach(std::string_view role, std::string_view mode, std::string_view protocol) {
  send({{"type", "attach"}, {"protocol", protocol}, {"role", role}, {"mode", mode}});
  auto answer = receive();
  if (!answer) throw std::runtime_error("gateway closed the connection during attach");
  return *answer;
}

void GatewayClient::close() {
  beast::error_code ignored;
  impl_->socket.shutdown(tcp::socket::shutdown_both, ignored);
  impl_->socket.close(ignored);
}

RemoteRun drive_remote_learner(const std::string& host, std::uint16_t port, Learner& learner) {
  GatewayClient client(host, port);
  auto welcome = client.attach("learner", "machine");
  if (welcome.value("type", "") != "welcome") {
    throw std::runtime_error("gateway refused the learner seat: " + welcome.value("message", welcome.dump()));
  }
  learner.on_session_start(welcome["session"]["seed"].get<std::uint64_t>());
  RemoteRun run;
  auto answer = [&](std::uint64_t t, char input, int reward) {
    run.frames.push_back({t, input, static_cast<std::int8_t>(reward), kSilence});
    const char out = learner.next(input, reward);
    client.send({{"type", "learner_output"}, {"tick", t}, {"symbol", std::string(1, out)}});
  };
  while (auto record = client.receive()) {
    const std::string type = record->value("type", "");
    if (type == "state" && record->contains("awaiting")) {
      const auto& a = (*record)["awaiting"];
      answer(a["tick"].get<std::uint64_t>(), a["input"].get<std::string>().front(), a["reward"].get<int>());
    } else if (type == "tick") {
      answer((*record)["tick"].get<std::uint64_t>(), (*record)["input"].get<std::string>().front(),
             (*record)["reward"].get<int>());
    } else if (type == "learner_output" && !run.frames.empty()) {
      run.frames.back().output = (*record)["symbol"].get<std::string>().front();
    } else if (type == "session_end") {
      run.report = (*record)["report"];
    }
    if (type != "heartbeat") run.events.push_back(std::move(*record));
  }
  learner.on_session_end();
  return run;
}

}  // namespace kinder
