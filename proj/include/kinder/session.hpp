#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "kinder/channel.hpp"
#include "kinder/curriculum.hpp"
#include "kinder/learner.hpp"
#include "kinder/tasks.hpp"
#include "kinder/world.hpp"

namespace kinder {

struct RewardEvent {
  std::uint64_t tick = 0;
  int value = 0;

  bool operator==(const RewardEvent&) const = default;
};

class RewardLedger {
public:
  /// Throws RewardInvariantError for a value outside {-1, +1} or a second
  /// event at the same tick.
  void add(std::uint64_t tick, int value);

  const std::vector<RewardEvent>& events() const noexcept { return events_; }
  long long cumulative() const noexcept { return cumulative_; }
  int positives() const noexcept { return positives_; }
  int negatives() const noexcept { return negatives_; }

private:
  std::vector<RewardEvent> events_;
  long long cumulative_ = 0;
  int positives_ = 0;
  int negatives_ = 0;
};

/// Cumulative reward up to tick `t` divided by `t`; throws for t == 0.
double average_reward(const RewardLedger& ledger, std::uint64_t t);

struct SessionConfig {
  std::uint64_t seed = 0;
  std::uint64_t ticks = 10000;
  /// Wall-clock allowance per learner call; zero disables the watchdog.
  std::chrono::nanoseconds wall_budget{0};
  /// Stop once this much wall-clock time has elapsed; zero means ticks only.
  std::chrono::nanoseconds wall_limit{0};
  /// Scripts marked `world persistent` keep the previous episode's world.
  bool persistent_world = false;
};

struct EpisodeRecord {
  std::size_t index = 0;
  std::string instance_id;  // empty for time off
  std::string script_id;
  int level = 0;
  std::uint64_t start = 0;
  std::uint64_t end = 0;  // tick of the last react, or the budget end
  Verdict verdict = Verdict::Pending;
  bool finished = false;

  bool timeoff() const noexcept { return instance_id.empty(); }
  bool operator==(const EpisodeRecord&) const = default;
};

struct ScriptTally {
  int attempted = 0;
  int succeeded = 0;

  bool operator==(const ScriptTally&) const = default;
};

struct ComputeStats {
  std::uint64_t calls = 0;
  std::uint64_t overruns = 0;
  double total_seconds = 0;
  double max_seconds = 0;
};

struct SessionReport {
  std::string learner;
  std::uint64_t seed = 0;
  std::uint64_t ticks = 0;
  int rewards_positive = 0;
  int rewards_negative = 0;
  long long cumulative_reward = 0;
  double average_reward = 0;
  int attempted = 0;
  int succeeded = 0;
  std::map<std::string, ScriptTally> per_script;
  std::vector<EpisodeRecord> episodes;
  std::vector<RewardEvent> rewards;
  std::uint64_t invalid_symbols = 0;
  ComputeStats compute;
  std::string mode = "ticks";
  std::string transcript_hash;
  bool aborted = false;
  std::string abort_reason;

  /// Compute statistics depend on the machine and are left out.
  bool operator==(const SessionReport& other) const;
};

nlohmann::json to_json(const SessionReport& report);
SessionReport report_from_json(const nlohmann::json& json);

/// Everything the gateway and other observers may hear about a session.
class SessionObserver {
public:
  virtual ~SessionObserver() = default;
  virtual void on_tick(const TickFrame& /*frame*/) {}
  virtual void on_message(std::uint64_t /*tick*/, Direction /*direction*/, const Message& /*message*/) {}
  virtual void on_snapshot(std::uint64_t /*tick*/, const WorldSnapshot& /*snapshot*/) {}
  virtual void on_task_event(std::uint64_t /*tick*/, const EpisodeRecord& /*episode*/) {}
  virtual void on_ledger(std::uint64_t /*tick*/, long long /*cumulative*/, double /*average*/) {}
  virtual void on_end(const SessionReport& /*report*/) {}
};

class SessionAbort : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// The tick loop. Single owner of channel, world, Teacher and ledger.
class Session {
public:
  Session(SessionConfig config, EpisodeSource& source, Learner& learner);
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  void add_observer(SessionObserver* observer);
  void remove_observer(SessionObserver* observer);

  /// Runs one tick; false once the budget is spent or the session aborted.
  bool step();
  /// Steps to the end and returns the final report.
  SessionReport run();
  bool done() const noexcept;

  std::uint64_t tick() const noexcept { return tick_; }
  const World& world() const noexcept { return world_; }
  const std::vector<TickFrame>& frames() const noexcept { return frames_; }
  const RewardLedger& ledger() const noexcept { return ledger_; }
  const SessionConfig& config() const noexcept { return config_; }
  std::optional<EpisodeRecord> current_episode() const;
  /// Report as of now; the open episode counts as attempted.
  SessionReport report() const;

private:
  void start_episode(std::uint64_t start);
  void finish_episode(std::uint64_t tick);
  void handle_learner_message(std::uint64_t tick, const Message& message);
  void notify_snapshot(std::uint64_t tick);
  void finalize(const std::string& abort_reason);

  SessionConfig config_;
  EpisodeSource& source_;
  Learner& learner_;
  EpisodeAware* side_door_ = nullptr;
  std::vector<SessionObserver*> observers_;

  InputMux mux_;
  RewardChannel rewards_;
  StreamParser input_parser_{Direction::Input};
  StreamParser output_parser_{Direction::Output};
  RewardLedger ledger_;
  TranscriptHasher hasher_;
  std::vector<TickFrame> frames_;

  World world_;
  bool have_world_ = false;
  std::optional<TaskInstance> instance_;
  std::unique_ptr<Teacher> teacher_;
  std::uint64_t timeoff_until_ = 0;
  EpisodeRecord episode_;
  std::vector<EpisodeRecord> episodes_;

  std::uint64_t tick_ = 0;
  std::uint64_t invalid_symbols_ = 0;
  ComputeStats compute_;
  std::chrono::steady_clock::time_point started_;
  bool started_clock_ = false;
  bool finished_ = false;
  std::optional<std::string> abort_reason_;
  std::optional<SessionReport> final_report_;
};

/// Convenience wrapper around Session::run.
SessionReport run_session(const SessionConfig& config, EpisodeSource& source, Learner& learner,
                          std::vector<TickFrame>* frames = nullptr);

/// A completed message in the transcript, in the order messages closed.
struct TranscriptLine {
  std::uint64_t tick = 0;
  Direction direction = Direction::Input;
  std::string raw;

  bool operator==(const TranscriptLine&) const = default;
};

/// Rebuilds the message-level transcript from a frame log.
std::vector<TranscriptLine> transcript(const std::vector<TickFrame>& frames);
/// "in  <raw>" / "out <raw>" lines.
std::string format_transcript(const std::vector<TranscriptLine>& lines);

}  // namespace kinder
