#include "kinder/session.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

namespace kinder {

void RewardLedger::add(std::uint64_t tick, int value) {
  if (value != 1 && value != -1) {
    throw RewardInvariantError("ledger value must be +1 or -1, got " + std::to_string(value));
  }
  if (!events_.empty() && events_.back().tick >= tick) {
    throw RewardInvariantError("second reward at tick " + std::to_string(tick));
  }
  events_.push_back({tick, value});
  cumulative_ += value;
  (value > 0 ? positives_ : negatives_)++;
}

double average_reward(const RewardLedger& ledger, std::uint64_t t) {
  if (t == 0) throw std::invalid_argument("average reward needs t >= 1");
  long long sum = 0;
  for (const auto& event : ledger.events()) {
    if (event.tick < t) sum += event.value;
  }
  return static_cast<double>(sum) / static_cast<double>(t);
}

bool SessionReport::operator==(const SessionReport& other) const {
  return learner == other.learner && seed == other.seed && ticks == other.ticks &&
         rewards_positive == other.rewards_positive && rewards_negative == other.rewards_negative &&
         cumulative_reward == other.cumulative_reward && average_reward == other.average_reward &&
         attempted == other.attempted && succeeded == other.succeeded && per_script == other.per_script &&
         episodes == other.episodes && rewards == other.rewards && invalid_symbols == other.invalid_symbols &&
         mode == other.mode && transcript_hash == other.transcript_hash && aborted == other.aborted &&
         abort_reason == other.abort_reason;
}

nlohmann::json to_json(const SessionReport& report) {
  nlohmann::json per_script = nlohmann::json::object();
  for (const auto& [id, tally] : report.per_script) {
    per_script[id] = {{"attempted", tally.attempted}, {"succeeded", tally.succeeded}};
  }
  nlohmann::json episodes = nlohmann::json::array();
  for (const auto& e : report.episodes) {
    episodes.push_back({{"index", e.index},
                        {"instance", e.instance_id},
                        {"script", e.script_id},
                        {"level", e.level},
                        {"start", e.start},
                        {"end", e.end},
                        {"verdict", verdict_name(e.verdict)},
                        {"finished", e.finished}});
  }
  nlohmann::json rewards = nlohmann::json::array();
  for (const auto& r : report.rewards) rewards.push_back({r.tick, r.value});
  return {
      {"schema", "kinder.session_report/1"},
      {"learner", report.learner},
      {"seed", report.seed},
      {"mode", report.mode},
      {"ticks", report.ticks},
      {"rewards_positive", report.rewards_positive},
      {"rewards_negative", report.rewards_negative},
      {"cumulative_reward", report.cumulative_reward},
      {"average_reward", report.average_reward},
      {"attempted", report.attempted},
      {"succeeded", report.succeeded},
      {"per_script", per_script},
      {"episodes", episodes},
      {"rewards", rewards},
      {"invalid_symbols", report.invalid_symbols},
      {"compute",
       {{"calls", report.compute.calls},
        {"overruns", report.compute.overruns},
        {"total_seconds", report.compute.total_seconds},
        {"max_seconds", report.compute.max_seconds}}},
      {"transcript_hash", report.transcript_hash},
      {"aborted", report.aborted},
      {"abort_reason", report.abort_reason},
  };
}

namespace {

Verdict verdict_from_name(const std::string& name) {
  if (name == "accept") return Verdict::Accept;
  if (name == "reject") return Verdict::Reject;
  return Verdict::Pending;
}

}  // namespace

SessionReport report_from_json(const nlohmann::json& json) {
  SessionReport report;
  report.learner = json.at("learner").get<std::string>();
  report.seed = json.at("seed").get<std::uint64_t>();
  report.mode = json.at("mode").get<std::string>();
  report.ticks = json.at("ticks").get<std::uint64_t>();
  report.rewards_positive = json.at("rewards_positive").get<int>();
  report.rewards_negative = json.at("rewards_negative").get<int>();
  report.cumulative_reward = json.at("cumulative_reward").get<long long>();
  report.average_reward = json.at("average_reward").get<double>();
  report.attempted = json.at("attempted").get<int>();
  report.succeeded = json.at("succeeded").get<int>();
  for (const auto& [id, tally] : json.at("per_script").items()) {
    report.per_script[id] = {tally.at("attempted").get<int>(), tally.at("succeeded").get<int>()};
  }
  for (const auto& e : json.at("episodes")) {
    EpisodeRecord record;
    record.index = e.at("index").get<std::size_t>();
    record.instance_id = e.at("instance").get<std::string>();
    record.script_id = e.at("script").get<std::string>();
    record.level = e.at("level").get<int>();
    record.start = e.at("start").get<std::uint64_t>();
    record.end = e.at("end").get<std::uint64_t>();
    record.verdict = verdict_from_name(e.at("verdict").get<std::string>());
    record.finished = e.at("finished").get<bool>();
    report.episodes.push_back(std::move(record));
  }
  for (const auto& r : json.at("rewards")) report.rewards.push_back({r.at(0).get<std::uint64_t>(), r.at(1).get<int>()});
  report.invalid_symbols = json.at("invalid_symbols").get<std::uint64_t>();
  const auto& compute = json.at("compute");
  report.compute.calls = compute.at("calls").get<std::uint64_t>();
  report.compute.overruns = compute.at("overruns").get<std::uint64_t>();
  report.compute.total_seconds = compute.at("total_seconds").get<double>();
  report.compute.max_seconds = compute.at("max_seconds").get<double>();
  report.transcript_hash = json.at("transcript_hash").get<std::string>();
  report.aborted = json.at("aborted").get<bool>();
  report.abort_reason = json.at("abort_reason").get<std::string>();
  return report;
}

namespace {

World idle_world() {
  World world;
  world.grid = Grid(8, 8);
  world.body.position = {4, 4};
  return world;
}

}  // namespace

Session::Session(SessionConfig config, EpisodeSource& source, Learner& learner)
    : config_(config), source_(source), learner_(learner) {
  if (config_.ticks == 0) throw std::invalid_argument("tick budget must be positive");
  side_door_ = dynamic_cast<EpisodeAware*>(&learner_);
}

Session::~Session() = default;

void Session::add_observer(SessionObserver* observer) { observers_.push_back(observer); }

void Session::remove_observer(SessionObserver* observer) {
  observers_.erase(std::remove(observers_.begin(), observers_.end(), observer), observers_.end());
}

bool Session::done() const noexcept { return finished_; }

std::optional<EpisodeRecord> Session::current_episode() const {
  if (!teacher_ && timeoff_until_ == 0) return std::nullopt;
  return episode_;
}

void Session::notify_snapshot(std::uint64_t tick) {
  if (observers_.empty()) return;
  const auto shot = snapshot(world_);
  for (auto* o : observers_) o->on_snapshot(tick, shot);
}

void Session::start_episode(std::uint64_t start) {
  Episode next = source_.next_episode();
  episode_ = EpisodeRecord{};
  episode_.index = episodes_.size();
  episode_.start = start;
  teacher_.reset();
  instance_.reset();
  timeoff_until_ = 0;
  if (next.instance) {
    instance_ = std::move(next.instance);
    if (!(config_.persistent_world && instance_->reuse_world && have_world_)) world_ = instance_->world;
    world_.legacy_look = instance_->world.legacy_look;
    have_world_ = true;
    teacher_ = std::make_unique<Teacher>(*instance_, start, world_);
    episode_.instance_id = instance_->id();
    episode_.script_id = instance_->script_id;
    episode_.level = instance_->level;
  } else {
    if (!have_world_) {
      world_ = idle_world();
      have_world_ = true;
    }
    const auto limit = ~std::uint64_t{0};
    timeoff_until_ = next.timeoff_ticks > limit - start ? limit : start + next.timeoff_ticks;
    if (timeoff_until_ == 0) timeoff_until_ = 1;
  }
  if (side_door_) {
    side_door_->on_episode({episode_.index, start, instance_ ? &*instance_ : nullptr, teacher_.get(), &world_});
  }
  for (auto* o : observers_) o->on_task_event(start, episode_);
  notify_snapshot(start);
}

void Session::finish_episode(std::uint64_t tick) {
  episode_.end = tick;
  episode_.finished = true;
  if (teacher_) {
    episode_.verdict = teacher_->verdict();
    source_.record_outcome(*instance_, episode_.verdict);
  }
  episodes_.push_back(episode_);
  for (auto* o : observers_) o->on_task_event(tick, episode_);
  teacher_.reset();
  instance_.reset();
  timeoff_until_ = 0;
}

void Session::handle_learner_message(std::uint64_t tick, const Message& message) {
  if (teacher_) teacher_->observe_learner_message(tick, message);
  const auto segments = route(message);
  const auto to_environment =
      std::count_if(segments.begin(), segments.end(), [](const Segment& s) { return s.addressee == Agent::Environment; });
  // More than one order in a message is a complex command: nothing happens.
  if (to_environment != 1) return;
  const auto& segment =
      *std::find_if(segments.begin(), segments.end(), [](const Segment& s) { return s.addressee == Agent::Environment; });
  const EnvCommand command = parse_command(segment.text);
  const ExecResult result = apply(command, world_);
  if (teacher_) teacher_->observe_env_action(tick, command, result, world_);
  if (result.response.text) mux_.enqueue(Agent::Environment, frame(*result.response.text, Agent::Environment, Agent::Environment));
  const bool mutates = command.kind == EnvCommand::Kind::Move || command.kind == EnvCommand::Kind::TurnLeft ||
                       command.kind == EnvCommand::Kind::TurnRight || command.kind == EnvCommand::Kind::Pick;
  if (mutates && result.effected) notify_snapshot(tick);
}

bool Session::step() {
  if (finished_) return false;
  if (!started_clock_) {
    started_ = std::chrono::steady_clock::now();
    started_clock_ = true;
    learner_.on_session_start(config_.seed);
  }
  const std::uint64_t t = tick_;
  try {
    if (!teacher_ && timeoff_until_ == 0) start_episode(t);

    const char input = mux_.next();
    const int reward = rewards_.take(t);

    const auto before = std::chrono::steady_clock::now();
    char output = learner_.next(input, reward);
    const auto elapsed = std::chrono::steady_clock::now() - before;
    const double seconds = std::chrono::duration<double>(elapsed).count();
    ++compute_.calls;
    compute_.total_seconds += seconds;
    compute_.max_seconds = std::max(compute_.max_seconds, seconds);
    if (config_.wall_budget.count() > 0 && learner_.timed() && elapsed > config_.wall_budget) {
      ++compute_.overruns;
      output = kSilence;
    }
    if (!in_alphabet(output)) {
      ++invalid_symbols_;
      output = kSilence;
    }

    const TickFrame frame_now{t, input, static_cast<std::int8_t>(reward), output};
    frames_.push_back(frame_now);
    hasher_.add(frame_now);
    if (reward != 0) ledger_.add(t, reward);
    for (auto* o : observers_) o->on_tick(frame_now);
    if (reward != 0) {
      const double average = static_cast<double>(ledger_.cumulative()) / static_cast<double>(t + 1);
      for (auto* o : observers_) o->on_ledger(t, ledger_.cumulative(), average);
    }

    if (auto message = input_parser_.push(input)) {
      for (auto* o : observers_) o->on_message(t, Direction::Input, *message);
    }
    if (auto message = output_parser_.push(output)) {
      for (auto* o : observers_) o->on_message(t, Direction::Output, *message);
      handle_learner_message(t, *message);
    }

    if (teacher_) {
      auto out = teacher_->react(t, mux_.idle(), world_);
      for (std::string_view body : out.speech) {
        if (body.ends_with(kTerminator)) body.remove_suffix(1);
        mux_.enqueue(Agent::Teacher, frame(body, Agent::Teacher, Agent::Teacher));
      }
      if (out.reward) rewards_.deliver(*out.reward, t, mux_);
      if (teacher_->finished()) finish_episode(t);
    } else if (t + 1 >= timeoff_until_) {
      finish_episode(t);
    }
  } catch (const RewardInvariantError& e) {
    ++tick_;
    finalize(std::string("reward invariant violated: ") + e.what());
    return false;
  } catch (const std::exception& e) {
    ++tick_;
    finalize(std::string("learner or episode failure: ") + e.what());
    return false;
  }

  ++tick_;
  const bool out_of_ticks = tick_ >= config_.ticks;
  const bool out_of_time = config_.wall_limit.count() > 0 && std::chrono::steady_clock::now() - started_ >= config_.wall_limit;
  if (out_of_ticks || out_of_time) {
    finalize("");
    return false;
  }
  return true;
}

SessionReport Session::run() {
  while (step()) {
  }
  return report();
}

void Session::finalize(const std::string& abort_reason) {
  if (finished_) return;
  finished_ = true;
  if (!abort_reason.empty()) abort_reason_ = abort_reason;
  learner_.on_session_end();
  final_report_ = report();
  for (auto* o : observers_) o->on_end(*final_report_);
}

SessionReport Session::report() const {
  if (final_report_) return *final_report_;
  SessionReport report;
  report.learner = learner_.name();
  report.seed = config_.seed;
  report.ticks = tick_;
  report.mode = config_.wall_limit.count() > 0 ? "wallclock" : "ticks";
  report.rewards_positive = ledger_.positives();
  report.rewards_negative = ledger_.negatives();
  report.cumulative_reward = ledger_.cumulative();
  report.average_reward = tick_ ? static_cast<double>(ledger_.cumulative()) / static_cast<double>(tick_) : 0.0;
  report.episodes = episodes_;
  if (teacher_ || timeoff_until_ != 0) {
    EpisodeRecord open = episode_;
    open.end = tick_ ? tick_ - 1 : 0;
    open.finished = false;
    open.verdict = Verdict::Pending;
    report.episodes.push_back(open);
  }
  for (const auto& e : report.episodes) {
    if (e.timeoff()) continue;
    auto& tally = report.per_script[e.script_id];
    ++tally.attempted;
    ++report.attempted;
    if (e.finished && e.verdict == Verdict::Accept) {
      ++tally.succeeded;
      ++report.succeeded;
    }
  }
  report.rewards = ledger_.events();
  report.invalid_symbols = invalid_symbols_;
  report.compute = compute_;
  report.transcript_hash = hasher_.hex();
  report.aborted = abort_reason_.has_value();
  report.abort_reason = abort_reason_.value_or("");
  return report;
}

SessionReport run_session(const SessionConfig& config, EpisodeSource& source, Learner& learner,
                          std::vector<TickFrame>* frames) {
  Session session(config, source, learner);
  auto report = session.run();
  if (frames) *frames = session.frames();
  return report;
}

std::vector<TranscriptLine> transcript(const std::vector<TickFrame>& frames) {
  std::vector<TranscriptLine> lines;
  StreamParser input(Direction::Input);
  StreamParser output(Direction::Output);
  for (const auto& f : frames) {
    if (auto m = input.push(f.input)) lines.push_back({f.tick, Direction::Input, m->raw});
    if (auto m = output.push(f.output)) lines.push_back({f.tick, Direction::Output, m->raw});
  }
  return lines;
}

std::string format_transcript(const std::vector<TranscriptLine>& lines) {
  std::string out;
  for (const auto& line : lines) {
    out += line.direction == Direction::Input ? "in  " : "out ";
    out += line.raw;
    out += '\n';
  }
  return out;
}

}  // namespace kinder
