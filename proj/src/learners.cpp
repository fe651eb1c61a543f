#include "kinder/learners.hpp"

#include <algorithm>

namespace kinder {

char RandomLearner::next(char, int) {
  const auto symbols = alphabet();
  return symbols[rng_.below(symbols.size())];
}

void RandomLearner::on_session_start(std::uint64_t seed) { rng_ = Rng(mix_seed({seed_, seed})); }

std::string EchoLearner::reply(std::string_view body) {
  for (std::string_view marker : {"give orders ", "give order "}) {
    if (auto at = body.find(marker); at != std::string_view::npos) {
      return std::string(body.substr(at + marker.size())) + ".";
    }
  }
  for (std::string_view marker : {"say ", "ask me "}) {
    if (body.starts_with(marker)) return "@T: " + std::string(body.substr(marker.size())) + ".";
  }
  return "@T: " + std::string(body) + ".";
}

char EchoLearner::next(char input, int) {
  if (auto message = parser_.push(input); message && message->speaker == Agent::Teacher) {
    outbox_ = reply(message->body);
    position_ = 0;
  }
  if (position_ < outbox_.size()) return outbox_[position_++];
  return kSilence;
}

MemoLearner::MemoLearner(std::uint64_t seed, Options options)
    : options_(options), seed_(seed), rng_(seed) {}

void MemoLearner::on_session_start(std::uint64_t seed) { rng_ = Rng(mix_seed({seed_, seed})); }

std::optional<std::string> MemoLearner::lookup(const std::string& context) const {
  auto it = table_.find(context);
  if (it == table_.end()) return std::nullopt;
  return it->second.output;
}

void MemoLearner::store(const std::string& key, const std::string& output) {
  if (auto it = table_.find(key); it != table_.end()) {
    it->second.output = output;
    lru_.splice(lru_.begin(), lru_, it->second.order);
    return;
  }
  if (table_.size() >= options_.capacity) {
    table_.erase(lru_.back());
    lru_.pop_back();
    ++evictions_;
  }
  lru_.push_front(key);
  table_.emplace(key, Entry{output, lru_.begin()});
  ++stores_;
}

std::string MemoLearner::explore(const Message& message) {
  std::string guess = EchoLearner::reply(message.body);
  const int attempt = attempts_[*prompt_]++;
  if (attempt == 0) return guess;
  const auto symbols = alphabet();
  // Keep the terminator so the attempt still closes a message.
  for (std::size_t i = 0; i + 1 < guess.size(); ++i) {
    if (rng_.chance(options_.mutation_rate)) {
      char c;
      do {
        c = symbols[rng_.below(symbols.size())];
      } while (c == kTerminator);
      guess[i] = c;
    }
  }
  return guess;
}

void MemoLearner::on_teacher_message(const Message& message) {
  prompt_ = window_;
  emitted_.clear();
  if (auto it = table_.find(*prompt_); it != table_.end()) {
    ++hits_;
    lru_.splice(lru_.begin(), lru_, it->second.order);
    outbox_ = it->second.output;
  } else {
    if (attempts_.size() >= options_.capacity) attempts_.clear();
    outbox_ = explore(message);
  }
  position_ = 0;
}

char MemoLearner::next(char input, int reward) {
  if (reward > 0 && prompt_) {
    auto first = emitted_.find_first_not_of(kSilence);
    if (first != std::string::npos) {
      auto last = emitted_.find_last_not_of(kSilence);
      store(*prompt_, emitted_.substr(first, last - first + 1));
    }
    prompt_.reset();
  }
  window_ += input;
  if (window_.size() > options_.context) window_.erase(0, window_.size() - options_.context);
  if (auto message = parser_.push(input); message && message->speaker == Agent::Teacher) {
    on_teacher_message(*message);
  }
  char out = position_ < outbox_.size() ? outbox_[position_++] : kSilence;
  if (prompt_) emitted_ += out;
  return out;
}

void OracleLearner::on_episode(const EpisodeView& view) {
  view_ = view;
  quiet_ = 0;
  preamble_.clear();
  preamble_next_ = 0;
  solve_ = true;
  if (auto it = options_.preambles.find(view.index); it != options_.preambles.end()) {
    preamble_ = it->second.lines;
    solve_ = it->second.then_solve;
  }
  activation_.reset();
  utterances_used_ = 0;
}

char OracleLearner::next(char input, int) {
  parser_.push(input);
  if (position_ < outbox_.size()) {
    quiet_ = 0;
    return outbox_[position_++];
  }
  if (input == kSilence && !parser_.mid_message()) {
    ++quiet_;
  } else {
    quiet_ = 0;
  }
  if (quiet_ < options_.quiet) return kSilence;
  auto message = decide();
  if (!message || message->empty()) return kSilence;
  outbox_ = std::move(*message);
  position_ = 0;
  quiet_ = 0;
  return outbox_[position_++];
}

std::optional<std::string> OracleLearner::decide() {
  if (!view_.teacher || view_.teacher->finished()) return std::nullopt;
  const auto& teacher = *view_.teacher;
  const auto& progress = teacher.progress();
  const auto& steps = view_.instance->steps;
  if (progress.step >= steps.size()) return std::nullopt;
  const Step& step = steps[progress.step];
  const bool waiting_on_learner =
      std::holds_alternative<ExpectOutputStep>(step) || std::holds_alternative<ExpectWorldStep>(step);
  if (!waiting_on_learner) return std::nullopt;

  if (preamble_next_ < preamble_.size()) return preamble_[preamble_next_++];
  if (!solve_) return std::nullopt;

  const std::pair key{progress.step, progress.activated_at};
  if (activation_ != key) {
    activation_ = key;
    spoke_output_ = false;
    plan_.clear();
    plan_next_ = 0;
    planned_ = false;
    actions_seen_ = 0;
    for (const auto& e : teacher.events()) actions_seen_ += e.kind == EpisodeEvent::Kind::EnvAction;
  }

  if (const auto* output = std::get_if<ExpectOutputStep>(&step)) {
    if (spoke_output_) return std::nullopt;
    spoke_output_ = true;
    return output->alternatives.front() + ".";
  }
  return world_move(std::get<ExpectWorldStep>(step), progress);
}

std::optional<std::string> OracleLearner::world_move(const ExpectWorldStep& step, const Progress&) {
  const auto& teacher = *view_.teacher;
  bool failed = false;
  std::size_t actions = 0;
  std::size_t utterances = 0;
  const EpisodeEvent* last_utterance = nullptr;
  for (const auto& e : teacher.events()) {
    if (e.kind == EpisodeEvent::Kind::EnvAction) {
      if (actions >= actions_seen_ && !e.effected) failed = true;
      ++actions;
    }
    if (e.kind == EpisodeEvent::Kind::TeacherSaid || e.kind == EpisodeEvent::Kind::HowtoAnswered) {
      ++utterances;
      last_utterance = &e;
    }
  }
  actions_seen_ = actions;

  if (!planned_) {
    planned_ = true;
    std::optional<std::vector<EnvCommand>> verbatim;
    if (last_utterance && utterances > utterances_used_) {
      verbatim = parse_instructions(view_.instance->lexicon.inverse().apply(last_utterance->text));
    }
    utterances_used_ = utterances;
    plan_ = verbatim ? std::move(*verbatim) : plan_for(step.predicate, *view_.world).value_or(std::vector<EnvCommand>{});
    plan_next_ = 0;
  } else if (failed || plan_next_ >= plan_.size()) {
    plan_ = plan_for(step.predicate, *view_.world).value_or(std::vector<EnvCommand>{});
    plan_next_ = 0;
  }
  if (plan_next_ >= plan_.size()) return std::nullopt;
  return "@E: " + command_text(plan_[plan_next_++]) + ".";
}

char ReplayLearner::next(char input, int reward) {
  if (position_ >= frames_.size()) {
    if (!divergence_) divergence_ = position_;
    ++position_;
    return kSilence;
  }
  const auto& frame = frames_[position_++];
  if (!divergence_ && (frame.input != input || frame.reward != reward)) divergence_ = frame.tick;
  return frame.output;
}

std::unique_ptr<Learner> make_learner(std::string_view name, std::uint64_t seed) {
  if (name == "null") return std::make_unique<NullLearner>();
  if (name == "random") return std::make_unique<RandomLearner>(seed);
  if (name == "echo") return std::make_unique<EchoLearner>();
  if (name == "memo") return std::make_unique<MemoLearner>(seed);
  if (name == "oracle") return std::make_unique<OracleLearner>();
  return nullptr;
}

}  // namespace kinder
