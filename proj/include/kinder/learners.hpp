#pragma once

#include <cstdint>
#include <list>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "kinder/channel.hpp"
#include "kinder/learner.hpp"
#include "kinder/rng.hpp"

namespace kinder {

/// Always silent.
class NullLearner : public Learner {
public:
  char next(char, int) override { return kSilence; }
  std::string name() const override { return "null"; }
};

/// Uniform over the alphabet.
class RandomLearner : public Learner {
public:
  explicit RandomLearner(std::uint64_t seed = 0) : seed_(seed), rng_(seed) {}

  char next(char input, int reward) override;
  void on_session_start(std::uint64_t seed) override;
  std::string name() const override { return "random"; }

private:
  std::uint64_t seed_;
  Rng rng_;
};

/// Plays back a fixed output stream, then silence. Useful as a stub.
class ScriptedLearner : public Learner {
public:
  explicit ScriptedLearner(std::string outputs) : outputs_(std::move(outputs)) {}

  char next(char, int) override { return position_ < outputs_.size() ? outputs_[position_++] : kSilence; }
  std::string name() const override { return "scripted"; }

private:
  std::string outputs_;
  std::size_t position_ = 0;
};

/// Repeats what the Teacher said: the part after a "give order(s)" marker
/// is replayed as is, the part after "say"/"ask me" and anything else goes
/// back to the Teacher under "@T: ".
class EchoLearner : public Learner {
public:
  char next(char input, int reward) override;
  std::string name() const override { return "echo"; }

  /// The reply the echo policy gives to a Teacher message body.
  static std::string reply(std::string_view teacher_body);

private:
  StreamParser parser_{Direction::Input};
  std::string outbox_;
  std::size_t position_ = 0;
};

/// Lookup table from the last `context` input symbols (taken when a Teacher
/// message closes) to the output that earned a +1 afterwards. Unknown
/// contexts are explored with the echo policy first and random edits of it
/// later; known contexts replay the stored output.
class MemoLearner : public Learner {
public:
  struct Options {
    std::size_t context = 32;
    std::size_t capacity = 100000;
    double mutation_rate = 0.1;
  };

  explicit MemoLearner(std::uint64_t seed = 0) : MemoLearner(seed, Options{}) {}
  MemoLearner(std::uint64_t seed, Options options);

  char next(char input, int reward) override;
  void on_session_start(std::uint64_t seed) override;
  std::string name() const override { return "memo"; }

  std::size_t table_size() const noexcept { return table_.size(); }
  std::uint64_t hits() const noexcept { return hits_; }
  std::uint64_t stores() const noexcept { return stores_; }
  std::uint64_t evictions() const noexcept { return evictions_; }
  std::optional<std::string> lookup(const std::string& context) const;

private:
  void on_teacher_message(const Message& message);
  void store(const std::string& key, const std::string& output);
  std::string explore(const Message& message);

  Options options_;
  std::uint64_t seed_;
  Rng rng_;
  StreamParser parser_{Direction::Input};
  std::string window_;
  std::optional<std::string> prompt_;  // context key of the open attempt
  std::string emitted_;                // output since that prompt
  std::string outbox_;
  std::size_t position_ = 0;
  std::map<std::string, int> attempts_;

  std::list<std::string> lru_;  // most recent first
  struct Entry {
    std::string output;
    std::list<std::string>::iterator order;
  };
  std::unordered_map<std::string, Entry> table_;
  std::uint64_t hits_ = 0;
  std::uint64_t stores_ = 0;
  std::uint64_t evictions_ = 0;
};

/// Validation-only learner with side-door access to the running episode.
/// It waits for `quiet` silent input ticks, then acts on the Teacher's
/// current step: expected outputs are spoken verbatim, world goals are met
/// by following the Teacher's last instructions, else by planning.
class OracleLearner : public Learner, public EpisodeAware {
public:
  /// Lines spoken at the start of an episode before (or instead of)
  /// solving it.
  struct Preamble {
    std::vector<std::string> lines;
    bool then_solve = true;
  };
  struct Options {
    int quiet = 3;
    std::map<std::size_t, Preamble> preambles;  // by episode index
  };

  OracleLearner() : OracleLearner(Options{}) {}
  explicit OracleLearner(Options options) : options_(std::move(options)) {}

  char next(char input, int reward) override;
  void on_episode(const EpisodeView& view) override;
  std::string name() const override { return "oracle"; }

private:
  std::optional<std::string> decide();
  std::optional<std::string> world_move(const ExpectWorldStep& step, const Progress& progress);

  Options options_;
  EpisodeView view_;
  StreamParser parser_{Direction::Input};
  int quiet_ = 0;
  std::string outbox_;
  std::size_t position_ = 0;

  std::vector<std::string> preamble_;
  std::size_t preamble_next_ = 0;
  bool solve_ = true;

  // Bookkeeping for the active step.
  std::optional<std::pair<std::size_t, std::uint64_t>> activation_;
  bool spoke_output_ = false;
  std::vector<EnvCommand> plan_;
  std::size_t plan_next_ = 0;
  std::size_t actions_seen_ = 0;
  std::size_t utterances_used_ = 0;
  bool planned_ = false;
};

/// Feeds back a recorded output stream and notes where the inputs it is
/// given stop matching the recording.
class ReplayLearner : public Learner {
public:
  ReplayLearner(std::vector<TickFrame> frames, std::string name)
      : frames_(std::move(frames)), name_(std::move(name)) {}

  char next(char input, int reward) override;
  std::string name() const override { return name_; }

  std::optional<std::uint64_t> divergence() const noexcept { return divergence_; }

private:
  std::vector<TickFrame> frames_;
  std::string name_;
  std::size_t position_ = 0;
  std::optional<std::uint64_t> divergence_;
};

/// "null", "random", "echo", "memo" or "oracle"; nullptr for anything else.
std::unique_ptr<Learner> make_learner(std::string_view name, std::uint64_t seed);

}  // namespace kinder
