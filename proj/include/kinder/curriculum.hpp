#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "kinder/rng.hpp"
#include "kinder/tasks.hpp"

namespace kinder {

/// What the session runs next: a task instance, or a time-off phase when
/// `instance` is empty.
struct Episode {
  std::optional<TaskInstance> instance;
  std::uint64_t timeoff_ticks = 0;

  bool timeoff() const noexcept { return !instance.has_value(); }
};

/// Anything that hands the session its episodes.
class EpisodeSource {
public:
  virtual ~EpisodeSource() = default;
  virtual Episode next_episode() = 0;
  /// Called once per finished task episode with an Accept or Reject.
  virtual void record_outcome(const TaskInstance& instance, Verdict verdict) = 0;
};

class CurriculumError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct LevelConfig {
  int index = 0;
  std::vector<std::string> scripts;
};

struct CurriculumConfig {
  std::vector<LevelConfig> levels;
  int window = 20;
  double threshold = 0.9;
  double p_timeoff = 0.1;
  std::uint64_t timeoff_ticks = 500;
};

/// Config file: `window`, `threshold`, `p_timeoff`, `timeoff_ticks` lines
/// followed by `level <n>` blocks listing one script id per line.
CurriculumConfig parse_curriculum(std::string_view text);
CurriculumConfig load_curriculum(const std::filesystem::path& path);
/// One level per distinct script level, in increasing order.
CurriculumConfig default_curriculum(const std::vector<TaskScript>& scripts);

struct CurriculumSnapshot {
  int level = 0;  // position in the level list, not the level's index
  std::uint64_t episodes = 0;
  std::map<std::string, std::vector<bool>> history;
};

class Curriculum : public EpisodeSource {
public:
  /// Throws CurriculumError for an empty level or an unknown script id.
  Curriculum(std::vector<TaskScript> scripts, CurriculumConfig config, std::uint64_t seed,
             Transform transform = {});

  Episode next_episode() override;
  /// Throws CurriculumError when `instance` was not issued by this curriculum.
  void record_outcome(const TaskInstance& instance, Verdict verdict) override;

  int level_position() const noexcept { return level_; }
  int level_index() const { return config_.levels[static_cast<std::size_t>(level_)].index; }
  bool promotable() const;
  const CurriculumConfig& config() const noexcept { return config_; }
  CurriculumSnapshot snapshot() const;

private:
  std::map<std::string, TaskScript> scripts_;
  CurriculumConfig config_;
  Transform transform_;
  Rng rng_;
  int level_ = 0;
  std::uint64_t episodes_ = 0;
  std::map<std::string, std::deque<bool>> history_;
  std::map<std::string, std::string> issued_;  // instance id -> script id
};

nlohmann::json to_json(const CurriculumSnapshot& snapshot);

/// A fixed list of episodes, then time off for good. Used by fixtures that
/// replay a known sequence of scenes.
struct ScheduledEpisode {
  std::string script;
  std::uint64_t seed = 0;
  Overrides overrides;
};

class FixedSchedule : public EpisodeSource {
public:
  FixedSchedule(std::vector<TaskScript> scripts, std::vector<ScheduledEpisode> episodes,
                Transform transform = {});

  Episode next_episode() override;
  void record_outcome(const TaskInstance& instance, Verdict verdict) override;

  const std::vector<std::pair<std::string, Verdict>>& outcomes() const noexcept { return outcomes_; }

private:
  std::map<std::string, TaskScript> scripts_;
  std::vector<ScheduledEpisode> episodes_;
  Transform transform_;
  std::size_t position_ = 0;
  std::vector<std::pair<std::string, Verdict>> outcomes_;
};

}  // namespace kinder
