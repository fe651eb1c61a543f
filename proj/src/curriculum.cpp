#include "kinder/curriculum.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace kinder {

namespace {

std::string trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r");
  return std::string(text.substr(first, last - first + 1));
}

std::map<std::string, TaskScript> index_scripts(std::vector<TaskScript> scripts) {
  std::map<std::string, TaskScript> out;
  for (auto& script : scripts) {
    auto id = script.id;
    out.emplace(std::move(id), std::move(script));
  }
  return out;
}

}  // namespace

CurriculumConfig parse_curriculum(std::string_view text) {
  CurriculumConfig config;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  auto fail = [&](const std::string& message) {
    throw CurriculumError("curriculum line " + std::to_string(line_no) + ": " + message);
  };
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    std::istringstream words(line);
    std::string key;
    words >> key;
    if (key == "level") {
      LevelConfig level;
      if (!(words >> level.index)) fail("level needs an index");
      if (!config.levels.empty() && level.index <= config.levels.back().index) {
        fail("levels must be listed in increasing order");
      }
      config.levels.push_back(std::move(level));
    } else if (key == "window") {
      if (!(words >> config.window) || config.window < 1) fail("window must be a positive integer");
    } else if (key == "threshold") {
      if (!(words >> config.threshold) || config.threshold < 0 || config.threshold > 1) {
        fail("threshold must lie in [0, 1]");
      }
    } else if (key == "p_timeoff") {
      if (!(words >> config.p_timeoff) || config.p_timeoff < 0 || config.p_timeoff >= 1) {
        fail("p_timeoff must lie in [0, 1)");
      }
    } else if (key == "timeoff_ticks") {
      if (!(words >> config.timeoff_ticks) || config.timeoff_ticks == 0) fail("timeoff_ticks must be positive");
    } else {
      if (config.levels.empty()) fail("script '" + key + "' outside a level block");
      std::string extra;
      if (words >> extra) fail("one script id per line");
      config.levels.back().scripts.push_back(key);
    }
  }
  if (config.levels.empty()) throw CurriculumError("curriculum has no levels");
  return config;
}

CurriculumConfig load_curriculum(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CurriculumError("cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_curriculum(buffer.str());
}

CurriculumConfig default_curriculum(const std::vector<TaskScript>& scripts) {
  std::map<int, std::vector<std::string>> by_level;
  for (const auto& script : scripts) by_level[script.level].push_back(script.id);
  CurriculumConfig config;
  for (auto& [index, ids] : by_level) config.levels.push_back({index, std::move(ids)});
  return config;
}

Curriculum::Curriculum(std::vector<TaskScript> scripts, CurriculumConfig config, std::uint64_t seed,
                       Transform transform)
    : scripts_(index_scripts(std::move(scripts))),
      config_(std::move(config)),
      transform_(std::move(transform)),
      rng_(mix_seed({hash_text("curriculum"), seed})) {
  if (config_.levels.empty()) throw CurriculumError("curriculum has no levels");
  std::set<std::string> seen;
  for (const auto& level : config_.levels) {
    if (level.scripts.empty()) throw CurriculumError("level " + std::to_string(level.index) + " is empty");
    for (const auto& id : level.scripts) {
      if (!scripts_.contains(id)) throw CurriculumError("unknown script '" + id + "'");
      if (!seen.insert(id).second) throw CurriculumError("script '" + id + "' listed twice");
    }
  }
}

bool Curriculum::promotable() const {
  const auto& level = config_.levels[static_cast<std::size_t>(level_)];
  for (const auto& id : level.scripts) {
    auto it = history_.find(id);
    if (it == history_.end() || it->second.size() < static_cast<std::size_t>(config_.window)) return false;
    const auto wins = std::count(it->second.begin(), it->second.end(), true);
    if (static_cast<double>(wins) < config_.threshold * config_.window) return false;
  }
  return true;
}

Episode Curriculum::next_episode() {
  if (level_ + 1 < static_cast<int>(config_.levels.size()) && promotable()) ++level_;
  ++episodes_;
  if (config_.p_timeoff > 0 && rng_.chance(config_.p_timeoff)) {
    return Episode{std::nullopt, config_.timeoff_ticks};
  }
  const auto& level = config_.levels[static_cast<std::size_t>(level_)];
  const auto& id = level.scripts[rng_.below(level.scripts.size())];
  const auto& script = scripts_.at(id);
  constexpr int kAttempts = 16;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    const std::uint64_t seed = rng_.next();
    try {
      auto instance = instantiate(script, seed, transform_);
      issued_[instance.id()] = id;
      return Episode{std::move(instance), 0};
    } catch (const InstantiationError&) {
    }
  }
  throw CurriculumError("cannot instantiate '" + id + "'");
}

void Curriculum::record_outcome(const TaskInstance& instance, Verdict verdict) {
  auto it = issued_.find(instance.id());
  if (it == issued_.end()) throw CurriculumError("unknown instance '" + instance.id() + "'");
  if (verdict == Verdict::Pending) throw CurriculumError("outcome must be accept or reject");
  auto& history = history_[it->second];
  history.push_back(verdict == Verdict::Accept);
  while (history.size() > static_cast<std::size_t>(config_.window)) history.pop_front();
  issued_.erase(it);
}

CurriculumSnapshot Curriculum::snapshot() const {
  CurriculumSnapshot out;
  out.level = level_;
  out.episodes = episodes_;
  for (const auto& [id, history] : history_) out.history[id] = {history.begin(), history.end()};
  return out;
}

nlohmann::json to_json(const CurriculumSnapshot& snapshot) {
  nlohmann::json history = nlohmann::json::object();
  for (const auto& [id, outcomes] : snapshot.history) history[id] = outcomes;
  return {{"level", snapshot.level}, {"episodes", snapshot.episodes}, {"history", history}};
}

FixedSchedule::FixedSchedule(std::vector<TaskScript> scripts, std::vector<ScheduledEpisode> episodes,
                             Transform transform)
    : scripts_(index_scripts(std::move(scripts))),
      episodes_(std::move(episodes)),
      transform_(std::move(transform)) {
  for (const auto& episode : episodes_) {
    if (!scripts_.contains(episode.script)) throw CurriculumError("unknown script '" + episode.script + "'");
  }
}

Episode FixedSchedule::next_episode() {
  if (position_ >= episodes_.size()) return Episode{std::nullopt, ~std::uint64_t{0}};
  const auto& entry = episodes_[position_++];
  return Episode{instantiate(scripts_.at(entry.script), entry.seed, transform_, entry.overrides), 0};
}

void FixedSchedule::record_outcome(const TaskInstance& instance, Verdict verdict) {
  outcomes_.emplace_back(instance.id(), verdict);
}

}  // namespace kinder
