#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "kinder/curriculum.hpp"
#include "kinder/learners.hpp"
#include "kinder/session.hpp"

namespace kinder::testing {

/// A dialogue fixture: the episodes to run, what the oracle says first in
/// each, and the expected transcript. "..." in the transcript stands for any
/// run of messages.
struct Golden {
  std::string name;
  std::vector<ScheduledEpisode> episodes;
  std::map<std::size_t, OracleLearner::Preamble> preambles;
  std::uint64_t ticks = 0;
  std::vector<std::string> pattern;
};

Golden parse_golden(const std::string& text, const std::string& name);
Golden load_golden(const std::filesystem::path& path);
std::vector<std::filesystem::path> golden_files(const std::filesystem::path& dir);

bool matches(const std::vector<std::string>& pattern, const std::vector<std::string>& lines);

struct GoldenRun {
  bool matched = false;
  std::vector<std::string> lines;
  std::vector<TickFrame> frames;
  SessionReport report;
};

GoldenRun run_golden(const Golden& golden, const std::vector<TaskScript>& scripts);

}  // namespace kinder::testing
