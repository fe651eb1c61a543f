#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kinder/curriculum.hpp"
#include "kinder/learners.hpp"
#include "kinder/session.hpp"
#include "kinder/tasks.hpp"

namespace kinder {

class HarnessError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// "20000" runs for that many ticks; "wallclock:30s" (also ms, m) runs for
/// that much wall-clock time.
struct Budget {
  std::uint64_t ticks = 0;
  std::chrono::nanoseconds wall{0};

  bool wallclock() const noexcept { return wall.count() > 0; }
};

Budget parse_budget(std::string_view text);

/// How a held-out suite differs from its base.
struct TransformSpec {
  std::uint64_t seed = 0;
  bool lexicon = true;
  bool objects = true;
  bool topography = true;
};

struct EvalSuite {
  std::string name = "suite";
  std::vector<TaskScript> scripts;
  CurriculumConfig curriculum;
  Transform transform;
  std::optional<TransformSpec> heldout;
  std::uint64_t seed = 0;
  Budget budget{20000, {}};
};

/// Suite file (JSON): tasks directory, optional curriculum file, optional
/// script subset, seed, budget, curriculum overrides and an optional
/// held-out transformation. Paths are relative to the suite file.
EvalSuite load_suite(const std::filesystem::path& path);
EvalSuite parse_suite(const nlohmann::json& json, const std::filesystem::path& base);
/// A suite over `scripts` with the default curriculum.
EvalSuite make_suite(std::vector<TaskScript> scripts, std::uint64_t seed, Budget budget);

struct CertifyResult {
  std::string script;
  std::uint64_t seed = 0;
  bool accepted = false;
  std::uint64_t ticks = 0;  // episode length under the oracle
  std::string failure;
};

/// Runs the oracle on one (script, seed) instance.
CertifyResult certify(const TaskScript& script, std::uint64_t seed, const Transform& transform = {});

/// Collects the Teacher-language vocabulary of `scripts` (single letters
/// left out) from sample instances.
std::vector<std::string> teacher_vocabulary(const std::vector<TaskScript>& scripts);

/// Applies a lexicon bijection, object renaming and a topography reseed,
/// then re-certifies every script on `certify_seeds` seeds; draws a new
/// transformation when certification fails.
EvalSuite make_heldout(const EvalSuite& base, std::uint64_t seed, int certify_seeds = 5,
                       TransformSpec spec = {});

struct EvalResult {
  std::string suite;
  std::string learner;
  std::string mode;
  std::uint64_t seed = 0;
  int attempted = 0;
  int succeeded = 0;
  std::map<std::string, ScriptTally> per_task;
  double average_reward = 0;
  SessionReport report;
};

nlohmann::json to_json(const EvalResult& result);

/// One continuous session over the suite's curriculum. Every attempt counts.
EvalResult evaluate(Learner& learner, const EvalSuite& suite, std::optional<Budget> budget = std::nullopt);

struct Finding {
  std::string file;
  int line = 0;
  std::string kind;  // "schema", "certification" or "deadline"
  std::string message;
};

struct ValidationReport {
  std::vector<Finding> findings;
  int scripts = 0;
  int instances = 0;

  bool ok() const noexcept { return findings.empty(); }
};

/// Lints every `*.task` file (or a single file), certifies each script on
/// `seeds` seeds and checks that the slowest oracle run times
/// `safety_factor` fits the deadline.
ValidationReport validate(const std::filesystem::path& path, int seeds = 100, double safety_factor = 1.5);

/// What a recorded run needs to be rebuilt.
struct RunConfig {
  std::filesystem::path tasks;
  std::optional<std::filesystem::path> curriculum;
  std::string learner = "null";
  std::uint64_t seed = 0;
  std::uint64_t ticks = 10000;
  std::optional<double> p_timeoff;
  std::optional<std::uint64_t> heldout_seed;
  bool persistent_world = false;
};

nlohmann::json to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& json);

/// Curriculum described by `config` (held-out when asked).
std::unique_ptr<Curriculum> make_source(const RunConfig& config);
SessionConfig session_config(const RunConfig& config);

struct Recording {
  RunConfig config;
  std::vector<TickFrame> frames;
  std::string hash;
  std::optional<SessionReport> report;
};

std::string format_recording(const Recording& recording);
/// Tolerates truncation; throws HarnessError when the header is unusable.
Recording parse_recording(std::string_view text);
Recording read_recording(const std::filesystem::path& path);

/// Runs `config` with a fresh learner and records it.
Recording record(const RunConfig& config, SessionReport* report = nullptr);

struct ReplayResult {
  SessionReport report;
  bool hash_matches = false;
  bool report_matches = false;
  std::optional<std::uint64_t> divergence;  // first tick that differs

  bool ok() const noexcept { return hash_matches && report_matches && !divergence; }
};

ReplayResult replay(const Recording& recording);

}  // namespace kinder
