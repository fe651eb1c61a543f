// One line per acceptance criterion; exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <deque>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "enumerate.hpp"
#include "golden.hpp"
#include "kinder/gateway.hpp"
#include "kinder/harness.hpp"
#include "kinder/parallel.hpp"

using namespace kinder;

namespace {

const std::filesystem::path kData = KINDER_DATA_DIR;
const std::filesystem::path kGolden = KINDER_GOLDEN_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fixed(double value, int digits = 2) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(digits);
  out << value;
  return out.str();
}

const std::vector<TaskScript>& shipped() {
  static const auto scripts = load_scripts(kData / "tasks");
  return scripts;
}

RunConfig run_config(const std::string& learner, std::uint64_t seed, std::uint64_t ticks) {
  RunConfig config;
  config.tasks = kData / "tasks";
  config.curriculum = kData / "curriculum.cfg";
  config.learner = learner;
  config.seed = seed;
  config.ticks = ticks;
  return config;
}

Outcome golden_transcripts() {
  const auto start = std::chrono::steady_clock::now();
  int matched = 0;
  std::string failed;
  const auto files = testing::golden_files(kGolden / "dialogues");
  for (const auto& file : files) {
    const auto run = testing::run_golden(testing::load_golden(file), shipped());
    if (run.matched && !run.report.aborted) {
      ++matched;
    } else {
      failed += " " + file.stem().string();
    }
  }
  const double elapsed = seconds_since(start);
  const bool pass = !files.empty() && matched == static_cast<int>(files.size()) && elapsed < 10;
  return {pass, std::to_string(matched) + "/" + std::to_string(files.size()) + " dialogues match in " +
                    fixed(elapsed) + " s (limit 10 s)" + (failed.empty() ? "" : ", failed:" + failed)};
}

Outcome determinism() {
  const char* learners[] = {"random", "echo", "memo", "oracle", "null"};
  std::mt19937_64 rng(20240601);
  std::vector<RunConfig> configs;
  for (int i = 0; i < 100; ++i) {
    auto config = run_config(learners[rng() % 5], rng() % 1000000, 1000 + rng() % 3000);
    if (rng() % 4 == 0) config.heldout_seed = rng() % 1000;
    if (rng() % 4 == 0) config.p_timeoff = 0.3;
    configs.push_back(config);
  }
  // once serially, once spread over threads; both must agree run for run
  const auto first = run_sessions_serial(configs);
  const auto second = run_sessions_parallel(configs);
  int hash_mismatches = 0;
  int replay_failures = 0;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    if (first[i].transcript_hash != second[i].transcript_hash || !(first[i] == second[i])) ++hash_mismatches;
    SessionReport recorded;
    const auto recording = parse_recording(format_recording(record(configs[i], &recorded)));
    const auto replayed = replay(recording);
    if (!replayed.ok() || !(replayed.report == recorded) || !(recorded == first[i])) ++replay_failures;
  }
  return {hash_mismatches == 0 && replay_failures == 0,
          "100 sessions: " + std::to_string(hash_mismatches) + " hash mismatches, " +
              std::to_string(replay_failures) + " replay failures"};
}

Outcome certification() {
  const auto start = std::chrono::steady_clock::now();
  const auto jobs = certify_jobs(shipped(), 100);
  const auto results = certify_parallel(jobs);
  int accepted = 0;
  std::string first_failure;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    if (r.accepted && r.ticks <= jobs[i].script->deadline) {
      ++accepted;
    } else if (first_failure.empty()) {
      first_failure = ", first failure " + r.script + " seed " + std::to_string(r.seed) + ": " + r.failure;
    }
  }
  const double elapsed = seconds_since(start);
  return {accepted == static_cast<int>(results.size()) && elapsed < 120,
          std::to_string(accepted) + "/" + std::to_string(results.size()) + " instances accepted (" +
              std::to_string(shipped().size()) + " scripts x 100 seeds) in " + fixed(elapsed) + " s" +
              first_failure};
}

Outcome world_equivalence() {
  const auto start = std::chrono::steady_clock::now();
  const auto stats = testing::enumerate_parallel(4, 4);
  std::string detail = std::to_string(stats.roots) + " start poses, " + std::to_string(stats.states) +
                       " states, " + std::to_string(stats.checks) + " checks, " +
                       std::to_string(stats.mismatches) + " mismatches in " + fixed(seconds_since(start)) + " s";
  if (!stats.examples.empty()) detail += ", e.g. " + stats.examples.front();
  return {stats.mismatches == 0 && stats.checks > 0, detail};
}

/// Two-sided two-proportion z-test. A pooled proportion of 0 or 1 gives no
/// evidence of a difference.
double two_proportion_p(int s1, int n1, int s2, int n2) {
  if (n1 == 0 || n2 == 0) return 1.0;
  const double pooled = static_cast<double>(s1 + s2) / (n1 + n2);
  const double variance = pooled * (1 - pooled) * (1.0 / n1 + 1.0 / n2);
  if (variance <= 0) return 1.0;
  const double z = (static_cast<double>(s1) / n1 - static_cast<double>(s2) / n2) / std::sqrt(variance);
  return std::erfc(std::abs(z) / std::sqrt(2.0));
}

Outcome memorization_limit() {
  const auto start = std::chrono::steady_clock::now();
  auto dev = make_suite(shipped(), 1, {20000, {}});
  dev.curriculum = load_curriculum(kData / "curriculum.cfg");
  const auto heldout = make_heldout(dev, 7);
  auto score = [](const EvalSuite& suite, const char* name) {
    auto learner = make_learner(name, 3);
    return evaluate(*learner, suite);
  };
  const auto dev_memo = score(dev, "memo");
  const auto dev_random = score(dev, "random");
  const auto held_memo = score(heldout, "memo");
  const auto held_random = score(heldout, "random");
  const double p = two_proportion_p(held_memo.succeeded, held_memo.attempted, held_random.succeeded,
                                    held_random.attempted);
  const bool dev_ok = dev_memo.succeeded >= 10 * std::max(dev_random.succeeded, 1);
  const double elapsed = seconds_since(start);
  return {p > 0.05 && dev_ok && elapsed < 600,
          "dev memo " + std::to_string(dev_memo.succeeded) + "/" + std::to_string(dev_memo.attempted) +
              " vs random " + std::to_string(dev_random.succeeded) + "/" + std::to_string(dev_random.attempted) +
              "; held-out memo " + std::to_string(held_memo.succeeded) + "/" +
              std::to_string(held_memo.attempted) + " vs random " + std::to_string(held_random.succeeded) + "/" +
              std::to_string(held_random.attempted) + ", p = " + fixed(p, 3) + "; " + fixed(elapsed) + " s"};
}

// Promotion replica: level n+1 may only appear once every level-n script
// has a full window at the threshold.
struct GatingReplica {
  const CurriculumConfig& config;
  std::map<std::string, std::deque<bool>> history;
  int position = 0;

  bool level_done(int at) {
    for (const auto& id : config.levels[static_cast<std::size_t>(at)].scripts) {
      const auto& h = history[id];
      if (h.size() < static_cast<std::size_t>(config.window)) return false;
      if (std::count(h.begin(), h.end(), true) < config.threshold * config.window) return false;
    }
    return true;
  }
  // false when the level position moves without license
  bool on_episode(int new_position) {
    if (new_position == position) return true;
    if (new_position != position + 1 || !level_done(position)) return false;
    position = new_position;
    return true;
  }
  void on_outcome(const std::string& id, bool win) {
    auto& h = history[id];
    h.push_back(win);
    if (h.size() > static_cast<std::size_t>(config.window)) h.pop_front();
  }
};

Outcome metric_properties() {
  std::vector<std::string> problems;
  // average reward stays in [-1, 1]
  double widest = 0;
  for (const char* name : {"random", "echo", "memo", "oracle", "null"}) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const auto report = run_sessions_serial({run_config(name, seed, 6000)}).front();
      widest = std::max(widest, std::abs(report.average_reward));
    }
  }
  if (widest > 1) problems.push_back("average reward " + fixed(widest, 3));

  // more budget never means fewer tasks succeeded
  int monotone_breaks = 0;
  for (const char* name : {"echo", "memo", "oracle"}) {
    int previous = -1;
    for (std::uint64_t budget : {1000u, 2500u, 5000u, 10000u, 20000u}) {
      auto suite = make_suite(shipped(), 4, {budget, {}});
      suite.curriculum = load_curriculum(kData / "curriculum.cfg");
      auto learner = make_learner(name, 4);
      const int succeeded = evaluate(*learner, suite).succeeded;
      if (succeeded < previous) ++monotone_breaks;
      previous = succeeded;
    }
  }
  if (monotone_breaks > 0) problems.push_back(std::to_string(monotone_breaks) + " budget monotonicity breaks");

  // gating over a 10^4-episode log with synthetic outcomes
  const auto config = load_curriculum(kData / "curriculum.cfg");
  Curriculum curriculum(shipped(), config, 2024);
  GatingReplica replica{config, {}, 0};
  std::mt19937_64 outcomes(11);
  int violations = 0;
  int promotions = 0;
  std::map<std::string, int> level_of;
  for (std::size_t i = 0; i < config.levels.size(); ++i) {
    for (const auto& id : config.levels[i].scripts) level_of[id] = static_cast<int>(i);
  }
  for (int i = 0; i < 10000; ++i) {
    const int before = curriculum.level_position();
    auto episode = curriculum.next_episode();
    if (!replica.on_episode(curriculum.level_position())) ++violations;
    promotions += curriculum.level_position() != before;
    // a finished level that is not promoted is also a violation
    if (curriculum.level_position() == before && before + 1 < static_cast<int>(config.levels.size()) &&
        replica.level_done(before)) {
      ++violations;
    }
    if (episode.timeoff()) continue;
    if (level_of.at(episode.instance->script_id) != curriculum.level_position()) ++violations;
    const bool win = std::uniform_real_distribution<>(0, 1)(outcomes) < 0.97;
    curriculum.record_outcome(*episode.instance, win ? Verdict::Accept : Verdict::Reject);
    replica.on_outcome(episode.instance->script_id, win);
  }

  // and over the episode log of a real oracle session
  const auto session = run_sessions_serial({run_config("oracle", 5, 150000)}).front();
  GatingReplica from_log{config, {}, 0};
  std::map<int, int> position_of;
  for (std::size_t i = 0; i < config.levels.size(); ++i) position_of[config.levels[i].index] = static_cast<int>(i);
  int session_promotions = 0;
  for (const auto& episode : session.episodes) {
    if (episode.timeoff()) continue;
    const int position = position_of.at(episode.level);
    if (position != from_log.position) {
      if (!from_log.on_episode(position)) ++violations;
      ++session_promotions;
    }
    if (episode.finished) from_log.on_outcome(episode.script_id, episode.verdict == Verdict::Accept);
  }
  if (violations > 0) problems.push_back(std::to_string(violations) + " gating violations");
  std::string detail = "max |average reward| " + fixed(widest, 3) + ", " + std::to_string(monotone_breaks) +
                       " monotonicity breaks over 5 budgets x 3 learners, 10000-episode log with " +
                       std::to_string(promotions) + " promotions plus a " + std::to_string(session.episodes.size()) +
                       "-episode oracle session with " + std::to_string(session_promotions) + ", " +
                       std::to_string(violations) + " gating violations";
  return {problems.empty() && promotions > 0 && session_promotions > 0, detail};
}

Outcome gateway_transparency() {
  int identical = 0;
  int runs = 0;
  // the oracle reads the task instance in process, which the wire never carries
  for (const char* name : {"echo", "memo", "random", "null"}) {
    const auto config = run_config(name, 31, 4000);
    auto source = make_source(config);
    auto local = make_learner(name, config.seed);
    std::vector<TickFrame> frames;
    const auto expected = run_session(session_config(config), *source, *local, &frames);

    Gateway gateway(session_config(config), make_source(config), nullptr);
    gateway.start();
    auto remote = make_learner(name, config.seed);
    const auto run = drive_remote_learner("127.0.0.1", gateway.port(), *remote);
    auto report = gateway.wait();
    report.learner = expected.learner;  // the seat is named "remote"
    ++runs;
    if (report.transcript_hash == expected.transcript_hash && gateway.frames() == frames && run.frames == frames &&
        report == expected) {
      ++identical;
    }
  }
  return {identical == runs,
          std::to_string(identical) + "/" + std::to_string(runs) + " learners bit-identical over the wire"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"golden transcripts", golden_transcripts},
      {"determinism and replay", determinism},
      {"oracle certification", certification},
      {"world model equivalence", world_equivalence},
      {"memorization does not generalize", memorization_limit},
      {"metric properties", metric_properties},
      {"gateway transparency", gateway_transparency},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome outcome;
    try {
      outcome = criteria[i].second();
    } catch (const std::exception& e) {
      outcome = {false, std::string("threw: ") + e.what()};
    }
    failures += !outcome.pass;
    std::cout << (outcome.pass ? "PASS" : "FAIL") << " [" << i + 1 << "] " << criteria[i].first << ": "
              << outcome.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
