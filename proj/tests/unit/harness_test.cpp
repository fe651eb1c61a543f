#include <gtest/gtest.h>

#include <fstream>
#include <regex>
#include <set>

#include "kinder/harness.hpp"
#include "kinder/parallel.hpp"

using namespace kinder;

namespace {

const std::filesystem::path kData = KINDER_DATA_DIR;

std::vector<TaskScript> scripts() { return load_scripts(kData / "tasks"); }

class TempDir {
public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("kinder_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }
  void write(const std::string& name, const std::string& text) const { std::ofstream(path_ / name) << text; }

private:
  std::filesystem::path path_;
};

RunConfig run_config(const std::string& learner, std::uint64_t seed, std::uint64_t ticks) {
  RunConfig config;
  config.tasks = kData / "tasks";
  config.curriculum = kData / "curriculum.cfg";
  config.learner = learner;
  config.seed = seed;
  config.ticks = ticks;
  return config;
}

}  // namespace

TEST(Budget, ParsesTicksAndDurations) {
  EXPECT_EQ(parse_budget("20000").ticks, 20000u);
  EXPECT_FALSE(parse_budget("20000").wallclock());
  EXPECT_EQ(parse_budget("wallclock:30s").wall, std::chrono::seconds(30));
  EXPECT_EQ(parse_budget("wallclock:250ms").wall, std::chrono::milliseconds(250));
  EXPECT_EQ(parse_budget("wallclock:2m").wall, std::chrono::minutes(2));
  EXPECT_TRUE(parse_budget("wallclock:1s").wallclock());
  for (const char* bad : {"0", "", "abc", "-5", "wallclock:", "wallclock:5h", "wallclock:0s"}) {
    EXPECT_THROW(parse_budget(bad), HarnessError) << bad;
  }
}

TEST(Suite, LoadsAndRestrictsScripts) {
  TempDir dir;
  dir.write("dev.json", R"({"name": "dev", "tasks": ")" + (kData / "tasks").string() + R"(",
    "curriculum": ")" + (kData / "curriculum.cfg").string() + R"(",
    "scripts": ["repeat_word", "give_order"], "seed": 9, "budget": "5000", "p_timeoff": 0})");
  const auto suite = load_suite(dir.path() / "dev.json");
  EXPECT_EQ(suite.name, "dev");
  EXPECT_EQ(suite.seed, 9u);
  EXPECT_EQ(suite.budget.ticks, 5000u);
  EXPECT_EQ(suite.scripts.size(), 2u);
  ASSERT_EQ(suite.curriculum.levels.size(), 2u);
  EXPECT_EQ(suite.curriculum.levels[0].scripts, std::vector<std::string>{"repeat_word"});
  EXPECT_DOUBLE_EQ(suite.curriculum.p_timeoff, 0.0);
  EXPECT_TRUE(suite.transform.identity());
}

TEST(Suite, UnknownScriptOrBadJsonIsAnError) {
  TempDir dir;
  dir.write("a.json", R"({"tasks": ")" + (kData / "tasks").string() + R"(", "scripts": ["nope"]})");
  EXPECT_THROW(load_suite(dir.path() / "a.json"), HarnessError);
  dir.write("b.json", "{not json");
  EXPECT_THROW(load_suite(dir.path() / "b.json"), HarnessError);
  dir.write("c.json", R"({"seed": 1})");
  EXPECT_THROW(load_suite(dir.path() / "c.json"), HarnessError);
}

TEST(Suite, HeldoutBlockTransforms) {
  TempDir dir;
  dir.write("h.json", R"({"tasks": ")" + (kData / "tasks").string() + R"(",
    "scripts": ["repeat_word", "give_order"], "heldout": {"seed": 3}})");
  const auto suite = load_suite(dir.path() / "h.json");
  EXPECT_FALSE(suite.transform.identity());
  ASSERT_TRUE(suite.heldout);
  EXPECT_EQ(suite.heldout->seed, 3u);
}

TEST(Certify, OracleAcceptsShippedScript) {
  const auto all = scripts();
  const auto result = certify(all.front(), 0);
  EXPECT_TRUE(result.accepted) << result.failure;
  EXPECT_GT(result.ticks, 0u);
  EXPECT_LE(result.ticks, all.front().deadline);
}

TEST(Heldout, VocabularySkipsSingleLetters) {
  const auto words = teacher_vocabulary(scripts());
  EXPECT_FALSE(words.empty());
  for (const auto& w : words) EXPECT_GT(w.size(), 1u) << w;
  const std::set<std::string> set(words.begin(), words.end());
  for (const char* w : {"say", "give", "order", "move", "find"}) EXPECT_TRUE(set.contains(w)) << w;
}

TEST(Heldout, TransformIsABijectionAwayFromTheVocabulary) {
  const auto base = make_suite(scripts(), 1, {1000, {}});
  const auto heldout = make_heldout(base, 17);
  const auto vocabulary = teacher_vocabulary(base.scripts);
  const std::set<std::string> known(vocabulary.begin(), vocabulary.end());
  for (const auto& w : vocabulary) {
    const auto nonce = heldout.transform.lexicon.word(w);
    EXPECT_FALSE(known.contains(nonce)) << w << " -> " << nonce;
    EXPECT_EQ(heldout.transform.lexicon.inverse().word(nonce), w);
  }
  for (auto kind : kAllObjects) EXPECT_NE(heldout.transform.rename(kind), kind);
  EXPECT_NE(heldout.transform.world_salt, 0u);
  // deterministic in the seed
  EXPECT_EQ(make_heldout(base, 17).transform.lexicon, heldout.transform.lexicon);
  EXPECT_NE(make_heldout(base, 18).transform.lexicon, heldout.transform.lexicon);
}

TEST(Heldout, EveryScriptStillCertifies) {
  const auto base = make_suite(scripts(), 1, {1000, {}});
  const auto heldout = make_heldout(base, 5);
  const auto jobs = certify_jobs(heldout.scripts, 10);
  for (const auto& r : certify_parallel(jobs, heldout.transform)) {
    EXPECT_TRUE(r.accepted) << r.script << " seed " << r.seed << ": " << r.failure;
  }
}

TEST(Evaluate, EchoScoresOnDevelopmentSuite) {
  auto suite = make_suite(scripts(), 2, {6000, {}});
  suite.curriculum = load_curriculum(kData / "curriculum.cfg");
  EchoLearner echo;
  const auto result = evaluate(echo, suite);
  EXPECT_EQ(result.mode, "ticks");
  EXPECT_EQ(result.report.ticks, 6000u);
  EXPECT_GT(result.succeeded, 0);
  EXPECT_EQ(result.succeeded, result.report.succeeded);
  const auto json = to_json(result);
  EXPECT_EQ(json["schema"], "kinder.eval_result/1");
  EXPECT_EQ(json["succeeded"], result.succeeded);
}

TEST(Evaluate, NullLearnerSucceedsNowhere) {
  auto suite = make_suite(scripts(), 2, {5000, {}});
  NullLearner null;
  const auto result = evaluate(null, suite);
  EXPECT_EQ(result.succeeded, 0);
  EXPECT_GT(result.attempted, 0);
}

TEST(Evaluate, OracleSucceedsOnEveryFinishedInstance) {
  auto suite = make_suite(scripts(), 3, {40000, {}});
  suite.curriculum = load_curriculum(kData / "curriculum.cfg");
  OracleLearner oracle;
  const auto result = evaluate(oracle, suite);
  int finished = 0;
  for (const auto& e : result.report.episodes) finished += !e.timeoff() && e.finished;
  EXPECT_GT(finished, 100);
  EXPECT_EQ(result.succeeded, finished);
}

TEST(Evaluate, ReplayOfOracleRunGivesTheSameResult) {
  auto config = run_config("oracle", 13, 8000);
  SessionReport report;
  const auto recording = parse_recording(format_recording(record(config, &report)));
  const auto replayed = replay(recording);
  ASSERT_TRUE(replayed.ok());
  EXPECT_EQ(replayed.report.succeeded, report.succeeded);
  EXPECT_EQ(replayed.report.per_script, report.per_script);
  EXPECT_EQ(replayed.report.transcript_hash, report.transcript_hash);
}

TEST(Heldout, EnvironmentLanguageAndPrefixesSurvive) {
  const std::regex environment(
      "E: (you moved|you can't move|you turned (left|right)|you see (grass|a wall|water|an apple|a pear|a banana|a mug)"
      "|there is (an apple|a pear|a banana|a mug)|you picked the (apple|pear|banana|mug))\\.");
  const std::regex prefixed("[TER]: .*");
  for (std::optional<std::uint64_t> heldout : {std::optional<std::uint64_t>{}, std::optional<std::uint64_t>{9}}) {
    auto config = run_config("oracle", 4, 20000);
    config.heldout_seed = heldout;
    const auto recording = record(config);
    int environment_lines = 0;
    for (const auto& line : transcript(recording.frames)) {
      if (line.direction != Direction::Input) continue;
      EXPECT_TRUE(std::regex_match(line.raw, prefixed)) << line.raw;
      if (line.raw.starts_with("E: ")) {
        ++environment_lines;
        EXPECT_TRUE(std::regex_match(line.raw, environment)) << line.raw;
      }
    }
    EXPECT_GT(environment_lines, 20);
  }
}

TEST(Evaluate, WallclockBudget) {
  auto suite = make_suite(scripts(), 2, {});
  NullLearner null;
  const auto result = evaluate(null, suite, parse_budget("wallclock:50ms"));
  EXPECT_EQ(result.mode, "wallclock");
  EXPECT_GT(result.report.ticks, 0u);
}

TEST(Validate, ShippedScriptsPass) {
  const auto report = validate(kData / "tasks", 10);
  for (const auto& f : report.findings) ADD_FAILURE() << f.file << ":" << f.line << " " << f.kind << " " << f.message;
  EXPECT_EQ(report.scripts, static_cast<int>(scripts().size()));
  EXPECT_EQ(report.instances, report.scripts * 10);
}

TEST(Validate, ReportsSchemaErrorsWithLines) {
  TempDir dir;
  dir.write("broken.task", "task broken\nlevel 0\ndeadline 100\nsay \"hello\"\nexpect sideways\n");
  const auto report = validate(dir.path() / "broken.task", 2);
  ASSERT_EQ(report.findings.size(), 1u);
  EXPECT_EQ(report.findings[0].kind, "schema");
  EXPECT_EQ(report.findings[0].line, 5);
}

TEST(Validate, ReportsTightDeadlines) {
  TempDir dir;
  dir.write("tight.task",
            "task tight\nlevel 1\nworld gen 6 6\ndeadline 45\nsay \"give order @E: I look.\"\n"
            "expect output \"@E: I look\"\nreward +1\n");
  const auto report = validate(dir.path(), 3);
  // the oracle makes it in 39 ticks, short of the 1.5 margin
  ASSERT_EQ(report.findings.size(), 1u);
  EXPECT_EQ(report.findings[0].kind, "deadline");
}

TEST(Validate, DuplicateIdsAreFlagged) {
  TempDir dir;
  const std::string text = "task twin\nlevel 0\ndeadline 200\nsay \"say a.\"\nexpect output \"@T: a\"\nreward +1\n";
  dir.write("one.task", text);
  dir.write("two.task", text);
  const auto report = validate(dir.path(), 2);
  ASSERT_EQ(report.findings.size(), 1u);
  EXPECT_NE(report.findings[0].message.find("duplicate"), std::string::npos);
}

TEST(Recording, RoundTripsThroughText) {
  Recording recording;
  recording.config = run_config("echo", 3, 50);
  recording.config.heldout_seed = 4;
  recording.frames = {{0, 'T', 0, ' '}, {1, ' ', 1, '@'}, {2, '\\', -1, '.'}};
  recording.hash = "abc";
  const auto parsed = parse_recording(format_recording(recording));
  EXPECT_EQ(parsed.frames, recording.frames);
  EXPECT_EQ(parsed.hash, "abc");
  EXPECT_EQ(to_json(parsed.config), to_json(recording.config));
  EXPECT_FALSE(parsed.report);
  EXPECT_THROW(parse_recording("hello\n"), HarnessError);
}

TEST(Recording, ReplayReproducesReport) {
  SessionReport report;
  const auto recording = record(run_config("memo", 21, 4000), &report);
  const auto parsed = parse_recording(format_recording(recording));
  const auto result = replay(parsed);
  EXPECT_TRUE(result.ok());
  EXPECT_EQ(result.report, report);
  EXPECT_FALSE(result.divergence);
}

TEST(Recording, TamperedFrameIsLocated) {
  auto recording = record(run_config("echo", 8, 3000));
  // change what the learner heard at tick 500
  recording.frames[500].input = recording.frames[500].input == 'x' ? 'y' : 'x';
  const auto result = replay(recording);
  EXPECT_FALSE(result.ok());
  EXPECT_EQ(result.divergence, 500u);
}

TEST(Recording, TruncatedFileDivergesAtTheCut) {
  const auto recording = record(run_config("echo", 8, 3000));
  auto text = format_recording(recording);
  // cut in the middle of the frame for tick 1200
  const auto at = text.find("\n1200\t");
  ASSERT_NE(at, std::string::npos);
  text.resize(at + 4);
  const auto parsed = parse_recording(text);
  EXPECT_EQ(parsed.frames.size(), 1200u);
  EXPECT_TRUE(parsed.hash.empty());
  const auto result = replay(parsed);
  EXPECT_FALSE(result.ok());
  EXPECT_EQ(result.divergence, 1200u);
}

TEST(Parallel, CertificationMatchesSerial) {
  const auto all = scripts();
  const auto jobs = certify_jobs(all, 4);
  const auto serial = certify_serial(jobs);
  const auto parallel = certify_parallel(jobs);
  ASSERT_EQ(serial.size(), parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    EXPECT_EQ(serial[i].script, parallel[i].script);
    EXPECT_EQ(serial[i].seed, parallel[i].seed);
    EXPECT_EQ(serial[i].accepted, parallel[i].accepted);
    EXPECT_EQ(serial[i].ticks, parallel[i].ticks);
  }
}

TEST(Parallel, SessionsMatchSerial) {
  std::vector<RunConfig> configs;
  for (std::uint64_t seed = 0; seed < 6; ++seed) configs.push_back(run_config(seed % 2 ? "memo" : "random", seed, 1500));
  EXPECT_EQ(run_sessions_serial(configs), run_sessions_parallel(configs));
  EXPECT_GE(worker_threads(), 1);
}
