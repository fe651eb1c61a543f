#include "kinder/harness.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "kinder/parallel.hpp"

namespace kinder {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw HarnessError("cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::uint64_t to_u64(std::string_view text, std::string_view what) {
  std::uint64_t value = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || end != text.data() + text.size()) {
    throw HarnessError("bad " + std::string(what) + " '" + std::string(text) + "'");
  }
  return value;
}

/// Keeps only `ids`, dropping levels left empty.
CurriculumConfig restrict(CurriculumConfig config, const std::set<std::string>& ids) {
  std::vector<LevelConfig> levels;
  for (auto& level : config.levels) {
    std::erase_if(level.scripts, [&](const std::string& id) { return !ids.contains(id); });
    if (!level.scripts.empty()) levels.push_back(std::move(level));
  }
  config.levels = std::move(levels);
  return config;
}

std::string nonce_word(Rng& rng) {
  static constexpr std::string_view consonants = "bdfgklmnprstvz";
  static constexpr std::string_view vowels = "aeiou";
  std::string word;
  const int syllables = rng.between(2, 3);
  for (int i = 0; i < syllables; ++i) {
    word += consonants[rng.below(consonants.size())];
    word += vowels[rng.below(vowels.size())];
  }
  return word;
}

Transform draw_transform(const std::vector<std::string>& vocabulary, Rng& rng, const TransformSpec& spec) {
  Transform transform;
  if (spec.lexicon) {
    std::set<std::string> taken(vocabulary.begin(), vocabulary.end());
    std::vector<std::pair<std::string, std::string>> pairs;
    for (const auto& word : vocabulary) {
      std::string nonce;
      do {
        nonce = nonce_word(rng);
      } while (!taken.insert(nonce).second);
      pairs.emplace_back(word, nonce);
    }
    transform.lexicon = Lexicon::from_pairs(pairs);
  }
  if (spec.objects) {
    // a derangement, so that no object keeps its name
    do {
      for (std::size_t i = transform.objects.size(); i > 1; --i) {
        std::swap(transform.objects[i - 1], transform.objects[rng.below(i)]);
      }
    } while (std::ranges::any_of(kAllObjects, [&](ObjectKind k) { return transform.rename(k) == k; }));
  }
  if (spec.topography) {
    do {
      transform.world_salt = rng.next();
    } while (transform.world_salt == 0);
  }
  return transform;
}

}  // namespace

Budget parse_budget(std::string_view text) {
  Budget budget;
  constexpr std::string_view prefix = "wallclock:";
  if (!text.starts_with(prefix)) {
    budget.ticks = to_u64(text, "tick budget");
    if (budget.ticks == 0) throw HarnessError("tick budget must be positive");
    return budget;
  }
  auto rest = text.substr(prefix.size());
  std::size_t digits = 0;
  while (digits < rest.size() && rest[digits] >= '0' && rest[digits] <= '9') ++digits;
  const auto amount = to_u64(rest.substr(0, digits), "wall-clock budget");
  const auto unit = rest.substr(digits);
  if (unit == "ms") {
    budget.wall = std::chrono::milliseconds(amount);
  } else if (unit == "s" || unit.empty()) {
    budget.wall = std::chrono::seconds(amount);
  } else if (unit == "m") {
    budget.wall = std::chrono::minutes(amount);
  } else {
    throw HarnessError("bad wall-clock unit '" + std::string(unit) + "'");
  }
  if (budget.wall.count() == 0) throw HarnessError("wall-clock budget must be positive");
  return budget;
}

EvalSuite make_suite(std::vector<TaskScript> scripts, std::uint64_t seed, Budget budget) {
  EvalSuite suite;
  suite.curriculum = default_curriculum(scripts);
  suite.scripts = std::move(scripts);
  suite.seed = seed;
  suite.budget = budget;
  return suite;
}

EvalSuite parse_suite(const nlohmann::json& json, const std::filesystem::path& base) {
  try {
    EvalSuite suite;
    suite.name = json.value("name", std::string("suite"));
    suite.seed = json.value("seed", std::uint64_t{0});
    auto scripts = load_scripts(base / json.at("tasks").get<std::string>());
    if (json.contains("scripts")) {
      const auto wanted = json.at("scripts").get<std::set<std::string>>();
      for (const auto& id : wanted) {
        if (std::ranges::none_of(scripts, [&](const TaskScript& s) { return s.id == id; })) {
          throw HarnessError("suite names unknown script '" + id + "'");
        }
      }
      std::erase_if(scripts, [&](const TaskScript& s) { return !wanted.contains(s.id); });
    }
    std::set<std::string> ids;
    for (const auto& script : scripts) ids.insert(script.id);
    suite.curriculum = json.contains("curriculum")
                           ? restrict(load_curriculum(base / json.at("curriculum").get<std::string>()), ids)
                           : default_curriculum(scripts);
    if (json.contains("window")) suite.curriculum.window = json.at("window").get<int>();
    if (json.contains("threshold")) suite.curriculum.threshold = json.at("threshold").get<double>();
    if (json.contains("p_timeoff")) suite.curriculum.p_timeoff = json.at("p_timeoff").get<double>();
    if (json.contains("timeoff_ticks")) suite.curriculum.timeoff_ticks = json.at("timeoff_ticks").get<std::uint64_t>();
    if (json.contains("budget")) {
      const auto& budget = json.at("budget");
      suite.budget = parse_budget(budget.is_string() ? budget.get<std::string>() : std::to_string(budget.get<std::uint64_t>()));
    }
    suite.scripts = std::move(scripts);
    if (json.contains("heldout")) {
      const auto& h = json.at("heldout");
      TransformSpec spec;
      spec.seed = h.value("seed", std::uint64_t{0});
      spec.lexicon = h.value("lexicon", true);
      spec.objects = h.value("objects", true);
      spec.topography = h.value("topography", true);
      return make_heldout(suite, spec.seed, h.value("certify_seeds", 5), spec);
    }
    return suite;
  } catch (const nlohmann::json::exception& e) {
    throw HarnessError(std::string("suite: ") + e.what());
  }
}

EvalSuite load_suite(const std::filesystem::path& path) {
  nlohmann::json json;
  try {
    json = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw HarnessError(path.string() + ": " + e.what());
  }
  return parse_suite(json, path.parent_path());
}

CertifyResult certify(const TaskScript& script, std::uint64_t seed, const Transform& transform) {
  CertifyResult result{script.id, seed, false, 0, {}};
  try {
    FixedSchedule schedule({script}, {{script.id, seed, {}}}, transform);
    OracleLearner oracle;
    SessionConfig config;
    config.seed = seed;
    config.ticks = script.deadline + 64;
    auto report = run_session(config, schedule, oracle);
    if (report.aborted) {
      result.failure = "session aborted: " + report.abort_reason;
    } else if (report.episodes.empty() || !report.episodes.front().finished) {
      result.failure = "episode did not finish";
    } else {
      const auto& episode = report.episodes.front();
      result.ticks = episode.end - episode.start + 1;
      result.accepted = episode.verdict == Verdict::Accept;
      if (!result.accepted) result.failure = "oracle got " + std::string(verdict_name(episode.verdict));
    }
  } catch (const std::exception& e) {
    result.failure = e.what();
  }
  return result;
}

std::vector<std::string> teacher_vocabulary(const std::vector<TaskScript>& scripts) {
  std::set<std::string> words;
  auto add = [&](std::string_view text) {
    for (auto& word : teacher_words(text)) words.insert(std::move(word));
  };
  std::vector<EnvCommand> every{EnvCommand::move(), EnvCommand::turn_left(), EnvCommand::turn_right()};
  for (auto kind : kAllObjects) every.push_back(EnvCommand::pick(kind));
  add(verbalize(every));
  add("this is called");
  for (const auto& script : scripts) {
    for (std::uint64_t seed = 0; seed < 32; ++seed) {
      TaskInstance instance;
      try {
        instance = instantiate(script, seed);
      } catch (const InstantiationError&) {
        continue;
      }
      for (const auto& text : teacher_utterances(instance)) add(text);
      for (const auto& step : instance.steps) {
        if (const auto* output = std::get_if<ExpectOutputStep>(&step)) {
          for (const auto& alt : output->alternatives) add(alt);
        }
      }
      for (const auto& [request, answer] : instance.howto) add(request);
    }
  }
  std::vector<std::string> out;
  for (const auto& word : words) {
    if (word.size() > 1) out.push_back(word);
  }
  return out;
}

EvalSuite make_heldout(const EvalSuite& base, std::uint64_t seed, int certify_seeds, TransformSpec spec) {
  spec.seed = seed;
  const auto vocabulary = teacher_vocabulary(base.scripts);
  const auto jobs = certify_jobs(base.scripts, certify_seeds);
  Rng rng(mix_seed({seed, 0x4E1D}));
  constexpr int kAttempts = 8;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    auto transform = draw_transform(vocabulary, rng, spec);
    const auto results = certify_parallel(jobs, transform);
    if (std::ranges::all_of(results, [](const CertifyResult& r) { return r.accepted; })) {
      EvalSuite suite = base;
      suite.name = base.name + "-heldout";
      suite.transform = std::move(transform);
      suite.heldout = spec;
      return suite;
    }
  }
  throw HarnessError("no held-out transformation certified after " + std::to_string(kAttempts) + " draws");
}

nlohmann::json to_json(const EvalResult& result) {
  nlohmann::json per_task = nlohmann::json::object();
  for (const auto& [id, tally] : result.per_task) {
    per_task[id] = {{"attempted", tally.attempted}, {"succeeded", tally.succeeded}};
  }
  return {
      {"schema", "kinder.eval_result/1"},
      {"suite", result.suite},
      {"learner", result.learner},
      {"mode", result.mode},
      {"seed", result.seed},
      {"attempted", result.attempted},
      {"succeeded", result.succeeded},
      {"per_task", per_task},
      {"average_reward", result.average_reward},
      {"report", to_json(result.report)},
  };
}

EvalResult evaluate(Learner& learner, const EvalSuite& suite, std::optional<Budget> budget) {
  const Budget b = budget.value_or(suite.budget);
  Curriculum curriculum(suite.scripts, suite.curriculum, suite.seed, suite.transform);
  SessionConfig config;
  config.seed = suite.seed;
  if (b.wallclock()) {
    config.ticks = std::numeric_limits<std::uint64_t>::max();
    config.wall_limit = b.wall;
  } else {
    config.ticks = b.ticks;
  }
  EvalResult result;
  result.report = run_session(config, curriculum, learner);
  result.suite = suite.name;
  result.learner = result.report.learner;
  result.mode = result.report.mode;
  result.seed = suite.seed;
  result.attempted = result.report.attempted;
  result.succeeded = result.report.succeeded;
  result.per_task = result.report.per_script;
  result.average_reward = result.report.average_reward;
  return result;
}

ValidationReport validate(const std::filesystem::path& path, int seeds, double safety_factor) {
  ValidationReport report;
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_directory(path)) {
    for (const auto& entry : std::filesystem::directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().extension() == ".task") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(path);
  }

  std::vector<TaskScript> scripts;
  std::map<std::string, std::string> seen;
  for (const auto& file : files) {
    try {
      auto script = parse_script(read_file(file), file.string());
      if (auto [it, fresh] = seen.emplace(script.id, file.string()); !fresh) {
        report.findings.push_back({file.string(), script.line, "schema",
                                   "duplicate task id '" + script.id + "' (also in " + it->second + ")"});
        continue;
      }
      scripts.push_back(std::move(script));
    } catch (const ScriptError& e) {
      report.findings.push_back({e.source(), e.line(), "schema", e.message()});
    } catch (const HarnessError& e) {
      report.findings.push_back({file.string(), 0, "schema", e.what()});
    }
  }
  report.scripts = static_cast<int>(scripts.size());

  const auto jobs = certify_jobs(scripts, seeds);
  const auto results = certify_parallel(jobs);
  report.instances = static_cast<int>(results.size());
  for (std::size_t s = 0; s < scripts.size(); ++s) {
    const auto& script = scripts[s];
    int failures = 0;
    const CertifyResult* first = nullptr;
    std::uint64_t slowest = 0;
    for (std::size_t k = 0; k < static_cast<std::size_t>(seeds); ++k) {
      const auto& r = results[s * static_cast<std::size_t>(seeds) + k];
      if (!r.accepted) {
        ++failures;
        if (!first) first = &r;
      } else {
        slowest = std::max(slowest, r.ticks);
      }
    }
    if (first) {
      report.findings.push_back({script.source, script.line, "certification",
                                 std::to_string(failures) + "/" + std::to_string(seeds) + " seeds fail, first seed " +
                                     std::to_string(first->seed) + ": " + first->failure});
    }
    if (static_cast<double>(slowest) * safety_factor > static_cast<double>(script.deadline)) {
      std::ostringstream message;
      message << "oracle needs up to " << slowest << " ticks; deadline " << script.deadline
              << " is below the safety factor " << safety_factor;
      report.findings.push_back({script.source, script.line, "deadline", message.str()});
    }
  }
  return report;
}

nlohmann::json to_json(const RunConfig& config) {
  nlohmann::json json = {
      {"tasks", config.tasks.string()},
      {"learner", config.learner},
      {"seed", config.seed},
      {"ticks", config.ticks},
      {"persistent_world", config.persistent_world},
  };
  if (config.curriculum) json["curriculum"] = config.curriculum->string();
  if (config.p_timeoff) json["p_timeoff"] = *config.p_timeoff;
  if (config.heldout_seed) json["heldout_seed"] = *config.heldout_seed;
  return json;
}

RunConfig run_config_from_json(const nlohmann::json& json) {
  try {
    RunConfig config;
    config.tasks = json.at("tasks").get<std::string>();
    config.learner = json.at("learner").get<std::string>();
    config.seed = json.at("seed").get<std::uint64_t>();
    config.ticks = json.at("ticks").get<std::uint64_t>();
    config.persistent_world = json.value("persistent_world", false);
    if (json.contains("curriculum")) config.curriculum = json.at("curriculum").get<std::string>();
    if (json.contains("p_timeoff")) config.p_timeoff = json.at("p_timeoff").get<double>();
    if (json.contains("heldout_seed")) config.heldout_seed = json.at("heldout_seed").get<std::uint64_t>();
    return config;
  } catch (const nlohmann::json::exception& e) {
    throw HarnessError(std::string("run config: ") + e.what());
  }
}

std::unique_ptr<Curriculum> make_source(const RunConfig& config) {
  auto scripts = load_scripts(config.tasks);
  auto curriculum = config.curriculum ? load_curriculum(*config.curriculum) : default_curriculum(scripts);
  if (config.p_timeoff) curriculum.p_timeoff = *config.p_timeoff;
  Transform transform;
  if (config.heldout_seed) {
    transform = make_heldout(make_suite(scripts, config.seed, {}), *config.heldout_seed).transform;
  }
  return std::make_unique<Curriculum>(std::move(scripts), std::move(curriculum), config.seed, std::move(transform));
}

SessionConfig session_config(const RunConfig& config) {
  SessionConfig session;
  session.seed = config.seed;
  session.ticks = config.ticks;
  session.persistent_world = config.persistent_world;
  return session;
}

std::string format_recording(const Recording& recording) {
  std::string out = "# kinder replay v1\n";
  out += "# config " + to_json(recording.config).dump() + "\n";
  for (const auto& frame : recording.frames) out += format_frame(frame) + "\n";
  out += "# hash " + recording.hash + "\n";
  if (recording.report) out += "# report " + to_json(*recording.report).dump() + "\n";
  return out;
}

Recording parse_recording(std::string_view text) {
  Recording recording;
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != "# kinder replay v1") throw HarnessError("not a kinder replay file");
  if (!std::getline(in, line) || !line.starts_with("# config ")) throw HarnessError("replay file lacks a config line");
  try {
    recording.config = run_config_from_json(nlohmann::json::parse(line.substr(9)));
  } catch (const nlohmann::json::exception& e) {
    throw HarnessError(std::string("replay config: ") + e.what());
  }
  while (std::getline(in, line)) {
    if (line.starts_with("# hash ")) {
      recording.hash = line.substr(7);
    } else if (line.starts_with("# report ")) {
      try {
        recording.report = report_from_json(nlohmann::json::parse(line.substr(9)));
      } catch (const std::exception&) {
        // a cut-off trailer is treated like a missing one
      }
    } else if (!line.empty() && line.front() != '#') {
      try {
        recording.frames.push_back(parse_frame(line));
      } catch (const std::invalid_argument&) {
        break;  // truncated mid-line
      }
    }
  }
  return recording;
}

Recording read_recording(const std::filesystem::path& path) { return parse_recording(read_file(path)); }

Recording record(const RunConfig& config, SessionReport* report) {
  auto source = make_source(config);
  auto learner = make_learner(config.learner, config.seed);
  if (!learner) throw HarnessError("unknown learner '" + config.learner + "'");
  Recording recording;
  recording.config = config;
  auto result = run_session(session_config(config), *source, *learner, &recording.frames);
  recording.hash = result.transcript_hash;
  recording.report = result;
  if (report) *report = std::move(result);
  return recording;
}

ReplayResult replay(const Recording& recording) {
  auto source = make_source(recording.config);
  ReplayLearner learner(recording.frames, recording.config.learner);
  ReplayResult result;
  result.report = run_session(session_config(recording.config), *source, learner);
  result.divergence = learner.divergence();
  result.hash_matches = !recording.hash.empty() && recording.hash == result.report.transcript_hash;
  result.report_matches = recording.report && *recording.report == result.report;
  return result;
}

}  // namespace kinder
