// kinder: run, evaluate, replay, validate and serve sessions.
//
// Exit codes: 0 ok, 1 usage, 2 validation failure, 3 session abort.
// KINDER_LOG sets the log level (trace, debug, info, warn, error, off).

#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "kinder/gateway.hpp"
#include "kinder/harness.hpp"

using namespace kinder;

namespace {

enum Exit { kOk = 0, kUsage = 1, kInvalid = 2, kAborted = 3 };

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("kinder");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* level = std::getenv("KINDER_LOG")) spdlog::set_level(spdlog::level::from_str(level));
}

std::unique_ptr<Learner> learner_or_throw(const std::string& name, std::uint64_t seed) {
  auto learner = make_learner(name, seed);
  if (!learner) throw CLI::ValidationError("--learner", "unknown learner '" + name + "'");
  return learner;
}

struct RunArgs {
  RunConfig config;
  std::string curriculum;
  std::string record;
  std::string heldout;
};

int run(const RunArgs& args) {
  auto config = args.config;
  if (!args.curriculum.empty()) config.curriculum = args.curriculum;
  if (!args.heldout.empty()) config.heldout_seed = std::stoull(args.heldout);
  learner_or_throw(config.learner, config.seed);
  spdlog::info("running {} for {} ticks, seed {}", config.learner, config.ticks, config.seed);
  SessionReport report;
  const auto recording = record(config, &report);
  if (!args.record.empty()) {
    std::ofstream out(args.record);
    if (!out) throw HarnessError("cannot write " + args.record);
    out << format_recording(recording);
    spdlog::info("recorded {} frames to {}", recording.frames.size(), args.record);
  }
  std::cout << to_json(report).dump(2) << "\n";
  return report.aborted ? kAborted : kOk;
}

int eval(const std::string& suite_path, const std::string& learner_name, std::uint64_t seed,
         const std::string& budget) {
  const auto suite = load_suite(suite_path);
  auto learner = learner_or_throw(learner_name, seed);
  std::optional<Budget> override;
  if (!budget.empty()) override = parse_budget(budget);
  spdlog::info("evaluating {} on suite {}", learner_name, suite.name);
  const auto result = evaluate(*learner, suite, override);
  std::cout << to_json(result).dump(2) << "\n";
  return result.report.aborted ? kAborted : kOk;
}

int replay_file(const std::string& path) {
  const auto recording = read_recording(path);
  const auto result = replay(recording);
  nlohmann::json out = {
      {"frames", recording.frames.size()},
      {"hash_matches", result.hash_matches},
      {"report_matches", result.report_matches},
      {"divergence", result.divergence ? nlohmann::json(*result.divergence) : nlohmann::json(nullptr)},
      {"report", to_json(result.report)},
  };
  std::cout << out.dump(2) << "\n";
  if (!result.ok()) {
    spdlog::error("replay of {} diverges{}", path,
                  result.divergence ? " at tick " + std::to_string(*result.divergence) : std::string());
    return kInvalid;
  }
  return kOk;
}

int validate_path(const std::string& path, int seeds, double safety) {
  const auto report = validate(path, seeds, safety);
  for (const auto& f : report.findings) std::cout << f.file << ":" << f.line << ": " << f.kind << ": " << f.message << "\n";
  std::cout << report.scripts << " scripts, " << report.instances << " instances, " << report.findings.size()
            << " findings\n";
  return report.ok() ? kOk : kInvalid;
}

int heldout(const std::string& suite_path, std::uint64_t seed, const std::string& out_path) {
  std::ifstream in(suite_path);
  if (!in) throw HarnessError("cannot read " + suite_path);
  auto json = nlohmann::json::parse(in, nullptr, false);
  if (json.is_discarded()) throw HarnessError(suite_path + ": not JSON");
  const auto base_dir = std::filesystem::absolute(suite_path).parent_path();
  for (const char* key : {"tasks", "curriculum"}) {
    if (json.contains(key)) json[key] = std::filesystem::weakly_canonical(base_dir / json[key].get<std::string>()).string();
  }
  json["heldout"] = {{"seed", seed}};
  // loading certifies the transformed scripts
  const auto suite = parse_suite(json, base_dir);
  spdlog::info("held-out suite {} certified, {} scripts", suite.name, suite.scripts.size());
  if (out_path.empty()) {
    std::cout << json.dump(2) << "\n";
  } else {
    std::ofstream(out_path) << json.dump(2) << "\n";
  }
  return kOk;
}

struct ServeArgs {
  RunArgs run;
  GatewayConfig gateway;
  int ws_port = -1;
  double speed = -1;
  std::string local;
};

int serve(const ServeArgs& args) {
  auto config = args.run.config;
  if (!args.run.curriculum.empty()) config.curriculum = args.run.curriculum;
  if (!args.run.heldout.empty()) config.heldout_seed = std::stoull(args.run.heldout);
  auto gateway_config = args.gateway;
  if (args.ws_port >= 0) gateway_config.ws_port = static_cast<std::uint16_t>(args.ws_port);
  if (args.speed >= 0) gateway_config.speed = args.speed;
  std::unique_ptr<Learner> local;
  if (!args.local.empty()) local = learner_or_throw(args.local, config.seed);
  Gateway gateway(session_config(config), make_source(config), std::move(local), gateway_config);
  gateway.start();
  std::cout << nlohmann::json{{"protocol", kProtocol},
                              {"port", gateway.port()},
                              {"ws_port", gateway.ws_port() ? nlohmann::json(*gateway.ws_port()) : nlohmann::json(nullptr)}}
                   .dump()
            << std::endl;
  spdlog::info("gateway listening on {}:{}", gateway_config.bind, gateway.port());
  const auto report = gateway.wait();
  std::cout << to_json(report).dump(2) << "\n";
  return report.aborted ? kAborted : kOk;
}

void add_run_options(CLI::App* cmd, RunArgs& args) {
  cmd->add_option("--tasks", args.config.tasks, "Directory of task scripts")->required()->check(CLI::ExistingPath);
  cmd->add_option("--curriculum", args.curriculum, "Curriculum file (default: one level per script level)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", args.config.seed, "Session seed");
  cmd->add_option("--ticks", args.config.ticks, "Tick budget")->check(CLI::PositiveNumber);
  cmd->add_option("--heldout-seed", args.heldout, "Apply the held-out transformation drawn from this seed");
  cmd->add_option("--p-timeoff", args.config.p_timeoff, "Override the time-off probability")->check(CLI::Range(0.0, 0.999));
  cmd->add_flag("--persistent-world", args.config.persistent_world, "Keep the world between tasks");
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"kinder: a scripted teacher, a grid world and a learner talking one symbol per tick"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run_cmd = app.add_subcommand("run", "Run one session and print its report");
  add_run_options(run_cmd, run_args);
  run_cmd->add_option("--learner", run_args.config.learner, "null, random, echo, memo or oracle")->required();
  run_cmd->add_option("--record", run_args.record, "Write a replay file");

  std::string suite;
  std::string learner;
  std::string budget;
  std::uint64_t learner_seed = 0;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a learner on a suite");
  eval_cmd->add_option("--suite", suite, "Suite JSON file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--learner", learner, "null, random, echo, memo or oracle")->required();
  eval_cmd->add_option("--budget", budget, "Ticks, or wallclock:<n>[ms|s|m]; defaults to the suite's");
  eval_cmd->add_option("--learner-seed", learner_seed, "Seed for learners that draw random numbers");

  std::string replay_path;
  auto* replay_cmd = app.add_subcommand("replay", "Re-run a recording and check it reproduces");
  replay_cmd->add_option("file", replay_path, "Replay file")->required()->check(CLI::ExistingFile);

  std::string validate_target;
  int seeds = 100;
  double safety = 1.5;
  auto* validate_cmd = app.add_subcommand("validate", "Lint and certify task scripts");
  validate_cmd->add_option("path", validate_target, "Directory or .task file")->required()->check(CLI::ExistingPath);
  validate_cmd->add_option("--seeds", seeds, "Seeds per script")->check(CLI::PositiveNumber);
  validate_cmd->add_option("--safety", safety, "Required deadline margin over the oracle")->check(CLI::Range(1.0, 100.0));

  std::uint64_t heldout_seed = 0;
  std::string heldout_out;
  auto* heldout_cmd = app.add_subcommand("heldout", "Derive a certified held-out suite");
  heldout_cmd->add_option("--suite", suite, "Base suite JSON file")->required()->check(CLI::ExistingFile);
  heldout_cmd->add_option("--seed", heldout_seed, "Transformation seed")->required();
  heldout_cmd->add_option("--out", heldout_out, "Write the suite here instead of stdout");

  ServeArgs serve_args;
  serve_args.gateway.port = 7878;
  auto* serve_cmd = app.add_subcommand("serve", "Expose a session through the gateway");
  add_run_options(serve_cmd, serve_args.run);
  serve_cmd->add_option("--port", serve_args.gateway.port, "TCP port for newline-delimited records (0 picks one)");
  serve_cmd->add_option("--bind", serve_args.gateway.bind, "Address to listen on");
  serve_cmd->add_option("--ws-port", serve_args.ws_port, "Also serve WebSocket clients on this port");
  serve_cmd->add_option("--speed", serve_args.speed, "Ticks per second; 0 starts paused");
  serve_cmd->add_option("--learner", serve_args.local, "Run this learner in process instead of waiting for one");
  serve_cmd->add_flag("--paused", serve_args.gateway.start_paused, "Start paused");
  serve_cmd->add_flag("--suspend-machine-budget", serve_args.gateway.suspend_machine_budget,
                      "Lift the wall-clock budget for machine learners");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*run_cmd) return run(run_args);
    if (*eval_cmd) return eval(suite, learner, learner_seed, budget);
    if (*replay_cmd) return replay_file(replay_path);
    if (*validate_cmd) return validate_path(validate_target, seeds, safety);
    if (*heldout_cmd) return heldout(suite, heldout_seed, heldout_out);
    if (*serve_cmd) return serve(serve_args);
  } catch (const CLI::ValidationError& e) {
    spdlog::error("{}", e.what());
    return kUsage;
  } catch (const ScriptError& e) {
    spdlog::error("{}", e.what());
    return kInvalid;
  } catch (const CurriculumError& e) {
    spdlog::error("{}", e.what());
    return kInvalid;
  } catch (const SessionAbort& e) {
    spdlog::error("session aborted: {}", e.what());
    return kAborted;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kUsage;
  }
  return kUsage;
}
