#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "kinder/channel.hpp"
#include "kinder/world.hpp"

namespace kinder {

// ---------------------------------------------------------------------------
// Teacher language
// ---------------------------------------------------------------------------

/// Word-level bijection applied to every Teacher surface form. Text inside
/// an embedded "@E: " span is Environment language and is never touched, nor
/// are prefixes and punctuation. The default lexicon is the identity.
class Lexicon {
public:
  Lexicon() = default;

  /// Throws std::invalid_argument unless the pairs form a bijection.
  static Lexicon from_pairs(const std::vector<std::pair<std::string, std::string>>& pairs);

  std::string word(std::string_view word) const;
  std::string apply(std::string_view teacher_text) const;
  Lexicon inverse() const;
  bool identity() const noexcept { return forward_.empty(); }
  const std::map<std::string, std::string, std::less<>>& entries() const noexcept { return forward_; }

  bool operator==(const Lexicon&) const = default;

private:
  std::map<std::string, std::string, std::less<>> forward_;
};

/// Splits Teacher text into the words a lexicon may rewrite (Environment
/// spans and prefixes excluded, trailing punctuation stripped).
std::vector<std::string> teacher_words(std::string_view teacher_text);

// ---------------------------------------------------------------------------
// World predicates
// ---------------------------------------------------------------------------

struct CommandPattern {
  enum class Kind : std::uint8_t { Exact, AnyTurn, AnyPick };
  Kind kind = Kind::Exact;
  EnvCommand command;

  bool matches(const EnvCommand& candidate) const;
  bool operator==(const CommandPattern&) const = default;
};

struct WorldPredicate {
  enum class Kind : std::uint8_t { Holds, At, Faced, Executed, PositionChanged };
  Kind kind = Kind::Holds;
  std::optional<ObjectKind> object;  // empty means "any object"
  int count = 1;
  Cell cell;
  std::vector<CommandPattern> sequence;

  bool operator==(const WorldPredicate&) const = default;
};

class PredicateError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// holds(<obj|any>, n) | at(x, y) | faced(<obj|any>) |
/// executed(<phrase>, ...) | position_changed(n)
/// Phrases are Environment-language verbs: move, turn left, turn right,
/// turn (either way), look, pick the <obj>, pick any.
WorldPredicate parse_predicate(std::string_view text);
std::string format_predicate(const WorldPredicate& predicate);

// ---------------------------------------------------------------------------
// Episode event log
// ---------------------------------------------------------------------------

struct BodyState {
  Cell position;
  Heading heading = Heading::North;
  std::array<int, kAllObjects.size()> inventory{};
  std::optional<ObjectKind> faced_object;

  static BodyState of(const World& world);
  bool operator==(const BodyState&) const = default;
};

struct EpisodeEvent {
  enum class Kind : std::uint8_t {
    Start,
    TeacherSaid,
    LearnerMessage,
    EnvAction,
    Reward,
    SkillNamed,
    HowtoAnswered
  };

  Kind kind = Kind::Start;
  std::uint64_t tick = 0;
  std::string text;               // utterance, raw learner message, or skill label
  std::vector<Segment> segments;  // LearnerMessage
  EnvCommand command;             // EnvAction
  EnvResponse response;           // EnvAction
  bool effected = false;          // EnvAction
  BodyState state;                // Start, EnvAction: state afterwards
  int value = 0;                  // Reward
  std::vector<EnvCommand> skill;  // SkillNamed: the commands the label stands for
};

/// Evaluates `predicate` against the learner's current state and the
/// Environment actions logged since the step became active.
bool evaluate(const WorldPredicate& predicate, const BodyState& state,
              std::span<const EpisodeEvent* const> actions_since_activation);

// ---------------------------------------------------------------------------
// Task scripts and instances
// ---------------------------------------------------------------------------

class ScriptError : public std::runtime_error {
public:
  ScriptError(const std::string& source, int line, const std::string& message);
  const std::string& source() const noexcept { return source_; }
  int line() const noexcept { return line_; }
  const std::string& message() const noexcept { return message_; }

private:
  std::string source_;
  int line_;
  std::string message_;
};

struct ScriptStep {
  enum class Kind : std::uint8_t { Say, ExpectOutput, ExpectWorld, Reward, Name, RepeatUntil };
  Kind kind = Kind::Say;
  std::string text;  // template, predicate source or label
  std::vector<std::string> alternatives;
  std::optional<std::uint64_t> window;
  int value = 0;           // Reward
  int max_iterations = 16;  // RepeatUntil
  int line = 0;
};

struct Placement {
  enum class Mode : std::uint8_t { Ahead, Reachable, Anywhere };
  std::string object;  // object word or slot template
  Mode mode = Mode::Reachable;
  int min_distance = 1;
  int max_distance = 1;
  int count = 1;
};

struct WorldSpec {
  std::optional<std::string> literal;
  bool persistent = false;  // reuse the session world when the session allows it
  int width = 8;
  int height = 8;
  int walls = 0;
  int water = 0;
  int scatter = 0;  // extra random objects
  std::vector<Placement> placements;
};

struct HowtoEntry {
  std::string request;              // template
  std::optional<std::string> text;  // fixed answer template
  std::optional<std::string> goal;  // path(<goal>) predicate template
  int line = 0;
};

struct TaskScript {
  std::string id;
  int level = 0;
  WorldSpec world;
  std::vector<ScriptStep> steps;
  std::uint64_t deadline = 0;
  int timeout_reward = 0;
  bool legacy_look = false;
  std::map<std::string, std::vector<std::string>> slots;  // overrides of the default domains
  std::vector<HowtoEntry> howto;
  std::string source;
  int line = 0;
};

/// Parses one script; throws ScriptError naming the offending line.
TaskScript parse_script(std::string_view text, const std::string& source = "<memory>");
/// Every `*.task` file under `dir`, sorted by script id.
std::vector<TaskScript> load_scripts(const std::filesystem::path& dir);

/// Values a slot may take unless the script overrides it.
std::vector<std::string> default_slot_domain(std::string_view slot);
/// Slot names used by `{...}` placeholders in a template.
std::vector<std::string> template_slots(std::string_view text);
std::string substitute(std::string_view text, const std::map<std::string, std::string>& slots);

struct SayStep {
  std::string text;
};
struct ExpectOutputStep {
  std::vector<std::string> alternatives;         // learner text without terminator
  std::vector<std::vector<Segment>> routed;      // parallel to alternatives
  std::uint64_t window = 0;
};
struct ExpectWorldStep {
  WorldPredicate predicate;
  std::uint64_t window = 0;
};
struct RewardStep {
  int value = 1;
};
struct NameStep {
  std::string label;
  std::string utterance;  // "this is called <label>" through the lexicon
};
struct RepeatUntilStep {
  WorldPredicate predicate;
  std::size_t loop_to = 0;
  int max_iterations = 16;
};

using Step = std::variant<SayStep, ExpectOutputStep, ExpectWorldStep, RewardStep, NameStep,
                          RepeatUntilStep>;

bool is_expect(const Step& step);

struct HowtoAnswer {
  std::optional<std::string> text;
  std::optional<WorldPredicate> goal;
};

struct TaskInstance {
  std::string script_id;
  int level = 0;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> slots;
  World world;
  bool reuse_world = false;
  std::vector<Step> steps;
  std::uint64_t deadline = 0;
  int timeout_reward = 0;
  std::map<std::string, HowtoAnswer, std::less<>> howto;
  Lexicon lexicon;

  std::string id() const { return script_id + "#" + std::to_string(seed); }
};

/// Held-out transformations applied while instantiating.
struct Transform {
  Lexicon lexicon;
  std::array<ObjectKind, kAllObjects.size()> objects = kAllObjects;  // renaming
  std::uint64_t world_salt = 0;                                       // topography reseed

  ObjectKind rename(ObjectKind kind) const { return objects[static_cast<std::size_t>(kind)]; }
  bool identity() const;
};

/// Pins parts of an instance; used by fixtures that replay a known scene.
struct Overrides {
  std::map<std::string, std::string> slots;
  std::optional<World> world;
};

class InstantiationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

TaskInstance instantiate(const TaskScript& script, std::uint64_t seed, const Transform& transform = {},
                         const Overrides& overrides = {});

// ---------------------------------------------------------------------------
// Planning (shared by instantiation checks, how-to answers and the oracle)
// ---------------------------------------------------------------------------

/// "turn right and move and pick the apple" -> commands. Only succeeds when
/// every phrase is a concrete Environment command.
std::optional<std::vector<EnvCommand>> parse_instructions(std::string_view teacher_body);

/// A command sequence that makes `predicate` true from `world`, or nullopt.
std::optional<std::vector<EnvCommand>> plan_for(const WorldPredicate& predicate, const World& world);

/// Instruction phrases joined by " and " (no terminator).
std::string verbalize(const std::vector<EnvCommand>& commands);

class InstructionError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Verbalized shortest route to `goal`; throws InstructionError when the
/// goal cannot be reached.
std::string generate_instructions(const World& world, const WorldPredicate& goal);

/// Fixed-list lookup of a routed "@T: " request.
std::optional<std::string> answer_howto(std::string_view request, const TaskInstance& instance,
                                        const World& world);

/// All Teacher surface forms an instance can emit (say steps, names, fixed
/// how-to answers).
std::vector<std::string> teacher_utterances(const TaskInstance& instance);

struct PlanCheck {
  bool solvable = false;
  std::string failure;
  std::vector<std::pair<std::size_t, std::vector<EnvCommand>>> step_plans;  // (step, commands) per activation
};

/// Walks the steps with planned commands on a scratch copy of the world.
PlanCheck check_plan(const TaskInstance& instance);

// ---------------------------------------------------------------------------
// Judging
// ---------------------------------------------------------------------------

enum class Verdict : std::uint8_t { Pending, Accept, Reject };
std::string_view verdict_name(Verdict verdict);

struct Progress {
  Verdict verdict = Verdict::Pending;
  std::size_t step = 0;
  std::uint64_t activated_at = 0;
  int iteration = 0;
  bool complete = false;
  std::uint64_t decided_at = 0;
};

/// Pure fold of the episode log (first event must be Start) against the
/// instance's steps, evaluated at tick `now`.
Progress judge(const TaskInstance& instance, std::span<const EpisodeEvent> events, std::uint64_t now);

struct TeacherOutput {
  std::vector<std::string> speech;  // bodies, to be framed under "T: "
  std::optional<int> reward;
};

/// The scripted Teacher running one task instance.
class Teacher {
public:
  Teacher(TaskInstance instance, std::uint64_t start_tick, const World& world);

  void observe_learner_message(std::uint64_t tick, const Message& message);
  void observe_env_action(std::uint64_t tick, const EnvCommand& command, const ExecResult& result,
                          const World& after);

  /// Speaks only when `channel_idle`; rewards go out immediately.
  TeacherOutput react(std::uint64_t tick, bool channel_idle, const World& world);

  const TaskInstance& instance() const noexcept { return instance_; }
  const Progress& progress() const noexcept { return progress_; }
  std::span<const EpisodeEvent> events() const noexcept { return events_; }
  bool finished() const noexcept { return finished_; }
  Verdict verdict() const noexcept { return progress_.verdict; }
  std::optional<std::string> last_utterance() const;

private:
  TaskInstance instance_;
  std::vector<EpisodeEvent> events_;
  std::vector<std::string> pending_answers_;
  std::vector<std::string> pending_requests_;
  Progress progress_;
  bool finished_ = false;
};

}  // namespace kinder
