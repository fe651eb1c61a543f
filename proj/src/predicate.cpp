#include <algorithm>
#include <charconv>

#include "kinder/tasks.hpp"

namespace kinder {

namespace {

std::string_view trim(std::string_view text) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  return text;
}

int parse_int(std::string_view text, std::string_view what) {
  text = trim(text);
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw PredicateError("expected an integer for " + std::string(what) + ", got '" +
                         std::string(text) + "'");
  }
  return value;
}

std::optional<ObjectKind> parse_object_arg(std::string_view text) {
  text = trim(text);
  if (text == "any") return std::nullopt;
  if (auto kind = object_from_word(text)) return kind;
  throw PredicateError("unknown object '" + std::string(text) + "'");
}

std::vector<std::string_view> split_args(std::string_view text) {
  std::vector<std::string_view> args;
  if (trim(text).empty()) return args;
  std::size_t begin = 0;
  for (;;) {
    auto comma = text.find(',', begin);
    args.push_back(trim(text.substr(begin, comma - begin)));
    if (comma == std::string_view::npos) break;
    begin = comma + 1;
  }
  return args;
}

CommandPattern parse_pattern(std::string_view phrase) {
  CommandPattern pattern;
  if (phrase == "turn") {
    pattern.kind = CommandPattern::Kind::AnyTurn;
    return pattern;
  }
  if (phrase == "pick any") {
    pattern.kind = CommandPattern::Kind::AnyPick;
    return pattern;
  }
  pattern.command = parse_command("I " + std::string(phrase));
  switch (pattern.command.kind) {
    case EnvCommand::Kind::Underspecified:
    case EnvCommand::Kind::Unknown:
      throw PredicateError("'" + std::string(phrase) + "' is not an Environment command");
    default: break;
  }
  return pattern;
}

std::string format_pattern(const CommandPattern& pattern) {
  switch (pattern.kind) {
    case CommandPattern::Kind::AnyTurn: return "turn";
    case CommandPattern::Kind::AnyPick: return "pick any";
    case CommandPattern::Kind::Exact: break;
  }
  return command_phrase(pattern.command);
}

std::string object_arg(const std::optional<ObjectKind>& object) {
  return object ? std::string(object_word(*object)) : "any";
}

int holding(const BodyState& state, std::optional<ObjectKind> object) {
  if (object) return state.inventory[static_cast<std::size_t>(*object)];
  int total = 0;
  for (int n : state.inventory) total += n;
  return total;
}

int holding(const World& world, std::optional<ObjectKind> object) {
  return object ? world.body.holding(*object) : world.body.holding_total();
}

bool run_all(const std::vector<EnvCommand>& commands, World world) {
  for (const auto& command : commands) {
    if (!apply(command, world).effected) return false;
  }
  return true;
}

void expand(const std::vector<CommandPattern>& patterns, std::size_t index,
            std::vector<EnvCommand>& current, const World& world,
            std::optional<std::vector<EnvCommand>>& found) {
  if (found) return;
  if (index == patterns.size()) {
    if (run_all(current, world)) found = current;
    return;
  }
  const auto& pattern = patterns[index];
  std::vector<EnvCommand> options;
  switch (pattern.kind) {
    case CommandPattern::Kind::Exact: options.push_back(pattern.command); break;
    case CommandPattern::Kind::AnyTurn:
      options = {EnvCommand::turn_left(), EnvCommand::turn_right()};
      break;
    case CommandPattern::Kind::AnyPick:
      for (auto kind : kAllObjects) options.push_back(EnvCommand::pick(kind));
      break;
  }
  for (const auto& option : options) {
    current.push_back(option);
    expand(patterns, index + 1, current, world, found);
    current.pop_back();
  }
}

}  // namespace

bool CommandPattern::matches(const EnvCommand& candidate) const {
  switch (kind) {
    case Kind::AnyTurn:
      return candidate.kind == EnvCommand::Kind::TurnLeft ||
             candidate.kind == EnvCommand::Kind::TurnRight;
    case Kind::AnyPick: return candidate.kind == EnvCommand::Kind::Pick;
    case Kind::Exact: break;
  }
  return command == candidate;
}

WorldPredicate parse_predicate(std::string_view text) {
  text = trim(text);
  const auto open = text.find('(');
  if (open == std::string_view::npos || text.back() != ')') {
    throw PredicateError("predicate must look like name(args): '" + std::string(text) + "'");
  }
  const auto name = trim(text.substr(0, open));
  const auto args = split_args(text.substr(open + 1, text.size() - open - 2));

  auto expect_args = [&](std::size_t n) {
    if (args.size() != n) {
      throw PredicateError(std::string(name) + " takes " + std::to_string(n) + " argument(s)");
    }
  };

  WorldPredicate predicate;
  if (name == "holds") {
    expect_args(2);
    predicate.kind = WorldPredicate::Kind::Holds;
    predicate.object = parse_object_arg(args[0]);
    predicate.count = parse_int(args[1], "holds count");
    if (predicate.count < 1) throw PredicateError("holds count must be positive");
  } else if (name == "at") {
    expect_args(2);
    predicate.kind = WorldPredicate::Kind::At;
    predicate.cell = {parse_int(args[0], "x"), parse_int(args[1], "y")};
  } else if (name == "faced") {
    expect_args(1);
    predicate.kind = WorldPredicate::Kind::Faced;
    predicate.object = parse_object_arg(args[0]);
  } else if (name == "executed") {
    if (args.empty()) throw PredicateError("executed needs at least one command");
    predicate.kind = WorldPredicate::Kind::Executed;
    for (auto arg : args) predicate.sequence.push_back(parse_pattern(arg));
  } else if (name == "position_changed") {
    expect_args(1);
    predicate.kind = WorldPredicate::Kind::PositionChanged;
    predicate.count = parse_int(args[0], "position_changed count");
    if (predicate.count < 1) throw PredicateError("position_changed count must be positive");
  } else {
    throw PredicateError("unknown predicate '" + std::string(name) + "'");
  }
  return predicate;
}

std::string format_predicate(const WorldPredicate& predicate) {
  switch (predicate.kind) {
    case WorldPredicate::Kind::Holds:
      return "holds(" + object_arg(predicate.object) + ", " + std::to_string(predicate.count) + ")";
    case WorldPredicate::Kind::At:
      return "at(" + std::to_string(predicate.cell.x) + ", " + std::to_string(predicate.cell.y) + ")";
    case WorldPredicate::Kind::Faced: return "faced(" + object_arg(predicate.object) + ")";
    case WorldPredicate::Kind::Executed: {
      std::string out = "executed(";
      for (std::size_t i = 0; i < predicate.sequence.size(); ++i) {
        if (i) out += ", ";
        out += format_pattern(predicate.sequence[i]);
      }
      return out + ")";
    }
    case WorldPredicate::Kind::PositionChanged:
      return "position_changed(" + std::to_string(predicate.count) + ")";
  }
  return {};
}

BodyState BodyState::of(const World& world) {
  return {world.body.position, world.body.heading, world.body.inventory, world.faced_object()};
}

bool evaluate(const WorldPredicate& predicate, const BodyState& state,
              std::span<const EpisodeEvent* const> actions) {
  switch (predicate.kind) {
    case WorldPredicate::Kind::Holds: return holding(state, predicate.object) >= predicate.count;
    case WorldPredicate::Kind::At: return state.position == predicate.cell;
    case WorldPredicate::Kind::Faced:
      return state.faced_object && (!predicate.object || *state.faced_object == *predicate.object);
    case WorldPredicate::Kind::Executed: {
      const auto& sequence = predicate.sequence;
      if (actions.size() < sequence.size()) return false;
      for (std::size_t begin = 0; begin + sequence.size() <= actions.size(); ++begin) {
        bool ok = true;
        for (std::size_t i = 0; ok && i < sequence.size(); ++i) {
          const auto* action = actions[begin + i];
          ok = action->effected && sequence[i].matches(action->command);
        }
        if (ok) return true;
      }
      return false;
    }
    case WorldPredicate::Kind::PositionChanged: {
      int moves = 0;
      for (const auto* action : actions) {
        if (action->effected && action->command.kind == EnvCommand::Kind::Move) ++moves;
      }
      return moves >= predicate.count;
    }
  }
  return false;
}

std::optional<std::vector<EnvCommand>> parse_instructions(std::string_view body) {
  std::vector<EnvCommand> commands;
  while (!body.empty() && (body.back() == kTerminator || body.back() == ' ')) body.remove_suffix(1);
  std::string text(body);
  // normalise ", " to " and " so one splitter handles both joiners
  for (std::size_t pos; (pos = text.find(", ")) != std::string::npos;) text.replace(pos, 2, " and ");

  constexpr std::string_view kJoin = " and ";
  std::string_view rest = text;
  for (;;) {
    const auto cut = rest.find(kJoin);
    const auto phrase = rest.substr(0, cut);
    if (phrase.empty()) return std::nullopt;
    auto command = parse_command("I " + std::string(phrase));
    switch (command.kind) {
      case EnvCommand::Kind::Underspecified:
      case EnvCommand::Kind::Unknown: return std::nullopt;
      default: break;
    }
    commands.push_back(command);
    if (cut == std::string_view::npos) break;
    rest.remove_prefix(cut + kJoin.size());
  }
  return commands;
}

std::optional<std::vector<EnvCommand>> plan_for(const WorldPredicate& predicate, const World& world) {
  switch (predicate.kind) {
    case WorldPredicate::Kind::Holds: {
      World sim = world;
      std::vector<EnvCommand> plan;
      while (holding(sim, predicate.object) < predicate.count) {
        std::vector<EnvCommand> leg;
        if (predicate.object) {
          auto found = reachable(sim, *predicate.object);
          if (!found.reachable) return std::nullopt;
          leg = std::move(found.path);
        } else {
          auto found = face_object(sim, std::nullopt);
          if (!found.reachable) return std::nullopt;
          World probe = sim;
          for (const auto& command : found.path) apply(command, probe);
          leg = std::move(found.path);
          leg.push_back(EnvCommand::pick(*probe.faced_object()));
        }
        for (const auto& command : leg) {
          if (!apply(command, sim).effected) return std::nullopt;
          plan.push_back(command);
        }
      }
      return plan;
    }
    case WorldPredicate::Kind::At: {
      auto found = reach_cell(world, predicate.cell);
      if (!found.reachable) return std::nullopt;
      return found.path;
    }
    case WorldPredicate::Kind::Faced: {
      auto found = face_object(world, predicate.object);
      if (!found.reachable) return std::nullopt;
      return found.path;
    }
    case WorldPredicate::Kind::Executed: {
      // From here if possible, otherwise from the nearest pose that works.
      std::optional<std::vector<EnvCommand>> found;
      std::vector<EnvCommand> current;
      auto detour = reach_pose(world, [&](Cell cell, Heading heading) {
        World probe = world;
        probe.body.position = cell;
        probe.body.heading = heading;
        expand(predicate.sequence, 0, current, probe, found);
        return found.has_value();
      });
      if (!detour.reachable) return std::nullopt;
      detour.path.insert(detour.path.end(), found->begin(), found->end());
      return detour.path;
    }
    case WorldPredicate::Kind::PositionChanged: {
      World sim = world;
      std::vector<EnvCommand> plan;
      for (int moved = 0; moved < predicate.count; ++moved) {
        int turns = 0;
        while (!sim.grid.traversable(sim.faced())) {
          if (++turns > 3) return std::nullopt;
          apply(EnvCommand::turn_right(), sim);
          plan.push_back(EnvCommand::turn_right());
        }
        apply(EnvCommand::move(), sim);
        plan.push_back(EnvCommand::move());
      }
      return plan;
    }
  }
  return std::nullopt;
}

std::string verbalize(const std::vector<EnvCommand>& commands) {
  std::string out;
  for (std::size_t i = 0; i < commands.size(); ++i) {
    if (i) out += " and ";
    out += command_phrase(commands[i]);
  }
  return out;
}

std::string generate_instructions(const World& world, const WorldPredicate& goal) {
  auto plan = plan_for(goal, world);
  if (!plan) throw InstructionError("goal " + format_predicate(goal) + " is unreachable");
  if (plan->empty()) throw InstructionError("goal " + format_predicate(goal) + " already holds");
  return verbalize(*plan);
}

}  // namespace kinder
