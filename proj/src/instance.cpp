#include <algorithm>
#include <set>

#include "kinder/rng.hpp"
#include "kinder/tasks.hpp"

namespace kinder {

namespace {

constexpr int kMaxWorldAttempts = 200;
constexpr std::uint64_t kMinWorldWindow = 64;
constexpr std::uint64_t kWindowFactor = 16;

std::set<std::string> used_slots(const TaskScript& script) {
  std::set<std::string> names;
  auto collect = [&](std::string_view text) {
    for (auto& name : template_slots(text)) names.insert(std::move(name));
  };
  for (const auto& step : script.steps) {
    collect(step.text);
    for (const auto& alt : step.alternatives) collect(alt);
  }
  for (const auto& placement : script.world.placements) collect(placement.object);
  for (const auto& entry : script.howto) {
    collect(entry.request);
    if (entry.text) collect(*entry.text);
    if (entry.goal) collect(*entry.goal);
  }
  if (names.contains("aobj")) names.insert("obj");
  if (names.contains("aobj2")) names.insert("obj2");
  names.erase("aobj");
  names.erase("aobj2");
  return names;
}

std::map<std::string, std::string> bind_slots(const TaskScript& script, Rng& rng,
                                              const Transform& transform, const Overrides& overrides) {
  std::map<std::string, std::string> slots;
  for (const auto& name : used_slots(script)) {
    if (auto it = overrides.slots.find(name); it != overrides.slots.end()) {
      slots[name] = it->second;
      continue;
    }
    auto found = script.slots.find(name);
    std::vector<std::string> domain = found != script.slots.end() ? found->second : default_slot_domain(name);
    if (name == "obj2" && slots.contains("obj") && domain.size() > 1) {
      std::erase(domain, slots["obj"]);
    }
    if (domain.empty()) throw InstantiationError("slot {" + name + "} has no values");
    slots[name] = domain[rng.below(domain.size())];
  }
  for (std::string_view name : {"obj", "obj2"}) {
    auto it = slots.find(std::string(name));
    if (it == slots.end()) continue;
    if (overrides.slots.contains(it->first)) continue;
    if (auto kind = object_from_word(it->second)) it->second = std::string(object_word(transform.rename(*kind)));
  }
  if (slots.contains("obj")) slots["aobj"] = with_article(slots["obj"]);
  if (slots.contains("obj2")) slots["aobj2"] = with_article(slots["obj2"]);
  return slots;
}

WorldPredicate resolve_predicate(const std::string& text, const std::map<std::string, std::string>& slots,
                                 const Transform& transform, bool literal_objects) {
  auto predicate = parse_predicate(substitute(text, slots));
  // objects named literally in the script follow the renaming of the world
  if (literal_objects && predicate.object && template_slots(text).empty()) {
    predicate.object = transform.rename(*predicate.object);
  }
  return predicate;
}

std::vector<Cell> free_cells(const World& world) {
  std::vector<Cell> cells;
  for (int y = 0; y < world.grid.height(); ++y) {
    for (int x = 0; x < world.grid.width(); ++x) {
      const Cell cell{x, y};
      if (cell == world.body.position) continue;
      if (world.grid.terrain(cell) == Terrain::Grass && !world.grid.object(cell)) cells.push_back(cell);
    }
  }
  return cells;
}

std::optional<World> generate_world(const WorldSpec& spec, const std::map<std::string, std::string>& slots,
                                    const TaskScript& script, Rng& rng) {
  World world;
  world.grid = Grid(spec.width, spec.height);
  world.body.position = {rng.between(0, spec.width - 1), rng.between(0, spec.height - 1)};
  world.body.heading = static_cast<Heading>(rng.below(4));

  auto scatter_terrain = [&](int n, Terrain terrain) {
    for (int i = 0; i < n; ++i) {
      auto cells = free_cells(world);
      if (cells.empty()) return;
      world.grid.set_terrain(cells[rng.below(cells.size())], terrain);
    }
  };
  scatter_terrain(spec.walls, Terrain::Wall);
  scatter_terrain(spec.water, Terrain::Water);

  for (const auto& placement : spec.placements) {
    auto kind = object_from_word(substitute(placement.object, slots));
    if (!kind) throw InstantiationError(script.id + ": placement names unknown object");
    for (int n = 0; n < placement.count; ++n) {
      if (placement.mode == Placement::Mode::Ahead) {
        const int distance = rng.between(placement.min_distance, placement.max_distance);
        Cell cell = world.body.position;
        for (int d = 1; d <= distance; ++d) {
          cell = step(cell, world.body.heading);
          if (!world.grid.in_bounds(cell)) return std::nullopt;
          world.grid.set_terrain(cell, Terrain::Grass);
          if (d < distance) {
            if (world.grid.object(cell)) return std::nullopt;
          } else {
            if (world.grid.object(cell)) return std::nullopt;
            world.grid.set_object(cell, kind);
          }
        }
      } else {
        auto cells = free_cells(world);
        if (cells.empty()) return std::nullopt;
        world.grid.set_object(cells[rng.below(cells.size())], kind);
      }
    }
  }

  for (int i = 0; i < spec.scatter; ++i) {
    auto cells = free_cells(world);
    if (cells.empty()) break;
    world.grid.set_object(cells[rng.below(cells.size())], kAllObjects[rng.below(kAllObjects.size())]);
  }
  world.legacy_look = script.legacy_look;
  world.check();
  return world;
}

World rename_objects(World world, const Transform& transform) {
  for (int y = 0; y < world.grid.height(); ++y) {
    for (int x = 0; x < world.grid.width(); ++x) {
      if (auto object = world.grid.object({x, y})) world.grid.set_object({x, y}, transform.rename(*object));
    }
  }
  return world;
}

std::size_t spoken_length(const std::vector<EnvCommand>& plan) {
  std::size_t total = 0;
  for (const auto& command : plan) total += command_text(command).size() + 5;  // "@E: " + "."
  return total;
}

}  // namespace

bool is_expect(const Step& step) {
  return std::holds_alternative<ExpectOutputStep>(step) || std::holds_alternative<ExpectWorldStep>(step) ||
         std::holds_alternative<RepeatUntilStep>(step);
}

bool Transform::identity() const {
  return lexicon.identity() && objects == kAllObjects && world_salt == 0;
}

TaskInstance instantiate(const TaskScript& script, std::uint64_t seed, const Transform& transform,
                         const Overrides& overrides) {
  Rng rng(mix_seed({hash_text(script.id), seed}));
  Rng world_rng(mix_seed({hash_text(script.id), seed, transform.world_salt, 0x77}));

  TaskInstance instance;
  instance.script_id = script.id;
  instance.level = script.level;
  instance.seed = seed;
  instance.deadline = script.deadline;
  instance.timeout_reward = script.timeout_reward;
  instance.lexicon = transform.lexicon;
  instance.reuse_world = script.world.persistent;
  instance.slots = bind_slots(script, rng, transform, overrides);
  const auto& slots = instance.slots;
  const Lexicon& lexicon = transform.lexicon;

  try {
    std::size_t last_say = 0;
    bool have_say = false;
    for (const auto& step : script.steps) {
      switch (step.kind) {
        case ScriptStep::Kind::Say:
          last_say = instance.steps.size();
          have_say = true;
          instance.steps.emplace_back(SayStep{lexicon.apply(substitute(step.text, slots))});
          break;
        case ScriptStep::Kind::ExpectOutput: {
          ExpectOutputStep out;
          std::size_t longest = 0;
          for (const auto& alt : step.alternatives) {
            out.alternatives.push_back(lexicon.apply(substitute(alt, slots)));
            out.routed.push_back(route(out.alternatives.back()));
            longest = std::max(longest, out.alternatives.back().size() + 1);
          }
          out.window = step.window.value_or(kWindowFactor * longest);
          instance.steps.emplace_back(std::move(out));
          break;
        }
        case ScriptStep::Kind::ExpectWorld:
          instance.steps.emplace_back(ExpectWorldStep{
              resolve_predicate(step.text, slots, transform, script.world.literal.has_value()),
              step.window.value_or(0)});
          break;
        case ScriptStep::Kind::Reward: instance.steps.emplace_back(RewardStep{step.value}); break;
        case ScriptStep::Kind::Name: {
          const auto label = substitute(step.text, slots);
          instance.steps.emplace_back(
              NameStep{lexicon.apply(label), lexicon.apply("this is called " + label)});
          break;
        }
        case ScriptStep::Kind::RepeatUntil:
          if (!have_say) throw InstantiationError(script.id + ": repeat-until without say");
          instance.steps.emplace_back(RepeatUntilStep{
              resolve_predicate(step.text, slots, transform, script.world.literal.has_value()), last_say,
              step.max_iterations});
          break;
      }
    }
    for (const auto& entry : script.howto) {
      HowtoAnswer answer;
      if (entry.text) answer.text = lexicon.apply(substitute(*entry.text, slots));
      if (entry.goal) answer.goal = resolve_predicate(*entry.goal, slots, transform, script.world.literal.has_value());
      instance.howto[lexicon.apply(substitute(entry.request, slots))] = std::move(answer);
    }
  } catch (const PredicateError& e) {
    throw InstantiationError(script.id + ": " + e.what());
  }

  auto finish = [&](PlanCheck& check) {
    // ExpectWorld windows default to 16 x the spoken length of the longest
    // plan the step needed.
    for (std::size_t i = 0; i < instance.steps.size(); ++i) {
      auto* expect = std::get_if<ExpectWorldStep>(&instance.steps[i]);
      if (!expect || expect->window != 0) continue;
      std::size_t longest = 0;
      for (const auto& [index, plan] : check.step_plans) {
        if (index == i) longest = std::max(longest, spoken_length(plan));
      }
      expect->window = std::max(kMinWorldWindow, kWindowFactor * longest);
    }
  };

  if (overrides.world || script.world.literal) {
    instance.world = overrides.world ? *overrides.world : rename_objects(parse_world(*script.world.literal), transform);
    instance.world.legacy_look = script.legacy_look;
    auto check = check_plan(instance);
    if (!check.solvable) throw InstantiationError(instance.id() + ": " + check.failure);
    finish(check);
    return instance;
  }

  std::string last_failure = "no world attempt succeeded";
  for (int attempt = 0; attempt < kMaxWorldAttempts; ++attempt) {
    auto world = generate_world(script.world, slots, script, world_rng);
    if (!world) continue;
    instance.world = std::move(*world);
    auto check = check_plan(instance);
    if (check.solvable) {
      finish(check);
      return instance;
    }
    last_failure = check.failure;
  }
  throw InstantiationError(instance.id() + ": no solvable world after " + std::to_string(kMaxWorldAttempts) +
                           " attempts (" + last_failure + ")");
}

std::optional<std::string> answer_howto(std::string_view request, const TaskInstance& instance,
                                        const World& world) {
  auto it = instance.howto.find(request);
  if (it == instance.howto.end()) return std::nullopt;
  if (it->second.text) return it->second.text;
  if (it->second.goal) return instance.lexicon.apply(generate_instructions(world, *it->second.goal));
  return std::nullopt;
}

std::vector<std::string> teacher_utterances(const TaskInstance& instance) {
  std::vector<std::string> out;
  for (const auto& step : instance.steps) {
    if (auto* say = std::get_if<SayStep>(&step)) out.push_back(say->text);
    if (auto* name = std::get_if<NameStep>(&step)) out.push_back(name->utterance);
  }
  for (const auto& [request, answer] : instance.howto) {
    if (answer.text) out.push_back(*answer.text);
  }
  return out;
}

PlanCheck check_plan(const TaskInstance& instance) {
  PlanCheck check;
  World world = instance.world;
  std::vector<EpisodeEvent> events;
  events.push_back({.kind = EpisodeEvent::Kind::Start, .state = BodyState::of(world)});
  const Lexicon inverse = instance.lexicon.inverse();
  std::string last_said;

  auto act = [&](const EnvCommand& command) {
    auto result = apply(command, world);
    EpisodeEvent event;
    event.kind = EpisodeEvent::Kind::EnvAction;
    event.command = command;
    event.response = result.response;
    event.effected = result.effected;
    event.state = BodyState::of(world);
    events.push_back(std::move(event));
    return result.effected;
  };

  constexpr int kMaxRounds = 4096;
  for (int round = 0; round < kMaxRounds; ++round) {
    const auto progress = judge(instance, events, 0);
    if (progress.verdict == Verdict::Reject) {
      check.failure = "rejected at step " + std::to_string(progress.step);
      return check;
    }
    if (progress.complete) {
      check.solvable = true;
      return check;
    }
    const Step& step = instance.steps[progress.step];
    if (auto* say = std::get_if<SayStep>(&step)) {
      events.push_back({.kind = EpisodeEvent::Kind::TeacherSaid, .text = say->text});
      last_said = say->text;
    } else if (auto* name = std::get_if<NameStep>(&step)) {
      events.push_back({.kind = EpisodeEvent::Kind::SkillNamed, .text = name->label});
    } else if (auto* reward = std::get_if<RewardStep>(&step)) {
      events.push_back({.kind = EpisodeEvent::Kind::Reward, .value = reward->value});
    } else if (auto* output = std::get_if<ExpectOutputStep>(&step)) {
      const auto& segments = output->routed.front();
      events.push_back({.kind = EpisodeEvent::Kind::LearnerMessage,
                        .text = output->alternatives.front() + ".",
                        .segments = segments});
      std::size_t to_environment = 0;
      for (const auto& segment : segments) to_environment += segment.addressee == Agent::Environment;
      for (const auto& segment : segments) {
        if (segment.addressee == Agent::Environment && to_environment == 1) {
          act(parse_command(segment.text));
        } else if (segment.addressee == Agent::Teacher) {
          try {
            if (auto answer = answer_howto(segment.text, instance, world)) {
              events.push_back({.kind = EpisodeEvent::Kind::HowtoAnswered, .text = *answer});
              last_said = *answer;
            }
          } catch (const InstructionError& e) {
            check.failure = e.what();
            return check;
          }
        }
      }
    } else if (auto* expect = std::get_if<ExpectWorldStep>(&step)) {
      auto plan = parse_instructions(inverse.apply(last_said));
      std::vector<EnvCommand> done;
      bool followed = false;
      if (plan) {
        followed = true;
        for (const auto& command : *plan) {
          done.push_back(command);
          if (!act(command)) {
            followed = false;
            break;
          }
        }
        if (followed && judge(instance, events, 0).step != progress.step) {
          check.step_plans.emplace_back(progress.step, done);
          last_said.clear();
          continue;
        }
      }
      auto fallback = plan_for(expect->predicate, world);
      if (!fallback || fallback->empty()) {
        check.failure = "no plan for " + format_predicate(expect->predicate);
        return check;
      }
      for (const auto& command : *fallback) {
        done.push_back(command);
        act(command);
      }
      check.step_plans.emplace_back(progress.step, done);
      last_said.clear();
      if (judge(instance, events, 0).step == progress.step) {
        check.failure = "plan does not satisfy " + format_predicate(expect->predicate);
        return check;
      }
    } else {
      check.failure = "stuck at step " + std::to_string(progress.step);
      return check;
    }
  }
  check.failure = "step limit exceeded";
  return check;
}

}  // namespace kinder
