#include <gtest/gtest.h>

#include <random>

#include "kinder/tasks.hpp"

using namespace kinder;

namespace {

EpisodeEvent start_event(const World& w, std::uint64_t tick = 0) {
  EpisodeEvent e;
  e.kind = EpisodeEvent::Kind::Start;
  e.tick = tick;
  e.state = BodyState::of(w);
  return e;
}

EpisodeEvent said(std::string text, std::uint64_t tick) {
  EpisodeEvent e;
  e.kind = EpisodeEvent::Kind::TeacherSaid;
  e.tick = tick;
  e.text = std::move(text);
  return e;
}

EpisodeEvent learner(const std::string& raw, std::uint64_t tick) {
  EpisodeEvent e;
  e.kind = EpisodeEvent::Kind::LearnerMessage;
  e.tick = tick;
  e.text = raw;
  e.segments = route(raw);
  return e;
}

EpisodeEvent action(const EnvCommand& command, World& w, std::uint64_t tick) {
  auto result = apply(command, w);
  EpisodeEvent e;
  e.kind = EpisodeEvent::Kind::EnvAction;
  e.tick = tick;
  e.command = command;
  e.response = result.response;
  e.effected = result.effected;
  e.state = BodyState::of(w);
  return e;
}

EpisodeEvent reward_event(int value, std::uint64_t tick) {
  EpisodeEvent e;
  e.kind = EpisodeEvent::Kind::Reward;
  e.tick = tick;
  e.value = value;
  return e;
}

const char* kGiveOrder = R"(task give_order
level 1
world gen 6 6
deadline 600
say "give order @E: I {cmd}."
expect output "@E: I {cmd}"
reward +1
)";

const char* kSayWord = R"(task say_word
level 0
world gen 3 3
deadline 400
say "say {word}."
expect output "@T: {word}"
reward +1
)";

const char* kFig2 = R"(task move_turn_move
level 2
world literal
grid 3 3
...
...
.^.
end
deadline 800
say "move, turn right and move."
expect world executed(move, turn right, move)
reward +1
)";

// Substitutes slots by plain search and replace, then checks every
// placeholder vanished.
std::string template_oracle(std::string text, const std::map<std::string, std::string>& slots) {
  for (const auto& [name, value] : slots) {
    const std::string key = "{" + name + "}";
    for (std::size_t pos; (pos = text.find(key)) != std::string::npos;) text.replace(pos, key.size(), value);
  }
  return text;
}

}  // namespace

TEST(Lexicon, IdentityLeavesTextAlone) {
  Lexicon lexicon;
  EXPECT_EQ(lexicon.apply("move and look."), "move and look.");
  EXPECT_TRUE(lexicon.identity());
}

TEST(Lexicon, SubstitutesContentWords) {
  auto lexicon = Lexicon::from_pairs({{"move", "blick"}});
  EXPECT_EQ(lexicon.apply("move and look."), "blick and look.");
  EXPECT_EQ(lexicon.apply("move, move and look"), "blick, blick and look");
}

TEST(Lexicon, EnvironmentSpansUntouched) {
  auto lexicon = Lexicon::from_pairs({{"move", "blick"}, {"give", "zop"}, {"order", "wumb"}});
  EXPECT_EQ(lexicon.apply("give order @E: I move."), "zop wumb @E: I move.");
  EXPECT_EQ(lexicon.apply("@T: move @E: I move"), "@T: blick @E: I move");
}

TEST(Lexicon, InverseRestores) {
  auto lexicon = Lexicon::from_pairs({{"move", "blick"}, {"look", "snar"}, {"and", "ka"}});
  const std::string text = "move and look, blick and snar.";
  EXPECT_EQ(lexicon.inverse().apply(lexicon.apply(text)), text);
}

TEST(Lexicon, ClosedIntoPermutation) {
  auto lexicon = Lexicon::from_pairs({{"move", "blick"}});
  // "blick" would otherwise collide with the image of "move"
  EXPECT_NE(lexicon.apply("blick"), lexicon.apply("move"));
  EXPECT_THROW(Lexicon::from_pairs({{"a", "x"}, {"b", "x"}}), std::invalid_argument);
}

TEST(Predicate, ParseAndFormat) {
  for (std::string text : {"holds(apple, 1)", "holds(any, 2)", "at(3, 4)", "faced(pear)", "faced(any)",
                           "executed(move, turn right, move)", "executed(turn, move)",
                           "executed(pick the pear)", "executed(pick any, look)", "position_changed(2)"}) {
    EXPECT_EQ(format_predicate(parse_predicate(text)), text);
  }
  EXPECT_THROW(parse_predicate("holds(stone, 1)"), PredicateError);
  EXPECT_THROW(parse_predicate("flies()"), PredicateError);
  EXPECT_THROW(parse_predicate("executed(turn around)"), PredicateError);
  EXPECT_THROW(parse_predicate("holds(apple)"), PredicateError);
}

TEST(Instructions, ParseAndVerbalize) {
  auto commands = parse_instructions("turn right and move and move and pick the apple");
  ASSERT_TRUE(commands);
  EXPECT_EQ(*commands, (std::vector<EnvCommand>{EnvCommand::turn_right(), EnvCommand::move(), EnvCommand::move(),
                                                EnvCommand::pick(ObjectKind::Apple)}));
  EXPECT_EQ(verbalize(*commands), "turn right and move and move and pick the apple");
  EXPECT_EQ(parse_instructions("move, turn right and move")->size(), 3u);
  EXPECT_FALSE(parse_instructions("turn and move"));
  EXPECT_FALSE(parse_instructions("pick an object"));
  EXPECT_FALSE(parse_instructions(""));
}

TEST(Instructions, GenerateFromPaperScene) {
  World w = parse_world("grid 5 3\n.....\n^..a.\n.....\n");
  EXPECT_EQ(generate_instructions(w, parse_predicate("holds(apple, 1)")),
            "turn right and move and move and pick the apple");
}

TEST(Instructions, SinglePick) {
  World w = parse_world("grid 1 2\np\n^\n");
  EXPECT_EQ(generate_instructions(w, parse_predicate("holds(pear, 1)")), "pick the pear");
}

TEST(Instructions, UnreachableGoalThrows) {
  World w = parse_world("grid 3 1\n^#a\n");
  EXPECT_THROW(generate_instructions(w, parse_predicate("holds(apple, 1)")), InstructionError);
}

TEST(Instructions, FollowingGeneratedTextSatisfiesGoal) {
  std::mt19937 rng(21);
  int checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    World w;
    w.grid = Grid(6, 6);
    for (int y = 0; y < 6; ++y) {
      for (int x = 0; x < 6; ++x) {
        auto r = rng() % 8;
        if (r == 0) w.grid.set_terrain({x, y}, Terrain::Wall);
        if (r == 1) w.grid.set_object({x, y}, kAllObjects[rng() % 4]);
      }
    }
    w.body.position = {static_cast<int>(rng() % 6), static_cast<int>(rng() % 6)};
    w.grid.set_terrain(w.body.position, Terrain::Grass);
    w.grid.set_object(w.body.position, std::nullopt);
    const auto goal_kind = kAllObjects[rng() % 4];
    WorldPredicate goal;
    goal.kind = WorldPredicate::Kind::Holds;
    goal.object = goal_kind;
    if (!reachable(w, goal_kind).reachable) continue;
    const auto text = generate_instructions(w, goal);
    auto commands = parse_instructions(text);
    ASSERT_TRUE(commands) << text;
    World sim = w;
    for (const auto& c : *commands) apply(c, sim);
    EXPECT_TRUE(evaluate(goal, BodyState::of(sim), {})) << text;
    ++checked;
  }
  EXPECT_GT(checked, 100);
}

TEST(Script, ParsesDirectives) {
  auto script = parse_script(kFig2, "fig2.task");
  EXPECT_EQ(script.id, "move_turn_move");
  EXPECT_EQ(script.level, 2);
  EXPECT_EQ(script.deadline, 800u);
  ASSERT_TRUE(script.world.literal);
  ASSERT_EQ(script.steps.size(), 3u);
  EXPECT_EQ(script.steps[1].kind, ScriptStep::Kind::ExpectWorld);
  EXPECT_EQ(script.steps[1].line, 11);
}

TEST(Script, LintErrorsCarryLine) {
  auto expect_error = [](const std::string& text, int line, const std::string& needle) {
    try {
      parse_script(text, "bad.task");
      FAIL() << "no error for: " << text;
    } catch (const ScriptError& e) {
      EXPECT_EQ(e.line(), line) << e.what();
      EXPECT_NE(e.message().find(needle), std::string::npos) << e.what();
      EXPECT_EQ(e.source(), "bad.task");
    }
  };
  expect_error("task t\nlevel 0\ndeadline 10\n", 1, "empty steps");
  expect_error("task t\nlevel 0\ndeadline 10\nsay \"x.\"\nexpect world holds(stone, 1)\n", 5, "unknown object");
  expect_error("task t\nlevel 0\ndeadline 10\nsay \"{nope}\"\n", 4, "unknown slot");
  expect_error("task t\nlevel 0\ndeadline 0\n", 3, "positive");
  expect_error("task t\nlevel 0\ndeadline 10\nsay \"x\"\nexpect output \"@T: x\"\n", 1, "reward +1");
  expect_error("task t\nlevel 0\nbogus\n", 3, "unknown directive");
  expect_error("task t\nworld literal\ngrid 2 1\n..\nend\n", 2, "bad world literal");
}

TEST(Instantiate, RepeatWordTemplate) {
  auto script = parse_script(kSayWord);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto instance = instantiate(script, seed);
    const auto& word = instance.slots.at("word");
    EXPECT_EQ(std::get<SayStep>(instance.steps[0]).text, template_oracle("say {word}.", instance.slots));
    EXPECT_EQ(std::get<SayStep>(instance.steps[0]).text, "say " + word + ".");
    EXPECT_EQ(std::get<ExpectOutputStep>(instance.steps[1]).alternatives[0], "@T: " + word);
  }
  auto pinned = instantiate(script, 0, {}, {.slots = {{"word", "apple"}}});
  EXPECT_EQ(std::get<SayStep>(pinned.steps[0]).text, "say apple.");
}

TEST(Instantiate, DeterministicGivenSeed) {
  auto script = parse_script(kGiveOrder);
  auto a = instantiate(script, 42);
  auto b = instantiate(script, 42);
  EXPECT_EQ(a.slots, b.slots);
  EXPECT_EQ(a.world, b.world);
}

TEST(Instantiate, LiteralWorldIsSeedIndependent) {
  auto script = parse_script(kFig2);
  auto a = instantiate(script, 1);
  auto b = instantiate(script, 99);
  EXPECT_EQ(a.world, b.world);
  EXPECT_EQ(std::get<SayStep>(a.steps[0]).text, std::get<SayStep>(b.steps[0]).text);
}

TEST(Instantiate, FindAppleIsReachable) {
  auto script = parse_script(R"(task find_apple
level 4
world gen 8 8 walls 10 water 4
place {obj} reachable
deadline 2000
say "find {aobj}."
expect world faced({obj})
reward +1
)");
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto instance = instantiate(script, seed);
    auto kind = *object_from_word(instance.slots.at("obj"));
    EXPECT_TRUE(face_object(instance.world, kind).reachable);
  }
}

TEST(Instantiate, UnreachableLiteralFails) {
  auto script = parse_script(R"(task walled
level 4
world literal
grid 3 1
^#a
end
deadline 500
say "get an apple."
expect world holds(apple, 1)
reward +1
)");
  EXPECT_THROW(instantiate(script, 0), InstantiationError);
}

TEST(Judge, GiveOrderAccepts) {
  auto instance = instantiate(parse_script(kGiveOrder), 0, {}, {.slots = {{"cmd", "move"}}});
  World w = parse_world("grid 1 3\n.\n.\n^\n");
  std::vector<EpisodeEvent> log{start_event(w), said("give order @E: I move.", 1)};
  EXPECT_EQ(judge(instance, log, 5).verdict, Verdict::Pending);
  log.push_back(learner("give order @E: I move.", 40));
  log.push_back(action(EnvCommand::move(), w, 40));
  auto p = judge(instance, log, 40);
  EXPECT_EQ(p.verdict, Verdict::Accept);
  EXPECT_EQ(p.decided_at, 40u);
  EXPECT_FALSE(p.complete);
  log.push_back(reward_event(1, 40));
  EXPECT_TRUE(judge(instance, log, 41).complete);
}

TEST(Judge, SoupStaysPendingThenRejects) {
  auto instance = instantiate(parse_script(kGiveOrder), 0, {}, {.slots = {{"cmd", "move"}}});
  World w = parse_world("grid 1 3\n.\n.\n^\n");
  std::vector<EpisodeEvent> log{start_event(w), said("give order @E: I move.", 1),
                                learner("@E: fglk4$3wfgg.", 30)};
  EXPECT_EQ(judge(instance, log, 30).verdict, Verdict::Pending);
  const auto window = std::get<ExpectOutputStep>(instance.steps[1]).window;
  auto p = judge(instance, log, 1 + window + 1);
  EXPECT_EQ(p.verdict, Verdict::Reject);
  EXPECT_EQ(p.decided_at, 1 + window);
}

TEST(Judge, BarrierBlocksAccept) {
  auto instance = instantiate(parse_script(kFig2), 0);
  World w = parse_world("grid 3 3\n...\n..#\n.^.\n");
  std::vector<EpisodeEvent> log{start_event(w), said("move, turn right and move.", 1)};
  log.push_back(action(EnvCommand::move(), w, 30));
  log.push_back(action(EnvCommand::turn_right(), w, 60));
  log.push_back(action(EnvCommand::move(), w, 90));
  EXPECT_FALSE(log.back().effected);
  EXPECT_EQ(judge(instance, log, 100).verdict, Verdict::Pending);
}

TEST(Judge, ExactMatchPerturbationFails) {
  auto instance = instantiate(parse_script(kSayWord), 0, {}, {.slots = {{"word", "apple"}}});
  World w = instance.world;
  const std::string good = "@T: apple.";
  {
    std::vector<EpisodeEvent> log{start_event(w), said("say apple.", 1), learner(good, 20)};
    EXPECT_EQ(judge(instance, log, 20).verdict, Verdict::Accept);
  }
  const std::string body = "apple";
  for (std::size_t i = 0; i < body.size(); ++i) {
    for (char c : alphabet()) {
      if (c == body[i] || c == '.') continue;
      std::string changed = body;
      changed[i] = c;
      std::vector<EpisodeEvent> log{start_event(w), said("say apple.", 1), learner("@T: " + changed + ".", 20)};
      EXPECT_NE(judge(instance, log, 20).verdict, Verdict::Accept) << changed;
    }
  }
}

TEST(Judge, NameStepDoesNotChangeVerdict) {
  const std::string base = R"(task twice
level 4
world literal
grid 1 4
.
.
.
^
end
deadline 900
say "move and move."
expect world executed(move, move)
reward +1
)";
  auto plain = instantiate(parse_script(base), 0);
  auto named = instantiate(parse_script(base + "name \"move two times\"\n"), 0);
  World w = plain.world;
  std::vector<EpisodeEvent> log{start_event(w), said("move and move.", 1)};
  log.push_back(action(EnvCommand::move(), w, 20));
  log.push_back(action(EnvCommand::move(), w, 40));
  EXPECT_EQ(judge(plain, log, 40).verdict, judge(named, log, 40).verdict);
  EXPECT_EQ(judge(plain, log, 40).decided_at, judge(named, log, 40).decided_at);
}

TEST(Judge, PureFunctionOfLog) {
  auto instance = instantiate(parse_script(kFig2), 0);
  World w = instance.world;
  std::vector<EpisodeEvent> log{start_event(w), said("move, turn right and move.", 1)};
  log.push_back(action(EnvCommand::move(), w, 30));
  auto first = judge(instance, log, 50);
  auto second = judge(instance, log, 50);
  EXPECT_EQ(first.verdict, second.verdict);
  EXPECT_EQ(first.step, second.step);
  EXPECT_EQ(first.activated_at, second.activated_at);
}

TEST(Howto, FixedListLookup) {
  auto script = parse_script(R"(task howto_find
level 5
world literal
grid 5 3
.....
^..a.
.....
end
deadline 1500
say "ask me how to find an apple."
expect output "@T: how to find an apple"
expect world holds(apple, 1)
reward +1
howto "how to find an apple" -> path(holds(apple, 1))
howto "how to wave" -> "you cannot."
)");
  auto instance = instantiate(script, 0);
  EXPECT_EQ(answer_howto("how to find an apple", instance, instance.world),
            "turn right and move and move and pick the apple");
  EXPECT_EQ(answer_howto("how to wave", instance, instance.world), "you cannot.");
  EXPECT_FALSE(answer_howto("how to fly", instance, instance.world));
}

TEST(Teacher, RunsGiveOrderEpisode) {
  auto instance = instantiate(parse_script(kGiveOrder), 0, {}, {.slots = {{"cmd", "move"}}});
  World w = parse_world("grid 1 3\n.\n.\n^\n");
  Teacher teacher(instance, 0, w);
  auto out = teacher.react(0, false, w);
  EXPECT_TRUE(out.speech.empty());
  out = teacher.react(1, true, w);
  ASSERT_EQ(out.speech.size(), 1u);
  EXPECT_EQ(out.speech[0], "give order @E: I move.");
  EXPECT_EQ(teacher.last_utterance(), "give order @E: I move.");

  Message message = classify("@E: I move.", Direction::Output);
  teacher.observe_learner_message(30, message);
  auto result = apply(EnvCommand::move(), w);
  teacher.observe_env_action(30, EnvCommand::move(), result, w);
  out = teacher.react(30, false, w);
  EXPECT_EQ(out.reward, 1);
  EXPECT_TRUE(teacher.finished());
  EXPECT_EQ(teacher.verdict(), Verdict::Accept);
  EXPECT_EQ(teacher.react(31, true, w).reward, std::nullopt);
}

TEST(Teacher, TimeoutPenaltyIsOptIn) {
  std::string text = kGiveOrder;
  auto quiet = instantiate(parse_script(text), 0, {}, {.slots = {{"cmd", "move"}}});
  auto harsh = instantiate(parse_script(text + "timeout-reward -1\n"), 0, {}, {.slots = {{"cmd", "move"}}});
  World w = parse_world("grid 1 3\n.\n.\n^\n");
  Teacher a(quiet, 0, w), b(harsh, 0, w);
  a.react(0, true, w);
  b.react(0, true, w);
  EXPECT_EQ(a.react(100000, true, w).reward, std::nullopt);
  EXPECT_EQ(b.react(100000, true, w).reward, -1);
  EXPECT_EQ(a.verdict(), Verdict::Reject);
}

TEST(Instructions, TerminatorIgnored) {
  EXPECT_EQ(parse_instructions("move, turn right and move."),
            (std::vector<EnvCommand>{EnvCommand::move(), EnvCommand::turn_right(), EnvCommand::move()}));
}
