#include <gtest/gtest.h>

#include <nlohmann/json.hpp>
#include <queue>
#include <random>
#include <set>

#include "enumerate.hpp"
#include "kinder/world.hpp"

using namespace kinder;

namespace {

World make(std::string_view literal) { return parse_world(literal); }

int total_objects(const World& w) {
  int n = w.body.holding_total();
  for (auto kind : kAllObjects) n += w.grid.count(kind);
  return n;
}

World random_world(std::mt19937& rng, int width, int height) {
  World w;
  w.grid = Grid(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      auto r = rng() % 10;
      if (r == 0) w.grid.set_terrain({x, y}, Terrain::Wall);
      else if (r == 1) w.grid.set_terrain({x, y}, Terrain::Water);
      else if (r < 4) w.grid.set_object({x, y}, kAllObjects[rng() % 4]);
    }
  }
  Cell start{static_cast<int>(rng() % width), static_cast<int>(rng() % height)};
  w.grid.set_terrain(start, Terrain::Grass);
  w.grid.set_object(start, std::nullopt);
  w.body.position = start;
  w.body.heading = static_cast<Heading>(rng() % 4);
  return w;
}

// Breadth-first distance to facing an object of `kind`, computed over an
// explicit state list rather than the library's search.
std::optional<std::size_t> oracle_distance(const World& w, ObjectKind kind) {
  const int dx[4] = {0, 1, 0, -1};
  const int dy[4] = {-1, 0, 1, 0};
  std::map<std::tuple<int, int, int>, std::size_t> seen;
  std::queue<std::tuple<int, int, int>> frontier;
  auto start = std::make_tuple(w.body.position.x, w.body.position.y, static_cast<int>(w.body.heading));
  seen[start] = 0;
  frontier.push(start);
  while (!frontier.empty()) {
    auto [x, y, h] = frontier.front();
    frontier.pop();
    const std::size_t d = seen[{x, y, h}];
    const int fx = x + dx[h], fy = y + dy[h];
    if (fx >= 0 && fy >= 0 && fx < w.grid.width() && fy < w.grid.height() && w.grid.object({fx, fy}) == kind) {
      return d;
    }
    std::vector<std::tuple<int, int, int>> next{{x, y, (h + 3) % 4}, {x, y, (h + 1) % 4}};
    if (fx >= 0 && fy >= 0 && fx < w.grid.width() && fy < w.grid.height() &&
        w.grid.terrain({fx, fy}) == Terrain::Grass && !w.grid.object({fx, fy})) {
      next.emplace_back(fx, fy, h);
    }
    for (auto& n : next) {
      if (!seen.contains(n)) {
        seen[n] = d + 1;
        frontier.push(n);
      }
    }
  }
  return std::nullopt;
}

}  // namespace

TEST(ParseCommand, ExactGrammar) {
  EXPECT_EQ(parse_command("I turn left").kind, EnvCommand::Kind::TurnLeft);
  EXPECT_EQ(parse_command("I turn right").kind, EnvCommand::Kind::TurnRight);
  EXPECT_EQ(parse_command("I move").kind, EnvCommand::Kind::Move);
  EXPECT_EQ(parse_command("I look").kind, EnvCommand::Kind::Look);
  auto pick = parse_command("I pick the pear");
  EXPECT_EQ(pick.kind, EnvCommand::Kind::Pick);
  EXPECT_EQ(pick.object, ObjectKind::Pear);
}

TEST(ParseCommand, UnderspecifiedTurn) {
  auto command = parse_command("I turn");
  EXPECT_EQ(command.kind, EnvCommand::Kind::Underspecified);
  EXPECT_EQ(command.raw, "I turn");
  World w = make("grid 1 1\n^\n");
  auto result = apply(command, w);
  EXPECT_TRUE(result.response.silent());
  EXPECT_FALSE(result.effected);
}

TEST(ParseCommand, GeneralCategoryIsUnknown) {
  auto command = parse_command("I pick an object");
  EXPECT_EQ(command.kind, EnvCommand::Kind::Unknown);
  EXPECT_EQ(command.raw, "I pick an object");
  EXPECT_EQ(parse_command("I pick the object").kind, EnvCommand::Kind::Unknown);
  EXPECT_EQ(parse_command("i move").kind, EnvCommand::Kind::Unknown);
  EXPECT_EQ(parse_command("I move ").kind, EnvCommand::Kind::Unknown);
}

TEST(Execute, MoveIntoWall) {
  World w = make("grid 3 3\n.#.\n.^.\n...\n");
  auto out = execute(EnvCommand::move(), w);
  EXPECT_EQ(out.world, w);
  EXPECT_EQ(out.response.text, "you can't move");
  EXPECT_FALSE(out.effected);
}

TEST(Execute, MoveOutOfBoundsIsWall) {
  World w = make("grid 1 1\n^\n");
  EXPECT_EQ(execute(EnvCommand::move(), w).response.text, "you can't move");
}

TEST(Execute, TurnsAreInverse) {
  World w = make("grid 2 2\n>.\n..\n");
  auto once = execute(EnvCommand::turn_left(), w);
  EXPECT_EQ(once.response.text, "you turned left");
  auto back = execute(EnvCommand::turn_right(), once.world);
  EXPECT_EQ(back.response.text, "you turned right");
  EXPECT_EQ(back.world, w);
}

TEST(Execute, PickFacedPear) {
  World w = make("grid 1 2\np\n^\n");
  auto out = execute(EnvCommand::pick(ObjectKind::Pear), w);
  EXPECT_EQ(out.response.text, "you picked the pear");
  EXPECT_EQ(out.world.body.holding(ObjectKind::Pear), 1);
  EXPECT_FALSE(out.world.grid.object({0, 0}));
}

TEST(Execute, FailedPickIsSilent) {
  World w = make("grid 1 2\np\n^\n");
  auto out = execute(EnvCommand::pick(ObjectKind::Apple), w);
  EXPECT_TRUE(out.response.silent());
  EXPECT_EQ(out.world, w);
}

TEST(Execute, LookResponses) {
  World w = make("grid 3 3\n.a.\n#^~\n...\n");
  EXPECT_EQ(execute(EnvCommand::look(), w).response.text, "you see an apple");
  w.legacy_look = true;
  EXPECT_EQ(execute(EnvCommand::look(), w).response.text, "there is an apple");
  w.legacy_look = false;
  w.body.heading = Heading::South;
  EXPECT_EQ(execute(EnvCommand::look(), w).response.text, "you see grass");
  w.body.heading = Heading::West;
  EXPECT_EQ(execute(EnvCommand::look(), w).response.text, "you see a wall");
  w.body.heading = Heading::East;
  EXPECT_EQ(execute(EnvCommand::look(), w).response.text, "you see water");
}

TEST(Execute, ObjectsBlockMovement) {
  World w = make("grid 1 2\nm\n^\n");
  EXPECT_EQ(execute(EnvCommand::move(), w).response.text, "you can't move");
}

TEST(Execute, RandomPropertyChecks) {
  std::mt19937 rng(3);
  const std::vector<EnvCommand> commands{EnvCommand::move(), EnvCommand::turn_left(),
                                         EnvCommand::turn_right(), EnvCommand::look(),
                                         EnvCommand::pick(ObjectKind::Apple), EnvCommand::pick(ObjectKind::Mug)};
  for (int trial = 0; trial < 300; ++trial) {
    World w = random_world(rng, 1 + static_cast<int>(rng() % 6), 1 + static_cast<int>(rng() % 6));
    for (int i = 0; i < 20; ++i) {
      const auto& command = commands[rng() % commands.size()];
      auto out = execute(command, w);
      EXPECT_EQ(total_objects(out.world), total_objects(w));
      const bool moved = !(out.world.body.position == w.body.position);
      EXPECT_EQ(out.response.text == std::optional<std::string>("you moved"), moved);
      EXPECT_EQ(out.response.text == std::optional<std::string>("you can't move"),
                command.kind == EnvCommand::Kind::Move && !moved);
      out.world.check();
      w = out.world;
    }
    World turned = w;
    for (int i = 0; i < 4; ++i) turned = execute(EnvCommand::turn_left(), turned).world;
    EXPECT_EQ(turned, w);
  }
}

TEST(Execute, MoveTurnAroundMoveReturns) {
  World w = make("grid 1 3\n.\n.\n^\n");
  auto a = execute(EnvCommand::move(), w).world;
  a = execute(EnvCommand::turn_left(), a).world;
  a = execute(EnvCommand::turn_left(), a).world;
  a = execute(EnvCommand::move(), a).world;
  EXPECT_EQ(a.body.position, w.body.position);
}

TEST(WorldLiteral, RoundTrip) {
  const std::string literal = "grid 4 3\n.#~a\np>bm\n....\n";
  World w = make(literal);
  EXPECT_EQ(w.body.position, (Cell{1, 1}));
  EXPECT_EQ(w.body.heading, Heading::East);
  EXPECT_EQ(format_world(w), literal);
}

TEST(WorldLiteral, Errors) {
  EXPECT_THROW(make("grid 2 1\n..\n"), WorldError);        // no learner
  EXPECT_THROW(make("grid 2 1\n^^\n"), WorldError);        // two learners
  EXPECT_THROW(make("grid 2 1\n^\n"), WorldError);         // short row
  EXPECT_THROW(make("grid 2 1\n^x\n"), WorldError);        // bad glyph
  EXPECT_THROW(make("grod 2 1\n^.\n"), WorldError);        // bad header
  EXPECT_THROW(make("grid 2 2\n^.\n"), WorldError);        // missing row
}

TEST(Snapshot, OneCellFacingBorder) {
  World w = make("grid 1 1\n^\n");
  auto shot = snapshot(w);
  EXPECT_FALSE(shot.faced.has_value());
  EXPECT_EQ(to_json(shot)["faced"], nullptr);
}

TEST(Snapshot, AppleTwoAhead) {
  World w = make("grid 1 4\na\n.\n^\n.\n");
  auto shot = snapshot(w);
  ASSERT_TRUE(shot.faced);
  EXPECT_EQ(*shot.faced, (Cell{0, 1}));
  EXPECT_EQ(shot.rows[0], "a");
  EXPECT_EQ(to_json(shot)["rows"][0], "a");
  auto after = snapshot(execute(EnvCommand::move(), w).world);
  EXPECT_EQ(after.faced_object, ObjectKind::Apple);
}

TEST(Snapshot, LookIsPure) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    World w = random_world(rng, 8, 8);
    EXPECT_EQ(snapshot_hash(snapshot(w)), snapshot_hash(snapshot(execute(EnvCommand::look(), w).world)));
  }
}

TEST(Reachable, AdjacentObjectNeedsOnlyPick) {
  World w = make("grid 1 2\np\n^\n");
  auto found = reachable(w, ObjectKind::Pear);
  ASSERT_TRUE(found.reachable);
  EXPECT_EQ(found.path, (std::vector<EnvCommand>{EnvCommand::pick(ObjectKind::Pear)}));
}

TEST(Reachable, RoutesAroundBarrier) {
  World w = make("grid 4 3\n....\n>#.a\n....\n");
  auto found = reachable(w, ObjectKind::Apple);
  ASSERT_TRUE(found.reachable);
  World sim = w;
  for (const auto& command : found.path) EXPECT_TRUE(apply(command, sim).effected);
  EXPECT_EQ(sim.body.holding(ObjectKind::Apple), 1);
  EXPECT_EQ(found.path.size() - 1, *oracle_distance(w, ObjectKind::Apple));
}

TEST(Reachable, WalledOff) {
  World w = make("grid 4 3\n.#..\n^#.a\n.#..\n");
  EXPECT_FALSE(reachable(w, ObjectKind::Apple).reachable);
  EXPECT_FALSE(reachable(w, ObjectKind::Mug).reachable);
}

TEST(Reachable, AgreesWithOracleOnRandomWorlds) {
  std::mt19937 rng(9);
  for (int trial = 0; trial < 400; ++trial) {
    World w = random_world(rng, 1 + static_cast<int>(rng() % 4), 1 + static_cast<int>(rng() % 4));
    for (auto kind : kAllObjects) {
      auto found = reachable(w, kind);
      auto expected = oracle_distance(w, kind);
      ASSERT_EQ(found.reachable, expected.has_value());
      if (found.reachable) {
        EXPECT_EQ(found.path.size() - 1, *expected);
      }
    }
  }
}

TEST(Article, VowelRule) {
  EXPECT_EQ(with_article("apple"), "an apple");
  EXPECT_EQ(with_article("pear"), "a pear");
  EXPECT_EQ(with_article("mug"), "a mug");
}

TEST(Enumeration, BruteInterpreterAgreesOnSmallWorlds) {
  const auto stats = kinder::testing::enumerate_serial(3, 2);
  for (const auto& e : stats.examples) ADD_FAILURE() << e;
  EXPECT_EQ(stats.mismatches, 0u);
  EXPECT_EQ(stats.roots, 2u * 4u * 36u);
  EXPECT_GT(stats.checks, stats.states);
}

TEST(Enumeration, BranchesOnFirstRead) {
  auto root = kinder::testing::enumeration_roots(1).front();
  EXPECT_EQ(kinder::testing::cell_to_read(root, "I move"), -1);  // faces the border
  kinder::testing::PartialWorld w;
  w.width = 2;
  w.height = 1;
  w.cells = {kinder::testing::Unknown, kinder::testing::Grass};
  w.x = 1;
  w.heading = 3;
  EXPECT_EQ(kinder::testing::cell_to_read(w, "I look"), 0);
  EXPECT_EQ(kinder::testing::cell_to_read(w, "I turn left"), -1);
  w.cells[0] = kinder::testing::Pear;
  const auto step = kinder::testing::brute_execute(w, "I pick the pear");
  EXPECT_EQ(step.response, "you picked the pear");
  EXPECT_EQ(step.next.cells[0], kinder::testing::Grass);
  EXPECT_EQ(step.next.inventory[1], 1);
}

TEST(Enumeration, ParallelMatchesSerial) {
  EXPECT_EQ(kinder::testing::enumerate_serial(3, 2), kinder::testing::enumerate_parallel(3, 2));
}
