#include "kinder/world.hpp"

#include <algorithm>
#include <deque>
#include <sstream>

#include <nlohmann/json.hpp>

#include "kinder/channel.hpp"

namespace kinder {

namespace {

constexpr std::array<std::string_view, kAllObjects.size()> kObjectWords{"apple", "pear", "banana",
                                                                        "mug"};
constexpr std::array<char, kAllObjects.size()> kObjectGlyphs{'a', 'p', 'b', 'm'};
constexpr std::array<char, 4> kHeadingGlyphs{'^', '>', 'v', '<'};

std::optional<Heading> heading_from_glyph(char glyph) {
  for (std::size_t i = 0; i < kHeadingGlyphs.size(); ++i) {
    if (kHeadingGlyphs[i] == glyph) return static_cast<Heading>(i);
  }
  return std::nullopt;
}

std::optional<ObjectKind> object_from_glyph(char glyph) {
  for (std::size_t i = 0; i < kObjectGlyphs.size(); ++i) {
    if (kObjectGlyphs[i] == glyph) return static_cast<ObjectKind>(i);
  }
  return std::nullopt;
}

std::string look_text(const World& world) {
  const Cell faced = world.faced();
  if (auto object = world.grid.object(faced)) {
    const auto phrase = with_article(object_word(*object));
    return (world.legacy_look ? "there is " : "you see ") + phrase;
  }
  switch (world.grid.terrain(faced)) {
    case Terrain::Grass: return "you see grass";
    case Terrain::Wall: return "you see a wall";
    case Terrain::Water: return "you see water";
  }
  return "you see grass";
}

// Breadth-first search over (cell, heading). Actions are tried in the order
// Move, TurnLeft, TurnRight so ties resolve deterministically.
template <typename Goal>
Reachability search(const World& world, Goal&& goal) {
  const Grid& grid = world.grid;
  const int states = grid.width() * grid.height() * 4;
  auto encode = [&](Cell cell, Heading heading) {
    return (cell.y * grid.width() + cell.x) * 4 + static_cast<int>(heading);
  };

  struct Link {
    int parent = -1;
    EnvCommand::Kind action = EnvCommand::Kind::Unknown;
  };
  std::vector<Link> links(static_cast<std::size_t>(states));
  std::vector<bool> seen(static_cast<std::size_t>(states), false);

  const int start = encode(world.body.position, world.body.heading);
  seen[static_cast<std::size_t>(start)] = true;
  std::deque<std::pair<Cell, Heading>> frontier{{world.body.position, world.body.heading}};

  while (!frontier.empty()) {
    auto [cell, heading] = frontier.front();
    frontier.pop_front();
    if (goal(cell, heading)) {
      Reachability result{true, {}};
      for (int at = encode(cell, heading); at != start;
           at = links[static_cast<std::size_t>(at)].parent) {
        result.path.push_back({links[static_cast<std::size_t>(at)].action, {}, {}});
      }
      std::reverse(result.path.begin(), result.path.end());
      return result;
    }

    const int from = encode(cell, heading);
    auto visit = [&](Cell next_cell, Heading next_heading, EnvCommand::Kind action) {
      const int id = encode(next_cell, next_heading);
      if (seen[static_cast<std::size_t>(id)]) return;
      seen[static_cast<std::size_t>(id)] = true;
      links[static_cast<std::size_t>(id)] = {from, action};
      frontier.emplace_back(next_cell, next_heading);
    };

    const Cell ahead = step(cell, heading);
    if (grid.traversable(ahead)) visit(ahead, heading, EnvCommand::Kind::Move);
    visit(cell, turned_left(heading), EnvCommand::Kind::TurnLeft);
    visit(cell, turned_right(heading), EnvCommand::Kind::TurnRight);
  }
  return {};
}

}  // namespace

std::string_view object_word(ObjectKind kind) { return kObjectWords[static_cast<std::size_t>(kind)]; }

std::optional<ObjectKind> object_from_word(std::string_view word) {
  for (std::size_t i = 0; i < kObjectWords.size(); ++i) {
    if (kObjectWords[i] == word) return static_cast<ObjectKind>(i);
  }
  return std::nullopt;
}

std::string with_article(std::string_view word) {
  const bool vowel = !word.empty() && std::string_view("aeiou").find(word.front()) != std::string_view::npos;
  return (vowel ? "an " : "a ") + std::string(word);
}

Heading turned_left(Heading heading) {
  return static_cast<Heading>((static_cast<int>(heading) + 3) % 4);
}

Heading turned_right(Heading heading) {
  return static_cast<Heading>((static_cast<int>(heading) + 1) % 4);
}

std::string_view heading_name(Heading heading) {
  switch (heading) {
    case Heading::North: return "north";
    case Heading::East: return "east";
    case Heading::South: return "south";
    case Heading::West: return "west";
  }
  return "north";
}

Cell step(Cell cell, Heading heading) {
  switch (heading) {
    case Heading::North: return {cell.x, cell.y - 1};
    case Heading::East: return {cell.x + 1, cell.y};
    case Heading::South: return {cell.x, cell.y + 1};
    case Heading::West: return {cell.x - 1, cell.y};
  }
  return cell;
}

Grid::Grid(int width, int height) : width_(width), height_(height) {
  if (width <= 0 || height <= 0) throw WorldError("grid dimensions must be positive");
  const auto cells = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  terrain_.assign(cells, Terrain::Grass);
  objects_.assign(cells, std::nullopt);
}

bool Grid::in_bounds(Cell cell) const noexcept {
  return cell.x >= 0 && cell.y >= 0 && cell.x < width_ && cell.y < height_;
}

Terrain Grid::terrain(Cell cell) const noexcept {
  return in_bounds(cell) ? terrain_[index(cell)] : Terrain::Wall;
}

std::optional<ObjectKind> Grid::object(Cell cell) const noexcept {
  return in_bounds(cell) ? objects_[index(cell)] : std::nullopt;
}

bool Grid::traversable(Cell cell) const noexcept {
  return in_bounds(cell) && terrain_[index(cell)] == Terrain::Grass && !objects_[index(cell)];
}

void Grid::set_terrain(Cell cell, Terrain terrain) {
  if (!in_bounds(cell)) throw WorldError("cell out of bounds");
  terrain_[index(cell)] = terrain;
}

void Grid::set_object(Cell cell, std::optional<ObjectKind> object) {
  if (!in_bounds(cell)) throw WorldError("cell out of bounds");
  objects_[index(cell)] = object;
}

int Grid::count(ObjectKind kind) const noexcept {
  return static_cast<int>(std::count(objects_.begin(), objects_.end(), std::optional(kind)));
}

int LearnerBody::holding_total() const noexcept {
  int total = 0;
  for (int n : inventory) total += n;
  return total;
}

void World::check() const {
  if (grid.width() <= 0 || grid.height() <= 0) throw WorldError("empty grid");
  if (!grid.traversable(body.position)) throw WorldError("learner stands on a blocked cell");
  for (int y = 0; y < grid.height(); ++y) {
    for (int x = 0; x < grid.width(); ++x) {
      if (grid.object({x, y}) && grid.terrain({x, y}) != Terrain::Grass) {
        throw WorldError("object placed on non-grass cell");
      }
    }
  }
  for (int n : body.inventory) {
    if (n < 0) throw WorldError("negative inventory");
  }
}

World parse_world(std::string_view literal) {
  std::vector<std::string> lines;
  std::istringstream in{std::string(literal)};
  for (std::string line; std::getline(in, line);) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty() && lines.empty()) continue;
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw WorldError("world literal is empty");

  std::istringstream header(lines.front());
  std::string keyword;
  int width = 0;
  int height = 0;
  if (!(header >> keyword >> width >> height) || keyword != "grid") {
    throw WorldError("world literal must start with 'grid W H'");
  }
  if (width <= 0 || height <= 0) throw WorldError("grid dimensions must be positive");
  if (static_cast<int>(lines.size()) - 1 != height) {
    throw WorldError("expected " + std::to_string(height) + " rows, got " +
                     std::to_string(lines.size() - 1));
  }

  World world;
  world.grid = Grid(width, height);
  bool have_learner = false;
  for (int y = 0; y < height; ++y) {
    const std::string& row = lines[static_cast<std::size_t>(y) + 1];
    if (static_cast<int>(row.size()) != width) {
      throw WorldError("row " + std::to_string(y + 1) + " has " + std::to_string(row.size()) +
                       " cells, expected " + std::to_string(width));
    }
    for (int x = 0; x < width; ++x) {
      const char glyph = row[static_cast<std::size_t>(x)];
      const Cell cell{x, y};
      if (glyph == '.') continue;
      if (glyph == '#') {
        world.grid.set_terrain(cell, Terrain::Wall);
      } else if (glyph == '~') {
        world.grid.set_terrain(cell, Terrain::Water);
      } else if (auto object = object_from_glyph(glyph)) {
        world.grid.set_object(cell, object);
      } else if (auto heading = heading_from_glyph(glyph)) {
        if (have_learner) throw WorldError("world literal has more than one learner");
        have_learner = true;
        world.body.position = cell;
        world.body.heading = *heading;
      } else {
        throw WorldError(std::string("unknown world glyph '") + glyph + "'");
      }
    }
  }
  if (!have_learner) throw WorldError("world literal has no learner start pose");
  world.check();
  return world;
}

std::string format_world(const World& world) {
  const auto shot = snapshot(world);
  std::string out = "grid " + std::to_string(shot.width) + " " + std::to_string(shot.height) + "\n";
  for (const auto& row : shot.rows) out += row + "\n";
  return out;
}

bool EnvCommand::operator==(const EnvCommand& other) const {
  if (kind != other.kind) return false;
  if (kind == Kind::Pick) return object == other.object;
  return true;
}

EnvCommand parse_command(std::string_view body) {
  EnvCommand command;
  if (body == "I move") return EnvCommand::move();
  if (body == "I turn left") return EnvCommand::turn_left();
  if (body == "I turn right") return EnvCommand::turn_right();
  if (body == "I look") return EnvCommand::look();
  if (body == "I turn") {
    command.kind = EnvCommand::Kind::Underspecified;
    command.raw = std::string(body);
    return command;
  }
  constexpr std::string_view kPick = "I pick the ";
  if (body.starts_with(kPick)) {
    if (auto object = object_from_word(body.substr(kPick.size()))) return EnvCommand::pick(*object);
  }
  command.kind = EnvCommand::Kind::Unknown;
  command.raw = std::string(body);
  return command;
}

std::string command_phrase(const EnvCommand& command) {
  switch (command.kind) {
    case EnvCommand::Kind::Move: return "move";
    case EnvCommand::Kind::TurnLeft: return "turn left";
    case EnvCommand::Kind::TurnRight: return "turn right";
    case EnvCommand::Kind::Look: return "look";
    case EnvCommand::Kind::Pick: return "pick the " + std::string(object_word(command.object));
    case EnvCommand::Kind::Underspecified: return "turn";
    case EnvCommand::Kind::Unknown: break;
  }
  return command.raw.starts_with("I ") ? command.raw.substr(2) : command.raw;
}

std::string command_text(const EnvCommand& command) {
  if (command.kind == EnvCommand::Kind::Unknown) return command.raw;
  return "I " + command_phrase(command);
}

ExecResult apply(const EnvCommand& command, World& world) {
  LearnerBody& body = world.body;
  switch (command.kind) {
    case EnvCommand::Kind::Move: {
      const Cell target = world.faced();
      if (!world.grid.traversable(target)) return {{"you can't move"}, false};
      body.position = target;
      return {{"you moved"}, true};
    }
    case EnvCommand::Kind::TurnLeft:
      body.heading = turned_left(body.heading);
      return {{"you turned left"}, true};
    case EnvCommand::Kind::TurnRight:
      body.heading = turned_right(body.heading);
      return {{"you turned right"}, true};
    case EnvCommand::Kind::Look:
      return {{look_text(world)}, true};
    case EnvCommand::Kind::Pick: {
      const Cell target = world.faced();
      if (world.grid.object(target) != command.object) return {{}, false};
      world.grid.set_object(target, std::nullopt);
      ++body.inventory[static_cast<std::size_t>(command.object)];
      return {{"you picked the " + std::string(object_word(command.object))}, true};
    }
    case EnvCommand::Kind::Underspecified:
    case EnvCommand::Kind::Unknown:
      break;
  }
  return {{}, false};
}

Execution execute(const EnvCommand& command, const World& world) {
  Execution out{world, {}, false};
  auto result = apply(command, out.world);
  out.response = std::move(result.response);
  out.effected = result.effected;
  return out;
}

WorldSnapshot snapshot(const World& world) {
  WorldSnapshot shot;
  shot.width = world.grid.width();
  shot.height = world.grid.height();
  shot.learner = world.body.position;
  shot.heading = world.body.heading;
  shot.inventory = world.body.inventory;
  const Cell faced = world.faced();
  if (world.grid.in_bounds(faced)) shot.faced = faced;
  shot.faced_object = world.grid.object(faced);

  shot.rows.reserve(static_cast<std::size_t>(shot.height));
  for (int y = 0; y < shot.height; ++y) {
    std::string row;
    row.reserve(static_cast<std::size_t>(shot.width));
    for (int x = 0; x < shot.width; ++x) {
      const Cell cell{x, y};
      if (cell == world.body.position) {
        row += kHeadingGlyphs[static_cast<std::size_t>(world.body.heading)];
      } else if (auto object = world.grid.object(cell)) {
        row += kObjectGlyphs[static_cast<std::size_t>(*object)];
      } else {
        switch (world.grid.terrain(cell)) {
          case Terrain::Grass: row += '.'; break;
          case Terrain::Wall: row += '#'; break;
          case Terrain::Water: row += '~'; break;
        }
      }
    }
    shot.rows.push_back(std::move(row));
  }
  return shot;
}

nlohmann::json to_json(const WorldSnapshot& shot) {
  nlohmann::json inventory = nlohmann::json::object();
  for (auto kind : kAllObjects) {
    inventory[std::string(object_word(kind))] = shot.inventory[static_cast<std::size_t>(kind)];
  }
  nlohmann::json faced = nullptr;
  if (shot.faced) faced = {{"x", shot.faced->x}, {"y", shot.faced->y}};
  nlohmann::json faced_object = nullptr;
  if (shot.faced_object) faced_object = std::string(object_word(*shot.faced_object));
  return {
      {"width", shot.width},
      {"height", shot.height},
      {"rows", shot.rows},
      {"learner", {{"x", shot.learner.x}, {"y", shot.learner.y}}},
      {"heading", std::string(heading_name(shot.heading))},
      {"faced", faced},
      {"faced_object", faced_object},
      {"inventory", inventory},
  };
}

std::string snapshot_hash(const WorldSnapshot& shot) { return sha256_hex(to_json(shot).dump()); }

Reachability reachable(const World& world, ObjectKind kind) {
  auto found = search(world, [&](Cell cell, Heading heading) {
    return world.grid.object(step(cell, heading)) == kind;
  });
  if (found.reachable) found.path.push_back(EnvCommand::pick(kind));
  return found;
}

Reachability face_object(const World& world, std::optional<ObjectKind> kind) {
  return search(world, [&](Cell cell, Heading heading) {
    auto object = world.grid.object(step(cell, heading));
    return object && (!kind || *object == *kind);
  });
}

Reachability reach_cell(const World& world, Cell target) {
  return search(world, [&](Cell cell, Heading) { return cell == target; });
}

Reachability reach_pose(const World& world, const std::function<bool(Cell, Heading)>& goal) {
  return search(world, goal);
}

}  // namespace kinder
