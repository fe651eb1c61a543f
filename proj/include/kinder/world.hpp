#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace kinder {

enum class Terrain : std::uint8_t { Grass, Wall, Water };

enum class ObjectKind : std::uint8_t { Apple, Pear, Banana, Mug };

inline constexpr std::array<ObjectKind, 4> kAllObjects{ObjectKind::Apple, ObjectKind::Pear,
                                                       ObjectKind::Banana, ObjectKind::Mug};

std::string_view object_word(ObjectKind kind);
std::optional<ObjectKind> object_from_word(std::string_view word);
/// "an apple", "a pear": article chosen by the word's first letter.
std::string with_article(std::string_view word);

enum class Heading : std::uint8_t { North, East, South, West };

Heading turned_left(Heading heading);
Heading turned_right(Heading heading);
std::string_view heading_name(Heading heading);

struct Cell {
  int x = 0;  // column, grows eastwards
  int y = 0;  // row, grows southwards

  bool operator==(const Cell&) const = default;
};

Cell step(Cell cell, Heading heading);

class WorldError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class Grid {
public:
  Grid() = default;
  Grid(int width, int height);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool in_bounds(Cell cell) const noexcept;

  /// Out-of-bounds cells read as walls.
  Terrain terrain(Cell cell) const noexcept;
  std::optional<ObjectKind> object(Cell cell) const noexcept;
  /// Grass without an object.
  bool traversable(Cell cell) const noexcept;

  void set_terrain(Cell cell, Terrain terrain);
  void set_object(Cell cell, std::optional<ObjectKind> object);

  int count(ObjectKind kind) const noexcept;

  bool operator==(const Grid&) const = default;

private:
  std::size_t index(Cell cell) const noexcept {
    return static_cast<std::size_t>(cell.y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(cell.x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<Terrain> terrain_;
  std::vector<std::optional<ObjectKind>> objects_;
};

struct LearnerBody {
  Cell position;
  Heading heading = Heading::North;
  std::array<int, kAllObjects.size()> inventory{};

  int holding(ObjectKind kind) const noexcept { return inventory[static_cast<std::size_t>(kind)]; }
  int holding_total() const noexcept;

  bool operator==(const LearnerBody&) const = default;
};

struct World {
  Grid grid;
  LearnerBody body;
  /// Legacy task scripts report objects as "there is X." instead of "you see X.".
  bool legacy_look = false;

  Cell faced() const noexcept { return step(body.position, body.heading); }
  std::optional<ObjectKind> faced_object() const noexcept { return grid.object(faced()); }

  /// Throws WorldError when an invariant is broken.
  void check() const;

  bool operator==(const World&) const = default;
};

/// Parses the world literal ("grid W H" followed by H rows). Row glyphs:
/// '.' grass, '#' wall, '~' water, 'a' 'p' 'b' 'm' objects and one of
/// '^' '>' 'v' '<' for the learner's start pose.
World parse_world(std::string_view literal);
std::string format_world(const World& world);

struct EnvCommand {
  enum class Kind : std::uint8_t { Move, TurnLeft, TurnRight, Look, Pick, Underspecified, Unknown };

  Kind kind = Kind::Unknown;
  ObjectKind object = ObjectKind::Apple;  // meaningful for Pick only
  std::string raw;                        // original text for Underspecified/Unknown

  static EnvCommand move() { return {Kind::Move, {}, {}}; }
  static EnvCommand turn_left() { return {Kind::TurnLeft, {}, {}}; }
  static EnvCommand turn_right() { return {Kind::TurnRight, {}, {}}; }
  static EnvCommand look() { return {Kind::Look, {}, {}}; }
  static EnvCommand pick(ObjectKind kind) { return {Kind::Pick, kind, {}}; }

  bool operator==(const EnvCommand& other) const;
};

/// Parses an Environment-language order (without "@E: " and terminator).
EnvCommand parse_command(std::string_view body);

/// The Environment-language phrase for a command ("move", "pick the pear").
std::string command_phrase(const EnvCommand& command);
/// The full order a Learner sends ("I move").
std::string command_text(const EnvCommand& command);

struct EnvResponse {
  std::optional<std::string> text;  // body without the "E: " prefix and terminator

  bool silent() const noexcept { return !text.has_value(); }
  bool operator==(const EnvResponse&) const = default;
};

struct ExecResult {
  EnvResponse response;
  bool effected = false;  // the command did what it says
};

/// Runs `command` against `world` in place.
ExecResult apply(const EnvCommand& command, World& world);

struct Execution {
  World world;
  EnvResponse response;
  bool effected = false;
};

Execution execute(const EnvCommand& command, const World& world);

struct WorldSnapshot {
  int width = 0;
  int height = 0;
  std::vector<std::string> rows;  // world-literal glyphs, learner included
  Cell learner;
  Heading heading = Heading::North;
  std::optional<Cell> faced;  // nullopt when the learner faces the border
  std::optional<ObjectKind> faced_object;
  std::array<int, kAllObjects.size()> inventory{};

  bool operator==(const WorldSnapshot&) const = default;
};

WorldSnapshot snapshot(const World& world);
nlohmann::json to_json(const WorldSnapshot& snapshot);
std::string snapshot_hash(const WorldSnapshot& snapshot);

struct Reachability {
  bool reachable = false;
  std::vector<EnvCommand> path;
};

/// Shortest Move/TurnLeft/TurnRight sequence after which an object of
/// `kind` sits in the faced cell, followed by Pick.
Reachability reachable(const World& world, ObjectKind kind);

/// Same search, goal is facing any object of `kind` (no trailing Pick). If
/// `kind` is empty any object will do.
Reachability face_object(const World& world, std::optional<ObjectKind> kind);

/// Shortest path that ends with the learner standing on `target`.
Reachability reach_cell(const World& world, Cell target);

/// Shortest path to the first pose (in search order) accepted by `goal`.
Reachability reach_pose(const World& world, const std::function<bool(Cell, Heading)>& goal);

}  // namespace kinder
