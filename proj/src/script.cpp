#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "kinder/tasks.hpp"

namespace kinder {

namespace {

const std::vector<std::string> kWords{"apple", "pear",  "banana", "mug",  "ball",
                                      "cup",   "tree",  "house",  "door", "grass"};

std::string_view trim(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
    text.remove_suffix(1);
  }
  return text;
}

// Splits a directive line into bare words and double-quoted strings. `->`
// and `|` come out as their own tokens.
struct Token {
  std::string text;
  bool quoted = false;
};

class LineError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

std::vector<Token> tokenize(std::string_view line) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    char c = line[i];
    if (c == ' ' || c == '\t') {
      ++i;
    } else if (c == '"') {
      auto close = line.find('"', i + 1);
      if (close == std::string_view::npos) throw LineError("unterminated string");
      tokens.push_back({std::string(line.substr(i + 1, close - i - 1)), true});
      i = close + 1;
    } else if (c == '|') {
      tokens.push_back({"|", false});
      ++i;
    } else {
      auto end = line.find_first_of(" \t\"|", i);
      if (end == std::string_view::npos) end = line.size();
      tokens.push_back({std::string(line.substr(i, end - i)), false});
      i = end;
    }
  }
  return tokens;
}

template <typename T>
T number(std::string_view text, std::string_view what) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw LineError("expected a number for " + std::string(what) + ", got '" + std::string(text) + "'");
  }
  return value;
}

// "... within 120" -> ("...", 120)
std::pair<std::string_view, std::optional<std::uint64_t>> split_trailer(std::string_view text,
                                                                       std::string_view keyword) {
  const std::string marker = " " + std::string(keyword) + " ";
  auto pos = text.rfind(marker);
  if (pos == std::string_view::npos) return {trim(text), std::nullopt};
  return {trim(text.substr(0, pos)),
          number<std::uint64_t>(trim(text.substr(pos + marker.size())), keyword)};
}

bool is_builtin_slot(std::string_view name) {
  return name == "obj" || name == "obj2" || name == "aobj" || name == "aobj2" || name == "count" ||
         name == "dir" || name == "char" || name == "word" || name == "word2" || name == "cmd" ||
         name == "cmd2";
}

// First value of every slot, used to lint templates and predicates.
std::map<std::string, std::string> sample_binding(const TaskScript& script) {
  std::map<std::string, std::string> slots;
  for (std::string_view name : {"obj", "obj2", "count", "dir", "char", "word", "word2", "cmd", "cmd2"}) {
    auto domain = default_slot_domain(name);
    slots[std::string(name)] = domain.front();
  }
  slots["obj2"] = default_slot_domain("obj2")[1];
  for (const auto& [name, values] : script.slots) slots[name] = values.front();
  slots["aobj"] = with_article(slots["obj"]);
  slots["aobj2"] = with_article(slots["obj2"]);
  return slots;
}

void check_template(const TaskScript& script, std::string_view text) {
  for (const auto& name : template_slots(text)) {
    if (!is_builtin_slot(name) && !script.slots.contains(name)) {
      throw LineError("unknown slot {" + name + "}");
    }
  }
}

void check_predicate(const TaskScript& script, std::string_view text) {
  check_template(script, text);
  try {
    parse_predicate(substitute(text, sample_binding(script)));
  } catch (const PredicateError& e) {
    throw LineError(e.what());
  }
}

void parse_world_gen(const std::vector<Token>& tokens, std::size_t from, WorldSpec& spec) {
  if (tokens.size() < from + 2) throw LineError("world gen needs width and height");
  spec.width = number<int>(tokens[from].text, "width");
  spec.height = number<int>(tokens[from + 1].text, "height");
  if (spec.width < 1 || spec.height < 1) throw LineError("world size must be positive");
  for (std::size_t i = from + 2; i < tokens.size(); i += 2) {
    if (i + 1 >= tokens.size()) throw LineError("'" + tokens[i].text + "' needs a value");
    const auto& key = tokens[i].text;
    const int value = number<int>(tokens[i + 1].text, key);
    if (value < 0) throw LineError(key + " must not be negative");
    if (key == "walls") {
      spec.walls = value;
    } else if (key == "water") {
      spec.water = value;
    } else if (key == "scatter") {
      spec.scatter = value;
    } else {
      throw LineError("unknown world gen option '" + key + "'");
    }
  }
}

Placement parse_place(const std::vector<Token>& tokens) {
  if (tokens.size() < 3) throw LineError("place needs an object and a mode");
  Placement placement;
  placement.object = tokens[1].text;
  const auto& mode = tokens[2].text;
  std::size_t next = 3;
  if (mode == "ahead") {
    if (tokens.size() < 4) throw LineError("place ahead needs a distance");
    placement.mode = Placement::Mode::Ahead;
    std::string_view range = tokens[3].text;
    auto dots = range.find("..");
    if (dots == std::string_view::npos) {
      placement.min_distance = placement.max_distance = number<int>(range, "distance");
    } else {
      placement.min_distance = number<int>(range.substr(0, dots), "distance");
      placement.max_distance = number<int>(range.substr(dots + 2), "distance");
    }
    if (placement.min_distance < 1 || placement.max_distance < placement.min_distance) {
      throw LineError("bad distance range '" + std::string(range) + "'");
    }
    next = 4;
  } else if (mode == "reachable") {
    placement.mode = Placement::Mode::Reachable;
  } else if (mode == "anywhere") {
    placement.mode = Placement::Mode::Anywhere;
  } else {
    throw LineError("unknown placement mode '" + mode + "'");
  }
  if (next < tokens.size()) {
    if (tokens[next].text != "count" || next + 2 != tokens.size()) {
      throw LineError("place accepts only a trailing 'count <n>'");
    }
    placement.count = number<int>(tokens[next + 1].text, "count");
    if (placement.count < 1) throw LineError("count must be positive");
  }
  return placement;
}

}  // namespace

ScriptError::ScriptError(const std::string& source, int line, const std::string& message)
    : std::runtime_error(source + ":" + std::to_string(line) + ": " + message),
      source_(source),
      line_(line),
      message_(message) {}

std::vector<std::string> default_slot_domain(std::string_view slot) {
  if (slot == "obj" || slot == "obj2") {
    std::vector<std::string> out;
    for (auto kind : kAllObjects) out.emplace_back(object_word(kind));
    return out;
  }
  if (slot == "count") return {"two", "three"};
  if (slot == "dir") return {"left", "right"};
  if (slot == "char") {
    std::vector<std::string> out;
    for (char c = 'a'; c <= 'z'; ++c) out.emplace_back(1, c);
    return out;
  }
  if (slot == "word" || slot == "word2") return kWords;
  if (slot == "cmd" || slot == "cmd2") return {"move", "look", "turn left", "turn right"};
  return {};
}

std::vector<std::string> template_slots(std::string_view text) {
  std::vector<std::string> names;
  for (std::size_t pos = text.find('{'); pos != std::string_view::npos; pos = text.find('{', pos + 1)) {
    auto close = text.find('}', pos);
    if (close == std::string_view::npos) break;
    names.emplace_back(text.substr(pos + 1, close - pos - 1));
  }
  return names;
}

std::string substitute(std::string_view text, const std::map<std::string, std::string>& slots) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '{') {
      auto close = text.find('}', i);
      if (close != std::string_view::npos) {
        auto it = slots.find(std::string(text.substr(i + 1, close - i - 1)));
        if (it != slots.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += text[i++];
  }
  return out;
}

TaskScript parse_script(std::string_view text, const std::string& source) {
  TaskScript script;
  script.source = source;

  std::vector<std::string_view> lines;
  for (std::size_t begin = 0; begin <= text.size();) {
    auto end = text.find('\n', begin);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back(text.substr(begin, end - begin));
    begin = end + 1;
  }

  bool saw_level = false;
  bool saw_world = false;
  bool saw_deadline = false;
  int positive_rewards = 0;

  for (std::size_t index = 0; index < lines.size(); ++index) {
    const int line_no = static_cast<int>(index) + 1;
    const auto line = trim(lines[index]);
    if (line.empty() || line.front() == '#') continue;

    try {
      const auto space = line.find(' ');
      const auto directive = line.substr(0, space);
      const auto rest = space == std::string_view::npos ? std::string_view{} : trim(line.substr(space + 1));

      if (directive == "task") {
        if (!script.id.empty()) throw LineError("duplicate task directive");
        if (rest.empty() || rest.find(' ') != std::string_view::npos) throw LineError("task needs one id");
        script.id = std::string(rest);
        script.line = line_no;
      } else if (directive == "level") {
        script.level = number<int>(rest, "level");
        if (script.level < 0) throw LineError("level must not be negative");
        saw_level = true;
      } else if (directive == "deadline") {
        script.deadline = number<std::uint64_t>(rest, "deadline");
        if (script.deadline == 0) throw LineError("deadline must be positive");
        saw_deadline = true;
      } else if (directive == "timeout-reward") {
        if (rest == "0") {
          script.timeout_reward = 0;
        } else if (rest == "-1") {
          script.timeout_reward = -1;
        } else {
          throw LineError("timeout-reward must be 0 or -1");
        }
      } else if (directive == "legacy-look") {
        script.legacy_look = true;
      } else if (directive == "world") {
        if (saw_world && rest != "persistent") throw LineError("duplicate world directive");
        const auto tokens = tokenize(rest);
        if (tokens.empty()) throw LineError("world needs 'literal', 'gen' or 'persistent'");
        if (tokens[0].text == "literal") {
          std::string literal;
          std::size_t j = index + 1;
          for (; j < lines.size() && trim(lines[j]) != "end"; ++j) {
            literal += std::string(trim(lines[j]));
            literal += '\n';
          }
          if (j == lines.size()) throw LineError("world literal without 'end'");
          try {
            parse_world(literal);
          } catch (const WorldError& e) {
            throw LineError(std::string("bad world literal: ") + e.what());
          }
          script.world.literal = std::move(literal);
          index = j;
        } else if (tokens[0].text == "gen") {
          parse_world_gen(tokens, 1, script.world);
        } else if (tokens[0].text == "persistent") {
          script.world.persistent = true;
        } else {
          throw LineError("unknown world kind '" + tokens[0].text + "'");
        }
        saw_world = true;
      } else if (directive == "place") {
        auto placement = parse_place(tokenize(line));
        check_template(script, placement.object);
        if (template_slots(placement.object).empty() && !object_from_word(placement.object)) {
          throw LineError("unknown object '" + placement.object + "'");
        }
        script.world.placements.push_back(std::move(placement));
      } else if (directive == "slot") {
        const auto tokens = tokenize(rest);
        if (tokens.size() < 2) throw LineError("slot needs a name and at least one value");
        std::vector<std::string> values;
        for (std::size_t i = 1; i < tokens.size(); ++i) values.push_back(tokens[i].text);
        script.slots[tokens[0].text] = std::move(values);
      } else if (directive == "say") {
        const auto tokens = tokenize(rest);
        if (tokens.size() != 1 || !tokens[0].quoted || tokens[0].text.empty()) {
          throw LineError("say needs one nonempty quoted template");
        }
        check_template(script, tokens[0].text);
        ScriptStep step;
        step.kind = ScriptStep::Kind::Say;
        step.text = tokens[0].text;
        step.line = line_no;
        script.steps.push_back(std::move(step));
      } else if (directive == "expect") {
        const auto kind_end = rest.find(' ');
        const auto kind = rest.substr(0, kind_end);
        const auto body = kind_end == std::string_view::npos ? std::string_view{} : rest.substr(kind_end + 1);
        auto [head, window] = split_trailer(body, "within");
        if (window && *window == 0) throw LineError("window must be positive");
        ScriptStep step;
        step.window = window;
        step.line = line_no;
        if (kind == "output") {
          step.kind = ScriptStep::Kind::ExpectOutput;
          const auto tokens = tokenize(head);
          for (std::size_t i = 0; i < tokens.size(); ++i) {
            if (i % 2 == 1) {
              if (tokens[i].text != "|" || tokens[i].quoted) throw LineError("alternatives are separated by '|'");
              continue;
            }
            if (!tokens[i].quoted || tokens[i].text.empty()) throw LineError("alternatives must be quoted");
            check_template(script, tokens[i].text);
            step.alternatives.push_back(tokens[i].text);
          }
          if (step.alternatives.empty() || tokens.size() % 2 == 0) {
            throw LineError("expect output needs at least one alternative");
          }
        } else if (kind == "world") {
          step.kind = ScriptStep::Kind::ExpectWorld;
          step.text = std::string(head);
          check_predicate(script, step.text);
        } else {
          throw LineError("expect must be followed by 'output' or 'world'");
        }
        script.steps.push_back(std::move(step));
      } else if (directive == "repeat-until") {
        auto [head, limit] = split_trailer(rest, "max");
        check_predicate(script, head);
        const bool has_expect = std::any_of(script.steps.begin(), script.steps.end(), [](const auto& s) {
          return s.kind == ScriptStep::Kind::ExpectWorld || s.kind == ScriptStep::Kind::ExpectOutput;
        });
        const bool has_say = std::any_of(script.steps.begin(), script.steps.end(),
                                         [](const auto& s) { return s.kind == ScriptStep::Kind::Say; });
        if (!has_expect || !has_say) throw LineError("repeat-until must follow a say and an expect");
        ScriptStep step;
        step.kind = ScriptStep::Kind::RepeatUntil;
        step.text = std::string(head);
        if (limit) {
          if (*limit == 0) throw LineError("max must be positive");
          step.max_iterations = static_cast<int>(*limit);
        }
        step.line = line_no;
        script.steps.push_back(std::move(step));
      } else if (directive == "reward") {
        ScriptStep step;
        step.kind = ScriptStep::Kind::Reward;
        step.line = line_no;
        if (rest == "+1" || rest == "1") {
          step.value = 1;
          ++positive_rewards;
        } else if (rest == "-1") {
          step.value = -1;
        } else {
          throw LineError("reward must be +1 or -1");
        }
        script.steps.push_back(std::move(step));
      } else if (directive == "name") {
        const auto tokens = tokenize(rest);
        if (tokens.size() != 1 || !tokens[0].quoted || tokens[0].text.empty()) {
          throw LineError("name needs one quoted label");
        }
        check_template(script, tokens[0].text);
        ScriptStep step;
        step.kind = ScriptStep::Kind::Name;
        step.text = tokens[0].text;
        step.line = line_no;
        script.steps.push_back(std::move(step));
      } else if (directive == "howto") {
        const auto arrow = rest.find("->");
        if (arrow == std::string_view::npos) throw LineError("howto needs '->'");
        const auto request = tokenize(rest.substr(0, arrow));
        if (request.size() != 1 || !request[0].quoted) throw LineError("howto request must be quoted");
        check_template(script, request[0].text);
        HowtoEntry entry;
        entry.request = request[0].text;
        entry.line = line_no;
        const auto answer = trim(rest.substr(arrow + 2));
        if (answer.starts_with("path(") && answer.ends_with(")")) {
          entry.goal = std::string(answer.substr(5, answer.size() - 6));
          check_predicate(script, *entry.goal);
        } else {
          const auto tokens = tokenize(answer);
          if (tokens.size() != 1 || !tokens[0].quoted) throw LineError("howto answer must be quoted or path(...)");
          check_template(script, tokens[0].text);
          entry.text = tokens[0].text;
        }
        script.howto.push_back(std::move(entry));
      } else {
        throw LineError("unknown directive '" + std::string(directive) + "'");
      }
    } catch (const LineError& e) {
      throw ScriptError(source, line_no, e.what());
    }
  }

  const int header_line = script.line ? script.line : 1;
  if (script.id.empty()) throw ScriptError(source, 1, "missing task directive");
  if (!saw_level) throw ScriptError(source, header_line, "missing level directive");
  if (!saw_deadline) throw ScriptError(source, header_line, "missing deadline directive");
  if (script.steps.empty()) throw ScriptError(source, header_line, "empty steps list");
  if (positive_rewards == 0) throw ScriptError(source, header_line, "no step yields reward +1");
  if (positive_rewards > 1) throw ScriptError(source, header_line, "more than one reward +1 step");
  const bool any_expect = std::any_of(script.steps.begin(), script.steps.end(), [](const auto& s) {
    return s.kind == ScriptStep::Kind::ExpectWorld || s.kind == ScriptStep::Kind::ExpectOutput;
  });
  if (!any_expect) throw ScriptError(source, header_line, "no expect step");
  for (const auto& [name, values] : script.slots) {
    if ((name == "obj" || name == "obj2")) {
      for (const auto& value : values) {
        if (!object_from_word(value)) {
          throw ScriptError(source, header_line, "slot " + name + " holds unknown object '" + value + "'");
        }
      }
    }
  }
  return script;
}

std::vector<TaskScript> load_scripts(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw ScriptError(dir.string(), 0, "not a directory");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".task") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  std::vector<TaskScript> scripts;
  std::set<std::string> ids;
  for (const auto& file : files) {
    std::ifstream in(file);
    std::stringstream buffer;
    buffer << in.rdbuf();
    auto script = parse_script(buffer.str(), file.string());
    if (!ids.insert(script.id).second) {
      throw ScriptError(file.string(), script.line, "duplicate task id '" + script.id + "'");
    }
    scripts.push_back(std::move(script));
  }
  std::sort(scripts.begin(), scripts.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return scripts;
}

}  // namespace kinder
