#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace kinder {

/// Every party that can write to (or be addressed on) a channel. `Reward` is
/// the pseudo-speaker of the textual reward echo ("R: 1.").
enum class Agent : std::uint8_t { Teacher, Environment, Learner, Human, External, Reward };

std::string_view agent_name(Agent agent);

inline constexpr char kSilence = ' ';
inline constexpr char kTerminator = '.';

/// True for the symbols a channel may carry.
bool in_alphabet(char symbol);

/// All channel symbols in a fixed order (used by the random baseline).
std::string_view alphabet();

class FramingError : public std::runtime_error {
public:
  FramingError(const std::string& what, char symbol)
      : std::runtime_error(what), symbol_(symbol) {}
  char symbol() const noexcept { return symbol_; }

private:
  char symbol_;
};

/// A framed utterance. On the input side `addressee` names the agent whose
/// prefix opened the message ("T: ", "E: ", "R: "); on the output side it is
/// the agent the Learner addressed ("@T: ", "@E: ").
struct Message {
  Agent speaker = Agent::External;
  std::optional<Agent> addressee;
  std::string body;
  std::string raw;

  bool operator==(const Message&) const = default;
};

/// Builds the framed text for `body`. Learner messages get an "@X: " prefix
/// naming the addressee, everybody else speaks under their own "X: " prefix.
std::string frame(std::string_view body, Agent addressee, Agent speaker, bool allow_empty = false);

enum class Direction : std::uint8_t { Input, Output };

/// Incremental splitter: feed one symbol at a time, get a Message whenever a
/// terminator closes one. Leading silence before a message is dropped.
class StreamParser {
public:
  explicit StreamParser(Direction direction) : direction_(direction) {}

  std::optional<Message> push(char symbol);

  /// Text received since the last terminator, silence-trimmed on the left.
  std::string_view pending() const noexcept { return buffer_; }
  bool mid_message() const noexcept { return !buffer_.empty(); }

private:
  Direction direction_;
  std::string buffer_;
};

/// Classifies a complete raw message (terminator included).
Message classify(std::string_view raw, Direction direction);

struct ParsedStream {
  std::vector<Message> messages;
  std::string remainder;
};

/// Splits free text on terminators. Line breaks count as white space and a
/// hyphen directly before a line break is a soft hyphen and is dropped.
ParsedStream parse_stream(std::string_view symbols, Direction direction);

struct Segment {
  Agent addressee = Agent::Teacher;
  std::string text;
  std::size_t offset = 0;  // position of `text` within the routed string

  bool operator==(const Segment& other) const {
    return addressee == other.addressee && text == other.text;
  }
};

/// Splits a learner message into per-addressee segments. Text before the
/// first "@T: "/"@E: " prefix reaches nobody; trailing spaces in front of
/// the next prefix or the terminator are dropped from a segment.
std::vector<Segment> route(std::string_view text);
std::vector<Segment> route(const Message& learner_message);

/// Per-writer outgoing queues arbitrated one symbol per tick. A message
/// that has started always finishes before the next one begins; among
/// writers waiting at a message boundary Teacher beats Environment beats
/// everybody else.
class InputMux {
public:
  void enqueue(Agent writer, std::string framed);
  char next();

  bool idle() const noexcept;
  bool mid_message() const noexcept { return current_.has_value(); }
  std::size_t queued_symbols() const noexcept;
  void clear();

private:
  static constexpr std::size_t kWriters = 6;
  static std::size_t priority(Agent writer) noexcept;

  std::array<std::deque<std::string>, kWriters> queues_;
  struct Active {
    std::string text;
    std::size_t position = 0;
  };
  std::optional<Active> current_;
};

class RewardInvariantError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

/// Side-band reward delivery. Rewards are handed out at most one per tick;
/// a second reward raised in the same tick waits for the following one.
class RewardChannel {
public:
  /// Queues `value` (must be +1 or -1) and its textual echo on `mux`.
  void deliver(int value, std::uint64_t tick, InputMux& mux);
  /// Side-band value for the frame of `tick`.
  int take(std::uint64_t tick);
  bool pending() const noexcept { return !queue_.empty(); }

private:
  struct Pending {
    int value;
    std::uint64_t raised_at;
  };
  std::deque<Pending> queue_;
  std::optional<std::uint64_t> last_taken_;
};

std::string reward_echo(int value);

struct TickFrame {
  std::uint64_t tick = 0;
  char input = kSilence;
  std::int8_t reward = 0;
  char output = kSilence;

  bool operator==(const TickFrame&) const = default;
};

std::string escape_symbol(char symbol);
char unescape_symbol(std::string_view text);

/// "tick\tinput\treward\toutput" with escaped symbols.
std::string format_frame(const TickFrame& frame);
TickFrame parse_frame(std::string_view line);

/// Hex-encoded SHA-256 of arbitrary bytes.
std::string sha256_hex(std::string_view bytes);

/// SHA-256 over the formatted frames, hex encoded.
std::string transcript_hash(const std::vector<TickFrame>& frames);

/// Incremental version of transcript_hash.
class TranscriptHasher {
public:
  TranscriptHasher();
  ~TranscriptHasher();
  TranscriptHasher(TranscriptHasher&&) noexcept;
  TranscriptHasher& operator=(TranscriptHasher&&) noexcept;

  void add(const TickFrame& frame);
  void add_bytes(std::string_view bytes);
  std::string hex() const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace kinder
