#include "kinder/channel.hpp"

#include <algorithm>
#include <charconv>

#include <openssl/evp.h>

namespace kinder {

namespace {

constexpr std::string_view kAlphabet =
    " abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789.:@-,$#%;/'";

struct Prefix {
  std::string_view text;
  Agent agent;
};

constexpr std::array<Prefix, 3> kInputPrefixes{{
    {"T: ", Agent::Teacher},
    {"E: ", Agent::Environment},
    {"R: ", Agent::Reward},
}};

constexpr std::array<Prefix, 2> kOutputPrefixes{{
    {"@T: ", Agent::Teacher},
    {"@E: ", Agent::Environment},
}};

std::string_view strip_terminator(std::string_view raw) {
  if (!raw.empty() && raw.back() == kTerminator) raw.remove_suffix(1);
  return raw;
}

std::string_view trim_right(std::string_view text) {
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  return text;
}

}  // namespace

std::string_view agent_name(Agent agent) {
  switch (agent) {
    case Agent::Teacher: return "teacher";
    case Agent::Environment: return "environment";
    case Agent::Learner: return "learner";
    case Agent::Human: return "human";
    case Agent::External: return "external";
    case Agent::Reward: return "reward";
  }
  return "unknown";
}

bool in_alphabet(char symbol) {
  return kAlphabet.find(symbol) != std::string_view::npos;
}

std::string_view alphabet() { return kAlphabet; }

std::string frame(std::string_view body, Agent addressee, Agent speaker, bool allow_empty) {
  if (body.empty() && !allow_empty) throw FramingError("empty message body", kTerminator);
  for (char c : body) {
    if (c == kTerminator) throw FramingError("terminator inside message body", c);
    if (!in_alphabet(c)) {
      throw FramingError(std::string("symbol outside alphabet: '") + c + "'", c);
    }
  }

  std::string out;
  out.reserve(body.size() + 5);
  if (speaker == Agent::Learner) {
    switch (addressee) {
      case Agent::Teacher: out += "@T: "; break;
      case Agent::Environment: out += "@E: "; break;
      default: throw FramingError("learner can only address Teacher or Environment", '@');
    }
  } else {
    switch (speaker) {
      case Agent::Teacher: out += "T: "; break;
      case Agent::Environment: out += "E: "; break;
      case Agent::Reward: out += "R: "; break;
      default: throw FramingError("speaker has no input prefix", ':');
    }
  }
  out += body;
  out += kTerminator;
  return out;
}

Message classify(std::string_view raw, Direction direction) {
  Message message;
  message.raw = std::string(raw);
  std::string_view text = strip_terminator(raw);

  if (direction == Direction::Output) {
    message.speaker = Agent::Learner;
    for (const auto& prefix : kOutputPrefixes) {
      if (text.starts_with(prefix.text)) {
        message.addressee = prefix.agent;
        text.remove_prefix(prefix.text.size());
        break;
      }
    }
  } else {
    message.speaker = Agent::External;
    for (const auto& prefix : kInputPrefixes) {
      if (text.starts_with(prefix.text)) {
        message.speaker = prefix.agent;
        message.addressee = prefix.agent;
        text.remove_prefix(prefix.text.size());
        break;
      }
    }
  }
  message.body = std::string(text);
  return message;
}

std::optional<Message> StreamParser::push(char symbol) {
  if (buffer_.empty() && symbol == kSilence) return std::nullopt;
  if (symbol == kTerminator) {
    buffer_ += symbol;
    Message message = classify(buffer_, direction_);
    buffer_.clear();
    return message;
  }
  buffer_ += symbol;
  return std::nullopt;
}

ParsedStream parse_stream(std::string_view symbols, Direction direction) {
  std::string normalized;
  normalized.reserve(symbols.size());
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    char c = symbols[i];
    if (c == '-' && i + 1 < symbols.size() && (symbols[i + 1] == '\n' || symbols[i + 1] == '\r')) {
      // soft hyphen: skip it together with the line break
      ++i;
      if (symbols[i] == '\r' && i + 1 < symbols.size() && symbols[i + 1] == '\n') ++i;
      continue;
    }
    if (c == '\n' || c == '\r' || c == '\t') c = ' ';
    normalized += c;
  }

  ParsedStream result;
  StreamParser parser(direction);
  for (char c : normalized) {
    if (auto message = parser.push(c)) result.messages.push_back(std::move(*message));
  }
  result.remainder = std::string(parser.pending());
  return result;
}

std::vector<Segment> route(std::string_view text) {
  text = strip_terminator(text);

  struct Hit {
    std::size_t position;
    Agent agent;
  };
  std::vector<Hit> hits;
  for (const auto& prefix : kOutputPrefixes) {
    for (auto pos = text.find(prefix.text); pos != std::string_view::npos;
         pos = text.find(prefix.text, pos + 1)) {
      hits.push_back({pos, prefix.agent});
    }
  }
  std::sort(hits.begin(), hits.end(),
            [](const Hit& a, const Hit& b) { return a.position < b.position; });

  std::vector<Segment> segments;
  segments.reserve(hits.size());
  for (std::size_t i = 0; i < hits.size(); ++i) {
    const std::size_t begin = hits[i].position + 4;
    const std::size_t end = i + 1 < hits.size() ? hits[i + 1].position : text.size();
    auto body = trim_right(text.substr(begin, end - begin));
    segments.push_back({hits[i].agent, std::string(body), begin});
  }
  return segments;
}

std::vector<Segment> route(const Message& learner_message) { return route(learner_message.raw); }

std::size_t InputMux::priority(Agent writer) noexcept {
  switch (writer) {
    case Agent::Teacher: return 0;
    case Agent::Environment: return 1;
    case Agent::Reward: return 2;
    case Agent::Human: return 3;
    case Agent::External: return 4;
    case Agent::Learner: return 5;
  }
  return kWriters - 1;
}

void InputMux::enqueue(Agent writer, std::string framed) {
  if (framed.empty()) return;
  queues_[priority(writer)].push_back(std::move(framed));
}

char InputMux::next() {
  if (!current_) {
    for (auto& queue : queues_) {
      if (!queue.empty()) {
        current_ = Active{std::move(queue.front()), 0};
        queue.pop_front();
        break;
      }
    }
  }
  if (!current_) return kSilence;
  char symbol = current_->text[current_->position++];
  if (current_->position == current_->text.size()) current_.reset();
  return symbol;
}

bool InputMux::idle() const noexcept {
  if (current_) return false;
  return std::all_of(queues_.begin(), queues_.end(), [](const auto& q) { return q.empty(); });
}

std::size_t InputMux::queued_symbols() const noexcept {
  std::size_t total = current_ ? current_->text.size() - current_->position : 0;
  for (const auto& queue : queues_) {
    for (const auto& text : queue) total += text.size();
  }
  return total;
}

void InputMux::clear() {
  for (auto& queue : queues_) queue.clear();
  current_.reset();
}

std::string reward_echo(int value) { return value > 0 ? "R: 1." : "R: -1."; }

void RewardChannel::deliver(int value, std::uint64_t tick, InputMux& mux) {
  if (value != 1 && value != -1) {
    throw RewardInvariantError("reward must be +1 or -1, got " + std::to_string(value));
  }
  queue_.push_back({value, tick});
  mux.enqueue(Agent::Reward, reward_echo(value));
}

int RewardChannel::take(std::uint64_t tick) {
  if (last_taken_ && *last_taken_ >= tick) {
    throw RewardInvariantError("side-band read twice for tick " + std::to_string(tick));
  }
  last_taken_ = tick;
  if (queue_.empty() || queue_.front().raised_at >= tick) return 0;
  int value = queue_.front().value;
  queue_.pop_front();
  return value;
}

std::string escape_symbol(char symbol) {
  switch (symbol) {
    case ' ': return "\\s";
    case '\\': return "\\\\";
    case '\t': return "\\t";
    case '\n': return "\\n";
    default: return std::string(1, symbol);
  }
}

char unescape_symbol(std::string_view text) {
  if (text.size() == 1 && text[0] != '\\') return text[0];
  if (text.size() == 2 && text[0] == '\\') {
    switch (text[1]) {
      case 's': return ' ';
      case '\\': return '\\';
      case 't': return '\t';
      case 'n': return '\n';
      default: break;
    }
  }
  throw std::invalid_argument("bad escaped symbol '" + std::string(text) + "'");
}

std::string format_frame(const TickFrame& frame) {
  std::string line = std::to_string(frame.tick);
  line += '\t';
  line += escape_symbol(frame.input);
  line += '\t';
  line += std::to_string(static_cast<int>(frame.reward));
  line += '\t';
  line += escape_symbol(frame.output);
  return line;
}

TickFrame parse_frame(std::string_view line) {
  std::array<std::string_view, 4> fields;
  std::size_t start = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    auto tab = line.find('\t', start);
    if (i < 3 && tab == std::string_view::npos) {
      throw std::invalid_argument("frame needs 4 tab-separated fields: " + std::string(line));
    }
    fields[i] = line.substr(start, i < 3 ? tab - start : std::string_view::npos);
    start = tab + 1;
  }
  TickFrame frame;
  auto [p1, e1] = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), frame.tick);
  int reward = 0;
  auto [p2, e2] = std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), reward);
  if (e1 != std::errc{} || e2 != std::errc{} || reward < -1 || reward > 1) {
    throw std::invalid_argument("malformed frame: " + std::string(line));
  }
  frame.input = unescape_symbol(fields[1]);
  frame.reward = static_cast<std::int8_t>(reward);
  frame.output = unescape_symbol(fields[3]);
  return frame;
}

struct TranscriptHasher::Impl {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  Impl() { EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr); }
  ~Impl() { EVP_MD_CTX_free(ctx); }
};

TranscriptHasher::TranscriptHasher() : impl_(std::make_unique<Impl>()) {}
TranscriptHasher::~TranscriptHasher() = default;
TranscriptHasher::TranscriptHasher(TranscriptHasher&&) noexcept = default;
TranscriptHasher& TranscriptHasher::operator=(TranscriptHasher&&) noexcept = default;

void TranscriptHasher::add(const TickFrame& frame) {
  std::string line = format_frame(frame);
  line += '\n';
  add_bytes(line);
}

void TranscriptHasher::add_bytes(std::string_view bytes) {
  EVP_DigestUpdate(impl_->ctx, bytes.data(), bytes.size());
}

std::string TranscriptHasher::hex() const {
  EVP_MD_CTX* copy = EVP_MD_CTX_new();
  EVP_MD_CTX_copy_ex(copy, impl_->ctx);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_DigestFinal_ex(copy, digest, &length);
  EVP_MD_CTX_free(copy);

  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(length * 2);
  for (unsigned int i = 0; i < length; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

std::string sha256_hex(std::string_view bytes) {
  TranscriptHasher hasher;
  hasher.add_bytes(bytes);
  return hasher.hex();
}

std::string transcript_hash(const std::vector<TickFrame>& frames) {
  TranscriptHasher hasher;
  for (const auto& frame : frames) hasher.add(frame);
  return hasher.hex();
}

}  // namespace kinder
