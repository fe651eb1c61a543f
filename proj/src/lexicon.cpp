#include <algorithm>
#include <set>

#include "kinder/tasks.hpp"

namespace kinder {

namespace {

constexpr std::string_view kWordPunctuation = ",;:.";

// Calls fn(core, suffix, rewritable) for every space-separated piece.
template <typename Fn>
void for_each_piece(std::string_view text, Fn&& fn) {
  bool environment = false;
  std::size_t begin = 0;
  while (begin <= text.size()) {
    std::size_t end = text.find(' ', begin);
    if (end == std::string_view::npos) end = text.size();
    std::string_view piece = text.substr(begin, end - begin);

    if (piece == "@E:") {
      environment = true;
      fn(piece, std::string_view{}, false);
    } else if (piece == "@T:") {
      environment = false;
      fn(piece, std::string_view{}, false);
    } else {
      std::size_t cut = piece.size();
      while (cut > 0 && kWordPunctuation.find(piece[cut - 1]) != std::string_view::npos) --cut;
      fn(piece.substr(0, cut), piece.substr(cut), !environment);
    }
    if (end == text.size()) break;
    fn(std::string_view{}, std::string_view{" "}, false);
    begin = end + 1;
  }
}

}  // namespace

Lexicon Lexicon::from_pairs(const std::vector<std::pair<std::string, std::string>>& pairs) {
  Lexicon lexicon;
  std::set<std::string, std::less<>> values;
  for (const auto& [from, to] : pairs) {
    if (from.empty() || to.empty()) throw std::invalid_argument("lexicon words must be nonempty");
    if (from == to) continue;
    if (!lexicon.forward_.emplace(from, to).second) {
      throw std::invalid_argument("lexicon maps '" + from + "' twice");
    }
    if (!values.insert(to).second) throw std::invalid_argument("lexicon maps two words to '" + to + "'");
  }

  // Close the mapping into a permutation so that it stays a bijection on all
  // words: every image that is not itself rewritten is sent back to a source
  // that nothing maps onto.
  std::vector<std::string> loose_images;
  std::vector<std::string> free_sources;
  for (const auto& value : values) {
    if (!lexicon.forward_.contains(value)) loose_images.push_back(value);
  }
  for (const auto& [from, to] : lexicon.forward_) {
    if (!values.contains(from)) free_sources.push_back(from);
  }
  for (std::size_t i = 0; i < loose_images.size(); ++i) {
    lexicon.forward_.emplace(loose_images[i], free_sources[i]);
  }
  return lexicon;
}

std::string Lexicon::word(std::string_view word) const {
  auto it = forward_.find(word);
  return it == forward_.end() ? std::string(word) : it->second;
}

std::string Lexicon::apply(std::string_view teacher_text) const {
  if (forward_.empty()) return std::string(teacher_text);
  std::string out;
  out.reserve(teacher_text.size() + 8);
  for_each_piece(teacher_text, [&](std::string_view core, std::string_view suffix, bool rewritable) {
    out += rewritable ? word(core) : std::string(core);
    out += suffix;
  });
  return out;
}

Lexicon Lexicon::inverse() const {
  Lexicon out;
  for (const auto& [from, to] : forward_) out.forward_.emplace(to, from);
  return out;
}

std::vector<std::string> teacher_words(std::string_view teacher_text) {
  std::vector<std::string> words;
  for_each_piece(teacher_text, [&](std::string_view core, std::string_view, bool rewritable) {
    if (rewritable && !core.empty()) words.emplace_back(core);
  });
  return words;
}

}  // namespace kinder
