#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace m2sm {

using TokenId = std::int32_t;
using TokenIds = std::vector<TokenId>;
using Tokens = std::vector<std::string>;

namespace detail {

// Length in bytes of a UTF-8 whitespace sequence starting at s[i], or 0.
inline std::size_t utf8_space_len(std::string_view s, std::size_t i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  if (b0 == ' ' || (b0 >= '\t' && b0 <= '\r')) return 1;
  if (b0 == 0xC2 && i + 1 < s.size()) {
    const auto b1 = static_cast<unsigned char>(s[i + 1]);
    if (b1 == 0x85 || b1 == 0xA0) return 2;  // NEL, NBSP
  }
  if (i + 2 < s.size()) {
    const auto b1 = static_cast<unsigned char>(s[i + 1]);
    const auto b2 = static_cast<unsigned char>(s[i + 2]);
    if (b0 == 0xE1 && b1 == 0x9A && b2 == 0x80) return 3;                 // U+1680
    if (b0 == 0xE2 && b1 == 0x80 && (b2 <= 0x8A || b2 == 0xA8 || b2 == 0xA9 || b2 == 0xAF)) {
      return 3;                                                           // U+2000..200A, 2028, 2029, 202F
    }
    if (b0 == 0xE2 && b1 == 0x81 && b2 == 0x9F) return 3;                 // U+205F
    if (b0 == 0xE3 && b1 == 0x80 && b2 == 0x80) return 3;                 // U+3000
  }
  return 0;
}

inline bool is_edge_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

}  // namespace detail

/// Lowercases ASCII, splits on Unicode whitespace, and strips ASCII
/// punctuation from both token edges. Tokens that become empty are dropped.
inline Tokens tokenize(std::string_view text) {
  Tokens out;
  std::string cur;
  auto flush = [&] {
    std::size_t b = 0;
    std::size_t e = cur.size();
    while (b < e && detail::is_edge_punct(cur[b])) ++b;
    while (e > b && detail::is_edge_punct(cur[e - 1])) --e;
    if (e > b) out.emplace_back(cur.substr(b, e - b));
    cur.clear();
  };
  for (std::size_t i = 0; i < text.size();) {
    if (const std::size_t n = detail::utf8_space_len(text, i); n > 0) {
      flush();
      i += n;
      continue;
    }
    cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[i]))));
    ++i;
  }
  flush();
  return out;
}

/// Token-to-id table. Id 0 is reserved for out-of-vocabulary tokens; the
/// remaining ids follow lexicographic token order so a vocabulary built from
/// the same corpus is always identical.
class Vocabulary {
 public:
  static constexpr TokenId kUnknown = 0;
  static constexpr std::string_view kUnknownToken = "<unk>";

  Vocabulary() : words_{std::string(kUnknownToken)} {}

  static Vocabulary build(const std::set<std::string>& tokens) {
    Vocabulary v;
    for (const auto& t : tokens) {
      if (t == kUnknownToken) continue;
      v.index_.emplace(t, static_cast<TokenId>(v.words_.size()));
      v.words_.push_back(t);
    }
    return v;
  }

  static Vocabulary from_words(const std::vector<std::string>& words) {
    Vocabulary v;
    v.words_.clear();
    for (const auto& w : words) {
      v.index_.emplace(w, static_cast<TokenId>(v.words_.size()));
      v.words_.push_back(w);
    }
    return v;
  }

  TokenId id(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnknown : it->second;
  }

  TokenIds encode(const Tokens& tokens) const {
    TokenIds ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(id(t));
    return ids;
  }

  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::map<std::string, TokenId> index_;
};

}  // namespace m2sm
