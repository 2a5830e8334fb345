#ifndef PERCEPT_TEXT_HPP
#define PERCEPT_TEXT_HPP

#include <algorithm>
#include <cstddef>
#include <ranges>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include "percept/error.hpp"

namespace percept {

/// A word-tokenized sentence. `raw` keeps the untokenized text when the
/// sequence came from tokenize(); synthesized sequences leave it empty.
struct TokenSequence {
  std::vector<std::string> tokens;
  std::string language;
  std::string raw;

  std::size_t size() const noexcept { return tokens.size(); }
  bool empty() const noexcept { return tokens.empty(); }
  const std::string& operator[](std::size_t i) const { return tokens[i]; }

  /// Same language, new tokens, no raw text.
  TokenSequence with_tokens(std::vector<std::string> replacement) const {
    return TokenSequence{std::move(replacement), language, {}};
  }

  /// Equality of the token list and language only; `raw` is provenance.
  bool same_tokens(const TokenSequence& other) const {
    return tokens == other.tokens && language == other.language;
  }

  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

namespace detail {

inline std::string nfc(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* normalizer = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw Error("ICU NFC normalizer unavailable");
  const auto* bytes = reinterpret_cast<const uint8_t*>(text.data());
  const auto length = static_cast<int32_t>(text.size());
  for (int32_t i = 0; i < length;) {
    UChar32 c;
    U8_NEXT(bytes, i, length, c);
    if (c < 0) throw InvalidInput("text is not valid UTF-8");
  }
  icu::UnicodeString source = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  icu::UnicodeString normalized = normalizer->normalize(source, status);
  if (U_FAILURE(status)) throw InvalidInput("text is not valid Unicode");
  std::string out;
  normalized.toUTF8String(out);
  return out;
}

// Decodes the code point starting at `pos`; advances `pos`. Invalid bytes
// decode to a negative value.
inline UChar32 next_code_point(std::string_view text, std::size_t& pos) {
  int32_t i = static_cast<int32_t>(pos);
  const auto length = static_cast<int32_t>(text.size());
  UChar32 c = 0;
  U8_NEXT(reinterpret_cast<const uint8_t*>(text.data()), i, length, c);
  pos = static_cast<std::size_t>(i);
  return c;
}

// Tokens that attach to the preceding word when detokenizing.
inline bool closes(std::string_view token) {
  static constexpr std::string_view kClosing[] = {
      ",", ".", "!", "?", ";", ":", "%", ")", "]", "}", "»", "”", "’", "…", "\"", "'"};
  return std::ranges::find(kClosing, token) != std::end(kClosing);
}

// Tokens that attach to the following word when detokenizing.
inline bool opens(std::string_view token) {
  static constexpr std::string_view kOpening[] = {"(", "[", "{", "«", "„", "“", "‘", "¿", "¡"};
  return std::ranges::find(kOpening, token) != std::end(kOpening);
}

}  // namespace detail

/// NFC-normalizes `raw`, splits every punctuation code point into its own
/// token and splits the rest on whitespace. Case is preserved.
inline TokenSequence tokenize(std::string_view raw, std::string language) {
  const std::string text = detail::nfc(raw);
  TokenSequence seq{{}, std::move(language), std::string(raw)};
  std::string current;
  auto flush = [&] {
    if (!current.empty()) seq.tokens.push_back(std::exchange(current, {}));
  };
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t start = pos;
    const UChar32 c = detail::next_code_point(text, pos);
    if (c < 0) throw InvalidInput("text is not valid UTF-8");
    if (u_isUWhiteSpace(c)) {
      flush();
    } else if (u_ispunct(c)) {
      flush();
      seq.tokens.emplace_back(text.substr(start, pos - start));
    } else {
      current.append(text, start, pos - start);
    }
  }
  flush();
  if (seq.tokens.empty()) throw InvalidInput("empty input");
  return seq;
}

/// Joins tokens with single spaces, then drops the space before closing
/// punctuation and after opening brackets/quotes.
inline std::string detokenize(const TokenSequence& seq) {
  if (seq.empty()) throw InvalidInput("empty input");
  std::string out = seq.tokens.front();
  for (std::size_t i = 1; i < seq.tokens.size(); ++i) {
    const std::string& token = seq.tokens[i];
    if (!detail::closes(token) && !detail::opens(seq.tokens[i - 1])) out += ' ';
    out += token;
  }
  return out;
}

/// Unit-cost Levenshtein distance (substitution, insertion, deletion) over
/// any two random-access ranges with equality-comparable elements.
template <std::ranges::random_access_range A, std::ranges::random_access_range B>
std::size_t levenshtein(const A& source, const B& target) {
  const auto n = static_cast<std::size_t>(std::ranges::size(source));
  const auto m = static_cast<std::size_t>(std::ranges::size(target));
  std::vector<std::size_t> row(m + 1);
  for (std::size_t j = 0; j <= m; ++j) row[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    std::size_t diagonal = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t above = row[j];
      const bool same = std::ranges::begin(source)[i - 1] == std::ranges::begin(target)[j - 1];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diagonal + (same ? 0 : 1)});
      diagonal = above;
    }
  }
  return row[m];
}

/// Word-level Levenshtein distance divided by the ORIGINAL length.
/// Not symmetric.
inline double normalized_edit_distance(const TokenSequence& original,
                                       const TokenSequence& candidate) {
  if (original.empty()) throw InvalidInput("empty original");
  return static_cast<double>(levenshtein(original.tokens, candidate.tokens)) /
         static_cast<double>(original.size());
}

}  // namespace percept

#endif  // PERCEPT_TEXT_HPP
