#ifndef PERCEPT_CORPUS_HPP
#define PERCEPT_CORPUS_HPP

#include <cctype>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "percept/error.hpp"
#include "percept/evaluation.hpp"
#include "percept/export.hpp"
#include "percept/text.hpp"

namespace percept {

namespace detail {

inline std::string_view strip_bom(std::string_view text) {
  constexpr std::string_view kBom = "\xEF\xBB\xBF";
  if (text.substr(0, kBom.size()) == kBom) text.remove_prefix(kBom.size());
  return text;
}

inline bool blank(std::string_view line) {
  for (unsigned char c : line)
    if (!std::isspace(c)) return false;
  return true;
}

/// Splits on LF, dropping a trailing CR from each line.
inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  while (!text.empty()) {
    const auto end = text.find('\n');
    std::string_view line = text.substr(0, end);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (end == std::string_view::npos) break;
    text.remove_prefix(end + 1);
  }
  return lines;
}

}  // namespace detail

/// Parses newline-delimited UTF-8 text: one sentence per line, blank lines
/// skipped, ids are 1-based line numbers.
inline std::vector<CorpusEntry> parse_corpus(std::string_view text, const std::string& language) {
  const auto lines = detail::split_lines(detail::strip_bom(text));
  std::vector<CorpusEntry> corpus;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (detail::blank(lines[i])) continue;
    try {
      corpus.push_back({i + 1, tokenize(lines[i], language)});
    } catch (const InvalidInput& e) {
      throw InvalidInput("line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  if (corpus.empty()) throw InvalidInput("corpus has no usable lines");
  return corpus;
}

inline std::vector<CorpusEntry> load_corpus(const std::filesystem::path& path, const std::string& language) {
  return parse_corpus(read_text_file(path), language);
}

inline std::vector<TokenSequence> texts_of(std::span<const CorpusEntry> corpus) {
  std::vector<TokenSequence> out;
  out.reserve(corpus.size());
  for (const auto& entry : corpus) out.push_back(entry.text);
  return out;
}

}  // namespace percept

#endif  // PERCEPT_CORPUS_HPP
