#ifndef PERCEPT_SALIENCY_HPP
#define PERCEPT_SALIENCY_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "percept/error.hpp"
#include "percept/oracles.hpp"
#include "percept/text.hpp"

namespace percept {

struct SaliencyEntry {
  std::size_t position = 0;
  double value = 0.0;

  friend bool operator==(const SaliencyEntry&, const SaliencyEntry&) = default;
};

/// Positions ordered by descending saliency, ties by ascending position.
struct SaliencyRanking {
  std::vector<SaliencyEntry> entries;
  std::string translator_id;
  std::string sentiment_id;
  Label target = Label::positive;

  std::vector<std::size_t> order() const {
    std::vector<std::size_t> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.position);
    return out;
  }

  friend bool operator==(const SaliencyRanking&, const SaliencyRanking&) = default;
};

inline TokenSequence delete_token(const TokenSequence& seq, std::size_t position) {
  std::vector<std::string> tokens;
  tokens.reserve(seq.size() - 1);
  for (std::size_t i = 0; i < seq.size(); ++i)
    if (i != position) tokens.push_back(seq.tokens[i]);
  return seq.with_tokens(std::move(tokens));
}

/// phi(F(x)) for the target label.
inline double output_target_probability(const TranslationOracle& translator,
                                        const SentimentOracle& sentiment,
                                        const TokenSequence& source, Label target) {
  return sentiment.score(translator.translate(source)).probability(target);
}

namespace detail {

inline void require_deletable(const TokenSequence& source) {
  if (source.size() < 2) throw InvalidInput("cannot delete sole token");
}

inline double deletion_saliency(const TokenSequence& source, std::size_t position,
                                const TranslationOracle& translator,
                                const SentimentOracle& sentiment, Label target, double base) {
  const double without =
      output_target_probability(translator, sentiment, delete_token(source, position), target);
  return std::abs(without - base);
}

}  // namespace detail

/// |phi(F(x without token t)) - phi(F(x))|.
inline double sentiment_saliency(const TokenSequence& source, std::size_t position,
                                 const TranslationOracle& translator,
                                 const SentimentOracle& sentiment, Label target) {
  detail::require_deletable(source);
  if (position >= source.size()) throw InvalidInput("position out of range");
  const double base = output_target_probability(translator, sentiment, source, target);
  return detail::deletion_saliency(source, position, translator, sentiment, target, base);
}

/// Ranks `positions` (all positions by default) of `source`. The base
/// translation is computed once, so at most |positions| + 1 translation
/// calls are issued.
inline SaliencyRanking rank_positions(const TokenSequence& source,
                                      const TranslationOracle& translator,
                                      const SentimentOracle& sentiment, Label target,
                                      const std::vector<std::size_t>* positions = nullptr) {
  detail::require_deletable(source);
  std::vector<std::size_t> subset;
  if (positions != nullptr) {
    subset = *positions;
  } else {
    subset.resize(source.size());
    for (std::size_t i = 0; i < subset.size(); ++i) subset[i] = i;
  }
  const double base = output_target_probability(translator, sentiment, source, target);
  SaliencyRanking ranking{{}, translator.id(), sentiment.id(), target};
  ranking.entries.reserve(subset.size());
  for (std::size_t position : subset) {
    if (position >= source.size()) throw InvalidInput("position out of range");
    ranking.entries.push_back(
        {position, detail::deletion_saliency(source, position, translator, sentiment, target, base)});
  }
  std::ranges::sort(ranking.entries, [](const SaliencyEntry& a, const SaliencyEntry& b) {
    if (a.value != b.value) return a.value > b.value;
    return a.position < b.position;
  });
  return ranking;
}

}  // namespace percept

#endif  // PERCEPT_SALIENCY_HPP
