#ifndef PERCEPT_TESTS_EXHAUSTIVE_HPP
#define PERCEPT_TESTS_EXHAUSTIVE_HPP

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "percept/attack.hpp"

// Test-only reference implementations. Nothing here calls the library's
// edit distance, constraint checks, saliency or search; only the oracles
// themselves are shared.

namespace percept::testing {

/// Textbook full-matrix Levenshtein DP.
inline std::size_t reference_levenshtein(const std::vector<std::string>& a,
                                         const std::vector<std::string>& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + cost});
    }
  return d[a.size()][b.size()];
}

/// Binary max-class with ties to negative, written out independently.
inline bool reference_is_positive(const SentimentScore& s) {
  return s.probability(Label::positive) > s.probability(Label::negative);
}

inline Label reference_class(const SentimentScore& s) {
  return reference_is_positive(s) ? Label::positive : Label::negative;
}

struct IndependentVerdict {
  bool visual = false;
  bool perplexity = false;
  bool input_class = true;
  bool synonyms = true;
  bool all() const { return visual && perplexity && input_class && synonyms; }
};

/// Re-verifies an adversarial source against the original: edit distance,
/// perplexity, input class (skipped when `input_sentiment` is null) and
/// synonym membership of every changed token.
inline IndependentVerdict independent_check(const TokenSequence& original,
                                            const TokenSequence& adversarial, double epsilon1,
                                            double perplexity_threshold, const AttackOracles& o) {
  IndependentVerdict v;
  const double distance = static_cast<double>(reference_levenshtein(original.tokens, adversarial.tokens)) /
                          static_cast<double>(original.size());
  v.visual = distance <= epsilon1;
  v.perplexity = o.perplexity->perplexity(adversarial) <= perplexity_threshold;
  if (o.input_sentiment != nullptr)
    v.input_class = reference_class(o.input_sentiment->score(original)) ==
                    reference_class(o.input_sentiment->score(adversarial));
  if (original.size() != adversarial.size()) {
    v.synonyms = false;
  } else {
    for (std::size_t i = 0; i < original.size(); ++i) {
      if (original.tokens[i] == adversarial.tokens[i]) continue;
      const auto syns = o.synonyms->synonyms(original.tokens[i]);
      if (std::find(syns.begin(), syns.end(), adversarial.tokens[i]) == syns.end()) v.synonyms = false;
    }
  }
  return v;
}

struct ExhaustiveOptimum {
  /// Best target probability over the original and every feasible edit set.
  double best = 0.0;
  /// Some feasible edit set of size <= N makes the output classify as target.
  bool reaches_target = false;
  std::size_t feasible_sets = 0;
};

/// Enumerates every set of at most `max_edits` in-place synonym
/// substitutions and scores each feasible one through the oracles.
inline ExhaustiveOptimum exhaustive_optimum(const TokenSequence& source, std::size_t max_edits,
                                            Label target, const AttackOracles& o,
                                            double perplexity_threshold) {
  ExhaustiveOptimum result;
  const double epsilon1 = static_cast<double>(max_edits) / static_cast<double>(source.size());
  auto score = [&](const TokenSequence& candidate) {
    const SentimentScore s = o.output_sentiment->score(o.translator->translate(candidate));
    const double p = s.probability(target);
    result.best = std::max(result.best, p);
    if (reference_class(s) == target) result.reaches_target = true;
  };
  score(source);

  std::vector<std::vector<std::string>> options(source.size());
  for (std::size_t i = 0; i < source.size(); ++i) options[i] = o.synonyms->synonyms(source.tokens[i]);

  std::vector<std::string> tokens = source.tokens;
  auto recurse = [&](auto&& self, std::size_t position, std::size_t used) -> void {
    if (position == source.size()) {
      if (used == 0) return;
      const TokenSequence candidate = source.with_tokens(tokens);
      if (!independent_check(source, candidate, epsilon1, perplexity_threshold, o).all()) return;
      ++result.feasible_sets;
      score(candidate);
      return;
    }
    self(self, position + 1, used);
    if (used == max_edits) return;
    for (const auto& replacement : options[position]) {
      tokens[position] = replacement;
      self(self, position + 1, used + 1);
    }
    tokens[position] = source.tokens[position];
  };
  recurse(recurse, 0, 0);
  return result;
}

}  // namespace percept::testing

#endif  // PERCEPT_TESTS_EXHAUSTIVE_HPP
