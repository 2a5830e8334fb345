#ifndef PERCEPT_CONSTRAINTS_HPP
#define PERCEPT_CONSTRAINTS_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "percept/error.hpp"
#include "percept/oracles.hpp"
#include "percept/text.hpp"

// The imperceptibility constraint set: visual similarity (normalized word
// edit distance), perplexity relative to the dataset mean, and preservation
// of the input's perceived sentiment. Synonym-only substitution is enforced
// structurally by the attack engine.

namespace percept {

enum class PerceptionMode { class_preserved, score_delta, both };

inline std::string_view to_string(PerceptionMode mode) {
  switch (mode) {
    case PerceptionMode::class_preserved: return "class-preserved";
    case PerceptionMode::score_delta: return "score-delta";
    case PerceptionMode::both: return "both";
  }
  return "?";
}

inline std::optional<PerceptionMode> parse_perception_mode(std::string_view text) {
  if (text == "class-preserved") return PerceptionMode::class_preserved;
  if (text == "score-delta") return PerceptionMode::score_delta;
  if (text == "both") return PerceptionMode::both;
  return std::nullopt;
}

struct ConstraintConfig {
  static constexpr double kDefaultEpsilon1 = 0.3;
  static constexpr double kDefaultKappa = 1.5;

  double epsilon1 = kDefaultEpsilon1;
  double kappa = kDefaultKappa;
  std::optional<double> mean_perplexity;
  std::optional<double> epsilon3;
  PerceptionMode perception = PerceptionMode::class_preserved;
  /// Drop the neutral label from max-class comparisons (3-label oracles).
  bool ignore_neutral = false;

  /// Throws ConfigError naming the offending field.
  void validate() const {
    if (!(epsilon1 >= 0.0 && epsilon1 <= 1.0))
      throw ConfigError("constraints.epsilon1", "must be in [0,1]");
    if (!(kappa > 0.0) || !std::isfinite(kappa))
      throw ConfigError("constraints.kappa", "must be positive");
    if (mean_perplexity && !(*mean_perplexity > 0.0 && std::isfinite(*mean_perplexity)))
      throw ConfigError("constraints.mean_perplexity", "must be positive");
    if (epsilon3 && !(*epsilon3 >= 0.0 && *epsilon3 <= 1.0))
      throw ConfigError("constraints.epsilon3", "must be in [0,1]");
    if (perception != PerceptionMode::class_preserved && !epsilon3)
      throw ConfigError("constraints.epsilon3", "required by perception mode '" +
                                                    std::string(to_string(perception)) + "'");
  }

  double perplexity_threshold() const {
    if (!mean_perplexity) throw ConfigError("constraints.mean_perplexity", "not computed");
    return kappa * *mean_perplexity;
  }

  friend bool operator==(const ConstraintConfig&, const ConstraintConfig&) = default;
};

struct ConstraintEntry {
  std::string name;
  /// Empty when the measurement itself failed.
  std::optional<double> measured;
  double threshold = 0.0;
  bool passed = false;
  std::string note;
  /// Set when an oracle failed; such an entry never passes.
  bool errored = false;

  friend bool operator==(const ConstraintEntry&, const ConstraintEntry&) = default;
};

struct ConstraintReport {
  std::vector<ConstraintEntry> entries;

  bool passed() const {
    return std::ranges::all_of(entries, [](const ConstraintEntry& e) { return e.passed; });
  }

  bool errored() const {
    return std::ranges::any_of(entries, [](const ConstraintEntry& e) { return e.errored; });
  }

  const ConstraintEntry* find(std::string_view name) const {
    for (const auto& e : entries)
      if (e.name == name) return &e;
    return nullptr;
  }

  friend bool operator==(const ConstraintReport&, const ConstraintReport&) = default;
};

namespace constraint_names {
inline constexpr std::string_view visual = "visual";
inline constexpr std::string_view perplexity = "perplexity";
inline constexpr std::string_view input_perception = "input_perception";
}  // namespace constraint_names

namespace detail {

inline ConstraintEntry failed_entry(std::string_view name, double threshold, const std::exception& e) {
  return ConstraintEntry{std::string(name), std::nullopt, threshold, false,
                         std::string("oracle error: ") + e.what(), true};
}

}  // namespace detail

inline ConstraintEntry check_visual(const ConstraintConfig& config, const TokenSequence& original,
                                    const TokenSequence& candidate) {
  const double distance = normalized_edit_distance(original, candidate);
  return ConstraintEntry{std::string(constraint_names::visual), distance, config.epsilon1,
                         distance <= config.epsilon1, {}, false};
}

/// Boundary inclusive. Fails closed when the oracle is unreachable.
inline ConstraintEntry check_perplexity(const ConstraintConfig& config, const PerplexityOracle& oracle,
                                        const TokenSequence& candidate) {
  const double threshold = config.perplexity_threshold();
  try {
    const double value = oracle.perplexity(candidate);
    return ConstraintEntry{std::string(constraint_names::perplexity), value, threshold,
                           value <= threshold, {}, false};
  } catch (const OracleUnavailable& e) {
    return detail::failed_entry(constraint_names::perplexity, threshold, e);
  } catch (const ProtocolError& e) {
    return detail::failed_entry(constraint_names::perplexity, threshold, e);
  }
}

/// The measured value is |phi(candidate) - phi(original)| on the target
/// label. Which comparison decides `passed` depends on the perception mode.
inline ConstraintEntry check_input_perception(const ConstraintConfig& config,
                                              const SentimentOracle& oracle,
                                              const TokenSequence& original,
                                              const TokenSequence& candidate, Label target) {
  const double threshold = config.epsilon3.value_or(0.0);
  try {
    if (original.language != candidate.language)
      throw InvalidInput("input perception compares sequences of different languages");
    const SentimentScore before = oracle.score(original);
    const SentimentScore after = oracle.score(candidate);
    const double delta = std::abs(after.probability(target) - before.probability(target));
    const Label class_before = classify_max_class(before, config.ignore_neutral);
    const Label class_after = classify_max_class(after, config.ignore_neutral);
    const bool class_ok = class_before == class_after;
    const bool delta_ok = config.epsilon3.has_value() && delta <= *config.epsilon3;
    bool passed = false;
    switch (config.perception) {
      case PerceptionMode::class_preserved: passed = class_ok; break;
      case PerceptionMode::score_delta: passed = delta_ok; break;
      case PerceptionMode::both: passed = class_ok && delta_ok; break;
    }
    std::string note = std::string(to_string(class_before)) + "->" + std::string(to_string(class_after));
    return ConstraintEntry{std::string(constraint_names::input_perception), delta, threshold, passed,
                           std::move(note), false};
  } catch (const OracleUnavailable& e) {
    return detail::failed_entry(constraint_names::input_perception, threshold, e);
  } catch (const ProtocolError& e) {
    return detail::failed_entry(constraint_names::input_perception, threshold, e);
  }
}

/// Arithmetic mean of per-sentence perplexities over the original corpus.
inline double compute_dataset_mean_perplexity(const PerplexityOracle& oracle,
                                              std::span<const TokenSequence> corpus) {
  if (corpus.empty()) throw InvalidInput("empty corpus");
  double total = 0.0;
  for (const auto& seq : corpus) total += oracle.perplexity(seq);
  return total / static_cast<double>(corpus.size());
}

/// Oracles consulted by evaluate_constraints. A null input-sentiment oracle
/// omits the input-perception entry (direct attacks).
struct ConstraintOracles {
  const PerplexityOracle* perplexity = nullptr;
  const SentimentOracle* input_sentiment = nullptr;
};

inline ConstraintReport evaluate_constraints(const ConstraintConfig& config,
                                             const ConstraintOracles& oracles,
                                             const TokenSequence& original,
                                             const TokenSequence& candidate, Label target) {
  if (oracles.perplexity == nullptr) throw InvalidInput("perplexity oracle missing");
  ConstraintReport report;
  report.entries.push_back(check_visual(config, original, candidate));
  report.entries.push_back(check_perplexity(config, *oracles.perplexity, candidate));
  if (oracles.input_sentiment != nullptr)
    report.entries.push_back(
        check_input_perception(config, *oracles.input_sentiment, original, candidate, target));
  return report;
}

}  // namespace percept

#endif  // PERCEPT_CONSTRAINTS_HPP
