#ifndef PERCEPT_ATTACK_HPP
#define PERCEPT_ATTACK_HPP

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "percept/constraints.hpp"
#include "percept/error.hpp"
#include "percept/oracles.hpp"
#include "percept/saliency.hpp"
#include "percept/text.hpp"

namespace percept {

struct Substitution {
  std::size_t position = 0;
  std::string original;
  std::string replacement;

  friend bool operator==(const Substitution&, const Substitution&) = default;
};

/// Fraction of words that may be substituted. Doubles as the visual
/// constraint threshold for the attack it drives.
class AttackBudget {
 public:
  explicit AttackBudget(double fraction) : fraction_(fraction) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw InvalidInput("budget fraction must be in [0,1]");
  }

  double fraction() const noexcept { return fraction_; }

  /// Largest n with n / length <= fraction, evaluated exactly as the visual
  /// check evaluates it, so an n-substitution candidate always passes.
  std::size_t max_substitutions(std::size_t length) const {
    if (length == 0) return 0;
    const double t = static_cast<double>(length);
    auto n = static_cast<std::size_t>(std::floor(fraction_ * t));
    while (n < length && static_cast<double>(n + 1) / t <= fraction_) ++n;
    while (n > 0 && static_cast<double>(n) / t > fraction_) --n;
    return n;
  }

 private:
  double fraction_;
};

/// Replaces the token at each substitution's position. Positions must be
/// distinct and in range, and each `original` must match the token found.
inline TokenSequence apply_substitutions(const TokenSequence& original,
                                         std::span<const Substitution> substitutions) {
  std::vector<std::string> tokens = original.tokens;
  std::vector<bool> seen(tokens.size(), false);
  for (const auto& s : substitutions) {
    if (s.position >= tokens.size()) throw InvalidInput("substitution position out of range");
    if (seen[s.position]) throw InvalidInput("duplicate substitution position");
    if (original.tokens[s.position] != s.original)
      throw InvalidInput("substitution does not match original token");
    if (s.replacement == s.original) throw InvalidInput("replacement equals original token");
    seen[s.position] = true;
    tokens[s.position] = s.replacement;
  }
  return original.with_tokens(std::move(tokens));
}

enum class AttackStatus { improved, unchanged, no_candidates };

inline std::string_view to_string(AttackStatus status) {
  switch (status) {
    case AttackStatus::improved: return "improved";
    case AttackStatus::unchanged: return "unchanged";
    case AttackStatus::no_candidates: return "no-candidates";
  }
  return "?";
}

inline std::optional<AttackStatus> parse_attack_status(std::string_view text) {
  if (text == "improved") return AttackStatus::improved;
  if (text == "unchanged") return AttackStatus::unchanged;
  if (text == "no-candidates") return AttackStatus::no_candidates;
  return std::nullopt;
}

/// Where the saliency walk stands, so a larger budget can resume it.
struct SearchState {
  bool ranked = false;
  /// Positions in visiting order.
  std::vector<std::size_t> order;
  /// Index into `order` of the next position to visit.
  std::size_t next = 0;
  /// Some visited position had at least one feasible candidate.
  bool saw_feasible = false;
  /// Oracle ids, target and constraint settings the walk was run with.
  std::string fingerprint;

  friend bool operator==(const SearchState&, const SearchState&) = default;
};

struct AttackResult {
  TokenSequence original;
  TokenSequence adversarial;
  std::vector<Substitution> substitutions;
  TokenSequence original_output;
  TokenSequence adversarial_output;
  SentimentScore score_before;
  SentimentScore score_after;
  ConstraintReport constraints;
  AttackStatus status = AttackStatus::unchanged;
  Label target = Label::positive;
  double budget = 0.0;
  SearchState search;

  double target_before() const { return score_before.probability(target); }
  double target_after() const { return score_after.probability(target); }

  friend bool operator==(const AttackResult&, const AttackResult&) = default;
};

/// Oracles driving an attack. `input_sentiment` may be null, which drops the
/// input-perception constraint (direct attacks).
struct AttackOracles {
  const TranslationOracle* translator = nullptr;
  const SentimentOracle* input_sentiment = nullptr;
  const SentimentOracle* output_sentiment = nullptr;
  const PerplexityOracle* perplexity = nullptr;
  const SynonymOracle* synonyms = nullptr;
};

struct AttackOptions {
  /// Re-rank the unvisited positions by saliency on the current adversarial
  /// sequence after every accepted substitution. Off: one static ranking.
  bool rerank = false;

  friend bool operator==(const AttackOptions&, const AttackOptions&) = default;
};

namespace detail {

inline void require_oracles(const AttackOracles& o) {
  if (!o.translator || !o.output_sentiment || !o.perplexity || !o.synonyms)
    throw InvalidInput("attack requires translator, output sentiment, perplexity and synonym oracles");
}

inline std::string attack_fingerprint(const AttackOracles& o, const ConstraintConfig& c,
                                      Label target, const AttackOptions& options) {
  std::ostringstream out;
  out.precision(17);
  out << o.translator->id() << '|' << (o.input_sentiment ? o.input_sentiment->id() : "-") << '|'
      << o.output_sentiment->id() << '|' << o.perplexity->id() << '|' << o.synonyms->id() << '|'
      << to_string(target) << '|' << c.kappa << '|' << c.mean_perplexity.value_or(-1.0) << '|'
      << c.epsilon3.value_or(-1.0) << '|' << to_string(c.perception) << '|' << c.ignore_neutral
      << '|' << options.rerank;
  return out.str();
}

inline ConstraintReport check_or_throw(const ConstraintConfig& config, const AttackOracles& o,
                                       const TokenSequence& original,
                                       const TokenSequence& candidate, Label target) {
  ConstraintReport report =
      evaluate_constraints(config, {o.perplexity, o.input_sentiment}, original, candidate, target);
  if (report.errored()) {
    for (const auto& e : report.entries)
      if (e.errored) throw OracleUnavailable(e.name + ": " + e.note);
  }
  return report;
}

inline void rank(AttackResult& state, const AttackOracles& o) {
  const TokenSequence& source = state.original;
  if (source.size() == 1) {
    state.search.order = {0};
  } else {
    state.search.order =
        rank_positions(source, *o.translator, *o.output_sentiment, state.target).order();
  }
  state.search.ranked = true;
  state.search.next = 0;
}

inline void rerank_remaining(AttackResult& state, const AttackOracles& o) {
  auto& search = state.search;
  if (search.next + 1 >= search.order.size() || state.adversarial.size() < 2) return;
  std::vector<std::size_t> remaining(search.order.begin() + static_cast<std::ptrdiff_t>(search.next),
                                     search.order.end());
  const SaliencyRanking ranking =
      rank_positions(state.adversarial, *o.translator, *o.output_sentiment, state.target, &remaining);
  const auto reordered = ranking.order();
  std::copy(reordered.begin(), reordered.end(),
            search.order.begin() + static_cast<std::ptrdiff_t>(search.next));
}

// Visits positions in order until the substitution cap is reached or the
// ranking is exhausted.
inline void walk(AttackResult& state, std::size_t cap, const ConstraintConfig& config,
                 const AttackOracles& o, const AttackOptions& options) {
  auto& search = state.search;
  double current = state.substitutions.empty() ? state.target_before() : state.target_after();
  while (state.substitutions.size() < cap && search.next < search.order.size()) {
    const std::size_t position = search.order[search.next++];
    const std::string& token = state.original.tokens[position];

    std::optional<std::string> best;
    std::optional<TokenSequence> best_sequence;
    double best_p = 0.0;
    for (const std::string& candidate : o.synonyms->synonyms(token)) {
      std::vector<std::string> tokens = state.adversarial.tokens;
      tokens[position] = candidate;
      TokenSequence tentative = state.adversarial.with_tokens(std::move(tokens));
      if (!check_or_throw(config, o, state.original, tentative, state.target).passed()) continue;
      search.saw_feasible = true;
      const double p =
          output_target_probability(*o.translator, *o.output_sentiment, tentative, state.target);
      // Candidates arrive in code-point order, so strict > keeps the first
      // of equally scored replacements.
      if (!best || p > best_p) {
        best = candidate;
        best_sequence = std::move(tentative);
        best_p = p;
      }
    }
    if (best && best_p > current) {
      state.substitutions.push_back({position, token, *best});
      state.adversarial = std::move(*best_sequence);
      current = best_p;
      if (options.rerank) rerank_remaining(state, o);
    }
  }
}

inline void finalize(AttackResult& state, std::size_t cap, const ConstraintConfig& config,
                     const AttackOracles& o) {
  if (state.substitutions.empty()) {
    state.adversarial = state.original;
    state.adversarial_output = state.original_output;
    state.score_after = state.score_before;
  } else {
    state.adversarial_output = o.translator->translate(state.adversarial);
    state.score_after = o.output_sentiment->score(state.adversarial_output);
  }
  state.constraints = check_or_throw(config, o, state.original, state.adversarial, state.target);

  const bool exhausted = state.search.ranked && state.search.next >= state.search.order.size();
  if (!state.substitutions.empty()) {
    state.status = AttackStatus::improved;
  } else if (cap > 0 && exhausted && !state.search.saw_feasible) {
    state.status = AttackStatus::no_candidates;
  } else {
    state.status = AttackStatus::unchanged;
  }
  if (state.status == AttackStatus::improved && !state.constraints.passed())
    throw ProtocolError("adversarial sequence failed constraint re-verification; oracle outputs changed");
}

inline ConstraintConfig with_budget(ConstraintConfig config, const AttackBudget& budget) {
  config.epsilon1 = budget.fraction();
  return config;
}

}  // namespace detail

/// Resumes the saliency walk of `previous` with a larger budget. The result
/// keeps the earlier substitutions as a prefix, so the target probability
/// never decreases.
inline AttackResult extend_attack(const AttackResult& previous, const AttackBudget& budget,
                                  const AttackOracles& oracles, const ConstraintConfig& config,
                                  const AttackOptions& options = {}) {
  detail::require_oracles(oracles);
  config.validate();
  if (budget.fraction() < previous.budget)
    throw InvalidInput("extend_attack budget is smaller than the previous budget");
  if (previous.search.fingerprint !=
      detail::attack_fingerprint(oracles, config, previous.target, options))
    throw InvalidInput("extend_attack called with mismatched oracles or config");

  AttackResult state = previous;
  state.budget = budget.fraction();
  const ConstraintConfig effective = detail::with_budget(config, budget);
  const std::size_t cap = budget.max_substitutions(state.original.size());
  if (cap > state.substitutions.size()) {
    if (!state.search.ranked) detail::rank(state, oracles);
    detail::walk(state, cap, effective, oracles, options);
  }
  detail::finalize(state, cap, effective, oracles);
  return state;
}

/// Greedy N-word synonym substitution, N = floor(budget * T).
///
/// Positions are visited in static sentiment-saliency order (see
/// AttackOptions::rerank for the alternative). At each position every
/// synonym is tried; candidates violating the constraints are discarded, and
/// the feasible candidate whose translation scores highest on the target
/// label is accepted if it strictly beats the current best. Ties go to the
/// code-point-smallest replacement.
inline AttackResult greedy_attack(const TokenSequence& source, const AttackBudget& budget,
                                  Label target, const AttackOracles& oracles,
                                  const ConstraintConfig& config, const AttackOptions& options = {}) {
  detail::require_oracles(oracles);
  config.validate();
  if (source.empty()) throw InvalidInput("empty input");
  AttackResult state;
  state.original = source;
  state.adversarial = source;
  state.original_output = oracles.translator->translate(source);
  state.score_before = oracles.output_sentiment->score(state.original_output);
  state.target = target;
  state.budget = 0.0;
  state.search.fingerprint = detail::attack_fingerprint(oracles, config, target, options);
  return extend_attack(state, budget, oracles, config, options);
}

/// Oracles for attacking target-language text directly.
struct DirectOracles {
  const SentimentOracle* sentiment = nullptr;
  const PerplexityOracle* perplexity = nullptr;
  const SynonymOracle* synonyms = nullptr;
};

namespace detail {

inline AttackOracles direct_as_attack(const DirectOracles& d, const TranslationOracle& identity) {
  return AttackOracles{&identity, nullptr, d.sentiment, d.perplexity, d.synonyms};
}

}  // namespace detail

/// The greedy attack with the translator replaced by the identity map and no
/// input-perception constraint. `config.mean_perplexity` must be the
/// target-side mean.
inline AttackResult direct_attack(const TokenSequence& text, const AttackBudget& budget,
                                  Label target, const DirectOracles& oracles,
                                  const ConstraintConfig& config, const AttackOptions& options = {}) {
  const IdentityTranslator identity(text.language);
  return greedy_attack(text, budget, target, detail::direct_as_attack(oracles, identity), config,
                       options);
}

inline AttackResult extend_direct_attack(const AttackResult& previous, const AttackBudget& budget,
                                         const DirectOracles& oracles,
                                         const ConstraintConfig& config,
                                         const AttackOptions& options = {}) {
  const IdentityTranslator identity(previous.original.language);
  return extend_attack(previous, budget, detail::direct_as_attack(oracles, identity), config,
                       options);
}

}  // namespace percept

#endif  // PERCEPT_ATTACK_HPP
