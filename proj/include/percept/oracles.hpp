#ifndef PERCEPT_ORACLES_HPP
#define PERCEPT_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "percept/error.hpp"
#include "percept/text.hpp"

// Black-box model interfaces. The attack engine talks to models only
// through these four abstractions; implementations are either the toy
// reference models (toy_oracles.hpp) or remote HTTP clients (remote.hpp).

namespace percept {

enum class Label { negative, neutral, positive };

inline std::string_view to_string(Label label) {
  switch (label) {
    case Label::negative: return "negative";
    case Label::neutral: return "neutral";
    case Label::positive: return "positive";
  }
  return "?";
}

inline std::optional<Label> parse_label(std::string_view text) {
  if (text == "negative") return Label::negative;
  if (text == "neutral") return Label::neutral;
  if (text == "positive") return Label::positive;
  return std::nullopt;
}

/// Probability distribution over a fixed, ordered label set.
class SentimentScore {
 public:
  static constexpr double kSumTolerance = 1e-9;

  SentimentScore() = default;

  /// Throws InvalidInput unless every probability is in [0,1], labels are
  /// distinct and the total is 1 within kSumTolerance.
  explicit SentimentScore(std::vector<std::pair<Label, double>> entries)
      : entries_(std::move(entries)) {
    if (entries_.empty()) throw InvalidInput("sentiment score has no labels");
    double total = 0.0;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const double p = entries_[i].second;
      if (!std::isfinite(p) || p < 0.0 || p > 1.0)
        throw InvalidInput("sentiment probability outside [0,1]");
      for (std::size_t j = 0; j < i; ++j)
        if (entries_[j].first == entries_[i].first)
          throw InvalidInput("duplicate sentiment label");
      total += p;
    }
    if (std::abs(total - 1.0) > kSumTolerance)
      throw InvalidInput("sentiment probabilities do not sum to 1");
  }

  static SentimentScore binary(double positive) {
    return SentimentScore({{Label::negative, 1.0 - positive}, {Label::positive, positive}});
  }

  const std::vector<std::pair<Label, double>>& entries() const noexcept { return entries_; }

  bool has(Label label) const {
    return std::ranges::any_of(entries_, [&](const auto& e) { return e.first == label; });
  }

  /// Probability of `label`; zero when the label is outside this score's set.
  double probability(Label label) const {
    for (const auto& [l, p] : entries_)
      if (l == label) return p;
    return 0.0;
  }

  friend bool operator==(const SentimentScore&, const SentimentScore&) = default;

 private:
  std::vector<std::pair<Label, double>> entries_;
};

/// Max-class rule. Exact ties resolve to the earlier of negative, neutral,
/// positive. With `ignore_neutral`, neutral never wins.
inline Label classify_max_class(const SentimentScore& score, bool ignore_neutral = false) {
  std::optional<Label> best;
  double best_p = -1.0;
  for (Label label : {Label::negative, Label::neutral, Label::positive}) {
    if (!score.has(label) || (ignore_neutral && label == Label::neutral)) continue;
    const double p = score.probability(label);
    if (p > best_p) {
      best = label;
      best_p = p;
    }
  }
  if (!best) throw InvalidInput("no classifiable label in score");
  return *best;
}

enum class OracleKind { translation, sentiment, perplexity, synonym };

inline std::string_view to_string(OracleKind kind) {
  switch (kind) {
    case OracleKind::translation: return "translation";
    case OracleKind::sentiment: return "sentiment";
    case OracleKind::perplexity: return "perplexity";
    case OracleKind::synonym: return "synonym";
  }
  return "?";
}

/// Identity of a model service. The id must be stable across runs: it keys
/// caches and is written into run manifests.
struct OracleInfo {
  std::string id;
  OracleKind kind = OracleKind::translation;
  bool deterministic = true;
  bool concurrent = true;

  friend bool operator==(const OracleInfo&, const OracleInfo&) = default;
};

class Oracle {
 public:
  explicit Oracle(OracleInfo info) : info_(std::move(info)) {}
  virtual ~Oracle() = default;
  Oracle(const Oracle&) = delete;
  Oracle& operator=(const Oracle&) = delete;

  const OracleInfo& info() const noexcept { return info_; }
  const std::string& id() const noexcept { return info_.id; }

 private:
  OracleInfo info_;
};

inline void require_language(const TokenSequence& seq, std::string_view expected,
                             std::string_view message) {
  if (!expected.empty() && seq.language != expected) throw InvalidInput(std::string(message));
}

class TranslationOracle : public Oracle {
 public:
  TranslationOracle(OracleInfo info, std::string source_language, std::string target_language)
      : Oracle(std::move(info)),
        source_language_(std::move(source_language)),
        target_language_(std::move(target_language)) {}

  const std::string& source_language() const noexcept { return source_language_; }
  const std::string& target_language() const noexcept { return target_language_; }

  TokenSequence translate(const TokenSequence& source) const {
    if (source.empty()) throw InvalidInput("empty input");
    require_language(source, source_language_, "wrong source language");
    TokenSequence out = do_translate(source);
    out.language = target_language_;
    return out;
  }

 protected:
  virtual TokenSequence do_translate(const TokenSequence& source) const = 0;

 private:
  std::string source_language_;
  std::string target_language_;
};

class SentimentOracle : public Oracle {
 public:
  SentimentOracle(OracleInfo info, std::string language, std::vector<Label> labels)
      : Oracle(std::move(info)), language_(std::move(language)), labels_(std::move(labels)) {}

  const std::string& language() const noexcept { return language_; }
  const std::vector<Label>& labels() const noexcept { return labels_; }

  SentimentScore score(const TokenSequence& seq) const {
    if (seq.empty()) throw InvalidInput("empty input");
    require_language(seq, language_, "unsupported language for sentiment oracle");
    return do_score(seq);
  }

 protected:
  virtual SentimentScore do_score(const TokenSequence& seq) const = 0;

 private:
  std::string language_;
  std::vector<Label> labels_;
};

class PerplexityOracle : public Oracle {
 public:
  PerplexityOracle(OracleInfo info, std::string language)
      : Oracle(std::move(info)), language_(std::move(language)) {}

  const std::string& language() const noexcept { return language_; }

  double perplexity(const TokenSequence& seq) const {
    if (seq.empty()) throw InvalidInput("empty input");
    require_language(seq, language_, "unsupported language for perplexity oracle");
    return do_perplexity(seq);
  }

 protected:
  virtual double do_perplexity(const TokenSequence& seq) const = 0;

 private:
  std::string language_;
};

class SynonymOracle : public Oracle {
 public:
  SynonymOracle(OracleInfo info, std::string language)
      : Oracle(std::move(info)), language_(std::move(language)) {}

  const std::string& language() const noexcept { return language_; }

  /// Candidates sorted by code point, without duplicates and without the
  /// query token itself.
  std::vector<std::string> synonyms(const std::string& token) const {
    if (token.empty()) throw InvalidInput("empty token");
    std::vector<std::string> out = do_synonyms(token);
    std::erase_if(out, [&](const std::string& s) { return s == token || s.empty(); });
    std::ranges::sort(out);
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

 protected:
  virtual std::vector<std::string> do_synonyms(const std::string& token) const = 0;

 private:
  std::string language_;
};

/// The identity map within one language; stands in for F() in direct attacks.
class IdentityTranslator final : public TranslationOracle {
 public:
  explicit IdentityTranslator(std::string language)
      : TranslationOracle(OracleInfo{"identity", OracleKind::translation}, language, language) {}

 protected:
  TokenSequence do_translate(const TokenSequence& source) const override {
    return source.with_tokens(source.tokens);
  }
};

/// Thread-safe memo table. Concurrent inserts of the same key keep the first
/// value; oracles are deterministic so both values are equal anyway.
template <typename Value>
class MemoTable {
 public:
  template <typename Compute>
  Value get_or_compute(const std::string& key, Compute&& compute) {
    {
      std::shared_lock lock(mutex_);
      if (auto it = table_.find(key); it != table_.end()) return it->second;
    }
    Value value = std::forward<Compute>(compute)();
    std::unique_lock lock(mutex_);
    return table_.try_emplace(key, std::move(value)).first->second;
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return table_.size();
  }

 private:
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, Value> table_;
};

inline std::string memo_key(const TokenSequence& seq) {
  std::string key = seq.language;
  for (const auto& token : seq.tokens) {
    key += '\x1f';
    key += token;
  }
  return key;
}

/// Memoizing decorators. They keep the wrapped oracle's id so cached and
/// uncached runs are indistinguishable in outputs.
class MemoTranslator final : public TranslationOracle {
 public:
  explicit MemoTranslator(const TranslationOracle& inner)
      : TranslationOracle(inner.info(), inner.source_language(), inner.target_language()),
        inner_(inner) {}

 protected:
  TokenSequence do_translate(const TokenSequence& source) const override {
    return table_.get_or_compute(memo_key(source), [&] { return inner_.translate(source); });
  }

 private:
  const TranslationOracle& inner_;
  mutable MemoTable<TokenSequence> table_;
};

class MemoSentiment final : public SentimentOracle {
 public:
  explicit MemoSentiment(const SentimentOracle& inner)
      : SentimentOracle(inner.info(), inner.language(), inner.labels()), inner_(inner) {}

 protected:
  SentimentScore do_score(const TokenSequence& seq) const override {
    return table_.get_or_compute(memo_key(seq), [&] { return inner_.score(seq); });
  }

 private:
  const SentimentOracle& inner_;
  mutable MemoTable<SentimentScore> table_;
};

class MemoPerplexity final : public PerplexityOracle {
 public:
  explicit MemoPerplexity(const PerplexityOracle& inner)
      : PerplexityOracle(inner.info(), inner.language()), inner_(inner) {}

 protected:
  double do_perplexity(const TokenSequence& seq) const override {
    return table_.get_or_compute(memo_key(seq), [&] { return inner_.perplexity(seq); });
  }

 private:
  const PerplexityOracle& inner_;
  mutable MemoTable<double> table_;
};

class MemoSynonyms final : public SynonymOracle {
 public:
  explicit MemoSynonyms(const SynonymOracle& inner)
      : SynonymOracle(inner.info(), inner.language()), inner_(inner) {}

 protected:
  std::vector<std::string> do_synonyms(const std::string& token) const override {
    return table_.get_or_compute(token, [&] { return inner_.synonyms(token); });
  }

 private:
  const SynonymOracle& inner_;
  mutable MemoTable<std::vector<std::string>> table_;
};

}  // namespace percept

#endif  // PERCEPT_ORACLES_HPP
