#ifndef PERCEPT_TESTS_COUNTING_HPP
#define PERCEPT_TESTS_COUNTING_HPP

#include <atomic>
#include <cstddef>
#include <stdexcept>

#include "percept/error.hpp"
#include "percept/oracles.hpp"

namespace percept::testing {

/// Forwards to another translator and counts the calls that reach it.
class CountingTranslator final : public TranslationOracle {
 public:
  explicit CountingTranslator(const TranslationOracle& inner)
      : TranslationOracle(inner.info(), inner.source_language(), inner.target_language()), inner_(inner) {}

  std::size_t calls() const { return calls_.load(); }
  void reset() const { calls_ = 0; }

 protected:
  TokenSequence do_translate(const TokenSequence& source) const override {
    ++calls_;
    return inner_.translate(source);
  }

 private:
  const TranslationOracle& inner_;
  mutable std::atomic<std::size_t> calls_{0};
};

class CountingSentiment final : public SentimentOracle {
 public:
  explicit CountingSentiment(const SentimentOracle& inner)
      : SentimentOracle(inner.info(), inner.language(), inner.labels()), inner_(inner) {}

  std::size_t calls() const { return calls_.load(); }

 protected:
  SentimentScore do_score(const TokenSequence& seq) const override {
    ++calls_;
    return inner_.score(seq);
  }

 private:
  const SentimentOracle& inner_;
  mutable std::atomic<std::size_t> calls_{0};
};

/// Perplexity oracle that reports the service as down.
class UnavailablePerplexity final : public PerplexityOracle {
 public:
  explicit UnavailablePerplexity(std::string language)
      : PerplexityOracle(OracleInfo{"down", OracleKind::perplexity}, std::move(language)) {}

 protected:
  double do_perplexity(const TokenSequence&) const override { throw OracleUnavailable("down: oracle unavailable"); }
};

/// Fixed perplexity for every input.
class ConstantPerplexity final : public PerplexityOracle {
 public:
  ConstantPerplexity(double value, std::string language)
      : PerplexityOracle(OracleInfo{"constant", OracleKind::perplexity}, std::move(language)), value_(value) {}

 protected:
  double do_perplexity(const TokenSequence&) const override { return value_; }

 private:
  double value_;
};

/// Translator that fails for any input containing `poison`.
class PoisonedTranslator final : public TranslationOracle {
 public:
  PoisonedTranslator(const TranslationOracle& inner, std::string poison)
      : TranslationOracle(inner.info(), inner.source_language(), inner.target_language()),
        inner_(inner),
        poison_(std::move(poison)) {}

 protected:
  TokenSequence do_translate(const TokenSequence& source) const override {
    for (const auto& token : source.tokens)
      if (token == poison_) throw OracleUnavailable("poisoned: oracle unavailable");
    return inner_.translate(source);
  }

 private:
  const TranslationOracle& inner_;
  std::string poison_;
};

}  // namespace percept::testing

#endif  // PERCEPT_TESTS_COUNTING_HPP
