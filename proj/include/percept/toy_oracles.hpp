#ifndef PERCEPT_TOY_ORACLES_HPP
#define PERCEPT_TOY_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "percept/oracles.hpp"

// Deterministic reference models. Every output is hand-computable, which is
// what the test suites rely on.

namespace percept::toy {

/// Token-wise dictionary lookup; unmapped tokens pass through unchanged.
/// Length-preserving.
class DictionaryTranslator final : public TranslationOracle {
 public:
  DictionaryTranslator(std::map<std::string, std::string> dictionary, std::string source_language,
                       std::string target_language, std::string id = "toy-dictionary")
      : TranslationOracle(OracleInfo{std::move(id), OracleKind::translation},
                          std::move(source_language), std::move(target_language)),
        dictionary_(std::move(dictionary)) {}

  const std::map<std::string, std::string>& dictionary() const noexcept { return dictionary_; }

 protected:
  TokenSequence do_translate(const TokenSequence& source) const override {
    std::vector<std::string> out;
    out.reserve(source.size());
    for (const auto& token : source.tokens) {
      auto it = dictionary_.find(token);
      out.push_back(it == dictionary_.end() ? token : it->second);
    }
    return TokenSequence{std::move(out), target_language(), {}};
  }

 private:
  std::map<std::string, std::string> dictionary_;
};

/// Lexicon scorer: with P the summed positive weight, N the summed negative
/// weight and T the length, p(positive) = clamp(0.5 + (P - N) / 2T, 0, 1).
/// A weight of +2 counts as two positive lexicon entries.
class LexiconSentiment final : public SentimentOracle {
 public:
  LexiconSentiment(std::map<std::string, int> weights, std::string language,
                   std::string id = "toy-lexicon")
      : SentimentOracle(OracleInfo{std::move(id), OracleKind::sentiment}, std::move(language),
                        {Label::negative, Label::positive}),
        weights_(std::move(weights)) {}

  const std::map<std::string, int>& weights() const noexcept { return weights_; }

 protected:
  SentimentScore do_score(const TokenSequence& seq) const override {
    long net = 0;
    for (const auto& token : seq.tokens)
      if (auto it = weights_.find(token); it != weights_.end()) net += it->second;
    const double t = static_cast<double>(seq.size());
    const double p = std::clamp(0.5 + static_cast<double>(net) / (2.0 * t), 0.0, 1.0);
    return SentimentScore::binary(p);
  }

 private:
  std::map<std::string, int> weights_;
};

/// Unigram language model. Unknown tokens get `unknown_probability`.
class UnigramPerplexity final : public PerplexityOracle {
 public:
  static constexpr double kDefaultUnknownProbability = 1e-4;

  UnigramPerplexity(std::map<std::string, double> probabilities, std::string language,
                    double unknown_probability = kDefaultUnknownProbability,
                    std::string id = "toy-unigram")
      : PerplexityOracle(OracleInfo{std::move(id), OracleKind::perplexity}, std::move(language)),
        probabilities_(std::move(probabilities)),
        unknown_probability_(unknown_probability) {
    if (!(unknown_probability_ > 0.0 && unknown_probability_ <= 1.0))
      throw InvalidInput("unknown-token probability must be in (0,1]");
    for (const auto& [token, p] : probabilities_)
      if (!(p > 0.0 && p <= 1.0)) throw InvalidInput("unigram probability for '" + token + "' outside (0,1]");
  }

  const std::map<std::string, double>& probabilities() const noexcept { return probabilities_; }
  double unknown_probability() const noexcept { return unknown_probability_; }

 protected:
  double do_perplexity(const TokenSequence& seq) const override {
    double log_sum = 0.0;
    for (const auto& token : seq.tokens) {
      auto it = probabilities_.find(token);
      log_sum += std::log(it == probabilities_.end() ? unknown_probability_ : it->second);
    }
    return std::exp(-log_sum / static_cast<double>(seq.size()));
  }

 private:
  std::map<std::string, double> probabilities_;
  double unknown_probability_;
};

class TableSynonyms final : public SynonymOracle {
 public:
  TableSynonyms(std::map<std::string, std::vector<std::string>> table, std::string language,
                std::string id = "toy-synonyms")
      : SynonymOracle(OracleInfo{std::move(id), OracleKind::synonym}, std::move(language)),
        table_(std::move(table)) {}

  const std::map<std::string, std::vector<std::string>>& table() const noexcept { return table_; }

 protected:
  std::vector<std::string> do_synonyms(const std::string& token) const override {
    auto it = table_.find(token);
    return it == table_.end() ? std::vector<std::string>{} : it->second;
  }

 private:
  std::map<std::string, std::vector<std::string>> table_;
};

}  // namespace percept::toy

#endif  // PERCEPT_TOY_ORACLES_HPP
