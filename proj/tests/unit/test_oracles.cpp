#include <cmath>
#include <string>
#include <thread>
#include <vector>

#include <gtest/gtest.h>

#include "percept/error.hpp"
#include "percept/oracles.hpp"
#include "percept/toy_oracles.hpp"
#include "support/counting.hpp"
#include "support/toy_world.hpp"

using namespace percept;
using percept::testing::seq;
using Tokens = std::vector<std::string>;

namespace {

toy::DictionaryTranslator example_translator() {
  return toy::DictionaryTranslator({{"gut", "good"}, {"schlecht", "bad"}, {"Film", "movie"}}, "de", "en");
}

toy::LexiconSentiment example_lexicon() { return toy::LexiconSentiment({{"good", 1}, {"bad", -1}}, "en"); }

}  // namespace

TEST(DictionaryTranslator, Examples) {
  const auto t = example_translator();
  EXPECT_EQ(t.translate(seq({"Film", "gut"})).tokens, (Tokens{"movie", "good"}));
  EXPECT_EQ(t.translate(seq({"xyz"})).tokens, (Tokens{"xyz"}));
  EXPECT_EQ(t.translate(seq({"schlecht", "Film", "gut"})).tokens, (Tokens{"bad", "movie", "good"}));
  EXPECT_EQ(t.translate(seq({"gut"})).language, "en");
}

TEST(DictionaryTranslator, RejectsWrongLanguage) {
  const auto t = example_translator();
  try {
    t.translate(seq({"good"}, "en"));
    FAIL();
  } catch (const InvalidInput& e) {
    EXPECT_STREQ(e.what(), "wrong source language");
  }
  EXPECT_THROW(t.translate(seq({})), InvalidInput);
}

TEST(LexiconSentiment, Examples) {
  const auto s = example_lexicon();
  EXPECT_DOUBLE_EQ(s.score(seq({"good", "movie"}, "en")).probability(Label::positive), 0.75);
  EXPECT_DOUBLE_EQ(s.score(seq({"the", "movie"}, "en")).probability(Label::positive), 0.5);
  EXPECT_DOUBLE_EQ(s.score(seq({"bad", "bad"}, "en")).probability(Label::positive), 0.0);
}

TEST(LexiconSentiment, ClampsAndSumsToOne) {
  const toy::LexiconSentiment s({{"great", 2}}, "en");
  const auto score = s.score(seq({"great"}, "en"));
  EXPECT_DOUBLE_EQ(score.probability(Label::positive), 1.0);
  EXPECT_DOUBLE_EQ(score.probability(Label::negative), 0.0);
  double total = 0;
  const auto mixed = s.score(seq({"great", "x", "y"}, "en"));
  for (const auto& [label, p] : mixed.entries()) total += p;
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(LexiconSentiment, RejectsUnsupportedLanguage) {
  EXPECT_THROW(example_lexicon().score(seq({"gut"}, "de")), InvalidInput);
}

TEST(UnigramPerplexity, Examples) {
  const toy::UnigramPerplexity lm({{"a", 1.0}, {"b", 0.5}, {"c", 0.25}}, "en");
  EXPECT_DOUBLE_EQ(lm.perplexity(seq({"a"}, "en")), 1.0);
  EXPECT_NEAR(lm.perplexity(seq({"b", "b"}, "en")), 2.0, 1e-12);
  EXPECT_NEAR(lm.perplexity(seq({"b", "c"}, "en")), 2.8284271247461903, 1e-12);
}

TEST(UnigramPerplexity, UnknownTokenFloor) {
  const toy::UnigramPerplexity lm({}, "en");
  EXPECT_NEAR(lm.perplexity(seq({"zzz"}, "en")), 1e4, 1e-6);
  EXPECT_THROW(toy::UnigramPerplexity({{"a", 0.0}}, "en"), InvalidInput);
  EXPECT_THROW(toy::UnigramPerplexity({}, "en", 0.0), InvalidInput);
}

TEST(UnigramPerplexity, AtLeastOne) {
  const percept::testing::SyntheticWorld w;
  for (const auto& s : percept::testing::synthetic_corpus(50, 1)) EXPECT_GE(w.de_lm.perplexity(s), 1.0);
}

TEST(TableSynonyms, Examples) {
  const toy::TableSynonyms syn({{"good", {"great", "fine"}}, {"bad", {"poor"}}}, "en");
  EXPECT_EQ(syn.synonyms("good"), (Tokens{"fine", "great"}));
  EXPECT_EQ(syn.synonyms("movie"), Tokens{});
  EXPECT_EQ(syn.synonyms("bad"), (Tokens{"poor"}));
}

TEST(TableSynonyms, NeverReturnsQueryOrDuplicates) {
  const toy::TableSynonyms syn({{"a", {"b", "a", "b", "c"}}}, "en");
  EXPECT_EQ(syn.synonyms("a"), (Tokens{"b", "c"}));
}

TEST(SentimentScore, Validation) {
  EXPECT_THROW(SentimentScore({{Label::negative, 0.5}, {Label::positive, 0.4}}), InvalidInput);
  EXPECT_THROW(SentimentScore({{Label::negative, -0.1}, {Label::positive, 1.1}}), InvalidInput);
  EXPECT_THROW(SentimentScore({{Label::positive, 0.5}, {Label::positive, 0.5}}), InvalidInput);
  EXPECT_NO_THROW(SentimentScore({{Label::negative, 0.2}, {Label::neutral, 0.3}, {Label::positive, 0.5}}));
}

TEST(ClassifyMaxClass, Examples) {
  EXPECT_EQ(classify_max_class(SentimentScore::binary(0.7)), Label::positive);
  EXPECT_EQ(classify_max_class(SentimentScore::binary(0.5)), Label::negative);
  const SentimentScore three({{Label::negative, 0.6}, {Label::neutral, 0.3}, {Label::positive, 0.1}});
  EXPECT_EQ(classify_max_class(three), Label::negative);
}

TEST(ClassifyMaxClass, IgnoreNeutral) {
  const SentimentScore s({{Label::negative, 0.2}, {Label::neutral, 0.5}, {Label::positive, 0.3}});
  EXPECT_EQ(classify_max_class(s), Label::neutral);
  EXPECT_EQ(classify_max_class(s, true), Label::positive);
}

TEST(ToyOracles, Deterministic) {
  const percept::testing::SyntheticWorld w;
  for (const auto& s : percept::testing::synthetic_corpus(30, 5)) {
    EXPECT_EQ(w.translator.translate(s), w.translator.translate(s));
    EXPECT_EQ(w.de_sentiment.score(s), w.de_sentiment.score(s));
    EXPECT_EQ(w.de_lm.perplexity(s), w.de_lm.perplexity(s));
  }
}

TEST(Memo, ServesRepeatsFromTable) {
  const auto inner = example_translator();
  const percept::testing::CountingTranslator counting(inner);
  const MemoTranslator memo(counting);
  EXPECT_EQ(memo.id(), inner.id());
  for (int i = 0; i < 5; ++i) EXPECT_EQ(memo.translate(seq({"Film", "gut"})).tokens, (Tokens{"movie", "good"}));
  EXPECT_EQ(counting.calls(), 1u);
  memo.translate(seq({"gut"}));
  EXPECT_EQ(counting.calls(), 2u);
}

TEST(Memo, ConcurrentInsertsAgree) {
  const auto inner = example_lexicon();
  const MemoSentiment memo(inner);
  std::vector<std::jthread> threads;
  std::vector<double> seen(8);
  for (int i = 0; i < 8; ++i)
    threads.emplace_back([&, i] { seen[i] = memo.score(seq({"good", "movie"}, "en")).probability(Label::positive); });
  threads.clear();
  for (double p : seen) EXPECT_DOUBLE_EQ(p, 0.75);
}

TEST(IdentityTranslator, ReturnsInput) {
  const IdentityTranslator id("en");
  EXPECT_EQ(id.translate(seq({"a", "b"}, "en")).tokens, (Tokens{"a", "b"}));
  EXPECT_EQ(id.info().kind, OracleKind::translation);
}
