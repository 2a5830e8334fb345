#include <filesystem>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "percept/constraints.hpp"
#include "percept/evaluation.hpp"
#include "percept/export.hpp"
#include "support/counting.hpp"
#include "support/toy_world.hpp"

using namespace percept;
using percept::testing::seq;

namespace {

struct Fixture {
  percept::testing::SyntheticWorld w;
  std::vector<TokenSequence> texts = percept::testing::synthetic_corpus(80, 314);
  std::vector<CorpusEntry> corpus = number_corpus(texts);
  ConstraintConfig config;
  Fixture() { config.mean_perplexity = compute_dataset_mean_perplexity(w.de_lm, texts); }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

double baseline_fraction(const Fixture& f, Label target) {
  std::size_t hits = 0;
  for (const auto& t : f.texts)
    if (classify_max_class(f.w.en_sentiment.score(f.w.translator.translate(t))) == target) ++hits;
  return static_cast<double>(hits) / static_cast<double>(f.texts.size());
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("percept-eval-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST(SweepConfig, Validation) {
  SweepConfig s;
  EXPECT_NO_THROW(s.validate());
  s.grid = {0.1, 0.2};
  EXPECT_THROW(s.validate(), ConfigError);
  s.grid = {0.0, 0.2, 0.2};
  EXPECT_THROW(s.validate(), ConfigError);
  s.grid = {0.0, 1.2};
  EXPECT_THROW(s.validate(), ConfigError);
  s.grid = {0.0};
  s.target = Label::neutral;
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Sweep, ZeroGridEqualsBaseline) {
  const auto& f = fixture();
  for (Label target : {Label::positive, Label::negative}) {
    SweepConfig sweep;
    sweep.grid = {0.0};
    sweep.target = target;
    const auto out = run_sweep(f.corpus, sweep, f.w.attack(), f.config);
    ASSERT_EQ(out.curve.size(), 1u);
    EXPECT_DOUBLE_EQ(out.curve[0].attacked_fraction, baseline_fraction(f, target));
    EXPECT_EQ(out.curve[0].sample_count, f.corpus.size());
  }
}

TEST(Sweep, LabelFractionsSumToOne) {
  const auto& f = fixture();
  EXPECT_DOUBLE_EQ(baseline_fraction(f, Label::positive) + baseline_fraction(f, Label::negative), 1.0);
}

TEST(Sweep, MonotoneOverGrid) {
  const auto& f = fixture();
  const auto out = run_sweep(f.corpus, SweepConfig{}, f.w.attack(), f.config);
  ASSERT_EQ(out.curve.size(), 6u);
  for (std::size_t b = 1; b < out.curve.size(); ++b)
    EXPECT_GE(out.curve[b].attacked_fraction, out.curve[b - 1].attacked_fraction);
  const std::size_t budgets = SweepConfig{}.grid.size();
  ASSERT_EQ(out.records.size(), f.corpus.size() * budgets);
  for (std::size_t i = 0; i < f.corpus.size(); ++i)
    for (std::size_t b = 1; b < budgets; ++b)
      EXPECT_GE(out.records[i * budgets + b].result->target_after(),
                out.records[i * budgets + b - 1].result->target_after());
}

TEST(Sweep, RecordsMirrorImprovedAudit) {
  const auto& f = fixture();
  const auto out = run_sweep(f.corpus, SweepConfig{}, f.w.attack(), f.config);
  for (const auto& r : out.records)
    if (r.status() == "improved") {
      EXPECT_TRUE(r.result->constraints.passed());
    }
}

TEST(Sweep, ParallelMatchesSerial) {
  const auto& f = fixture();
  SweepOptions parallel;
  parallel.parallel = 4;
  const auto a = run_sweep(f.corpus, SweepConfig{}, f.w.attack(), f.config);
  const auto b = run_sweep(f.corpus, SweepConfig{}, f.w.attack(), f.config, parallel);
  EXPECT_EQ(curves_to_csv(a.curve), curves_to_csv(b.curve));
  EXPECT_EQ(records_to_jsonl(a.records), records_to_jsonl(b.records));
}

TEST(Sweep, FailuresExcludedFromDenominator) {
  const auto& f = fixture();
  const percept::testing::PoisonedTranslator poisoned(f.w.translator, "Buch");
  auto oracles = f.w.attack();
  oracles.translator = &poisoned;
  const auto out = run_sweep(f.corpus, SweepConfig{}, oracles, f.config);
  std::size_t poisoned_count = 0;
  for (const auto& t : f.texts)
    if (std::ranges::find(t.tokens, "Buch") != t.tokens.end()) ++poisoned_count;
  ASSERT_GT(poisoned_count, 0u);
  EXPECT_EQ(out.failed_sentences, poisoned_count);
  EXPECT_EQ(out.curve[0].sample_count, f.corpus.size() - poisoned_count);
  EXPECT_FALSE(out.degraded());
  EXPECT_EQ(out.tally.at("0.0").at("error"), poisoned_count);
}

TEST(Sweep, DegradedWhenMostSentencesFail) {
  const auto& f = fixture();
  const percept::testing::PoisonedTranslator poisoned(f.w.translator, "war");
  auto oracles = f.w.attack();
  oracles.translator = &poisoned;
  std::vector<CorpusEntry> corpus = f.corpus;
  const auto out = run_sweep(corpus, SweepConfig{}, oracles, f.config);
  EXPECT_TRUE(out.degraded());
}

TEST(Sweep, InitiallyNonTargetDenominator) {
  const auto& f = fixture();
  SweepConfig sweep;
  sweep.denominator = Denominator::initially_non_target;
  const auto out = run_sweep(f.corpus, sweep, f.w.attack(), f.config);
  const double base = baseline_fraction(f, Label::positive);
  const auto expected = static_cast<std::size_t>(std::llround((1.0 - base) * f.corpus.size()));
  EXPECT_EQ(out.curve[0].sample_count, expected);
  EXPECT_DOUBLE_EQ(out.curve[0].attacked_fraction, 0.0);
}

TEST(Sweep, RequiresMeanPerplexity) {
  const auto& f = fixture();
  EXPECT_THROW(run_sweep(f.corpus, SweepConfig{}, f.w.attack(), ConstraintConfig{}), ConfigError);
  EXPECT_THROW(run_sweep({}, SweepConfig{}, f.w.attack(), f.config), InvalidInput);
}

TEST(Sweep, SampleSize) {
  const auto& f = fixture();
  SweepConfig sweep;
  sweep.grid = {0.0};
  sweep.sample_size = 10;
  sweep.seed = 4;
  const auto out = run_sweep(f.corpus, sweep, f.w.attack(), f.config);
  EXPECT_EQ(out.sentences, 10u);
  const auto again = run_sweep(f.corpus, sweep, f.w.attack(), f.config);
  EXPECT_EQ(records_to_jsonl(out.records), records_to_jsonl(again.records));
}

TEST(SampleCorpus, DeterministicSortedSubset) {
  const auto& f = fixture();
  const auto a = sample_corpus(f.corpus, 15, 9);
  const auto b = sample_corpus(f.corpus, 15, 9);
  ASSERT_EQ(a.size(), 15u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].id, b[i].id);
    if (i) {
      EXPECT_LT(a[i - 1].id, a[i].id);
    }
  }
  EXPECT_EQ(sample_corpus(f.corpus, 1000, 9).size(), f.corpus.size());
}

TEST(DirectSweep, ZeroBudgetBaseline) {
  const auto& f = fixture();
  std::vector<TokenSequence> translations;
  for (const auto& t : f.texts) translations.push_back(f.w.translator.translate(t));
  ConstraintConfig config = f.config;
  config.mean_perplexity = compute_dataset_mean_perplexity(f.w.en_lm, translations);
  SweepConfig sweep;
  sweep.grid = {0.0};
  const auto out = run_direct_sweep(number_corpus(translations), sweep, f.w.direct(), config);
  EXPECT_DOUBLE_EQ(out.curve[0].attacked_fraction, baseline_fraction(f, Label::positive));
  EXPECT_EQ(out.curve[0].mode, AttackMode::direct);
}

TEST(Export, CsvRow) {
  const std::vector<CurvePoint> points{{0.0, 0.42, 200, AttackMode::nmt, Label::positive}};
  EXPECT_EQ(curves_to_csv(points),
            "budget_fraction,attacked_fraction,sample_count,mode,target_label\n0.0,0.42,200,nmt,positive\n");
  EXPECT_EQ(parse_curves_csv(curves_to_csv(points)), points);
}

TEST(Export, EmptyInputsCreateNoFile) {
  const auto dir = temp_dir("empty");
  EXPECT_THROW(export_records(dir / "records.jsonl", {}), InvalidInput);
  EXPECT_FALSE(std::filesystem::exists(dir / "records.jsonl"));
  EXPECT_THROW(export_curves(dir / "curves.csv", {}), InvalidInput);
  EXPECT_FALSE(std::filesystem::exists(dir / "curves.csv"));
}

TEST(Export, UnwritablePath) {
  const std::vector<CurvePoint> points{{0.0, 0.5, 2, AttackMode::nmt, Label::positive}};
  EXPECT_THROW(export_curves("/nonexistent-dir/x/curves.csv", points), IoError);
}

TEST(Export, RecordsRoundTrip) {
  const auto& f = fixture();
  const percept::testing::PoisonedTranslator poisoned(f.w.translator, "Buch");
  auto oracles = f.w.attack();
  oracles.translator = &poisoned;
  const auto out = run_sweep(f.corpus, SweepConfig{}, oracles, f.config);
  const auto dir = temp_dir("roundtrip");
  export_records(dir / "records.jsonl", out.records);
  const auto parsed = parse_records_jsonl(read_text_file(dir / "records.jsonl"));
  ASSERT_EQ(parsed.size(), out.records.size());
  for (std::size_t i = 0; i < parsed.size(); ++i) EXPECT_EQ(parsed[i], out.records[i]) << i;
  EXPECT_EQ(records_to_jsonl(parsed), records_to_jsonl(out.records));
}

TEST(Export, RecordSchema) {
  const auto& f = fixture();
  SweepConfig sweep;
  sweep.grid = {0.0, 0.5};
  const auto out = run_sweep(std::span(f.corpus).subspan(0, 3), sweep, f.w.attack(), f.config);
  const Json j = to_json(out.records[1]);
  for (const char* key : {"sentence_id", "mode", "budget", "target_label", "status", "source", "translation",
                          "sentiment", "substitutions", "constraints"})
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_TRUE(j["source"].contains("original"));
  EXPECT_TRUE(j["source"].contains("adversarial"));
  EXPECT_TRUE(j["sentiment"].contains("before"));
  EXPECT_TRUE(j["sentiment"].contains("after"));
}

TEST(Export, PlotHasOneLinePerSeries) {
  const std::vector<CurvePoint> points{{0.0, 0.2, 10, AttackMode::nmt, Label::positive},
                                       {0.1, 0.4, 10, AttackMode::nmt, Label::positive},
                                       {0.0, 0.2, 10, AttackMode::direct, Label::positive},
                                       {0.1, 0.3, 10, AttackMode::direct, Label::positive}};
  const std::string svg = render_plot(points);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  std::size_t lines = 0;
  for (auto pos = svg.find("<polyline"); pos != std::string::npos; pos = svg.find("<polyline", pos + 1)) ++lines;
  EXPECT_EQ(lines, 2u);
  EXPECT_NE(svg.find("nmt attack, positive"), std::string::npos);
  EXPECT_THROW(render_plot({}), InvalidInput);
}

TEST(Manifest, FlagsFailures) {
  const auto& f = fixture();
  SweepConfig sweep;
  sweep.grid = {0.0};
  const auto out = run_sweep(f.corpus, sweep, f.w.attack(), f.config);
  const Json m = sweep_manifest(Json::object(), {{"translation", f.w.translator.info()}}, corpus_hash(f.corpus), out);
  EXPECT_EQ(m["sentences"], f.corpus.size());
  EXPECT_EQ(m["failed_sentences"], 0);
  EXPECT_EQ(m["oracles"]["translation"]["id"], "toy-de-en");
  EXPECT_EQ(m["corpus_sha256"].get<std::string>().size(), 64u);
  EXPECT_TRUE(m["deterministic"].get<bool>());
}
