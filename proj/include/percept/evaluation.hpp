#ifndef PERCEPT_EVALUATION_HPP
#define PERCEPT_EVALUATION_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "percept/attack.hpp"
#include "percept/error.hpp"
#include "percept/oracles.hpp"
#include "percept/serialization.hpp"

// Budget sweeps: attack every sentence at each budget of a grid (nested, via
// extend_attack), classify the attacked translations with the max-class rule
// and aggregate the fraction classified as the target label.

namespace percept {

enum class AttackMode { nmt, direct };

inline std::string_view to_string(AttackMode mode) {
  return mode == AttackMode::nmt ? "nmt" : "direct";
}

inline std::optional<AttackMode> parse_attack_mode(std::string_view text) {
  if (text == "nmt") return AttackMode::nmt;
  if (text == "direct") return AttackMode::direct;
  return std::nullopt;
}

/// Which samples count towards an attacked fraction.
enum class Denominator {
  all,
  /// Only samples whose unattacked translation is not already the target.
  initially_non_target,
};

inline std::string_view to_string(Denominator d) {
  return d == Denominator::all ? "all" : "initially-non-target";
}

inline std::optional<Denominator> parse_denominator(std::string_view text) {
  if (text == "all") return Denominator::all;
  if (text == "initially-non-target") return Denominator::initially_non_target;
  return std::nullopt;
}

struct SweepConfig {
  std::vector<double> grid{0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  Label target = Label::positive;
  AttackMode mode = AttackMode::nmt;
  std::uint64_t seed = 0;
  /// Attack a seeded random subset of this many sentences.
  std::optional<std::size_t> sample_size;
  /// Direct sweeps: attack reference translations instead of predictions.
  bool use_references = false;
  Denominator denominator = Denominator::all;

  void validate() const {
    if (grid.empty()) throw ConfigError("sweep.grid", "must not be empty");
    if (grid.front() != 0.0) throw ConfigError("sweep.grid", "must start with 0.0");
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (!(grid[i] >= 0.0 && grid[i] <= 1.0)) throw ConfigError("sweep.grid", "values must be in [0,1]");
      if (i > 0 && !(grid[i] > grid[i - 1])) throw ConfigError("sweep.grid", "must be strictly ascending");
    }
    if (target == Label::neutral) throw ConfigError("sweep.target", "must be positive or negative");
    if (sample_size && *sample_size == 0) throw ConfigError("sweep.sample_size", "must be positive");
  }

  friend bool operator==(const SweepConfig&, const SweepConfig&) = default;
};

struct CurvePoint {
  double budget = 0.0;
  double attacked_fraction = 0.0;
  std::size_t sample_count = 0;
  AttackMode mode = AttackMode::nmt;
  Label target = Label::positive;

  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

/// One sentence attacked at one budget. `result` is empty when an oracle
/// failure aborted the sentence; `error` then carries the message.
struct AttackRecord {
  std::size_t sentence_id = 0;
  AttackMode mode = AttackMode::nmt;
  double budget = 0.0;
  Label target = Label::positive;
  TokenSequence source;
  std::optional<AttackResult> result;
  std::string error;

  std::string status() const {
    return result ? std::string(to_string(result->status)) : std::string("error");
  }

  friend bool operator==(const AttackRecord&, const AttackRecord&) = default;
};

inline Json to_json(const AttackRecord& record) {
  Json j;
  j["sentence_id"] = record.sentence_id;
  j["mode"] = std::string(to_string(record.mode));
  if (record.result) {
    write_attack_result(j, *record.result);
  } else {
    j["budget"] = record.budget;
    j["target_label"] = std::string(to_string(record.target));
    j["status"] = "error";
    j["error"] = record.error;
    j["source"] = {{"original", to_json(record.source)}};
  }
  return j;
}

inline AttackRecord attack_record_from_json(const Json& j) {
  AttackRecord record;
  record.sentence_id = json_detail::get<std::size_t>(j, "sentence_id");
  const auto mode = json_detail::get<std::string>(j, "mode");
  auto parsed = parse_attack_mode(mode);
  if (!parsed) throw InvalidInput("unknown attack mode '" + mode + "'");
  record.mode = *parsed;
  record.budget = json_detail::get<double>(j, "budget");
  record.target = label_from_json(j, "target_label");
  if (json_detail::get<std::string>(j, "status") == "error") {
    record.error = json_detail::get<std::string>(j, "error");
    record.source = token_sequence_from_json(json_detail::field(json_detail::field(j, "source"), "original"));
  } else {
    record.result = read_attack_result(j);
    record.source = record.result->original;
  }
  return record;
}

struct CorpusEntry {
  std::size_t id = 0;
  TokenSequence text;

  friend bool operator==(const CorpusEntry&, const CorpusEntry&) = default;
};

/// Numbers sentences 1..n in order.
inline std::vector<CorpusEntry> number_corpus(std::span<const TokenSequence> texts) {
  std::vector<CorpusEntry> out;
  out.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) out.push_back({i + 1, texts[i]});
  return out;
}

/// Seeded subset of `count` entries, returned in original order. Uses the
/// raw mt19937_64 stream so the selection is identical on every platform.
inline std::vector<CorpusEntry> sample_corpus(std::span<const CorpusEntry> corpus, std::size_t count,
                                              std::uint64_t seed) {
  if (count >= corpus.size()) return {corpus.begin(), corpus.end()};
  std::vector<std::size_t> index(corpus.size());
  for (std::size_t i = 0; i < index.size(); ++i) index[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (index.size() - i));
    std::swap(index[i], index[j]);
  }
  index.resize(count);
  std::ranges::sort(index);
  std::vector<CorpusEntry> out;
  for (std::size_t i : index) out.push_back(corpus[i]);
  return out;
}

struct SweepOptions {
  unsigned parallel = 1;
  AttackOptions attack;
};

struct SweepOutput {
  std::vector<CurvePoint> curve;
  /// Ordered by sentence (corpus order), then budget.
  std::vector<AttackRecord> records;
  /// Status counts per budget, keyed by formatted budget.
  std::map<std::string, std::map<std::string, std::size_t>> tally;
  std::size_t sentences = 0;
  /// Sentences with an error record at any budget.
  std::size_t failed_sentences = 0;

  bool degraded() const { return sentences > 0 && 2 * failed_sentences > sentences; }
};

namespace detail {

template <typename Attack, typename Extend>
std::vector<AttackRecord> sweep_sentence(const CorpusEntry& entry, const SweepConfig& sweep,
                                         Attack&& attack, Extend&& extend) {
  std::vector<AttackRecord> out;
  std::optional<AttackResult> previous;
  std::string failure;
  for (double budget : sweep.grid) {
    AttackRecord record{entry.id, sweep.mode, budget, sweep.target, entry.text, std::nullopt, {}};
    if (failure.empty()) {
      try {
        AttackResult result = previous ? extend(*previous, AttackBudget(budget))
                                       : attack(entry.text, AttackBudget(budget));
        previous = result;
        record.result = std::move(result);
      } catch (const Error& e) {
        failure = e.what();
      }
    }
    if (!record.result) record.error = failure;
    out.push_back(std::move(record));
  }
  return out;
}

template <typename Job>
void for_each_parallel(std::size_t count, unsigned parallel, Job&& job) {
  const std::size_t workers = std::clamp<std::size_t>(parallel, 1, std::max<std::size_t>(count, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w)
    threads.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) job(i);
    });
}

inline SweepOutput aggregate(std::vector<std::vector<AttackRecord>> per_sentence, const SweepConfig& sweep,
                             bool ignore_neutral) {
  SweepOutput out;
  out.sentences = per_sentence.size();
  const std::size_t budgets = sweep.grid.size();
  std::vector<std::size_t> hits(budgets, 0);
  std::vector<std::size_t> counted(budgets, 0);
  for (auto& records : per_sentence) {
    bool failed = false;
    bool baseline_target = false;
    if (!records.empty() && records.front().result)
      baseline_target =
          classify_max_class(records.front().result->score_before, ignore_neutral) == sweep.target;
    for (std::size_t b = 0; b < budgets; ++b) {
      const AttackRecord& record = records[b];
      out.tally[format_number(sweep.grid[b])][record.status()]++;
      if (!record.result) {
        failed = true;
        continue;
      }
      if (sweep.denominator == Denominator::initially_non_target && baseline_target) continue;
      ++counted[b];
      if (classify_max_class(record.result->score_after, ignore_neutral) == sweep.target) ++hits[b];
    }
    if (failed) ++out.failed_sentences;
    for (auto& record : records) out.records.push_back(std::move(record));
  }
  for (std::size_t b = 0; b < budgets; ++b) {
    if (counted[b] == 0) continue;
    out.curve.push_back({sweep.grid[b],
                         static_cast<double>(hits[b]) / static_cast<double>(counted[b]),
                         counted[b], sweep.mode, sweep.target});
  }
  return out;
}

template <typename Attack, typename Extend>
SweepOutput run(std::span<const CorpusEntry> corpus, const SweepConfig& sweep,
                const ConstraintConfig& config, const SweepOptions& options, Attack attack,
                Extend extend) {
  sweep.validate();
  config.validate();
  if (corpus.empty()) throw InvalidInput("empty corpus");
  if (!config.mean_perplexity) throw ConfigError("constraints.mean_perplexity", "not computed");
  std::vector<CorpusEntry> selected =
      sweep.sample_size ? sample_corpus(corpus, *sweep.sample_size, sweep.seed)
                        : std::vector<CorpusEntry>(corpus.begin(), corpus.end());
  std::vector<std::vector<AttackRecord>> per_sentence(selected.size());
  for_each_parallel(selected.size(), options.parallel, [&](std::size_t i) {
    per_sentence[i] = sweep_sentence(selected[i], sweep, attack, extend);
  });
  return aggregate(std::move(per_sentence), sweep, config.ignore_neutral);
}

}  // namespace detail

/// Sweeps the source corpus with the NMT attack. Per-sentence failures are
/// recorded and excluded from that budget's denominator.
inline SweepOutput run_sweep(std::span<const CorpusEntry> corpus, SweepConfig sweep,
                             const AttackOracles& oracles, const ConstraintConfig& config,
                             const SweepOptions& options = {}) {
  sweep.mode = AttackMode::nmt;
  return detail::run(
      corpus, sweep, config, options,
      [&](const TokenSequence& text, const AttackBudget& budget) {
        return greedy_attack(text, budget, sweep.target, oracles, config, options.attack);
      },
      [&](const AttackResult& previous, const AttackBudget& budget) {
        return extend_attack(previous, budget, oracles, config, options.attack);
      });
}

/// Sweeps target-language texts (model translations or references) with the
/// direct attack. `config.mean_perplexity` must be the target-side mean.
inline SweepOutput run_direct_sweep(std::span<const CorpusEntry> translations, SweepConfig sweep,
                                    const DirectOracles& oracles, const ConstraintConfig& config,
                                    const SweepOptions& options = {}) {
  sweep.mode = AttackMode::direct;
  return detail::run(
      translations, sweep, config, options,
      [&](const TokenSequence& text, const AttackBudget& budget) {
        return direct_attack(text, budget, sweep.target, oracles, config, options.attack);
      },
      [&](const AttackResult& previous, const AttackBudget& budget) {
        return extend_direct_attack(previous, budget, oracles, config, options.attack);
      });
}

}  // namespace percept

#endif  // PERCEPT_EVALUATION_HPP
