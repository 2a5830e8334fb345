// percept: command-line front end for attacks, sweeps, constraint audits and
// reports. Exit codes: 0 success, 2 environment or oracle error, 3 attack made
// no change, 4 degraded sweep, 5 audit failures.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "percept/percept.hpp"

namespace {

using namespace percept;
namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kEnvironment = 2, kNoChange = 3, kDegraded = 4, kAuditFailed = 5 };

struct Options {
  std::string config;
  std::string out = "out";
  std::string input;
  std::string sentence;
  std::string grid;
  std::string target;
  std::string mode;
  std::string side = "source";
  std::optional<double> budget;
  std::optional<unsigned> parallel;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  bool plot = false;
  bool use_references = false;
  std::size_t top_k = 3;
};

std::string fixed(double value, int digits = 4) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << value;
  return out.str();
}

std::string grid_override(const std::string& text) {
  std::string json = "[";
  std::stringstream in(text);
  for (std::string cell; std::getline(in, cell, ',');) {
    try {
      std::size_t used = 0;
      const double value = std::stod(cell, &used);
      if (used != cell.size()) throw std::invalid_argument(cell);
      json += (json.size() > 1 ? "," : "") + format_number(value);
    } catch (const std::logic_error&) {
      throw ConfigError("--grid", "'" + cell + "' is not a number");
    }
  }
  return "sweep.grid=" + json + "]";
}

RunConfig load_run(const Options& opts) {
  if (opts.config.empty()) throw ConfigError("--config", "required");
  std::vector<std::string> overrides = opts.overrides;
  if (!opts.grid.empty()) overrides.push_back(grid_override(opts.grid));
  if (!opts.target.empty()) overrides.push_back("sweep.target=" + opts.target);
  if (!opts.mode.empty()) overrides.push_back("sweep.mode=" + opts.mode);
  if (opts.seed) overrides.push_back("sweep.seed=" + std::to_string(*opts.seed));
  if (opts.parallel) overrides.push_back("parallel=" + std::to_string(*opts.parallel));
  if (opts.use_references) overrides.push_back("sweep.use_references=true");
  return apply_overrides(load_config(opts.config), overrides);
}

fs::path prepare_out(const Options& opts) {
  std::error_code ec;
  fs::create_directories(opts.out, ec);
  if (ec) throw IoError("cannot create output directory " + opts.out);
  return opts.out;
}

Json redacted(const RunConfig& run) {
  Json j = to_json(run);
  for (auto& [role, spec] : j["oracles"].items())
    if (spec.contains("bearer_token")) spec["bearer_token"] = "***";
  return j;
}

double mean_over(const PerplexityOracle& oracle, std::span<const CorpusEntry> corpus) {
  return compute_dataset_mean_perplexity(oracle, texts_of(corpus));
}

void print_result(std::ostream& out, std::size_t id, const AttackResult& r, AttackMode mode) {
  out << "[sentence " << id << "] " << to_string(r.status) << ", " << r.substitutions.size()
      << " substitution(s) at budget " << format_number(r.budget) << "\n";
  const char* source_name = mode == AttackMode::nmt ? "source" : "text";
  out << "  " << std::left << std::setw(12) << source_name << " original: " << detokenize(r.original) << "\n"
      << "  " << std::setw(12) << "" << " attacked: " << detokenize(r.adversarial) << "\n";
  if (mode == AttackMode::nmt)
    out << "  " << std::setw(12) << "translation" << " original: " << detokenize(r.original_output) << "\n"
        << "  " << std::setw(12) << "" << " attacked: " << detokenize(r.adversarial_output) << "\n";
  out << "  p(" << to_string(r.target) << ") " << fixed(r.target_before()) << " -> " << fixed(r.target_after())
      << "\n";
}

int cmd_attack(const Options& opts) {
  const RunConfig run = load_run(opts);
  const fs::path out_dir = prepare_out(opts);
  const OracleBundle bundle(run);
  const AttackMode mode = run.sweep.mode;
  const bool direct = mode == AttackMode::direct;
  const std::string language = direct ? run.target_language : run.source_language;

  std::vector<CorpusEntry> sentences;
  if (!opts.sentence.empty()) sentences.push_back({1, tokenize(opts.sentence, language)});
  else if (!opts.input.empty()) sentences = load_corpus(opts.input, language);
  else throw ConfigError("--sentence", "give --sentence or --input");

  ConstraintConfig constraints = run.constraints;
  const auto& stored_mean = direct ? run.target_mean_perplexity : run.constraints.mean_perplexity;
  constraints.mean_perplexity = stored_mean ? *stored_mean : mean_over(*bundle.perplexity(direct), sentences);
  const AttackBudget budget(opts.budget.value_or(run.constraints.epsilon1));
  const Label target = run.sweep.target;

  std::vector<AttackRecord> records;
  bool improved = false;
  bool failed = false;
  for (const auto& entry : sentences) {
    AttackRecord record{entry.id, mode, budget.fraction(), target, entry.text, std::nullopt, {}};
    try {
      record.result = direct ? direct_attack(entry.text, budget, target, bundle.direct_oracles(), constraints,
                                             run.attack)
                             : greedy_attack(entry.text, budget, target, bundle.attack_oracles(), constraints,
                                             run.attack);
      print_result(std::cout, entry.id, *record.result, mode);
      improved = improved || record.result->status == AttackStatus::improved;
    } catch (const OracleUnavailable& e) {
      record.error = e.what();
    } catch (const ProtocolError& e) {
      record.error = e.what();
    }
    if (!record.result) {
      failed = true;
      std::cerr << "sentence " << entry.id << ": " << record.error << "\n";
    }
    records.push_back(std::move(record));
  }
  write_text_file(out_dir / "attack.jsonl", records_to_jsonl(records));
  if (failed) return kEnvironment;
  return improved ? kOk : kNoChange;
}

// Predictions for a direct sweep; sentences whose translation fails are
// returned separately.
std::vector<CorpusEntry> predictions(const OracleBundle& bundle, std::span<const CorpusEntry> corpus,
                                     std::vector<std::pair<CorpusEntry, std::string>>& failures) {
  std::vector<CorpusEntry> out;
  for (const auto& entry : corpus) {
    try {
      out.push_back({entry.id, bundle.translator()->translate(entry.text)});
    } catch (const OracleUnavailable& e) {
      failures.emplace_back(entry, e.what());
    } catch (const ProtocolError& e) {
      failures.emplace_back(entry, e.what());
    }
  }
  return out;
}

void merge_failures(SweepOutput& output, const std::vector<std::pair<CorpusEntry, std::string>>& failures,
                    const SweepConfig& sweep) {
  for (const auto& [entry, message] : failures) {
    for (double budget : sweep.grid) {
      output.records.push_back({entry.id, AttackMode::direct, budget, sweep.target, entry.text, std::nullopt, message});
      output.tally[format_number(budget)]["error"]++;
    }
    ++output.sentences;
    ++output.failed_sentences;
  }
  std::ranges::stable_sort(output.records, {}, &AttackRecord::sentence_id);
}

void print_curve(const std::vector<CurvePoint>& curve) {
  std::cout << "budget  samples  fraction(" << (curve.empty() ? "target" : std::string(to_string(curve[0].target)))
            << ")\n";
  for (const auto& p : curve)
    std::cout << std::left << std::setw(8) << format_number(p.budget) << std::setw(9) << p.sample_count
              << fixed(p.attacked_fraction) << "\n";
}

int cmd_sweep(const Options& opts, bool direct_command) {
  RunConfig run = load_run(opts);
  if (direct_command) run.sweep.mode = AttackMode::direct;
  const bool direct = run.sweep.mode == AttackMode::direct;
  if (opts.input.empty()) throw ConfigError("--input", "corpus file required");
  const fs::path out_dir = prepare_out(opts);
  const OracleBundle bundle(run);

  const bool references = direct && run.sweep.use_references;
  const auto corpus = load_corpus(opts.input, references ? run.target_language : run.source_language);
  const SweepOptions options{run.parallel, run.attack};
  ConstraintConfig constraints = run.constraints;
  SweepOutput output;
  if (!direct) {
    if (!constraints.mean_perplexity) constraints.mean_perplexity = mean_over(*bundle.perplexity(false), corpus);
    run.constraints.mean_perplexity = constraints.mean_perplexity;
    output = run_sweep(corpus, run.sweep, bundle.attack_oracles(), constraints, options);
  } else {
    std::vector<std::pair<CorpusEntry, std::string>> failures;
    std::vector<CorpusEntry> texts = references ? corpus : predictions(bundle, corpus, failures);
    if (texts.empty()) throw OracleUnavailable("no sentence could be translated");
    if (!run.target_mean_perplexity) run.target_mean_perplexity = mean_over(*bundle.perplexity(true), texts);
    constraints.mean_perplexity = run.target_mean_perplexity;
    output = run_direct_sweep(texts, run.sweep, bundle.direct_oracles(), constraints, options);
    merge_failures(output, failures, run.sweep);
  }

  if (output.curve.empty()) write_text_file(out_dir / "curves.csv", curves_to_csv(output.curve));
  else export_curves(out_dir / "curves.csv", output.curve);
  export_records(out_dir / "records.jsonl", output.records);
  Json manifest = sweep_manifest(redacted(run), bundle.infos(), corpus_hash(corpus), output);
  manifest["command"] = direct_command ? "direct-sweep" : "sweep";
  write_text_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
  if (opts.plot && !output.curve.empty()) export_plot(out_dir / "plot.svg", output.curve);

  print_curve(output.curve);
  if (output.degraded()) {
    std::cerr << "run degraded: " << output.failed_sentences << " of " << output.sentences
              << " sentences failed\n";
    return kDegraded;
  }
  return kOk;
}

int cmd_check(const Options& opts) {
  RunConfig run = load_run(opts);
  if (opts.input.empty()) throw ConfigError("--input", "pairs file required");
  const fs::path out_dir = prepare_out(opts);
  const OracleBundle bundle(run);

  struct Pair {
    std::size_t line;
    std::optional<std::pair<TokenSequence, TokenSequence>> texts;
    std::string error;
  };
  std::vector<Pair> pairs;
  std::istringstream in(read_text_file(opts.input));
  std::size_t line_number = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_number == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      pairs.push_back({line_number, std::nullopt, "expected two tab-separated fields"});
      continue;
    }
    try {
      pairs.push_back({line_number,
                       std::pair{tokenize(line.substr(0, tab), run.source_language),
                                 tokenize(line.substr(tab + 1), run.source_language)},
                       {}});
    } catch (const InvalidInput& e) {
      pairs.push_back({line_number, std::nullopt, e.what()});
    }
  }

  ConstraintConfig constraints = run.constraints;
  if (!constraints.mean_perplexity) {
    std::vector<TokenSequence> originals;
    for (const auto& p : pairs)
      if (p.texts) originals.push_back(p.texts->first);
    if (originals.empty()) throw InvalidInput("no well-formed pairs in " + opts.input);
    constraints.mean_perplexity = compute_dataset_mean_perplexity(*bundle.perplexity(false), originals);
  }
  const ConstraintOracles oracles{bundle.perplexity(false), bundle.sentiment(false)};

  std::string jsonl;
  bool all_passed = true;
  for (const auto& p : pairs) {
    Json j{{"line", p.line}};
    if (!p.texts) {
      j["error"] = p.error;
      all_passed = false;
      std::cout << "line " << p.line << ": malformed (" << p.error << ")\n";
    } else {
      const auto& [original, candidate] = *p.texts;
      const ConstraintReport report =
          evaluate_constraints(constraints, oracles, original, candidate, run.sweep.target);
      j["original"] = detokenize(original);
      j["candidate"] = detokenize(candidate);
      j["passed"] = report.passed();
      j["constraints"] = to_json(report);
      all_passed = all_passed && report.passed();
      std::cout << "line " << p.line << ": " << (report.passed() ? "pass" : "FAIL");
      for (const auto& e : report.entries)
        if (!e.passed)
          std::cout << " [" << e.name << " "
                    << (e.measured ? format_number(*e.measured) : std::string("error")) << " > "
                    << format_number(e.threshold) << "]";
      std::cout << "\n";
    }
    jsonl += j.dump() + "\n";
  }
  write_text_file(out_dir / "check.jsonl", jsonl);
  return all_passed ? kOk : kAuditFailed;
}

int cmd_avg_ppl(const Options& opts) {
  const RunConfig run = load_run(opts);
  if (opts.input.empty()) throw ConfigError("--input", "corpus file required");
  if (opts.side != "source" && opts.side != "target") throw ConfigError("--side", "must be source or target");
  const bool target_side = opts.side == "target";
  const fs::path out_dir = prepare_out(opts);
  const OracleBundle bundle(run);
  const auto corpus = load_corpus(opts.input, target_side ? run.target_language : run.source_language);
  const double mean = mean_over(*bundle.perplexity(target_side), corpus);
  const std::string key = target_side ? "target_mean_perplexity" : "mean_perplexity";
  write_text_file(out_dir / "mean_perplexity.json", Json{{"constraints", {{key, mean}}}}.dump(2) + "\n");
  std::cout << "mean perplexity: " << format_number(mean) << " over " << corpus.size() << " sentences\n"
            << "reuse with: --set constraints." << key << "=" << format_number(mean) << "\n";
  return kOk;
}

std::string markdown_cell(std::string text) {
  std::string out;
  for (char c : text) out += c == '|' ? std::string("\\|") : std::string(1, c);
  return out;
}

int cmd_report(const Options& opts) {
  if (opts.input.empty()) throw ConfigError("--input", "sweep output directory required");
  const fs::path in_dir = opts.input;
  const auto curve = parse_curves_csv(read_text_file(in_dir / "curves.csv"));
  const auto records = parse_records_jsonl(read_text_file(in_dir / "records.jsonl"));
  const fs::path out_dir = prepare_out(opts);

  std::ostringstream md;
  md << "# Attack report\n\n";
  std::map<std::pair<std::string, std::string>, std::vector<CurvePoint>> series;
  for (const auto& p : curve) series[{std::string(to_string(p.mode)), std::string(to_string(p.target))}].push_back(p);
  for (const auto& [key, points] : series) {
    md << "## " << key.first << " attack, target " << key.second << "\n\n"
       << "| budget | samples | fraction " << key.second << " | change vs baseline |\n"
       << "|---|---|---|---|\n";
    const double baseline = points.front().budget == 0.0 ? points.front().attacked_fraction : 0.0;
    for (const auto& p : points)
      md << "| " << format_number(p.budget) << " | " << p.sample_count << " | " << fixed(p.attacked_fraction)
         << " | " << (p.attacked_fraction >= baseline ? "+" : "") << fixed(p.attacked_fraction - baseline)
         << " |\n";
    md << "\n";
  }

  double top_budget = 0.0;
  for (const auto& r : records) top_budget = std::max(top_budget, r.budget);
  std::vector<const AttackRecord*> examples;
  for (const auto& r : records)
    if (r.budget == top_budget && r.result && r.result->status == AttackStatus::improved) examples.push_back(&r);
  std::ranges::stable_sort(examples, [](const AttackRecord* a, const AttackRecord* b) {
    const double ga = a->result->target_after() - a->result->target_before();
    const double gb = b->result->target_after() - b->result->target_before();
    if (ga != gb) return ga > gb;
    return a->sentence_id < b->sentence_id;
  });
  if (examples.size() > opts.top_k) examples.resize(opts.top_k);

  md << "## Examples\n\n";
  if (examples.empty()) md << "No improved records.\n";
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const AttackResult& r = *examples[i]->result;
    const bool nmt = examples[i]->mode == AttackMode::nmt;
    md << "### Example " << i + 1 << ": sentence " << examples[i]->sentence_id << ", budget "
       << format_number(r.budget) << "\n\n"
       << "| | Original | Attacked |\n|---|---|---|\n"
       << "| " << (nmt ? "Source" : "Text") << " | " << markdown_cell(detokenize(r.original)) << " | "
       << markdown_cell(detokenize(r.adversarial)) << " |\n";
    if (nmt)
      md << "| Prediction | " << markdown_cell(detokenize(r.original_output)) << " | "
         << markdown_cell(detokenize(r.adversarial_output)) << " |\n";
    md << "| Sentiment (" << to_string(r.target) << ") | " << fixed(r.target_before(), 3) << " | "
       << fixed(r.target_after(), 3) << " |\n\n";
  }
  write_text_file(out_dir / "report.md", md.str());
  std::cout << md.str();
  return kOk;
}

void add_common(CLI::App* cmd, Options& opts, bool needs_config = true) {
  if (needs_config) {
    cmd->add_option("--config", opts.config, "Run configuration (JSON)")->required();
    cmd->add_option("--set", opts.overrides, "Override a config field, key=value (repeatable)");
  }
  cmd->add_option("--out", opts.out, "Output directory")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Perception-based adversarial attacks on translation systems"};
  app.require_subcommand(1);
  Options opts;

  auto* attack = app.add_subcommand("attack", "Attack single sentences and print the comparison");
  add_common(attack, opts);
  auto* sentence_opt = attack->add_option("--sentence", opts.sentence, "Sentence to attack");
  attack->add_option("--input", opts.input, "File with one sentence per line")->excludes(sentence_opt);
  attack->add_option("--budget", opts.budget, "Fraction of words that may be substituted")
      ->check(CLI::Range(0.0, 1.0));
  attack->add_option("--target", opts.target, "Target label")->check(CLI::IsMember({"positive", "negative"}));
  attack->add_option("--mode", opts.mode, "nmt or direct")->check(CLI::IsMember({"nmt", "direct"}));

  auto add_sweep_flags = [&](CLI::App* cmd) {
    add_common(cmd, opts);
    cmd->add_option("--input", opts.input, "Corpus, one sentence per line")->required();
    cmd->add_option("--grid", opts.grid, "Comma-separated budget fractions, starting at 0");
    cmd->add_option("--target", opts.target, "Target label")->check(CLI::IsMember({"positive", "negative"}));
    cmd->add_option("--parallel", opts.parallel, "Sentences attacked concurrently");
    cmd->add_option("--seed", opts.seed, "Seed for corpus subsampling");
    cmd->add_flag("--plot", opts.plot, "Also write plot.svg");
    cmd->add_flag("--use-references", opts.use_references,
                  "Direct attack on reference translations given as --input");
  };
  auto* sweep = app.add_subcommand("sweep", "Budget sweep, writing curves, records, manifest and plot");
  add_sweep_flags(sweep);
  sweep->add_option("--mode", opts.mode, "nmt or direct")->check(CLI::IsMember({"nmt", "direct"}));
  auto* direct_sweep = app.add_subcommand("direct-sweep", "Budget sweep attacking target-language text");
  add_sweep_flags(direct_sweep);

  auto* check = app.add_subcommand("check", "Audit tab-separated (original, candidate) pairs");
  add_common(check, opts);
  check->add_option("--input", opts.input, "Pairs file")->required();
  check->add_option("--target", opts.target, "Label for the score-delta measurement")
      ->check(CLI::IsMember({"positive", "negative"}));

  auto* avg_ppl = app.add_subcommand("avg-ppl", "Mean corpus perplexity as a config fragment");
  add_common(avg_ppl, opts);
  avg_ppl->add_option("--input", opts.input, "Corpus, one sentence per line")->required();
  avg_ppl->add_option("--side", opts.side, "source or target language model")->capture_default_str();

  auto* report = app.add_subcommand("report", "Summarize an existing sweep output directory");
  add_common(report, opts, false);
  report->add_option("--input", opts.input, "Directory with curves.csv and records.jsonl")->required();
  report->add_option("--top-k", opts.top_k, "Number of example records")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kEnvironment;
  }

  try {
    if (*attack) return cmd_attack(opts);
    if (*sweep) return cmd_sweep(opts, false);
    if (*direct_sweep) return cmd_sweep(opts, true);
    if (*check) return cmd_check(opts);
    if (*avg_ppl) return cmd_avg_ppl(opts);
    if (*report) return cmd_report(opts);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
  } catch (const OracleUnavailable& e) {
    std::cerr << "oracle unavailable: " << e.what() << "\n";
  } catch (const ProtocolError& e) {
    std::cerr << "protocol error: " << e.what() << "\n";
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
  }
  return kEnvironment;
}
