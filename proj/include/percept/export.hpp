#ifndef PERCEPT_EXPORT_HPP
#define PERCEPT_EXPORT_HPP

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "percept/error.hpp"
#include "percept/evaluation.hpp"
#include "percept/hash.hpp"
#include "percept/serialization.hpp"

namespace percept {

inline constexpr std::string_view kCurveCsvHeader =
    "budget_fraction,attacked_fraction,sample_count,mode,target_label";

inline std::string curves_to_csv(const std::vector<CurvePoint>& points) {
  std::string out(kCurveCsvHeader);
  out += '\n';
  for (const auto& p : points) {
    out += format_number(p.budget) + ',' + format_number(p.attacked_fraction) + ',' +
           std::to_string(p.sample_count) + ',' + std::string(to_string(p.mode)) + ',' +
           std::string(to_string(p.target)) + '\n';
  }
  return out;
}

inline std::vector<CurvePoint> parse_curves_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != kCurveCsvHeader) throw InvalidInput("bad curve CSV header");
  std::vector<CurvePoint> points;
  std::size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream row(line);
    for (std::string cell; std::getline(row, cell, ',');) cells.push_back(cell);
    auto fail = [&] { return InvalidInput("bad curve CSV row at line " + std::to_string(line_number)); };
    if (cells.size() != 5) throw fail();
    CurvePoint p;
    try {
      std::size_t used = 0;
      p.budget = std::stod(cells[0], &used);
      if (used != cells[0].size()) throw fail();
      p.attacked_fraction = std::stod(cells[1], &used);
      if (used != cells[1].size()) throw fail();
      p.sample_count = std::stoul(cells[2], &used);
      if (used != cells[2].size()) throw fail();
    } catch (const std::logic_error&) {
      throw fail();
    }
    auto mode = parse_attack_mode(cells[3]);
    auto label = parse_label(cells[4]);
    if (!mode || !label) throw fail();
    p.mode = *mode;
    p.target = *label;
    points.push_back(p);
  }
  return points;
}

inline std::string records_to_jsonl(const std::vector<AttackRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

inline std::vector<AttackRecord> parse_records_jsonl(std::string_view text) {
  std::vector<AttackRecord> records;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    try {
      records.push_back(attack_record_from_json(Json::parse(line)));
    } catch (const Json::exception& e) {
      throw InvalidInput("records line " + std::to_string(line_number) + ": " + e.what());
    } catch (const InvalidInput& e) {
      throw InvalidInput("records line " + std::to_string(line_number) + ": " + e.what());
    }
  }
  return records;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

inline void write_text_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

inline void export_curves(const std::filesystem::path& path, const std::vector<CurvePoint>& points) {
  if (points.empty()) throw InvalidInput("no curve points to export");
  write_text_file(path, curves_to_csv(points));
}

inline void export_records(const std::filesystem::path& path, const std::vector<AttackRecord>& records) {
  if (records.empty()) throw InvalidInput("no records to export");
  write_text_file(path, records_to_jsonl(records));
}

/// Line chart of attacked fraction against budget, one series per
/// (mode, target) pair.
inline std::string render_plot(const std::vector<CurvePoint>& points) {
  if (points.empty()) throw InvalidInput("no curve points to plot");
  constexpr double kWidth = 640, kHeight = 420, kLeft = 60, kRight = 170, kTop = 30, kBottom = 50;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  double max_budget = 0.0;
  for (const auto& p : points) max_budget = std::max(max_budget, p.budget);
  if (max_budget <= 0.0) max_budget = 1.0;
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return std::string(buf);
  };
  auto x = [&](double budget) { return kLeft + plot_w * budget / max_budget; };
  auto y = [&](double fraction) { return kTop + plot_h * (1.0 - fraction); };

  std::vector<std::pair<std::string, std::vector<CurvePoint>>> series;
  for (const auto& p : points) {
    const std::string name = std::string(to_string(p.mode)) + " attack, " + std::string(to_string(p.target));
    auto it = std::find_if(series.begin(), series.end(), [&](const auto& s) { return s.first == name; });
    if (it == series.end()) {
      series.push_back({name, {}});
      it = std::prev(series.end());
    }
    it->second.push_back(p);
  }
  static constexpr std::string_view kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                 "#9467bd", "#8c564b"};

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << fmt(y(0)) << "\" x2=\"" << fmt(kLeft + plot_w)
      << "\" y2=\"" << fmt(y(0)) << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << fmt(y(0)) << "\" x2=\"" << kLeft << "\" y2=\""
      << fmt(y(1)) << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double f = i / 5.0;
    const double b = max_budget * i / 5.0;
    svg << "<text x=\"" << fmt(kLeft - 8) << "\" y=\"" << fmt(y(f) + 4)
        << "\" font-size=\"11\" text-anchor=\"end\">" << fmt(f) << "</text>\n";
    svg << "<text x=\"" << fmt(x(b)) << "\" y=\"" << fmt(y(0) + 18)
        << "\" font-size=\"11\" text-anchor=\"middle\">" << fmt(b) << "</text>\n";
  }
  svg << "<text x=\"" << fmt(kLeft + plot_w / 2) << "\" y=\"" << fmt(kHeight - 10)
      << "\" font-size=\"12\" text-anchor=\"middle\">fraction of words substituted</text>\n";
  svg << "<text x=\"15\" y=\"" << fmt(kTop + plot_h / 2) << "\" font-size=\"12\" text-anchor=\"middle\""
      << " transform=\"rotate(-90 15 " << fmt(kTop + plot_h / 2) << ")\">fraction classified as target</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto color = kColors[s % std::size(kColors)];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < series[s].second.size(); ++i) {
      const auto& p = series[s].second[i];
      svg << (i ? " " : "") << fmt(x(p.budget)) << ',' << fmt(y(p.attacked_fraction));
    }
    svg << "\"/>\n";
    const double ly = kTop + 16.0 * static_cast<double>(s);
    svg << "<line x1=\"" << fmt(kLeft + plot_w + 10) << "\" y1=\"" << fmt(ly) << "\" x2=\""
        << fmt(kLeft + plot_w + 30) << "\" y2=\"" << fmt(ly) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << fmt(kLeft + plot_w + 35) << "\" y=\"" << fmt(ly + 4)
        << "\" font-size=\"11\">" << series[s].first << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

inline void export_plot(const std::filesystem::path& path, const std::vector<CurvePoint>& points) {
  write_text_file(path, render_plot(points));
}

/// SHA-256 over "id<TAB>tokens joined by spaces<LF>" for each entry.
inline std::string corpus_hash(std::span<const CorpusEntry> corpus) {
  std::string text;
  for (const auto& entry : corpus) {
    text += std::to_string(entry.id);
    text += '\t';
    for (std::size_t i = 0; i < entry.text.size(); ++i) {
      if (i) text += ' ';
      text += entry.text.tokens[i];
    }
    text += '\n';
  }
  return sha256_hex(text);
}

inline Json oracle_manifest(const std::vector<std::pair<std::string, OracleInfo>>& oracles) {
  Json out = Json::object();
  for (const auto& [role, info] : oracles)
    out[role] = {{"id", info.id},
                 {"kind", std::string(to_string(info.kind))},
                 {"deterministic", info.deterministic},
                 {"concurrent", info.concurrent}};
  return out;
}

/// Run manifest: configuration snapshot, oracle identities, corpus hash and
/// per-budget status tally. Contains no timestamps, so identical runs give
/// identical bytes.
inline Json sweep_manifest(const Json& config_snapshot,
                           const std::vector<std::pair<std::string, OracleInfo>>& oracles,
                           const std::string& corpus_digest, const SweepOutput& output) {
  bool deterministic = true;
  for (const auto& [role, info] : oracles) deterministic = deterministic && info.deterministic;
  std::vector<std::size_t> failed_ids;
  for (const auto& r : output.records)
    if (!r.result && (failed_ids.empty() || failed_ids.back() != r.sentence_id))
      failed_ids.push_back(r.sentence_id);
  return {{"config", config_snapshot},
          {"oracles", oracle_manifest(oracles)},
          {"corpus_sha256", corpus_digest},
          {"sentences", output.sentences},
          {"failed_sentences", output.failed_sentences},
          {"failed_sentence_ids", failed_ids},
          {"degraded", output.degraded()},
          {"deterministic", deterministic},
          {"status_tally", output.tally}};
}

}  // namespace percept

#endif  // PERCEPT_EXPORT_HPP
