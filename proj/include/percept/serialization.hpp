#ifndef PERCEPT_SERIALIZATION_HPP
#define PERCEPT_SERIALIZATION_HPP

#include <charconv>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "percept/attack.hpp"
#include "percept/constraints.hpp"
#include "percept/error.hpp"
#include "percept/oracles.hpp"
#include "percept/text.hpp"

// JSON encodings of the core value types. These are the building blocks of
// the AttackRecord JSONL schema; decoding is strict and throws
// InvalidInput on any shape mismatch.

namespace percept {

using Json = nlohmann::json;

/// Shortest round-trip decimal form, always with a fractional part or
/// exponent ("0.0", "0.42", "1e-05").
inline std::string format_number(double value) {
  if (!std::isfinite(value)) throw InvalidInput("cannot format non-finite number");
  char buffer[64];
  auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  if (ec != std::errc{}) throw Error("number formatting failed");
  std::string out(buffer, end);
  if (out.find_first_of(".e") == std::string::npos) out += ".0";
  return out;
}

namespace json_detail {

inline const Json& field(const Json& object, std::string_view key) {
  if (!object.is_object()) throw InvalidInput("expected JSON object");
  auto it = object.find(key);
  if (it == object.end()) throw InvalidInput("missing field '" + std::string(key) + "'");
  return *it;
}

template <typename T>
T get(const Json& object, std::string_view key) {
  try {
    return field(object, key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput("field '" + std::string(key) + "': " + e.what());
  }
}

}  // namespace json_detail

inline Json to_json(const TokenSequence& seq) {
  Json j = {{"tokens", seq.tokens}, {"language", seq.language}};
  j["text"] = seq.empty() ? std::string{} : detokenize(seq);
  if (!seq.raw.empty()) j["raw"] = seq.raw;
  return j;
}

inline TokenSequence token_sequence_from_json(const Json& j) {
  TokenSequence seq;
  seq.tokens = json_detail::get<std::vector<std::string>>(j, "tokens");
  seq.language = json_detail::get<std::string>(j, "language");
  if (j.contains("raw")) seq.raw = json_detail::get<std::string>(j, "raw");
  return seq;
}

inline Json to_json(const SentimentScore& score) {
  Json labels = Json::array();
  Json probabilities = Json::array();
  for (const auto& [label, p] : score.entries()) {
    labels.push_back(std::string(to_string(label)));
    probabilities.push_back(p);
  }
  return {{"labels", labels}, {"probabilities", probabilities}};
}

inline SentimentScore sentiment_score_from_json(const Json& j) {
  const auto labels = json_detail::get<std::vector<std::string>>(j, "labels");
  const auto probabilities = json_detail::get<std::vector<double>>(j, "probabilities");
  if (labels.size() != probabilities.size())
    throw InvalidInput("labels and probabilities differ in length");
  std::vector<std::pair<Label, double>> entries;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto label = parse_label(labels[i]);
    if (!label) throw InvalidInput("unknown sentiment label '" + labels[i] + "'");
    entries.emplace_back(*label, probabilities[i]);
  }
  return SentimentScore(std::move(entries));
}

inline Json to_json(const ConstraintEntry& e) {
  Json j = {{"name", e.name}, {"threshold", e.threshold}, {"passed", e.passed}};
  j["measured"] = e.measured ? Json(*e.measured) : Json(nullptr);
  if (!e.note.empty()) j["note"] = e.note;
  if (e.errored) j["errored"] = true;
  return j;
}

inline ConstraintEntry constraint_entry_from_json(const Json& j) {
  ConstraintEntry e;
  e.name = json_detail::get<std::string>(j, "name");
  e.threshold = json_detail::get<double>(j, "threshold");
  e.passed = json_detail::get<bool>(j, "passed");
  const Json& measured = json_detail::field(j, "measured");
  if (!measured.is_null()) e.measured = json_detail::get<double>(j, "measured");
  if (j.contains("note")) e.note = json_detail::get<std::string>(j, "note");
  if (j.contains("errored")) e.errored = json_detail::get<bool>(j, "errored");
  return e;
}

inline Json to_json(const ConstraintReport& report) {
  Json entries = Json::array();
  for (const auto& e : report.entries) entries.push_back(to_json(e));
  return {{"passed", report.passed()}, {"entries", entries}};
}

inline ConstraintReport constraint_report_from_json(const Json& j) {
  ConstraintReport report;
  for (const auto& e : json_detail::field(j, "entries")) report.entries.push_back(constraint_entry_from_json(e));
  if (json_detail::get<bool>(j, "passed") != report.passed())
    throw InvalidInput("constraint report 'passed' disagrees with its entries");
  return report;
}

inline Json to_json(const Substitution& s) {
  return {{"position", s.position}, {"original", s.original}, {"replacement", s.replacement}};
}

inline Substitution substitution_from_json(const Json& j) {
  return Substitution{json_detail::get<std::size_t>(j, "position"),
                      json_detail::get<std::string>(j, "original"),
                      json_detail::get<std::string>(j, "replacement")};
}

inline Json to_json(const SearchState& s) {
  return {{"ranked", s.ranked},         {"order", s.order},
          {"next", s.next},             {"saw_feasible", s.saw_feasible},
          {"fingerprint", s.fingerprint}};
}

inline SearchState search_state_from_json(const Json& j) {
  SearchState s;
  s.ranked = json_detail::get<bool>(j, "ranked");
  s.order = json_detail::get<std::vector<std::size_t>>(j, "order");
  s.next = json_detail::get<std::size_t>(j, "next");
  s.saw_feasible = json_detail::get<bool>(j, "saw_feasible");
  s.fingerprint = json_detail::get<std::string>(j, "fingerprint");
  return s;
}

inline Label label_from_json(const Json& j, std::string_view key) {
  const auto text = json_detail::get<std::string>(j, key);
  auto label = parse_label(text);
  if (!label) throw InvalidInput("unknown label '" + text + "'");
  return *label;
}

/// Every AttackResult field, grouped the way an original-vs-attacked table
/// reads: source, translation, sentiment.
inline void write_attack_result(Json& j, const AttackResult& r) {
  j["budget"] = r.budget;
  j["target_label"] = std::string(to_string(r.target));
  j["status"] = std::string(to_string(r.status));
  j["source"] = {{"original", to_json(r.original)}, {"adversarial", to_json(r.adversarial)}};
  j["translation"] = {{"original", to_json(r.original_output)},
                      {"adversarial", to_json(r.adversarial_output)}};
  j["sentiment"] = {{"before", r.target_before()},
                    {"after", r.target_after()},
                    {"score_before", to_json(r.score_before)},
                    {"score_after", to_json(r.score_after)}};
  Json subs = Json::array();
  for (const auto& s : r.substitutions) subs.push_back(to_json(s));
  j["substitutions"] = subs;
  j["constraints"] = to_json(r.constraints);
  j["search"] = to_json(r.search);
}

inline AttackResult read_attack_result(const Json& j) {
  AttackResult r;
  r.budget = json_detail::get<double>(j, "budget");
  r.target = label_from_json(j, "target_label");
  const auto status = json_detail::get<std::string>(j, "status");
  auto parsed = parse_attack_status(status);
  if (!parsed) throw InvalidInput("unknown attack status '" + status + "'");
  r.status = *parsed;
  const Json& source = json_detail::field(j, "source");
  r.original = token_sequence_from_json(json_detail::field(source, "original"));
  r.adversarial = token_sequence_from_json(json_detail::field(source, "adversarial"));
  const Json& translation = json_detail::field(j, "translation");
  r.original_output = token_sequence_from_json(json_detail::field(translation, "original"));
  r.adversarial_output = token_sequence_from_json(json_detail::field(translation, "adversarial"));
  const Json& sentiment = json_detail::field(j, "sentiment");
  r.score_before = sentiment_score_from_json(json_detail::field(sentiment, "score_before"));
  r.score_after = sentiment_score_from_json(json_detail::field(sentiment, "score_after"));
  for (const auto& s : json_detail::field(j, "substitutions")) r.substitutions.push_back(substitution_from_json(s));
  r.constraints = constraint_report_from_json(json_detail::field(j, "constraints"));
  r.search = search_state_from_json(json_detail::field(j, "search"));
  return r;
}

}  // namespace percept

#endif  // PERCEPT_SERIALIZATION_HPP
