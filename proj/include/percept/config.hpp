#ifndef PERCEPT_CONFIG_HPP
#define PERCEPT_CONFIG_HPP

#include <cmath>
#include <filesystem>
#include <initializer_list>
#include <map>
#include <type_traits>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "percept/attack.hpp"
#include "percept/constraints.hpp"
#include "percept/error.hpp"
#include "percept/evaluation.hpp"
#include "percept/export.hpp"
#include "percept/oracles.hpp"
#include "percept/remote.hpp"
#include "percept/serialization.hpp"
#include "percept/toy_oracles.hpp"

// Run configuration: a single JSON document holding constraint settings,
// sweep settings and one entry per oracle role. Loading is strict: unknown
// keys and out-of-range values raise ConfigError naming the field, and every
// default is materialized by to_json() so manifests echo the full setup.

namespace percept {

/// Either a remote service or an inline toy model definition.
struct OracleSpec {
  std::optional<RemoteOracleConfig> remote;
  /// Toy definition object; null for remote oracles.
  Json toy;

  friend bool operator==(const OracleSpec&, const OracleSpec&) = default;
};

enum class OracleRole {
  translation,
  source_sentiment,
  target_sentiment,
  source_perplexity,
  target_perplexity,
  source_synonyms,
  target_synonyms,
};

inline constexpr OracleRole kAllRoles[] = {
    OracleRole::translation,       OracleRole::source_sentiment, OracleRole::target_sentiment,
    OracleRole::source_perplexity, OracleRole::target_perplexity, OracleRole::source_synonyms,
    OracleRole::target_synonyms};

inline std::string_view to_string(OracleRole role) {
  switch (role) {
    case OracleRole::translation: return "translation";
    case OracleRole::source_sentiment: return "source_sentiment";
    case OracleRole::target_sentiment: return "target_sentiment";
    case OracleRole::source_perplexity: return "source_perplexity";
    case OracleRole::target_perplexity: return "target_perplexity";
    case OracleRole::source_synonyms: return "source_synonyms";
    case OracleRole::target_synonyms: return "target_synonyms";
  }
  return "?";
}

inline OracleKind kind_of(OracleRole role) {
  switch (role) {
    case OracleRole::translation: return OracleKind::translation;
    case OracleRole::source_sentiment:
    case OracleRole::target_sentiment: return OracleKind::sentiment;
    case OracleRole::source_perplexity:
    case OracleRole::target_perplexity: return OracleKind::perplexity;
    case OracleRole::source_synonyms:
    case OracleRole::target_synonyms: return OracleKind::synonym;
  }
  return OracleKind::translation;
}

inline bool target_side(OracleRole role) {
  return role == OracleRole::target_sentiment || role == OracleRole::target_perplexity ||
         role == OracleRole::target_synonyms;
}

struct RunConfig {
  std::string source_language = "de";
  std::string target_language = "en";
  ConstraintConfig constraints;
  /// Mean perplexity of the target-side texts, for direct attacks.
  std::optional<double> target_mean_perplexity;
  SweepConfig sweep;
  AttackOptions attack;
  std::vector<std::pair<OracleRole, OracleSpec>> oracles;
  bool cache_enabled = true;
  std::string cache_directory;
  unsigned parallel = 1;

  const OracleSpec* oracle(OracleRole role) const {
    for (const auto& [r, spec] : oracles)
      if (r == role) return &spec;
    return nullptr;
  }

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

namespace config_detail {

inline void require_keys(const Json& object, const std::string& path,
                         std::initializer_list<std::string_view> allowed) {
  if (!object.is_object()) throw ConfigError(path.empty() ? "config" : path, "must be an object");
  for (const auto& [key, value] : object.items()) {
    bool known = false;
    for (auto a : allowed) known = known || a == key;
    if (!known) throw ConfigError(path.empty() ? key : path + "." + key, "unknown key");
  }
}

inline std::string join(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

template <typename T>
T read(const Json& object, const std::string& path, std::string_view key, T fallback) {
  auto it = object.find(key);
  if (it == object.end() || it->is_null()) return fallback;
  try {
    if constexpr (std::is_same_v<T, double>) {
      if (!it->is_number()) throw ConfigError(join(path, key), "must be a number");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw ConfigError(join(path, key), "must be a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer()) throw ConfigError(join(path, key), "must be an integer");
      if constexpr (std::is_unsigned_v<T>)
        if (it->get<long long>() < 0) throw ConfigError(join(path, key), "must be non-negative");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!it->is_string()) throw ConfigError(join(path, key), "must be a string");
    }
    return it->get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(join(path, key), e.what());
  }
}

inline std::optional<double> read_optional(const Json& object, const std::string& path, std::string_view key) {
  auto it = object.find(key);
  if (it == object.end() || it->is_null()) return std::nullopt;
  if (!it->is_number()) throw ConfigError(join(path, key), "must be a number");
  return it->get<double>();
}

inline Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

inline Label read_target(const Json& object, const std::string& path, Label fallback) {
  const auto text = read<std::string>(object, path, "target", std::string(to_string(fallback)));
  auto label = parse_label(text);
  if (!label || *label == Label::neutral) throw ConfigError(join(path, "target"), "must be positive or negative");
  return *label;
}

// Toy definitions are validated by building them once.
inline void validate_toy(OracleRole role, const Json& toy, const std::string& path) {
  switch (kind_of(role)) {
    case OracleKind::translation: require_keys(toy, path, {"dictionary", "id"}); break;
    case OracleKind::sentiment: require_keys(toy, path, {"lexicon", "id"}); break;
    case OracleKind::perplexity: require_keys(toy, path, {"unigram", "unknown_probability", "id"}); break;
    case OracleKind::synonym: require_keys(toy, path, {"table", "id"}); break;
  }
}

inline OracleSpec parse_oracle(OracleRole role, const Json& j, const RunConfig& run) {
  const std::string path = "oracles." + std::string(to_string(role));
  if (!j.is_object()) throw ConfigError(path, "must be an object");
  OracleSpec spec;
  if (j.contains("toy")) {
    require_keys(j, path, {"toy"});
    validate_toy(role, j["toy"], path + ".toy");
    spec.toy = j["toy"];
    return spec;
  }
  require_keys(j, path, {"url", "timeout", "retries", "backoff_ms", "concurrent", "deterministic",
                         "bearer_token", "id", "labels"});
  RemoteOracleConfig remote;
  remote.kind = kind_of(role);
  remote.base_url = read<std::string>(j, path, "url", "");
  if (remote.base_url.empty()) throw ConfigError(path + ".url", "required");
  remote.timeout_seconds = read<double>(j, path, "timeout", remote.timeout_seconds);
  remote.retries = read<int>(j, path, "retries", remote.retries);
  remote.backoff_ms = read<int>(j, path, "backoff_ms", remote.backoff_ms);
  remote.concurrent = read<bool>(j, path, "concurrent", remote.concurrent);
  remote.deterministic = read<bool>(j, path, "deterministic", remote.deterministic);
  remote.bearer_token = read<std::string>(j, path, "bearer_token", "");
  remote.id = read<std::string>(j, path, "id", "");
  if (j.contains("labels") && !j["labels"].is_null()) {
    if (remote.kind != OracleKind::sentiment) throw ConfigError(path + ".labels", "only valid for sentiment oracles");
    if (!j["labels"].is_array()) throw ConfigError(path + ".labels", "must be an array");
    for (const auto& item : j["labels"]) {
      auto label = item.is_string() ? parse_label(item.get<std::string>()) : std::nullopt;
      if (!label) throw ConfigError(path + ".labels", "unknown label");
      remote.labels.push_back(*label);
    }
  }
  if (role == OracleRole::translation) {
    remote.source_language = run.source_language;
    remote.target_language = run.target_language;
  } else {
    remote.source_language = target_side(role) ? run.target_language : run.source_language;
  }
  remote.validate(path);
  spec.remote = std::move(remote);
  return spec;
}

inline Json oracle_to_json(const OracleSpec& spec) {
  if (!spec.remote) return {{"toy", spec.toy}};
  const auto& r = *spec.remote;
  Json j = {{"url", r.base_url},
            {"timeout", r.timeout_seconds},
            {"retries", r.retries},
            {"backoff_ms", r.backoff_ms},
            {"concurrent", r.concurrent},
            {"deterministic", r.deterministic}};
  if (!r.id.empty()) j["id"] = r.id;
  if (!r.bearer_token.empty()) j["bearer_token"] = r.bearer_token;
  if (r.kind == OracleKind::sentiment) {
    Json labels = Json::array();
    for (Label l : r.labels) labels.push_back(std::string(to_string(l)));
    j["labels"] = labels;
  }
  return j;
}

}  // namespace config_detail

inline RunConfig parse_config(const Json& j) {
  using namespace config_detail;
  require_keys(j, "", {"source_language", "target_language", "constraints", "sweep", "attack", "oracles",
                       "cache", "parallel"});
  RunConfig run;
  run.source_language = read<std::string>(j, "", "source_language", run.source_language);
  run.target_language = read<std::string>(j, "", "target_language", run.target_language);
  if (run.source_language.empty()) throw ConfigError("source_language", "must not be empty");
  if (run.target_language.empty()) throw ConfigError("target_language", "must not be empty");

  const Json constraints = j.value("constraints", Json::object());
  require_keys(constraints, "constraints", {"epsilon1", "kappa", "mean_perplexity", "target_mean_perplexity",
                                            "epsilon3", "input_perception", "ignore_neutral"});
  auto& c = run.constraints;
  c.epsilon1 = read<double>(constraints, "constraints", "epsilon1", c.epsilon1);
  c.kappa = read<double>(constraints, "constraints", "kappa", c.kappa);
  c.mean_perplexity = read_optional(constraints, "constraints", "mean_perplexity");
  run.target_mean_perplexity = read_optional(constraints, "constraints", "target_mean_perplexity");
  c.epsilon3 = read_optional(constraints, "constraints", "epsilon3");
  const auto mode = read<std::string>(constraints, "constraints", "input_perception",
                                      std::string(to_string(c.perception)));
  auto parsed_mode = parse_perception_mode(mode);
  if (!parsed_mode) throw ConfigError("constraints.input_perception", "unknown mode '" + mode + "'");
  c.perception = *parsed_mode;
  c.ignore_neutral = read<bool>(constraints, "constraints", "ignore_neutral", c.ignore_neutral);
  c.validate();
  if (run.target_mean_perplexity && !(*run.target_mean_perplexity > 0.0))
    throw ConfigError("constraints.target_mean_perplexity", "must be positive");

  const Json sweep = j.value("sweep", Json::object());
  require_keys(sweep, "sweep", {"grid", "target", "mode", "seed", "sample_size", "use_references", "denominator"});
  auto& s = run.sweep;
  if (sweep.contains("grid")) {
    if (!sweep["grid"].is_array()) throw ConfigError("sweep.grid", "must be an array");
    s.grid.clear();
    for (const auto& v : sweep["grid"]) {
      if (!v.is_number()) throw ConfigError("sweep.grid", "values must be numbers");
      s.grid.push_back(v.get<double>());
    }
  }
  s.target = read_target(sweep, "sweep", s.target);
  const auto attack_mode = read<std::string>(sweep, "sweep", "mode", std::string(to_string(s.mode)));
  auto parsed_attack_mode = parse_attack_mode(attack_mode);
  if (!parsed_attack_mode) throw ConfigError("sweep.mode", "must be nmt or direct");
  s.mode = *parsed_attack_mode;
  s.seed = read<std::uint64_t>(sweep, "sweep", "seed", s.seed);
  if (sweep.contains("sample_size") && !sweep["sample_size"].is_null())
    s.sample_size = read<std::size_t>(sweep, "sweep", "sample_size", 0);
  s.use_references = read<bool>(sweep, "sweep", "use_references", s.use_references);
  const auto denominator = read<std::string>(sweep, "sweep", "denominator", std::string(to_string(s.denominator)));
  auto parsed_denominator = parse_denominator(denominator);
  if (!parsed_denominator) throw ConfigError("sweep.denominator", "must be all or initially-non-target");
  s.denominator = *parsed_denominator;
  s.validate();

  const Json attack = j.value("attack", Json::object());
  require_keys(attack, "attack", {"rerank"});
  run.attack.rerank = read<bool>(attack, "attack", "rerank", false);

  const Json oracles = j.value("oracles", Json::object());
  require_keys(oracles, "oracles", {"translation", "source_sentiment", "target_sentiment", "source_perplexity",
                                    "target_perplexity", "source_synonyms", "target_synonyms"});
  for (OracleRole role : kAllRoles) {
    auto it = oracles.find(to_string(role));
    if (it == oracles.end() || it->is_null()) continue;
    run.oracles.emplace_back(role, parse_oracle(role, *it, run));
  }

  const Json cache = j.value("cache", Json::object());
  require_keys(cache, "cache", {"enabled", "directory"});
  run.cache_enabled = read<bool>(cache, "cache", "enabled", run.cache_enabled);
  run.cache_directory = read<std::string>(cache, "cache", "directory", "");

  run.parallel = read<unsigned>(j, "", "parallel", run.parallel);
  if (run.parallel == 0) throw ConfigError("parallel", "must be at least 1");
  return run;
}

/// Full configuration with every default spelled out.
inline Json to_json(const RunConfig& run) {
  using config_detail::optional_json;
  Json grid = Json::array();
  for (double g : run.sweep.grid) grid.push_back(g);
  Json oracles = Json::object();
  for (const auto& [role, spec] : run.oracles) oracles[std::string(to_string(role))] = config_detail::oracle_to_json(spec);
  const auto& c = run.constraints;
  return {
      {"source_language", run.source_language},
      {"target_language", run.target_language},
      {"constraints",
       {{"epsilon1", c.epsilon1},
        {"kappa", c.kappa},
        {"mean_perplexity", optional_json(c.mean_perplexity)},
        {"target_mean_perplexity", optional_json(run.target_mean_perplexity)},
        {"epsilon3", optional_json(c.epsilon3)},
        {"input_perception", std::string(to_string(c.perception))},
        {"ignore_neutral", c.ignore_neutral}}},
      {"sweep",
       {{"grid", grid},
        {"target", std::string(to_string(run.sweep.target))},
        {"mode", std::string(to_string(run.sweep.mode))},
        {"seed", run.sweep.seed},
        {"sample_size", run.sweep.sample_size ? Json(*run.sweep.sample_size) : Json(nullptr)},
        {"use_references", run.sweep.use_references},
        {"denominator", std::string(to_string(run.sweep.denominator))}}},
      {"attack", {{"rerank", run.attack.rerank}}},
      {"oracles", oracles},
      {"cache", {{"enabled", run.cache_enabled}, {"directory", run.cache_directory}}},
      {"parallel", run.parallel},
  };
}

inline RunConfig load_config(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw ConfigError("", path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

inline void save_config(const std::filesystem::path& path, const RunConfig& run) {
  write_text_file(path, to_json(run).dump(2) + "\n");
}

/// Applies "a.b.c=value" to a materialized config and re-validates. The
/// value is parsed as JSON when possible, otherwise taken as a string.
inline RunConfig apply_overrides(const RunConfig& run, const std::vector<std::string>& overrides) {
  Json j = to_json(run);
  for (const auto& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError(item, "override must look like key=value");
    const std::string key = item.substr(0, eq);
    const std::string text = item.substr(eq + 1);
    Json value;
    try {
      value = Json::parse(text);
    } catch (const Json::exception&) {
      value = text;
    }
    Json* node = &j;
    std::size_t start = 0;
    while (true) {
      const auto dot = key.find('.', start);
      const std::string part = key.substr(start, dot - start);
      if (part.empty()) throw ConfigError(key, "empty path segment");
      if (!node->is_object()) throw ConfigError(key, "does not name a config field");
      if (dot == std::string::npos) {
        (*node)[part] = value;
        break;
      }
      node = &(*node)[part];
      start = dot + 1;
    }
  }
  return parse_config(j);
}

/// Instantiated oracles for one run. Owns every model object; the views
/// returned by attack_oracles() and direct_oracles() borrow from it.
class OracleBundle {
 public:
  explicit OracleBundle(const RunConfig& run) {
    std::shared_ptr<ResponseCache> cache;
    if (run.cache_enabled) {
      if (run.cache_directory.empty()) cache = std::make_shared<MemoryCache>();
      else cache = std::make_shared<DiskCache>(run.cache_directory);
    }
    for (const auto& [role, spec] : run.oracles) build(role, spec, run, cache);
  }

  const TranslationOracle* translator() const {
    return get(translation_, raw_translation_, OracleRole::translation);
  }
  const SentimentOracle* sentiment(bool target) const {
    return target ? get(target_sentiment_, raw_target_sentiment_, OracleRole::target_sentiment)
                  : get(source_sentiment_, raw_source_sentiment_, OracleRole::source_sentiment);
  }
  const PerplexityOracle* perplexity(bool target) const {
    return target ? get(target_perplexity_, raw_target_perplexity_, OracleRole::target_perplexity)
                  : get(source_perplexity_, raw_source_perplexity_, OracleRole::source_perplexity);
  }
  const SynonymOracle* synonyms(bool target) const {
    return target ? get(target_synonyms_, raw_target_synonyms_, OracleRole::target_synonyms)
                  : get(source_synonyms_, raw_source_synonyms_, OracleRole::source_synonyms);
  }

  bool has(OracleRole role) const {
    switch (role) {
      case OracleRole::translation: return raw_translation_ != nullptr;
      case OracleRole::source_sentiment: return raw_source_sentiment_ != nullptr;
      case OracleRole::target_sentiment: return raw_target_sentiment_ != nullptr;
      case OracleRole::source_perplexity: return raw_source_perplexity_ != nullptr;
      case OracleRole::target_perplexity: return raw_target_perplexity_ != nullptr;
      case OracleRole::source_synonyms: return raw_source_synonyms_ != nullptr;
      case OracleRole::target_synonyms: return raw_target_synonyms_ != nullptr;
    }
    return false;
  }

  AttackOracles attack_oracles() const {
    return {translator(), sentiment(false), sentiment(true), perplexity(false), synonyms(false)};
  }

  DirectOracles direct_oracles() const { return {sentiment(true), perplexity(true), synonyms(true)}; }

  std::vector<std::pair<std::string, OracleInfo>> infos() const { return infos_; }

 private:
  template <typename T>
  static const T* get(const std::unique_ptr<T>& memo, const std::unique_ptr<T>& raw, OracleRole role) {
    if (memo) return memo.get();
    if (!raw) throw ConfigError("oracles." + std::string(to_string(role)), "required by this command");
    return raw.get();
  }

  void build(OracleRole role, const OracleSpec& spec, const RunConfig& run,
             const std::shared_ptr<ResponseCache>& cache) {
    const std::string language = target_side(role) ? run.target_language : run.source_language;
    const std::string path = "oracles." + std::string(to_string(role)) + ".toy";
    const std::string default_id = "toy-" + std::string(to_string(role));
    auto toy_id = [&] { return spec.toy.value("id", default_id); };
    try {
      switch (kind_of(role)) {
        case OracleKind::translation:
          if (spec.remote)
            raw_translation_ = std::make_unique<RemoteTranslator>(*spec.remote, cache);
          else
            raw_translation_ = std::make_unique<toy::DictionaryTranslator>(
                spec.toy.value("dictionary", Json::object()).get<std::map<std::string, std::string>>(),
                run.source_language, run.target_language, toy_id());
          translation_ = wrap<MemoTranslator>(*raw_translation_, run);
          infos_.emplace_back(std::string(to_string(role)), raw_translation_->info());
          break;
        case OracleKind::sentiment: {
          auto& raw = role == OracleRole::source_sentiment ? raw_source_sentiment_ : raw_target_sentiment_;
          auto& slot = role == OracleRole::source_sentiment ? source_sentiment_ : target_sentiment_;
          if (spec.remote)
            raw = std::make_unique<RemoteSentiment>(*spec.remote, cache);
          else
            raw = std::make_unique<toy::LexiconSentiment>(
                spec.toy.value("lexicon", Json::object()).get<std::map<std::string, int>>(), language, toy_id());
          slot = wrap<MemoSentiment>(*raw, run);
          infos_.emplace_back(std::string(to_string(role)), raw->info());
          break;
        }
        case OracleKind::perplexity: {
          auto& raw = role == OracleRole::source_perplexity ? raw_source_perplexity_ : raw_target_perplexity_;
          auto& slot = role == OracleRole::source_perplexity ? source_perplexity_ : target_perplexity_;
          if (spec.remote)
            raw = std::make_unique<RemotePerplexity>(*spec.remote, cache);
          else
            raw = std::make_unique<toy::UnigramPerplexity>(
                spec.toy.value("unigram", Json::object()).get<std::map<std::string, double>>(), language,
                spec.toy.value("unknown_probability", toy::UnigramPerplexity::kDefaultUnknownProbability),
                toy_id());
          slot = wrap<MemoPerplexity>(*raw, run);
          infos_.emplace_back(std::string(to_string(role)), raw->info());
          break;
        }
        case OracleKind::synonym: {
          auto& raw = role == OracleRole::source_synonyms ? raw_source_synonyms_ : raw_target_synonyms_;
          auto& slot = role == OracleRole::source_synonyms ? source_synonyms_ : target_synonyms_;
          if (spec.remote)
            raw = std::make_unique<RemoteSynonyms>(*spec.remote, cache);
          else
            raw = std::make_unique<toy::TableSynonyms>(
                spec.toy.value("table", Json::object()).get<std::map<std::string, std::vector<std::string>>>(),
                language, toy_id());
          slot = wrap<MemoSynonyms>(*raw, run);
          infos_.emplace_back(std::string(to_string(role)), raw->info());
          break;
        }
      }
    } catch (const Json::exception& e) {
      throw ConfigError(path, e.what());
    } catch (const InvalidInput& e) {
      throw ConfigError(path, e.what());
    }
  }

  // Memo layer for deterministic oracles when caching is on.
  template <typename Memo, typename Raw>
  static std::unique_ptr<Raw> wrap(const Raw& raw, const RunConfig& run) {
    if (run.cache_enabled && raw.info().deterministic) return std::make_unique<Memo>(raw);
    return nullptr;
  }

  std::unique_ptr<TranslationOracle> raw_translation_, translation_;
  std::unique_ptr<SentimentOracle> raw_source_sentiment_, source_sentiment_, raw_target_sentiment_, target_sentiment_;
  std::unique_ptr<PerplexityOracle> raw_source_perplexity_, source_perplexity_, raw_target_perplexity_,
      target_perplexity_;
  std::unique_ptr<SynonymOracle> raw_source_synonyms_, source_synonyms_, raw_target_synonyms_, target_synonyms_;
  std::vector<std::pair<std::string, OracleInfo>> infos_;
};

}  // namespace percept

#endif  // PERCEPT_CONFIG_HPP
