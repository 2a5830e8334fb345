#ifndef PERCEPT_REMOTE_HPP
#define PERCEPT_REMOTE_HPP

#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <httplib.h>

#include "percept/error.hpp"
#include "percept/hash.hpp"
#include "percept/oracles.hpp"
#include "percept/serialization.hpp"

// HTTP clients for model services. Every request is a JSON POST:
//
//   translation  {"kind":"translation","language":L,"tokens":[...]} -> {"tokens":[...]}
//   sentiment    {"kind":"sentiment","language":L,"tokens":[...]}   -> {"labels":[...],"probabilities":[...]}
//   perplexity   {"kind":"perplexity","language":L,"tokens":[...]}  -> {"perplexity":x}
//   synonyms     {"token":w,"language":L}                           -> {"synonyms":[...]}
//
// Responses of deterministic services are cached, keyed by the oracle id and
// the exact request body.

namespace percept {

struct RemoteOracleConfig {
  std::string base_url;
  OracleKind kind = OracleKind::translation;
  std::string source_language;
  /// Translation only.
  std::string target_language;
  double timeout_seconds = 30.0;
  int retries = 2;
  /// First retry waits this long; each further retry doubles it.
  int backoff_ms = 100;
  bool concurrent = true;
  bool deterministic = true;
  std::string bearer_token;
  /// Stable identifier; defaults to "<kind>@<base_url>".
  std::string id;
  /// Sentiment only: the label set every response must carry, in order.
  std::vector<Label> labels;

  std::string oracle_id() const {
    return id.empty() ? std::string(to_string(kind)) + "@" + base_url : id;
  }

  void validate(const std::string& field = "oracle") const {
    if (base_url.rfind("http://", 0) != 0)
      throw ConfigError(field + ".url", "must be an http:// URL");
    if (!(timeout_seconds > 0.0) || !std::isfinite(timeout_seconds))
      throw ConfigError(field + ".timeout", "must be positive");
    if (retries < 0) throw ConfigError(field + ".retries", "must be >= 0");
    if (backoff_ms < 0) throw ConfigError(field + ".backoff_ms", "must be >= 0");
    if (source_language.empty()) throw ConfigError(field, "language is not set");
    if (kind == OracleKind::translation && target_language.empty())
      throw ConfigError(field, "target language is not set");
  }

  friend bool operator==(const RemoteOracleConfig&, const RemoteOracleConfig&) = default;
};

class ResponseCache {
 public:
  virtual ~ResponseCache() = default;
  virtual std::optional<std::string> get(const std::string& oracle_id, const std::string& request) = 0;
  /// Idempotent: an existing entry is never overwritten.
  virtual void put(const std::string& oracle_id, const std::string& request, const std::string& response) = 0;
};

class MemoryCache final : public ResponseCache {
 public:
  std::optional<std::string> get(const std::string& oracle_id, const std::string& request) override {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(key(oracle_id, request));
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  void put(const std::string& oracle_id, const std::string& request, const std::string& response) override {
    std::unique_lock lock(mutex_);
    entries_.try_emplace(key(oracle_id, request), response);
  }

 private:
  static std::string key(const std::string& oracle_id, const std::string& request) {
    return oracle_id + '\n' + request;
  }

  std::shared_mutex mutex_;
  std::unordered_map<std::string, std::string> entries_;
};

/// One JSON file per entry, named by the SHA-256 of (oracle id, request).
/// Writes go through a temporary file and a rename, so concurrent writers of
/// the same entry are harmless.
class DiskCache final : public ResponseCache {
 public:
  explicit DiskCache(std::filesystem::path directory) : directory_(std::move(directory)) {
    std::error_code ec;
    std::filesystem::create_directories(directory_, ec);
    if (ec) throw IoError("cannot create cache directory " + directory_.string());
  }

  const std::filesystem::path& directory() const noexcept { return directory_; }

  std::filesystem::path entry_path(const std::string& oracle_id, const std::string& request) const {
    return directory_ / (sha256_hex(oracle_id + '\n' + request) + ".json");
  }

  std::optional<std::string> get(const std::string& oracle_id, const std::string& request) override {
    std::ifstream in(entry_path(oracle_id, request), std::ios::binary);
    if (!in) return std::nullopt;
    try {
      const Json entry = Json::parse(in);
      if (entry.at("oracle") != oracle_id || entry.at("request") != request) return std::nullopt;
      return entry.at("response").get<std::string>();
    } catch (const Json::exception&) {
      return std::nullopt;
    }
  }

  void put(const std::string& oracle_id, const std::string& request, const std::string& response) override {
    const auto path = entry_path(oracle_id, request);
    if (std::filesystem::exists(path)) return;
    const Json entry = {{"oracle", oracle_id},
                        {"request", request},
                        {"response", response},
                        {"created", static_cast<std::int64_t>(std::time(nullptr))}};
    std::ostringstream suffix;
    suffix << ".tmp." << std::this_thread::get_id();
    auto temporary = path;
    temporary += suffix.str();
    {
      std::ofstream out(temporary, std::ios::binary | std::ios::trunc);
      if (!out) throw IoError("cannot write cache entry " + temporary.string());
      out << entry.dump();
    }
    std::error_code ec;
    std::filesystem::rename(temporary, path, ec);
    if (ec) std::filesystem::remove(temporary, ec);
  }

 private:
  std::filesystem::path directory_;
};

namespace remote_detail {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

inline Endpoint split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("oracle.url", "malformed URL '" + url + "'");
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

inline bool retryable_status(int status) { return status == 408 || status == 429 || status >= 500; }

inline std::vector<std::string> normalized_tokens(const Json& array, const char* field) {
  if (!array.is_array()) throw ProtocolError(std::string("'") + field + "' must be an array");
  std::vector<std::string> out;
  for (const auto& item : array) {
    if (!item.is_string()) throw ProtocolError(std::string("'") + field + "' must hold strings");
    std::string token = detail::nfc(item.get<std::string>());
    if (token.empty()) throw ProtocolError(std::string("empty token in '") + field + "'");
    for (unsigned char c : token)
      if (c == ' ' || c == '\t' || c == '\n' || c == '\r')
        throw ProtocolError(std::string("whitespace inside token in '") + field + "'");
    out.push_back(std::move(token));
  }
  return out;
}

}  // namespace remote_detail

/// Issues validated POST requests for one remote oracle, with retries,
/// optional serialization (services declared non-concurrent) and caching.
class RemoteClient {
 public:
  RemoteClient(RemoteOracleConfig config, std::shared_ptr<ResponseCache> cache)
      : config_(std::move(config)), cache_(std::move(cache)) {
    config_.validate();
    endpoint_ = remote_detail::split_url(config_.base_url);
  }

  const RemoteOracleConfig& config() const noexcept { return config_; }

  /// Sends `request`; `validate` must throw ProtocolError for a bad payload.
  template <typename Validate>
  Json call(const Json& request, Validate&& validate) const {
    const std::string body = request.dump();
    const bool use_cache = cache_ && config_.deterministic;
    if (use_cache) {
      if (auto hit = cache_->get(config_.oracle_id(), body)) {
        try {
          Json response = Json::parse(*hit);
          validate(response);
          return response;
        } catch (const Json::exception&) {
        } catch (const ProtocolError&) {
        }
      }
    }
    Json response = config_.concurrent ? exchange(body) : serialized_exchange(body);
    validate(response);
    if (use_cache) cache_->put(config_.oracle_id(), body, response.dump());
    return response;
  }

 private:
  Json serialized_exchange(const std::string& body) const {
    std::lock_guard lock(single_flight_);
    return exchange(body);
  }

  Json exchange(const std::string& body) const {
    std::string last_failure = "no attempt made";
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
      if (attempt > 0 && config_.backoff_ms > 0)
        std::this_thread::sleep_for(std::chrono::milliseconds(config_.backoff_ms) * (1 << (attempt - 1)));
      httplib::Client client(endpoint_.origin);
      const auto seconds = static_cast<time_t>(config_.timeout_seconds);
      const auto micros = static_cast<time_t>((config_.timeout_seconds - static_cast<double>(seconds)) * 1e6);
      client.set_connection_timeout(seconds, micros);
      client.set_read_timeout(seconds, micros);
      client.set_write_timeout(seconds, micros);
      if (!config_.bearer_token.empty()) client.set_bearer_token_auth(config_.bearer_token);
      auto result = client.Post(endpoint_.path, body, "application/json");
      if (!result) {
        last_failure = httplib::to_string(result.error());
        continue;
      }
      if (result->status == 200) {
        try {
          return Json::parse(result->body);
        } catch (const Json::exception& e) {
          throw ProtocolError(config_.oracle_id() + ": response is not JSON: " + e.what());
        }
      }
      if (!remote_detail::retryable_status(result->status))
        throw ProtocolError(config_.oracle_id() + ": HTTP status " + std::to_string(result->status));
      last_failure = "HTTP status " + std::to_string(result->status);
    }
    throw OracleUnavailable(config_.oracle_id() + ": oracle unavailable (" + last_failure + ")");
  }

  RemoteOracleConfig config_;
  std::shared_ptr<ResponseCache> cache_;
  remote_detail::Endpoint endpoint_;
  mutable std::mutex single_flight_;
};

inline OracleInfo remote_oracle_info(const RemoteOracleConfig& config) {
  return OracleInfo{config.oracle_id(), config.kind, config.deterministic, config.concurrent};
}

inline RemoteOracleConfig with_kind(RemoteOracleConfig config, OracleKind kind) {
  config.kind = kind;
  return config;
}

inline Json tokens_request(std::string_view kind, const TokenSequence& seq) {
  return {{"kind", std::string(kind)}, {"language", seq.language}, {"tokens", seq.tokens}};
}

class RemoteTranslator final : public TranslationOracle {
 public:
  RemoteTranslator(RemoteOracleConfig config, std::shared_ptr<ResponseCache> cache = nullptr)
      : TranslationOracle(remote_oracle_info(with_kind(config, OracleKind::translation)), config.source_language, config.target_language),
        client_(with_kind(std::move(config), OracleKind::translation), std::move(cache)) {}

 protected:
  TokenSequence do_translate(const TokenSequence& source) const override {
    const Json response = client_.call(tokens_request("translation", source), [](const Json& r) {
      if (!r.is_object() || !r.contains("tokens")) throw ProtocolError("translation response lacks 'tokens'");
      if (remote_detail::normalized_tokens(r["tokens"], "tokens").empty())
        throw ProtocolError("translation response has no tokens");
    });
    return TokenSequence{remote_detail::normalized_tokens(response["tokens"], "tokens"), target_language(), {}};
  }

 private:
  RemoteClient client_;
};

namespace remote_detail {

/// Remote classifiers produce float32 softmax outputs, so the sum check is
/// looser than SentimentScore's; accepted scores are renormalized.
inline constexpr double kWireSumTolerance = 1e-6;

inline SentimentScore parse_sentiment(const Json& r, const std::vector<Label>& expected) {
  if (!r.is_object() || !r.contains("labels") || !r.contains("probabilities"))
    throw ProtocolError("sentiment response lacks 'labels' or 'probabilities'");
  const Json& labels = r["labels"];
  const Json& probabilities = r["probabilities"];
  if (!labels.is_array() || !probabilities.is_array() || labels.size() != probabilities.size() ||
      labels.empty())
    throw ProtocolError("sentiment response has mismatched labels/probabilities");
  std::vector<std::pair<Label, double>> entries;
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!labels[i].is_string() || !probabilities[i].is_number())
      throw ProtocolError("sentiment response has wrongly typed entries");
    auto label = parse_label(labels[i].get<std::string>());
    if (!label) throw ProtocolError("unknown sentiment label '" + labels[i].get<std::string>() + "'");
    const double p = probabilities[i].get<double>();
    if (!(p >= 0.0 && p <= 1.0)) throw ProtocolError("sentiment probability outside [0,1]");
    total += p;
    entries.emplace_back(*label, p);
  }
  if (std::abs(total - 1.0) > kWireSumTolerance)
    throw ProtocolError("sentiment probabilities sum to " + format_number(total));
  if (!expected.empty()) {
    bool same = expected.size() == entries.size();
    for (std::size_t i = 0; same && i < entries.size(); ++i) same = entries[i].first == expected[i];
    if (!same) throw ProtocolError("sentiment response label set differs from the configured one");
  }
  for (auto& e : entries) e.second /= total;
  try {
    return SentimentScore(std::move(entries));
  } catch (const InvalidInput& e) {
    throw ProtocolError(e.what());
  }
}

}  // namespace remote_detail

class RemoteSentiment final : public SentimentOracle {
 public:
  RemoteSentiment(RemoteOracleConfig config, std::shared_ptr<ResponseCache> cache = nullptr)
      : SentimentOracle(remote_oracle_info(with_kind(config, OracleKind::sentiment)), config.source_language, config.labels),
        client_(with_kind(std::move(config), OracleKind::sentiment), std::move(cache)) {}

 protected:
  SentimentScore do_score(const TokenSequence& seq) const override {
    const auto& expected = client_.config().labels;
    const Json response = client_.call(tokens_request("sentiment", seq), [&](const Json& r) {
      (void)remote_detail::parse_sentiment(r, expected);
    });
    return remote_detail::parse_sentiment(response, expected);
  }

 private:
  RemoteClient client_;
};

class RemotePerplexity final : public PerplexityOracle {
 public:
  RemotePerplexity(RemoteOracleConfig config, std::shared_ptr<ResponseCache> cache = nullptr)
      : PerplexityOracle(remote_oracle_info(with_kind(config, OracleKind::perplexity)), config.source_language),
        client_(with_kind(std::move(config), OracleKind::perplexity), std::move(cache)) {}

 protected:
  double do_perplexity(const TokenSequence& seq) const override {
    const Json response = client_.call(tokens_request("perplexity", seq), [](const Json& r) {
      if (!r.is_object() || !r.contains("perplexity") || !r["perplexity"].is_number())
        throw ProtocolError("perplexity response lacks numeric 'perplexity'");
      const double value = r["perplexity"].get<double>();
      if (!(value > 0.0) || !std::isfinite(value)) throw ProtocolError("perplexity must be positive and finite");
    });
    return response["perplexity"].get<double>();
  }

 private:
  RemoteClient client_;
};

class RemoteSynonyms final : public SynonymOracle {
 public:
  RemoteSynonyms(RemoteOracleConfig config, std::shared_ptr<ResponseCache> cache = nullptr)
      : SynonymOracle(remote_oracle_info(with_kind(config, OracleKind::synonym)), config.source_language),
        client_(with_kind(std::move(config), OracleKind::synonym), std::move(cache)) {}

 protected:
  std::vector<std::string> do_synonyms(const std::string& token) const override {
    const Json request = {{"token", token}, {"language", language()}};
    const Json response = client_.call(request, [](const Json& r) {
      if (!r.is_object() || !r.contains("synonyms")) throw ProtocolError("synonym response lacks 'synonyms'");
      (void)remote_detail::normalized_tokens(r["synonyms"], "synonyms");
    });
    return remote_detail::normalized_tokens(response["synonyms"], "synonyms");
  }

 private:
  RemoteClient client_;
};

}  // namespace percept

#endif  // PERCEPT_REMOTE_HPP
