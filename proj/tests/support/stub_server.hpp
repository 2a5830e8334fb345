#ifndef PERCEPT_TESTS_STUB_SERVER_HPP
#define PERCEPT_TESTS_STUB_SERVER_HPP

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "percept/config.hpp"
#include "percept/export.hpp"
#include "percept/remote.hpp"
#include "percept/serialization.hpp"

namespace percept::testing {

/// In-process HTTP server answering POSTs from per-path handlers.
class StubServer {
 public:
  struct Reply {
    int status = 200;
    std::string body;
  };
  using Handler = std::function<Reply(const httplib::Request&)>;

  StubServer() {
    server_.Post(R"(/.*)", [this](const httplib::Request& req, httplib::Response& res) {
      const int now = ++in_flight_;
      {
        std::lock_guard lock(mutex_);
        max_in_flight_ = std::max(max_in_flight_, now);
        ++hits_[req.path];
        bodies_[req.path].push_back(req.body);
        headers_[req.path] = req.headers;
      }
      Handler handler;
      {
        std::lock_guard lock(mutex_);
        if (auto it = handlers_.find(req.path); it != handlers_.end()) handler = it->second;
      }
      Reply reply = handler ? handler(req) : Reply{404, "{}"};
      if (delay_.count() > 0) std::this_thread::sleep_for(delay_);
      --in_flight_;
      res.status = reply.status;
      res.set_content(reply.body, "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~StubServer() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  StubServer(const StubServer&) = delete;
  StubServer& operator=(const StubServer&) = delete;

  std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port_) + path; }

  void on(const std::string& path, Handler handler) {
    std::lock_guard lock(mutex_);
    handlers_[path] = std::move(handler);
  }

  void reply_json(const std::string& path, const Json& body) {
    on(path, [text = body.dump()](const httplib::Request&) { return Reply{200, text}; });
  }

  void set_delay(std::chrono::milliseconds delay) { delay_ = delay; }

  int hits(const std::string& path) const {
    std::lock_guard lock(mutex_);
    auto it = hits_.find(path);
    return it == hits_.end() ? 0 : it->second;
  }

  std::vector<std::string> bodies(const std::string& path) const {
    std::lock_guard lock(mutex_);
    auto it = bodies_.find(path);
    return it == bodies_.end() ? std::vector<std::string>{} : it->second;
  }

  std::string header(const std::string& path, const std::string& name) const {
    std::lock_guard lock(mutex_);
    auto it = headers_.find(path);
    if (it == headers_.end()) return {};
    auto h = it->second.find(name);
    return h == it->second.end() ? std::string{} : h->second;
  }

  int max_in_flight() const {
    std::lock_guard lock(mutex_);
    return max_in_flight_;
  }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  mutable std::mutex mutex_;
  std::map<std::string, Handler> handlers_;
  std::map<std::string, int> hits_;
  std::map<std::string, std::vector<std::string>> bodies_;
  std::map<std::string, httplib::Headers> headers_;
  std::atomic<int> in_flight_{0};
  int max_in_flight_ = 0;
  std::chrono::milliseconds delay_{0};
};

struct GoldenOutcome {
  std::string name;
  bool passed = false;
  std::string detail;
};

inline OracleKind fixture_kind(const std::string& kind) {
  if (kind == "translation") return OracleKind::translation;
  if (kind == "sentiment") return OracleKind::sentiment;
  if (kind == "perplexity") return OracleKind::perplexity;
  return OracleKind::synonym;
}

/// Replays one golden fixture: the stub answers with the recorded response,
/// and the adapter must send exactly the recorded request and either return
/// the expected value or reject the response as a protocol error.
inline GoldenOutcome run_golden(StubServer& server, const std::filesystem::path& file) {
  GoldenOutcome outcome{file.stem().string(), false, {}};
  const Json fixture = Json::parse(read_text_file(file));
  const std::string path = "/" + outcome.name;
  server.reply_json(path, fixture["response"]);

  RemoteOracleConfig config;
  config.base_url = server.url(path);
  config.kind = fixture_kind(fixture["kind"]);
  config.source_language = fixture["source_language"];
  config.target_language = fixture.value("target_language", "");
  config.retries = 0;
  if (fixture.contains("labels"))
    for (const auto& l : fixture["labels"]) config.labels.push_back(*parse_label(l.get<std::string>()));

  Json actual;
  try {
    switch (config.kind) {
      case OracleKind::translation: {
        const RemoteTranslator oracle(config);
        const auto out = oracle.translate({fixture["input"].get<std::vector<std::string>>(), config.source_language, {}});
        actual = {{"tokens", out.tokens}, {"language", out.language}};
        break;
      }
      case OracleKind::sentiment: {
        const RemoteSentiment oracle(config);
        const auto out = oracle.score({fixture["input"].get<std::vector<std::string>>(), config.source_language, {}});
        actual = to_json(out);
        break;
      }
      case OracleKind::perplexity: {
        const RemotePerplexity oracle(config);
        actual = {{"perplexity",
                   oracle.perplexity({fixture["input"].get<std::vector<std::string>>(), config.source_language, {}})}};
        break;
      }
      case OracleKind::synonym: {
        const RemoteSynonyms oracle(config);
        actual = {{"synonyms", oracle.synonyms(fixture["input"].get<std::string>())}};
        break;
      }
    }
  } catch (const ProtocolError& e) {
    actual = {{"error", "protocol"}, {"message", e.what()}};
  } catch (const Error& e) {
    actual = {{"error", "other"}, {"message", e.what()}};
  }

  const auto bodies = server.bodies(path);
  if (bodies.size() != 1) {
    outcome.detail = "expected one request, saw " + std::to_string(bodies.size());
    return outcome;
  }
  if (Json::parse(bodies[0]) != fixture["request"]) {
    outcome.detail = "request mismatch: " + bodies[0];
    return outcome;
  }
  if (server.header(path, "Content-Type") != "application/json") {
    outcome.detail = "request content type is not application/json";
    return outcome;
  }
  if (fixture.contains("expect_error")) {
    outcome.passed = actual.value("error", "") == fixture["expect_error"];
    if (!outcome.passed) outcome.detail = "expected rejection, got " + actual.dump();
  } else {
    outcome.passed = actual == fixture["expect"];
    if (!outcome.passed) outcome.detail = "expected " + fixture["expect"].dump() + ", got " + actual.dump();
  }
  return outcome;
}

inline std::vector<std::filesystem::path> golden_fixtures(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  std::ranges::sort(files);
  return files;
}

}  // namespace percept::testing

#endif  // PERCEPT_TESTS_STUB_SERVER_HPP
