#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vtstyle/stimulus.hpp"
#include "vtstyle/util.hpp"

namespace vts {

enum class Phase { identify, attributes, extract };

std::string_view to_string(Phase p);
Phase parse_phase(std::string_view s);

struct RetryPolicy {
  int max_attempts = 3;
  int base_backoff_ms = 500;

  friend bool operator==(const RetryPolicy&, const RetryPolicy&) = default;
};

struct ModelEndpoint {
  std::string id;
  std::string base_url;
  std::string model_name;
  // Empty means the endpoint takes no credential (e.g. a local server).
  std::string api_key_env;
  int max_parallel = 1;
  RetryPolicy retry;

  friend bool operator==(const ModelEndpoint&, const ModelEndpoint&) = default;
};

void validate(const ModelEndpoint& e);

// One stateless chat turn. Sampling temperature is pinned to zero and there is
// no history field: every query starts from a fresh context.
struct ChatRequest {
  static constexpr double temperature = 0.0;

  Bytes image;  // PNG; empty only for text-only extractor calls
  std::string image_digest;
  std::string system_prompt;
  std::string prompt;
};

// Everything a scripted client may condition on. Live clients ignore it.
struct QueryCell {
  StimulusRecord stimulus;
  Phase phase = Phase::identify;
  int prompt_id = 0;
  int rep = 0;
};

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual std::string query(const ChatRequest& request, const QueryCell& cell) = 0;
  virtual std::string timestamp(const QueryCell& cell);
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  // Throws TransportError when no HTTP response was obtained.
  virtual HttpResponse post(const std::string& url, const HttpHeaders& headers, const std::string& body) = 0;
};

class HttplibTransport final : public HttpTransport {
 public:
  explicit HttplibTransport(std::chrono::seconds timeout = std::chrono::seconds(120)) : timeout_(timeout) {}
  HttpResponse post(const std::string& url, const HttpHeaders& headers, const std::string& body) override;

 private:
  std::chrono::seconds timeout_;
};

// Chat-completions request body: one user message with an image part and a
// text part, optional system message, temperature 0.
nlohmann::ordered_json build_chat_body(const std::string& model_name, const ChatRequest& request);
std::string parse_chat_reply(const std::string& body);

class HttpChatClient final : public ChatClient {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  HttpChatClient(ModelEndpoint endpoint, std::shared_ptr<HttpTransport> transport, Sleeper sleeper = {});
  std::string query(const ChatRequest& request, const QueryCell& cell) override;
  int attempts() const { return attempts_; }

 private:
  ModelEndpoint endpoint_;
  std::shared_ptr<HttpTransport> transport_;
  Sleeper sleeper_;
  std::atomic<int> attempts_{0};
};

struct ResponseRecord {
  std::string stimulus_id;
  std::string concept_id;
  StyleFamily style = StyleFamily::functional;
  std::string model_id;
  Phase phase = Phase::identify;
  int prompt_id = 0;
  int rep = 0;
  std::string raw_text;
  std::string request_digest;
  std::string timestamp;

  friend bool operator==(const ResponseRecord&, const ResponseRecord&) = default;
};

nlohmann::ordered_json to_json(const ResponseRecord& r);
ResponseRecord response_from_json(const nlohmann::json& j);

// SHA-256 over the logical query cell: model, stimulus, phase, prompt index,
// image digest, full prompt text, and repetition index.
std::string request_digest(const std::string& model_id, const QueryCell& cell, const ChatRequest& request);

class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

  ResponseRecord cached_query(const std::string& model_id, ChatClient& client, const QueryCell& cell,
                              const ChatRequest& request);
  std::filesystem::path entry_path(const std::string& model_id, const std::string& digest) const;
  std::optional<ResponseRecord> lookup(const std::string& model_id, const std::string& digest) const;

  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }

 private:
  std::filesystem::path dir_;
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> misses_{0};
};

// Deterministic scripted stand-in for a model endpoint; see README for the
// fixture format.
class MockClient final : public ChatClient {
 public:
  MockClient(nlohmann::json fixture, std::string model_id);
  static std::shared_ptr<MockClient> from_file(const std::filesystem::path& path, std::string model_id);

  std::string query(const ChatRequest& request, const QueryCell& cell) override;
  std::string timestamp(const QueryCell& cell) override;

  std::size_t calls() const { return calls_; }

  struct LoggedRequest {
    std::string stimulus_id;
    Phase phase;
    int prompt_id;
    int rep;
    std::string image_digest;
    std::string system_prompt;
    std::string prompt;
  };
  std::vector<LoggedRequest> request_log() const;

 private:
  nlohmann::json fixture_;
  std::string model_id_;
  std::atomic<std::size_t> calls_{0};
  mutable std::mutex log_mu_;
  std::vector<LoggedRequest> log_;
};

// Serves cells from a previously written response log.
class ReplayClient final : public ChatClient {
 public:
  ReplayClient(const std::vector<ResponseRecord>& log, std::string model_id);
  std::string query(const ChatRequest& request, const QueryCell& cell) override;
  std::string timestamp(const QueryCell& cell) override;

 private:
  using Key = std::tuple<std::string, Phase, int, int>;
  const ResponseRecord& find(const QueryCell& cell) const;
  std::string model_id_;
  std::map<Key, ResponseRecord> cells_;
};

}  // namespace vts
