#include "vtstyle/modelio.hpp"

#include <thread>

#include <httplib.h>

#include "vtstyle/error.hpp"

namespace vts {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::identify: return "identify";
    case Phase::attributes: return "attributes";
    case Phase::extract: return "extract";
  }
  return "identify";
}

Phase parse_phase(std::string_view s) {
  if (s == "identify") return Phase::identify;
  if (s == "attributes") return Phase::attributes;
  if (s == "extract") return Phase::extract;
  throw ValidationError("unknown phase '" + std::string(s) + "'");
}

void validate(const ModelEndpoint& e) {
  if (e.id.empty()) throw ConfigError("model endpoint with empty id");
  if (e.max_parallel < 1) throw ConfigError("model '" + e.id + "': max_parallel must be >= 1");
  if (e.retry.max_attempts < 1) throw ConfigError("model '" + e.id + "': retry.max_attempts must be >= 1");
  if (e.retry.base_backoff_ms < 0) throw ConfigError("model '" + e.id + "': retry.base_backoff_ms must be >= 0");
}

std::string ChatClient::timestamp(const QueryCell&) {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

HttpResponse HttplibTransport::post(const std::string& url, const HttpHeaders& headers, const std::string& body) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint URL lacks a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  const std::string origin = path_start == std::string::npos ? url : url.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

  httplib::Client client(origin);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  auto res = client.Post(path, h, body, "application/json");
  if (!res) throw TransportError("POST " + url + " failed: " + httplib::to_string(res.error()));
  return HttpResponse{res->status, res->body};
}

nlohmann::ordered_json build_chat_body(const std::string& model_name, const ChatRequest& request) {
  nlohmann::ordered_json body;
  body["model"] = model_name;
  body["temperature"] = ChatRequest::temperature;
  auto messages = nlohmann::ordered_json::array();
  if (!request.system_prompt.empty()) {
    messages.push_back({{"role", "system"}, {"content", request.system_prompt}});
  }
  nlohmann::ordered_json user;
  user["role"] = "user";
  if (request.image.empty()) {
    user["content"] = request.prompt;
  } else {
    auto parts = nlohmann::ordered_json::array();
    nlohmann::ordered_json image_part;
    image_part["type"] = "image_url";
    image_part["image_url"] = {{"url", "data:image/png;base64," + base64_encode(request.image)}};
    parts.push_back(image_part);
    nlohmann::ordered_json text_part;
    text_part["type"] = "text";
    text_part["text"] = request.prompt;
    parts.push_back(text_part);
    user["content"] = parts;
  }
  messages.push_back(user);
  body["messages"] = messages;
  return body;
}

std::string parse_chat_reply(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error&) {
    throw TransportError("endpoint returned non-JSON body: " + body.substr(0, 200));
  }
  try {
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (content.is_string()) return content.get<std::string>();
    if (content.is_null()) return "";
    std::string out;
    for (const auto& part : content) {
      if (part.value("type", "") == "text") out += part.value("text", "");
    }
    return out;
  } catch (const json::exception&) {
    throw TransportError("unexpected chat response shape: " + body.substr(0, 200));
  }
}

HttpChatClient::HttpChatClient(ModelEndpoint endpoint, std::shared_ptr<HttpTransport> transport, Sleeper sleeper)
    : endpoint_(std::move(endpoint)), transport_(std::move(transport)), sleeper_(std::move(sleeper)) {
  validate(endpoint_);
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::string HttpChatClient::query(const ChatRequest& request, const QueryCell&) {
  HttpHeaders headers;
  if (!endpoint_.api_key_env.empty()) {
    const char* key = std::getenv(endpoint_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw ConfigError("model '" + endpoint_.id + "': credential variable " + endpoint_.api_key_env + " is not set");
    }
    headers.emplace_back("Authorization", std::string("Bearer ") + key);
  }
  std::string base = endpoint_.base_url;
  while (!base.empty() && base.back() == '/') base.pop_back();
  const std::string url = base + "/chat/completions";
  const std::string body = build_chat_body(endpoint_.model_name, request).dump();

  std::string last_error;
  for (int attempt = 1; attempt <= endpoint_.retry.max_attempts; ++attempt) {
    if (attempt > 1) {
      const auto delay = std::chrono::milliseconds(static_cast<long long>(endpoint_.retry.base_backoff_ms)
                                                   << (attempt - 2));
      sleeper_(delay);
    }
    ++attempts_;
    HttpResponse res;
    try {
      res = transport_->post(url, headers, body);
    } catch (const TransportError& e) {
      last_error = e.what();
      continue;
    }
    if (res.status >= 200 && res.status < 300) return parse_chat_reply(res.body);
    // 429 is rate limiting, which resolves with backoff like a 5xx.
    if (res.status >= 500 || res.status == 429) {
      last_error = "HTTP " + std::to_string(res.status) + ": " + res.body.substr(0, 200);
      continue;
    }
    throw HttpStatusError(res.status, "model '" + endpoint_.id + "': HTTP " + std::to_string(res.status) + ": " +
                                          res.body.substr(0, 200));
  }
  throw TransportError("model '" + endpoint_.id + "': giving up after " +
                       std::to_string(endpoint_.retry.max_attempts) + " attempts: " + last_error);
}

nlohmann::ordered_json to_json(const ResponseRecord& r) {
  nlohmann::ordered_json j;
  j["stimulus_id"] = r.stimulus_id;
  j["concept_id"] = r.concept_id;
  j["style"] = to_string(r.style);
  j["model_id"] = r.model_id;
  j["phase"] = to_string(r.phase);
  j["prompt_id"] = r.prompt_id;
  j["rep"] = r.rep;
  j["raw_text"] = r.raw_text;
  j["request_digest"] = r.request_digest;
  j["timestamp"] = r.timestamp;
  return j;
}

ResponseRecord response_from_json(const json& j) {
  ResponseRecord r;
  r.stimulus_id = j.at("stimulus_id").get<std::string>();
  r.concept_id = j.at("concept_id").get<std::string>();
  r.style = parse_style(j.at("style").get<std::string>());
  r.model_id = j.at("model_id").get<std::string>();
  r.phase = parse_phase(j.at("phase").get<std::string>());
  r.prompt_id = j.at("prompt_id").get<int>();
  r.rep = j.at("rep").get<int>();
  r.raw_text = j.at("raw_text").get<std::string>();
  r.request_digest = j.at("request_digest").get<std::string>();
  r.timestamp = j.at("timestamp").get<std::string>();
  return r;
}

std::string request_digest(const std::string& model_id, const QueryCell& cell, const ChatRequest& request) {
  // Length-prefixed fields so no two distinct tuples share a preimage.
  std::string buf;
  auto field = [&buf](std::string_view v) {
    buf += std::to_string(v.size());
    buf += ':';
    buf += v;
    buf += ';';
  };
  field(model_id);
  field(cell.stimulus.stimulus_id);
  field(to_string(cell.phase));
  field(std::to_string(cell.prompt_id));
  field(request.image_digest);
  field(request.system_prompt);
  field(request.prompt);
  field(std::to_string(cell.rep));
  return sha256_hex(buf);
}

fs::path ResponseCache::entry_path(const std::string& model_id, const std::string& digest) const {
  return dir_ / model_id / (digest + ".json");
}

std::optional<ResponseRecord> ResponseCache::lookup(const std::string& model_id, const std::string& digest) const {
  const fs::path path = entry_path(model_id, digest);
  if (!fs::exists(path)) return std::nullopt;
  try {
    ResponseRecord r = response_from_json(json::parse(read_text(path)));
    if (r.request_digest != digest || r.model_id != model_id) {
      throw CacheError("cache entry " + path.string() + ": digest mismatch on read-back");
    }
    return r;
  } catch (const json::exception& e) {
    throw CacheError("cache entry " + path.string() + " is corrupt: " + e.what());
  } catch (const ValidationError& e) {
    throw CacheError("cache entry " + path.string() + " is corrupt: " + e.what());
  }
}

ResponseRecord ResponseCache::cached_query(const std::string& model_id, ChatClient& client, const QueryCell& cell,
                                           const ChatRequest& request) {
  const std::string digest = request_digest(model_id, cell, request);
  if (auto hit = lookup(model_id, digest)) {
    ++hits_;
    return *hit;
  }
  ++misses_;
  ResponseRecord r;
  r.stimulus_id = cell.stimulus.stimulus_id;
  r.concept_id = cell.stimulus.subject.id;
  r.style = cell.stimulus.style;
  r.model_id = model_id;
  r.phase = cell.phase;
  r.prompt_id = cell.prompt_id;
  r.rep = cell.rep;
  r.raw_text = client.query(request, cell);
  r.request_digest = digest;
  r.timestamp = client.timestamp(cell);
  write_atomic(entry_path(model_id, digest), to_json(r).dump(2) + "\n");
  return r;
}

ReplayClient::ReplayClient(const std::vector<ResponseRecord>& log, std::string model_id)
    : model_id_(std::move(model_id)) {
  for (const auto& r : log) {
    if (r.model_id != model_id_) continue;
    cells_[{r.stimulus_id, r.phase, r.prompt_id, r.rep}] = r;
  }
}

const ResponseRecord& ReplayClient::find(const QueryCell& cell) const {
  auto it = cells_.find({cell.stimulus.stimulus_id, cell.phase, cell.prompt_id, cell.rep});
  if (it == cells_.end()) {
    throw ScriptError("replay log for model '" + model_id_ + "' has no cell (" + cell.stimulus.stimulus_id + ", " +
                      std::string(to_string(cell.phase)) + ", prompt " + std::to_string(cell.prompt_id) + ", rep " +
                      std::to_string(cell.rep) + ")");
  }
  return it->second;
}

std::string ReplayClient::query(const ChatRequest&, const QueryCell& cell) { return find(cell).raw_text; }

std::string ReplayClient::timestamp(const QueryCell& cell) { return find(cell).timestamp; }

}  // namespace vts
