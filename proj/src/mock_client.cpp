#include <sstream>

#include "vtstyle/error.hpp"
#include "vtstyle/modelio.hpp"

namespace vts {

using nlohmann::json;

namespace {

std::string describe(const std::string& model_id, const QueryCell& cell) {
  std::ostringstream os;
  os << "model=" << model_id << " concept=" << cell.stimulus.subject.id << " style=" << to_string(cell.stimulus.style)
     << " phase=" << to_string(cell.phase) << " stimulus=" << cell.stimulus.stimulus_id
     << " prompt=" << cell.prompt_id << " rep=" << cell.rep;
  return os.str();
}

std::string substitute(std::string text, const QueryCell& cell) {
  auto replace_all = [&text](std::string_view from, const std::string& to) {
    for (std::size_t pos = text.find(from); pos != std::string::npos; pos = text.find(from, pos + to.size())) {
      text.replace(pos, from.size(), to);
    }
  };
  replace_all("{label}", cell.stimulus.subject.label);
  replace_all("{animal}", std::string(to_string(cell.stimulus.subject.category)));
  return text;
}

bool value_matches(const json& want, const json& have) {
  if (want.is_array()) {
    for (const auto& w : want) {
      if (w == have) return true;
    }
    return false;
  }
  return want == have;
}

bool rule_matches(const json& when, const QueryCell& cell) {
  const json facts = {
      {"style", to_string(cell.stimulus.style)},
      {"font", cell.stimulus.render.font.name},
      {"placement", to_string(cell.stimulus.render.placement)},
      {"size", cell.stimulus.render.size},
      {"color", cell.stimulus.render.color.hex()},
      {"stimulus_id", cell.stimulus.stimulus_id},
      {"prompt_id", cell.prompt_id},
      {"rep", cell.rep},
  };
  for (const auto& [key, want] : when.items()) {
    if (!facts.contains(key)) throw ScriptError("mock rule uses unknown key '" + key + "'");
    if (!value_matches(want, facts.at(key))) return false;
  }
  return true;
}

// Returns nullopt when the behavior has no answer for this cell.
std::optional<std::string> resolve(const json& behavior, const QueryCell& cell, const ChatRequest& request) {
  if (behavior.is_string()) return substitute(behavior.get<std::string>(), cell);
  if (!behavior.is_object()) throw ScriptError("mock behavior must be a string or an object");
  if (auto it = behavior.find("rules"); it != behavior.end()) {
    for (const auto& rule : *it) {
      if (rule_matches(rule.at("when"), cell)) return resolve(rule.at("then"), cell, request);
    }
  }
  if (auto it = behavior.find("styles"); it != behavior.end()) {
    const std::string style(to_string(cell.stimulus.style));
    if (it->contains(style)) return resolve(it->at(style), cell, request);
  }
  if (auto it = behavior.find("reply"); it != behavior.end()) return substitute(it->get<std::string>(), cell);
  if (auto it = behavior.find("schedule"); it != behavior.end()) {
    if (!it->is_array() || it->empty()) throw ScriptError("mock schedule must be a non-empty array");
    const json& row = (*it)[static_cast<std::size_t>(cell.prompt_id) % it->size()];
    if (row.is_array()) {
      if (row.empty()) throw ScriptError("mock schedule row is empty");
      return resolve(row[static_cast<std::size_t>(cell.rep) % row.size()], cell, request);
    }
    return resolve(row, cell, request);
  }
  if (behavior.value("echo", false)) return request.prompt;
  if (auto it = behavior.find("default"); it != behavior.end()) return resolve(*it, cell, request);
  return std::nullopt;
}

const json* find_section(const json& fixture, const std::string& model_id) {
  if (auto models = fixture.find("models"); models != fixture.end()) {
    if (auto it = models->find(model_id); it != models->end()) return &*it;
    if (auto it = models->find("*"); it != models->end()) return &*it;
  }
  if (fixture.contains("concepts")) return &fixture;
  return nullptr;
}

}  // namespace

MockClient::MockClient(json fixture, std::string model_id) : fixture_(std::move(fixture)), model_id_(std::move(model_id)) {
  if (!fixture_.is_object()) throw ScriptError("mock fixture must be a JSON object");
}

std::shared_ptr<MockClient> MockClient::from_file(const std::filesystem::path& path, std::string model_id) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("mock fixture " + path.string() + ": " + e.what());
  }
  return std::make_shared<MockClient>(std::move(j), std::move(model_id));
}

std::string MockClient::query(const ChatRequest& request, const QueryCell& cell) {
  ++calls_;
  {
    std::lock_guard lock(log_mu_);
    log_.push_back({cell.stimulus.stimulus_id, cell.phase, cell.prompt_id, cell.rep, request.image_digest,
                    request.system_prompt, request.prompt});
  }
  const json* section = find_section(fixture_, model_id_);
  if (section == nullptr) throw ScriptError("mock fixture has no script for " + describe(model_id_, cell));
  const json* concept_script = nullptr;
  if (auto concepts = section->find("concepts"); concepts != section->end()) {
    if (auto it = concepts->find(cell.stimulus.subject.id); it != concepts->end()) {
      concept_script = &*it;
    } else if (auto star = concepts->find("*"); star != concepts->end()) {
      concept_script = &*star;
    }
  }
  if (concept_script == nullptr) throw ScriptError("mock fixture has no script for " + describe(model_id_, cell));
  const std::string phase(to_string(cell.phase));
  auto behavior = concept_script->find(phase);
  if (behavior == concept_script->end()) {
    throw ScriptError("mock fixture has no script for " + describe(model_id_, cell));
  }
  auto reply = resolve(*behavior, cell, request);
  if (!reply) throw ScriptError("mock fixture has no reply for " + describe(model_id_, cell));
  return *reply;
}

std::string MockClient::timestamp(const QueryCell&) { return "1970-01-01T00:00:00Z"; }

std::vector<MockClient::LoggedRequest> MockClient::request_log() const {
  std::lock_guard lock(log_mu_);
  return log_;
}

}  // namespace vts
