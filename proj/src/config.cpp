#include "vtstyle/config.hpp"

#include <set>

#include "vtstyle/error.hpp"

namespace vts {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void reject_unknown(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

template <typename T>
T require(const json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(where + ": missing required key '" + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

template <typename Fn>
auto wrap(const std::string& where, Fn fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return path.lexically_normal();
}

StyleSettings parse_style_settings(const json& j, StyleFamily style, const fs::path& base) {
  const std::string where = "styles." + std::string(to_string(style));
  reject_unknown(j, {"fonts", "palette", "sizes", "combos"}, where);
  StyleSettings s;
  const FontFamily want = style == StyleFamily::functional ? FontFamily::sans_serif : FontFamily::script;
  for (const auto& f : require<json>(j, "fonts", where)) {
    reject_unknown(f, {"name", "file", "family"}, where + ".fonts[]");
    FontSpec font;
    font.name = require<std::string>(f, "name", where + ".fonts[]");
    font.file = resolve(base, require<std::string>(f, "file", where + ".fonts[]"));
    font.family = wrap(where, [&] {
      return parse_font_family(get_or<std::string>(f, "family", std::string(to_string(want)), where));
    });
    s.fonts.push_back(std::move(font));
  }
  if (auto it = j.find("palette"); it != j.end()) {
    for (const auto& c : *it) s.palette.push_back(wrap(where, [&] { return Rgb::from_hex(c.get<std::string>()); }));
  } else {
    s.palette = style == StyleFamily::functional ? std::vector<Rgb>{kBlack} : default_decorative_palette();
  }
  s.sizes = get_or<std::vector<int>>(j, "sizes", default_sizes(), where);
  if (auto it = j.find("combos"); it != j.end()) {
    for (const auto& c : *it) {
      reject_unknown(c, {"placement", "size"}, where + ".combos[]");
      SizeCombo combo;
      combo.placement = wrap(where, [&] { return parse_placement(require<std::string>(c, "placement", where)); });
      combo.size = require<int>(c, "size", where + ".combos[]");
      s.combos.push_back(combo);
    }
  } else {
    s.combos = default_combos();
  }
  return s;
}

ModelEndpoint parse_endpoint(const json& j, const std::string& where) {
  reject_unknown(j, {"id", "base_url", "model_name", "api_key_env", "max_parallel", "retry"}, where);
  ModelEndpoint e;
  e.id = require<std::string>(j, "id", where);
  e.base_url = get_or<std::string>(j, "base_url", "", where);
  e.model_name = get_or<std::string>(j, "model_name", e.id, where);
  e.api_key_env = get_or<std::string>(j, "api_key_env", "", where);
  e.max_parallel = get_or<int>(j, "max_parallel", 1, where);
  if (auto it = j.find("retry"); it != j.end()) {
    reject_unknown(*it, {"max_attempts", "base_backoff_ms"}, where + ".retry");
    e.retry.max_attempts = get_or<int>(*it, "max_attempts", e.retry.max_attempts, where);
    e.retry.base_backoff_ms = get_or<int>(*it, "base_backoff_ms", e.retry.base_backoff_ms, where);
  }
  validate(e);
  return e;
}

nlohmann::ordered_json endpoint_json(const ModelEndpoint& e) {
  nlohmann::ordered_json j;
  j["id"] = e.id;
  j["base_url"] = e.base_url;
  j["model_name"] = e.model_name;
  j["api_key_env"] = e.api_key_env;
  j["max_parallel"] = e.max_parallel;
  j["retry"] = {{"max_attempts", e.retry.max_attempts}, {"base_backoff_ms", e.retry.base_backoff_ms}};
  return j;
}

nlohmann::ordered_json style_json(const StyleSettings& s) {
  nlohmann::ordered_json j;
  auto fonts = nlohmann::ordered_json::array();
  for (const auto& f : s.fonts) {
    nlohmann::ordered_json fj;
    fj["name"] = f.name;
    fj["file"] = f.file.string();
    fj["family"] = to_string(f.family);
    fonts.push_back(fj);
  }
  j["fonts"] = fonts;
  auto palette = nlohmann::ordered_json::array();
  for (const auto& c : s.palette) palette.push_back(c.hex());
  j["palette"] = palette;
  j["sizes"] = s.sizes;
  auto combos = nlohmann::ordered_json::array();
  for (const auto& c : s.combos) {
    nlohmann::ordered_json cj;
    cj["placement"] = to_string(c.placement);
    cj["size"] = c.size;
    combos.push_back(cj);
  }
  j["combos"] = combos;
  return j;
}

}  // namespace

std::vector<Concept> parse_concepts(const json& j) {
  if (!j.is_array()) throw ConfigError("concepts: expected an array");
  std::vector<Concept> out;
  for (const auto& c : j) {
    reject_unknown(c, {"id", "label", "category"}, "concepts[]");
    Concept subject;
    subject.label = require<std::string>(c, "label", "concepts[]");
    subject.id = get_or<std::string>(c, "id", slugify(subject.label), "concepts[]");
    subject.category = wrap("concepts[]", [&] { return parse_category(require<std::string>(c, "category", "concepts[]")); });
    out.push_back(std::move(subject));
  }
  return out;
}

RunConfig parse_config(const json& j, const fs::path& base_dir) {
  reject_unknown(j, {"concepts", "seed", "canvas", "styles", "models", "sampling", "prompts", "extraction", "analysis",
                     "output"},
                 "config");
  RunConfig c;

  const json& concepts = j.contains("concepts") ? j.at("concepts") : throw ConfigError("config: missing 'concepts'");
  if (concepts.is_string()) {
    const fs::path file = resolve(base_dir, concepts.get<std::string>());
    json loaded;
    try {
      loaded = json::parse(read_text(file));
    } catch (const json::parse_error& e) {
      throw ConfigError("concepts file " + file.string() + ": " + e.what());
    } catch (const IoError& e) {
      throw ConfigError(std::string("concepts file: ") + e.what());
    }
    c.concepts = parse_concepts(loaded);
  } else {
    c.concepts = parse_concepts(concepts);
  }

  c.seed = get_or<std::uint64_t>(j, "seed", 0, "config");

  if (auto it = j.find("canvas"); it != j.end()) {
    reject_unknown(*it, {"width", "height"}, "canvas");
    c.canvas.width = get_or<int>(*it, "width", c.canvas.width, "canvas");
    c.canvas.height = get_or<int>(*it, "height", c.canvas.height, "canvas");
  }

  const json styles = require<json>(j, "styles", "config");
  reject_unknown(styles, {"functional", "decorative"}, "styles");
  c.styles.functional =
      parse_style_settings(require<json>(styles, "functional", "styles"), StyleFamily::functional, base_dir);
  c.styles.decorative =
      parse_style_settings(require<json>(styles, "decorative", "styles"), StyleFamily::decorative, base_dir);

  for (const auto& m : require<json>(j, "models", "config")) c.models.push_back(parse_endpoint(m, "models[]"));

  if (auto it = j.find("sampling"); it != j.end()) {
    reject_unknown(*it, {"n", "gate_models"}, "sampling");
    c.sampling.n = get_or<int>(*it, "n", c.sampling.n, "sampling");
    c.sampling.gate_models = get_or<std::vector<std::string>>(*it, "gate_models", {}, "sampling");
  }

  if (auto it = j.find("prompts"); it != j.end()) {
    reject_unknown(*it, {"identify_template", "attribute_templates", "reps"}, "prompts");
    c.prompts.identify_template = get_or<std::string>(*it, "identify_template", c.prompts.identify_template, "prompts");
    c.prompts.attribute_templates =
        get_or<std::vector<std::string>>(*it, "attribute_templates", c.prompts.attribute_templates, "prompts");
    c.prompts.reps = get_or<int>(*it, "reps", c.prompts.reps, "prompts");
  }

  if (auto it = j.find("extraction"); it != j.end()) {
    reject_unknown(*it, {"mode", "policy", "extractor"}, "extraction");
    const std::string mode = get_or<std::string>(*it, "mode", "rule_based", "extraction");
    if (mode == "rule_based") {
      c.extraction.mode = ExtractionMode::rule_based;
    } else if (mode == "llm") {
      c.extraction.mode = ExtractionMode::llm;
    } else {
      throw ConfigError("extraction.mode: expected rule_based or llm, got '" + mode + "'");
    }
    if (auto p = it->find("policy"); p != it->end()) {
      reject_unknown(*p, {"case_fold", "strip_punctuation", "max_words_per_term", "dedup_within_list"},
                     "extraction.policy");
      auto& pol = c.extraction.policy;
      pol.case_fold = get_or<bool>(*p, "case_fold", pol.case_fold, "extraction.policy");
      pol.strip_punctuation = get_or<bool>(*p, "strip_punctuation", pol.strip_punctuation, "extraction.policy");
      pol.max_words_per_term = get_or<int>(*p, "max_words_per_term", pol.max_words_per_term, "extraction.policy");
      pol.dedup_within_list = get_or<bool>(*p, "dedup_within_list", pol.dedup_within_list, "extraction.policy");
    }
    if (auto e = it->find("extractor"); e != it->end() && !e->is_null()) {
      c.extraction.extractor = parse_endpoint(*e, "extraction.extractor");
    }
  }

  if (auto it = j.find("analysis"); it != j.end()) {
    reject_unknown(*it, {"tau", "top_n", "counting"}, "analysis");
    c.analysis.tau = get_or<long long>(*it, "tau", c.analysis.tau, "analysis");
    c.analysis.top_n = get_or<int>(*it, "top_n", c.analysis.top_n, "analysis");
    c.analysis.counting = wrap("analysis", [&] {
      return parse_counting_mode(get_or<std::string>(*it, "counting", "occurrence", "analysis"));
    });
  }

  if (auto it = j.find("output"); it != j.end()) {
    reject_unknown(*it, {"reports"}, "output");
    c.output.reports = get_or<std::vector<std::string>>(*it, "reports", c.output.reports, "output");
  }

  validate(c);
  return c;
}

RunConfig load_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  } catch (const IoError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return parse_config(j, path.parent_path());
}

std::vector<std::string> RunConfig::gate_models() const {
  if (!sampling.gate_models.empty()) return sampling.gate_models;
  std::vector<std::string> ids;
  for (const auto& m : models) ids.push_back(m.id);
  return ids;
}

void validate(const RunConfig& c) {
  std::set<std::string> ids;
  for (const auto& subject : c.concepts) {
    if (subject.label.empty()) throw ConfigError("concept '" + subject.id + "' has an empty label");
    if (!ids.insert(subject.id).second) throw ConfigError("duplicate concept id '" + subject.id + "'");
  }
  if (c.canvas.width <= 0 || c.canvas.height <= 0) throw ConfigError("canvas must have positive size");
  if (c.models.empty()) throw ConfigError("no models configured");
  std::set<std::string> model_ids;
  for (const auto& m : c.models) {
    if (!model_ids.insert(m.id).second) throw ConfigError("duplicate model id '" + m.id + "'");
  }
  for (const auto& g : c.sampling.gate_models) {
    if (!model_ids.contains(g)) throw ConfigError("sampling.gate_models names unknown model '" + g + "'");
  }
  if (c.sampling.n <= 0) throw ConfigError("sampling.n must be positive");
  validate(c.prompts);
  validate(c.extraction.policy);
  if (c.extraction.mode == ExtractionMode::llm && !c.extraction.extractor) {
    throw ConfigError("extraction.mode is llm but no extraction.extractor endpoint is configured");
  }
  if (c.analysis.tau < 0) throw ConfigError("analysis.tau must be >= 0");
  if (c.analysis.top_n < 1) throw ConfigError("analysis.top_n must be >= 1");
  static const std::set<std::string> kReports = {"concept_table", "tv_chart", "within_across_chart", "top_n",
                                                 "run_manifest"};
  for (const auto& r : c.output.reports) {
    if (!kReports.contains(r)) throw ConfigError("output.reports: unknown report '" + r + "'");
  }
}

nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  auto concepts = nlohmann::ordered_json::array();
  for (const auto& subject : c.concepts) {
    nlohmann::ordered_json cj;
    cj["id"] = subject.id;
    cj["label"] = subject.label;
    cj["category"] = to_string(subject.category);
    concepts.push_back(cj);
  }
  j["concepts"] = concepts;
  j["seed"] = c.seed;
  j["canvas"] = {{"width", c.canvas.width}, {"height", c.canvas.height}};
  nlohmann::ordered_json styles;
  styles["functional"] = style_json(c.styles.functional);
  styles["decorative"] = style_json(c.styles.decorative);
  j["styles"] = styles;
  auto models = nlohmann::ordered_json::array();
  for (const auto& m : c.models) models.push_back(endpoint_json(m));
  j["models"] = models;
  j["sampling"] = {{"n", c.sampling.n}, {"gate_models", c.sampling.gate_models}};
  nlohmann::ordered_json prompts;
  prompts["identify_template"] = c.prompts.identify_template;
  prompts["attribute_templates"] = c.prompts.attribute_templates;
  prompts["reps"] = c.prompts.reps;
  j["prompts"] = prompts;
  nlohmann::ordered_json extraction;
  extraction["mode"] = c.extraction.mode == ExtractionMode::rule_based ? "rule_based" : "llm";
  const auto& pol = c.extraction.policy;
  extraction["policy"] = {{"case_fold", pol.case_fold},
                          {"strip_punctuation", pol.strip_punctuation},
                          {"max_words_per_term", pol.max_words_per_term},
                          {"dedup_within_list", pol.dedup_within_list}};
  extraction["extractor"] = c.extraction.extractor ? endpoint_json(*c.extraction.extractor) : nlohmann::ordered_json();
  j["extraction"] = extraction;
  nlohmann::ordered_json analysis;
  analysis["tau"] = c.analysis.tau;
  analysis["top_n"] = c.analysis.top_n;
  analysis["counting"] = to_string(c.analysis.counting);
  j["analysis"] = analysis;
  j["output"] = {{"reports", c.output.reports}};
  return j;
}

std::string config_digest(const RunConfig& c) { return sha256_hex(to_json(c).dump()); }

}  // namespace vts
