#include "vtstyle/pipeline.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "vtstyle/error.hpp"

namespace vts {

namespace fs = std::filesystem;
using nlohmann::json;

RunConfig apply_overrides(RunConfig config, const Overrides& o) {
  if (o.seed) config.seed = *o.seed;
  if (o.tau) config.analysis.tau = *o.tau;
  if (o.top_n) config.analysis.top_n = *o.top_n;
  if (o.models) {
    std::vector<ModelEndpoint> kept;
    for (const auto& id : *o.models) {
      auto it = std::find_if(config.models.begin(), config.models.end(),
                             [&](const ModelEndpoint& m) { return m.id == id; });
      if (it == config.models.end()) throw ConfigError("--models names unknown model '" + id + "'");
      kept.push_back(*it);
    }
    config.models = std::move(kept);
    std::vector<std::string> gates;
    for (const auto& g : config.sampling.gate_models) {
      if (std::find(o.models->begin(), o.models->end(), g) != o.models->end()) gates.push_back(g);
    }
    config.sampling.gate_models = std::move(gates);
  }
  if (o.concurrency) {
    if (*o.concurrency == 0) throw ConfigError("--concurrency must be >= 1");
    for (auto& m : config.models) m.max_parallel = static_cast<int>(*o.concurrency);
    if (config.extraction.extractor) config.extraction.extractor->max_parallel = static_cast<int>(*o.concurrency);
  }
  validate(config);
  return config;
}

ClientFactory live_client_factory() {
  auto transport = std::make_shared<HttplibTransport>();
  return [transport](const ModelEndpoint& e) -> std::shared_ptr<ChatClient> {
    if (e.base_url.empty()) throw ConfigError("model '" + e.id + "' has no base_url (use --mock for offline runs)");
    return std::make_shared<HttpChatClient>(e, transport);
  };
}

ClientFactory mock_client_factory(const fs::path& fixture) {
  if (!fs::is_regular_file(fixture)) throw ConfigError("mock fixture not found: " + fixture.string());
  return [fixture](const ModelEndpoint& e) -> std::shared_ptr<ChatClient> {
    return MockClient::from_file(fixture, e.id);
  };
}

nlohmann::ordered_json to_json(const StyleComparison& c) {
  nlohmann::ordered_json j;
  j["concept_id"] = c.concept_id;
  j["label"] = c.label;
  j["category"] = to_string(c.category);
  j["model_id"] = c.model_id;
  j["tv"] = c.tv;
  j["chi2"] = c.chi2;
  j["df"] = c.df;
  j["p_value"] = c.p_value;
  j["k_effective"] = c.k_effective;
  j["n_functional"] = c.n_functional;
  j["n_decorative"] = c.n_decorative;
  j["low_expected"] = c.low_expected;
  nlohmann::ordered_json t;
  t["top_functional"] = c.top_n.top_functional;
  t["top_decorative"] = c.top_n.top_decorative;
  t["only_functional"] = c.top_n.only_functional;
  t["only_decorative"] = c.top_n.only_decorative;
  t["short_vocabulary"] = c.top_n.short_vocabulary;
  j["top_n"] = t;
  return j;
}

StyleComparison comparison_from_json(const json& j) {
  StyleComparison c;
  c.concept_id = j.at("concept_id").get<std::string>();
  c.label = j.at("label").get<std::string>();
  c.category = parse_category(j.at("category").get<std::string>());
  c.model_id = j.at("model_id").get<std::string>();
  c.tv = j.at("tv").get<double>();
  c.chi2 = j.at("chi2").get<double>();
  c.df = j.at("df").get<int>();
  c.p_value = j.at("p_value").get<double>();
  c.k_effective = j.at("k_effective").get<int>();
  c.n_functional = j.at("n_functional").get<long long>();
  c.n_decorative = j.at("n_decorative").get<long long>();
  c.low_expected = j.at("low_expected").get<bool>();
  const auto& t = j.at("top_n");
  c.top_n.top_functional = t.at("top_functional").get<std::vector<std::string>>();
  c.top_n.top_decorative = t.at("top_decorative").get<std::vector<std::string>>();
  c.top_n.only_functional = t.at("only_functional").get<std::vector<std::string>>();
  c.top_n.only_decorative = t.at("only_decorative").get<std::vector<std::string>>();
  c.top_n.short_vocabulary = t.at("short_vocabulary").get<bool>();
  return c;
}

nlohmann::ordered_json to_json(const WithinAcross& w) {
  nlohmann::ordered_json j;
  j["within_functional"] = w.within_functional;
  j["within_decorative"] = w.within_decorative;
  j["across"] = w.across;
  j["pairs_functional"] = w.pairs_functional;
  j["pairs_decorative"] = w.pairs_decorative;
  j["pairs_across"] = w.pairs_across;
  return j;
}

WithinAcross within_across_from_json(const json& j) {
  WithinAcross w;
  w.within_functional = j.at("within_functional").get<double>();
  w.within_decorative = j.at("within_decorative").get<double>();
  w.across = j.at("across").get<double>();
  w.pairs_functional = j.at("pairs_functional").get<std::size_t>();
  w.pairs_decorative = j.at("pairs_decorative").get<std::size_t>();
  w.pairs_across = j.at("pairs_across").get<std::size_t>();
  return w;
}

AnalysisResult analyze(const RunConfig& config, const std::vector<StimulusRecord>& manifest,
                       const std::vector<SampledSet>& sets, const std::vector<AttributeList>& lists) {
  std::map<std::string, const StimulusRecord*> stimuli;
  for (const auto& s : manifest) stimuli[s.stimulus_id] = &s;

  // (model, stimulus, prompt, rep) -> list
  std::map<std::tuple<std::string, std::string, int, int>, const AttributeList*> by_cell;
  for (const auto& l : lists) by_cell[{l.model_id, l.stimulus_id, l.prompt_id, l.rep}] = &l;

  const int prompts = static_cast<int>(config.prompts.attribute_templates.size());
  const std::size_t expected = expected_cells_per_stratum(static_cast<std::size_t>(config.sampling.n), config.prompts);

  std::vector<std::string> concept_order;
  std::map<std::string, std::map<StyleFamily, const SampledSet*>> sets_by_concept;
  for (const auto& s : sets) {
    if (!sets_by_concept.contains(s.concept_id)) concept_order.push_back(s.concept_id);
    sets_by_concept[s.concept_id][s.style] = &s;
  }

  AnalysisResult out;
  for (const auto& model : config.models) {
    std::vector<WithinAcross> triples;
    for (const auto& concept_id : concept_order) {
      const auto& styles = sets_by_concept.at(concept_id);
      std::map<StyleFamily, std::vector<AttributeList>> per_style;
      std::map<FontKey, std::vector<AttributeList>> per_font;
      const Concept* subject = nullptr;
      for (StyleFamily style : kStyles) {
        auto it = styles.find(style);
        if (it == styles.end()) {
          throw IncompleteDataError("stratum (" + concept_id + ", " + std::string(to_string(style)) + ", " + model.id +
                                    ") has no sampled set");
        }
        std::size_t found = 0;
        std::string first_missing;
        for (const auto& sid : it->second->stimulus_ids) {
          auto st = stimuli.find(sid);
          if (st == stimuli.end()) throw ValidationError("sampled stimulus '" + sid + "' is not in the manifest");
          subject = &st->second->subject;
          for (int p = 0; p < prompts; ++p) {
            for (int rep = 0; rep < config.prompts.reps; ++rep) {
              auto cell = by_cell.find({model.id, sid, p, rep});
              if (cell == by_cell.end()) {
                if (first_missing.empty()) {
                  first_missing = sid + " prompt " + std::to_string(p) + " rep " + std::to_string(rep);
                }
                continue;
              }
              ++found;
              per_style[style].push_back(*cell->second);
              per_font[{style, st->second->render.font.name}].push_back(*cell->second);
            }
          }
        }
        if (found != expected || !first_missing.empty()) {
          throw IncompleteDataError("stratum (" + concept_id + ", " + std::string(to_string(style)) + ", " + model.id +
                                    ") is incomplete: " + std::to_string(found) + " of " + std::to_string(expected) +
                                    " cells" + (first_missing.empty() ? "" : ", first missing " + first_missing));
        }
      }

      const TermDistribution functional = build_distribution(
          per_style[StyleFamily::functional], config.analysis.counting, {concept_id, StyleFamily::functional, model.id, std::nullopt});
      const TermDistribution decorative = build_distribution(
          per_style[StyleFamily::decorative], config.analysis.counting, {concept_id, StyleFamily::decorative, model.id, std::nullopt});
      out.comparisons.push_back(
          compare_styles(*subject, model.id, functional, decorative, config.analysis.tau, config.analysis.top_n));

      try {
        std::map<FontKey, TermDistribution> fonts;
        for (const auto& [key, font_lists] : per_font) {
          fonts.emplace(key, build_distribution(font_lists, config.analysis.counting,
                                                {concept_id, key.first, model.id, key.second}));
        }
        const WithinAcross w = within_across_tv(fonts);
        out.per_concept[model.id][concept_id] = w;
        triples.push_back(w);
      } catch (const InsufficientDataError&) {
        // Concepts without two usable fonts per style drop out of the font comparison only.
      }
    }
    if (!triples.empty()) {
      WithinAcross mean;
      for (const auto& t : triples) {
        mean.within_functional += t.within_functional;
        mean.within_decorative += t.within_decorative;
        mean.across += t.across;
        mean.pairs_functional += t.pairs_functional;
        mean.pairs_decorative += t.pairs_decorative;
        mean.pairs_across += t.pairs_across;
      }
      const double k = static_cast<double>(triples.size());
      mean.within_functional /= k;
      mean.within_decorative /= k;
      mean.across /= k;
      out.per_model[model.id] = mean;
    }
  }
  return out;
}

Pipeline::Pipeline(RunConfig config, fs::path state_dir, ClientFactory factory)
    : config_(std::move(config)), layout_{std::move(state_dir)}, factory_(std::move(factory)) {
  validate(config_);
  cache_ = std::make_unique<ResponseCache>(layout_.cache_dir());
}

std::size_t Pipeline::queries_issued() const { return cache_->misses(); }

ChatClient& Pipeline::client_for(const ModelEndpoint& e) {
  auto it = clients_.find(e.id);
  if (it == clients_.end()) it = clients_.emplace(e.id, factory_(e)).first;
  return *it->second;
}

std::vector<ModelHandle> Pipeline::handles() {
  std::vector<ModelHandle> out;
  for (const auto& m : config_.models) {
    out.push_back({m.id, &client_for(m), static_cast<unsigned>(m.max_parallel)});
  }
  return out;
}

void Pipeline::require_artifact(const fs::path& p, std::string_view phase) const {
  if (!fs::exists(p)) {
    throw ConfigError("missing prior phase output " + p.string() + " (run '" + std::string(phase) + "' first)");
  }
}

namespace {

template <typename T>
std::vector<nlohmann::ordered_json> as_lines(const std::vector<T>& items) {
  std::vector<nlohmann::ordered_json> lines;
  lines.reserve(items.size());
  for (const auto& i : items) lines.push_back(to_json(i));
  return lines;
}

template <typename Fn>
auto read_records(const fs::path& path, Fn parse) {
  std::vector<decltype(parse(json()))> out;
  for (const auto& j : read_jsonl(path)) {
    try {
      out.push_back(parse(j));
    } catch (const json::exception& e) {
      throw ValidationError(path.string() + ": malformed record: " + e.what());
    }
  }
  return out;
}

unsigned render_threads(const RunConfig& c) {
  int n = 1;
  for (const auto& m : c.models) n = std::max(n, m.max_parallel);
  return static_cast<unsigned>(n);
}

}  // namespace

void Pipeline::render() {
  std::vector<StimulusRecord> plan = enumerate_plan(config_.concepts, config_.styles, config_.seed);
  render_all(plan, config_.canvas, layout_.stimuli_dir(), render_threads(config_));
  write_manifest(plan, layout_.manifest());
  write_atomic(layout_.root / "config.json", to_json(config_).dump(2) + "\n");
}

void Pipeline::identify() {
  require_artifact(layout_.manifest(), "render");
  const auto manifest = read_manifest(layout_.manifest());
  const auto models = handles();
  const IdentificationRun run =
      run_identification(manifest, layout_.stimuli_dir(), models, config_.prompts, *cache_);
  write_jsonl(layout_.identify_log(), as_lines(run.log));
  write_jsonl(layout_.identify_results(), as_lines(run.results));
  write_jsonl(layout_.identify_failed(), as_lines(run.failed));

  nlohmann::ordered_json acc = nlohmann::ordered_json::object();
  for (const auto& m : config_.models) {
    nlohmann::ordered_json per_style;
    for (StyleFamily style : kStyles) {
      nlohmann::ordered_json e;
      try {
        const Accuracy a = identification_accuracy(run.results, m.id, style);
        e["accuracy"] = format_accuracy(a.value);
        e["correct"] = a.correct;
        e["total"] = a.total;
        e["failed"] = a.failed;
      } catch (const InsufficientDataError&) {
        e["accuracy"] = nullptr;
      }
      per_style[std::string(to_string(style))] = e;
    }
    acc[m.id] = per_style;
  }
  write_atomic(layout_.accuracy(), acc.dump(2) + "\n");
}

void Pipeline::filter() {
  require_artifact(layout_.manifest(), "render");
  require_artifact(layout_.identify_results(), "identify");
  const auto manifest = read_manifest(layout_.manifest());
  const auto results = read_records(layout_.identify_results(), identification_from_json);
  const auto gates = config_.gate_models();
  for (const auto& g : gates) {
    const bool present = std::any_of(results.begin(), results.end(), [&](const auto& r) { return r.model_id == g; });
    if (!present && !manifest.empty()) {
      throw ConfigError("identification results have no entries for gate model '" + g + "' (re-run 'identify')");
    }
  }
  const FilterOutcome outcome = filter_and_sample(results, manifest, gates, config_.sampling.n, config_.seed);
  write_jsonl(layout_.sampled(), as_lines(outcome.sets));

  nlohmann::ordered_json report;
  report["n"] = config_.sampling.n;
  report["gate_models"] = gates;
  auto labels = [](const std::vector<Concept>& cs) {
    std::vector<std::string> out;
    for (const auto& c : cs) out.push_back(c.label);
    return out;
  };
  report["original"] = outcome.retained.size() + outcome.eliminated.size();
  report["retained"] = labels(outcome.retained);
  report["eliminated"] = labels(outcome.eliminated);
  nlohmann::ordered_json survivors = nlohmann::ordered_json::object();
  for (const auto& [key, count] : outcome.survivors) {
    survivors[key.first][std::string(to_string(key.second))] = count;
  }
  report["survivors"] = survivors;
  write_atomic(layout_.filter_report(), report.dump(2) + "\n");
}

void Pipeline::collect() {
  require_artifact(layout_.manifest(), "render");
  require_artifact(layout_.sampled(), "filter");
  const auto manifest = read_manifest(layout_.manifest());
  const auto sets = read_records(layout_.sampled(), sampled_set_from_json);
  for (const auto& s : sets) {
    if (s.stimulus_ids.size() != static_cast<std::size_t>(config_.sampling.n)) {
      throw ConfigError("sampled set (" + s.concept_id + ", " + std::string(to_string(s.style)) +
                        ") does not match sampling.n; re-run 'filter'");
    }
  }
  const auto models = handles();
  const CollectRun run = collect_attributes(sets, manifest, layout_.stimuli_dir(), models, config_.prompts, *cache_);
  write_jsonl(layout_.collect_log(), as_lines(run.log));
  write_jsonl(layout_.collect_failed(), as_lines(run.failed));
}

void Pipeline::extract() {
  require_artifact(layout_.manifest(), "render");
  require_artifact(layout_.collect_log(), "collect");
  const auto manifest = read_manifest(layout_.manifest());
  std::map<std::string, const StimulusRecord*> stimuli;
  for (const auto& s : manifest) stimuli[s.stimulus_id] = &s;
  const auto log = read_records(layout_.collect_log(), response_from_json);

  std::vector<std::optional<AttributeList>> lists(log.size());
  std::vector<std::optional<FailedCell>> failures(log.size());
  ChatClient* extractor = nullptr;
  unsigned threads = 1;
  if (config_.extraction.mode == ExtractionMode::llm) {
    extractor = &client_for(*config_.extraction.extractor);
    threads = static_cast<unsigned>(config_.extraction.extractor->max_parallel);
  }
  parallel_for(log.size(), threads, [&](std::size_t i) {
    const ResponseRecord& r = log[i];
    auto st = stimuli.find(r.stimulus_id);
    if (st == stimuli.end()) throw ValidationError("response for unknown stimulus '" + r.stimulus_id + "'");
    AttributeList a{r.stimulus_id, r.concept_id, r.style, r.model_id, r.prompt_id, r.rep, {}};
    if (extractor == nullptr) {
      a.terms = extract_rule_based(r.raw_text, config_.extraction.policy);
    } else {
      try {
        a.terms = extract_llm(r, *st->second, config_.extraction.extractor->id, *extractor, *cache_,
                              config_.extraction.policy);
      } catch (const TransportError& e) {
        failures[i] = FailedCell{config_.extraction.extractor->id, r.stimulus_id, Phase::extract, r.prompt_id, r.rep,
                                 e.what()};
        return;
      }
    }
    lists[i] = std::move(a);
  });
  std::vector<AttributeList> out;
  std::vector<FailedCell> failed;
  for (std::size_t i = 0; i < log.size(); ++i) {
    if (lists[i]) out.push_back(std::move(*lists[i]));
    if (failures[i]) failed.push_back(std::move(*failures[i]));
  }
  write_jsonl(layout_.attributes(), as_lines(out));
  write_jsonl(layout_.extract_failed(), as_lines(failed));
}

void Pipeline::analyze() {
  require_artifact(layout_.manifest(), "render");
  require_artifact(layout_.sampled(), "filter");
  require_artifact(layout_.attributes(), "extract");
  const auto manifest = read_manifest(layout_.manifest());
  const auto sets = read_records(layout_.sampled(), sampled_set_from_json);
  const auto lists = read_records(layout_.attributes(), attribute_list_from_json);
  const AnalysisResult result = vts::analyze(config_, manifest, sets, lists);

  nlohmann::ordered_json comparisons = nlohmann::ordered_json::array();
  for (const auto& c : result.comparisons) comparisons.push_back(to_json(c));
  write_atomic(layout_.comparisons(), comparisons.dump(2) + "\n");

  nlohmann::ordered_json wa;
  nlohmann::ordered_json per_model = nlohmann::ordered_json::object();
  for (const auto& [m, w] : result.per_model) per_model[m] = to_json(w);
  wa["per_model"] = per_model;
  nlohmann::ordered_json per_concept = nlohmann::ordered_json::object();
  for (const auto& [m, concepts] : result.per_concept) {
    nlohmann::ordered_json cj = nlohmann::ordered_json::object();
    for (const auto& [c, w] : concepts) cj[c] = to_json(w);
    per_concept[m] = cj;
  }
  wa["per_concept"] = per_concept;
  write_atomic(layout_.within_across(), wa.dump(2) + "\n");
}

void Pipeline::report() {
  require_artifact(layout_.comparisons(), "analyze");
  require_artifact(layout_.within_across(), "analyze");
  std::vector<StyleComparison> comparisons;
  for (const auto& j : json::parse(read_text(layout_.comparisons()))) comparisons.push_back(comparison_from_json(j));
  std::map<std::string, WithinAcross> per_model;
  const json within_across = json::parse(read_text(layout_.within_across()));
  for (const auto& [m, w] : within_across.at("per_model").items()) {
    per_model[m] = within_across_from_json(w);
  }

  const fs::path dir = layout_.report_dir();
  const auto& wanted = config_.output.reports;
  auto want = [&](std::string_view r) { return std::find(wanted.begin(), wanted.end(), r) != wanted.end(); };
  if (want("concept_table")) emit_concept_table(comparisons, dir / "concepts.csv");
  if (want("tv_chart")) {
    for (const auto& m : config_.models) emit_tv_chart(comparisons, m.id, dir / ("tv_" + slugify(m.id) + ".svg"));
  }
  if (want("within_across_chart")) emit_within_across_chart(per_model, dir / "within_across.svg");
  if (want("top_n")) emit_top_n_report(comparisons, config_.analysis.top_n, dir / "top_n.json");
  if (want("run_manifest")) {
    RunManifest rm;
    rm.config_digest = config_digest(config_);
    rm.run_seed = config_.seed;
    for (const auto& m : config_.models) rm.model_ids.push_back(m.id);
    if (fs::exists(layout_.filter_report())) {
      const json fr = json::parse(read_text(layout_.filter_report()));
      rm.concepts_original = fr.at("original").get<std::size_t>();
      rm.retained = fr.at("retained").get<std::vector<std::string>>();
      rm.eliminated = fr.at("eliminated").get<std::vector<std::string>>();
    }
    std::vector<std::string> stamps;
    auto count_log = [&](const fs::path& p, const char* phase) {
      if (!fs::exists(p)) return;
      const auto lines = read_jsonl(p);
      rm.cells[phase] = lines.size();
      for (const auto& l : lines) stamps.push_back(l.at("timestamp").get<std::string>());
    };
    count_log(layout_.identify_log(), "identify");
    count_log(layout_.collect_log(), "attributes");
    if (fs::exists(layout_.attributes())) rm.cells["extracted_lists"] = read_jsonl(layout_.attributes()).size();
    if (!stamps.empty()) {
      rm.first_response = *std::min_element(stamps.begin(), stamps.end());
      rm.last_response = *std::max_element(stamps.begin(), stamps.end());
    }
    rm.tool_version = std::string(kToolVersion);
    emit_run_manifest(rm, dir / "run_manifest.json");
  }
}

std::string Pipeline::summary() const {
  std::ostringstream os;
  if (fs::exists(layout_.filter_report())) {
    const json fr = json::parse(read_text(layout_.filter_report()));
    os << "concepts: " << fr.at("original").get<std::size_t>() << " original, " << fr.at("retained").size()
       << " retained, " << fr.at("eliminated").size() << " eliminated";
    if (!fr.at("eliminated").empty()) {
      os << " (";
      bool first = true;
      for (const auto& l : fr.at("eliminated")) {
        os << (first ? "" : ", ") << l.get<std::string>();
        first = false;
      }
      os << ")";
    }
    os << "\n";
  }
  if (fs::exists(layout_.accuracy())) {
    os << "identification accuracy:\n";
    const auto accuracy = nlohmann::ordered_json::parse(read_text(layout_.accuracy()));
    for (const auto& [model, styles] : accuracy.items()) {
      os << "  " << model;
      for (const auto& [style, e] : styles.items()) {
        os << "  " << style << "=" << (e.at("accuracy").is_null() ? "n/a" : e.at("accuracy").get<std::string>());
      }
      os << "\n";
    }
  }
  if (fs::exists(layout_.comparisons())) {
    os << "per-concept style comparison (model, concept, tv, p):\n";
    for (const auto& j : json::parse(read_text(layout_.comparisons()))) {
      const StyleComparison c = comparison_from_json(j);
      os << "  " << c.model_id << "  " << c.label << "  tv=" << format_sig(c.tv, 6)
         << "  p=" << format_p_value(c.p_value) << "\n";
    }
  }
  return os.str();
}

std::string Pipeline::run_all() {
  render();
  identify();
  filter();
  collect();
  extract();
  analyze();
  report();
  return summary();
}

}  // namespace vts
