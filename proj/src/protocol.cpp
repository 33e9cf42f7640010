#include "vtstyle/protocol.hpp"

#include <algorithm>
#include <set>

#include "vtstyle/error.hpp"

namespace vts {

namespace fs = std::filesystem;

PromptSet PromptSet::defaults() {
  PromptSet p;
  p.identify_template = "Identify the breed of the {animal} pictured in the image. Answer with the breed name directly.";
  p.attribute_templates = {
      "Output a list of the typical attributes of this {animal} breed, expressed strictly as adjectives.",
      "Output a list of attributes that distinguish this {animal} breed from other {animal} breeds, expressed "
      "strictly as adjectives.",
      "Output a list of adjectives that describe this {animal} breed.",
      "Output a list of adjectives that capture how this {animal} breed is different from other {animal} breeds.",
      "Produce a list of the typical characteristics of this {animal} breed, expressed strictly as adjectives.",
  };
  p.reps = 5;
  return p;
}

void validate(const PromptSet& p) {
  if (trim(p.identify_template).empty()) throw ConfigError("identify prompt template is empty");
  if (p.attribute_templates.empty()) throw ConfigError("no attribute prompt templates");
  for (std::size_t i = 0; i < p.attribute_templates.size(); ++i) {
    if (trim(p.attribute_templates[i]).empty()) {
      throw ConfigError("attribute prompt template " + std::to_string(i) + " is empty");
    }
  }
  if (p.reps < 1) throw ConfigError("prompt reps must be >= 1");
}

std::string instantiate(const std::string& tmpl, Category category) {
  static constexpr std::string_view kSlot = "{animal}";
  const std::string noun(to_string(category));
  std::string out = tmpl;
  for (std::size_t pos = out.find(kSlot); pos != std::string::npos; pos = out.find(kSlot, pos + noun.size())) {
    out.replace(pos, kSlot.size(), noun);
  }
  return out;
}

nlohmann::ordered_json to_json(const FailedCell& f) {
  nlohmann::ordered_json j;
  j["model_id"] = f.model_id;
  j["stimulus_id"] = f.stimulus_id;
  j["phase"] = to_string(f.phase);
  j["prompt_id"] = f.prompt_id;
  j["rep"] = f.rep;
  j["error"] = f.error;
  return j;
}

FailedCell failed_cell_from_json(const nlohmann::json& j) {
  return FailedCell{j.at("model_id").get<std::string>(), j.at("stimulus_id").get<std::string>(),
                    parse_phase(j.at("phase").get<std::string>()), j.at("prompt_id").get<int>(),
                    j.at("rep").get<int>(), j.at("error").get<std::string>()};
}

bool is_correct(std::string_view reply, std::string_view label) {
  return to_lower(trim(reply)) == to_lower(label);
}

nlohmann::ordered_json to_json(const IdentificationResult& r) {
  nlohmann::ordered_json j;
  j["stimulus_id"] = r.stimulus_id;
  j["concept_id"] = r.concept_id;
  j["style"] = to_string(r.style);
  j["model_id"] = r.model_id;
  j["reply"] = r.reply;
  j["correct"] = r.correct;
  j["failed"] = r.failed;
  return j;
}

IdentificationResult identification_from_json(const nlohmann::json& j) {
  IdentificationResult r;
  r.stimulus_id = j.at("stimulus_id").get<std::string>();
  r.concept_id = j.at("concept_id").get<std::string>();
  r.style = parse_style(j.at("style").get<std::string>());
  r.model_id = j.at("model_id").get<std::string>();
  r.reply = j.at("reply").get<std::string>();
  r.correct = j.at("correct").get<bool>();
  r.failed = j.at("failed").get<bool>();
  return r;
}

ChatRequest make_request(const StimulusRecord& stimulus, const fs::path& image_root, const std::string& prompt) {
  ChatRequest req;
  req.image = read_bytes(image_root / stimulus.image_path);
  req.image_digest = sha256_hex(req.image);
  if (!stimulus.image_digest.empty() && req.image_digest != stimulus.image_digest) {
    throw ValidationError("image for stimulus '" + stimulus.stimulus_id + "' does not match its manifest digest");
  }
  req.prompt = prompt;
  return req;
}

IdentificationRun run_identification(std::span<const StimulusRecord> manifest, const fs::path& image_root,
                                     std::span<const ModelHandle> models, const PromptSet& prompts,
                                     ResponseCache& cache) {
  validate(prompts);
  IdentificationRun run;
  for (const auto& model : models) {
    std::vector<std::optional<ResponseRecord>> replies(manifest.size());
    std::vector<std::optional<FailedCell>> failures(manifest.size());
    parallel_for(manifest.size(), model.max_parallel, [&](std::size_t i) {
      const StimulusRecord& s = manifest[i];
      const QueryCell cell{s, Phase::identify, 0, 0};
      const ChatRequest req = make_request(s, image_root, instantiate(prompts.identify_template, s.subject.category));
      try {
        replies[i] = cache.cached_query(model.id, *model.client, cell, req);
      } catch (const TransportError& e) {
        failures[i] = FailedCell{model.id, s.stimulus_id, Phase::identify, 0, 0, e.what()};
      }
    });
    for (std::size_t i = 0; i < manifest.size(); ++i) {
      const StimulusRecord& s = manifest[i];
      IdentificationResult r;
      r.stimulus_id = s.stimulus_id;
      r.concept_id = s.subject.id;
      r.style = s.style;
      r.model_id = model.id;
      if (replies[i]) {
        r.reply = replies[i]->raw_text;
        r.correct = is_correct(r.reply, s.subject.label);
        run.log.push_back(*replies[i]);
      } else {
        r.failed = true;
        run.failed.push_back(*failures[i]);
      }
      run.results.push_back(std::move(r));
    }
  }
  return run;
}

Accuracy identification_accuracy(std::span<const IdentificationResult> results, const std::string& model_id,
                                 StyleFamily style) {
  Accuracy acc;
  for (const auto& r : results) {
    if (r.model_id != model_id || r.style != style) continue;
    if (r.failed) {
      ++acc.failed;
      continue;
    }
    ++acc.total;
    if (r.correct) ++acc.correct;
  }
  if (acc.total == 0) {
    throw InsufficientDataError("identification accuracy undefined for model '" + model_id + "', " +
                                std::string(to_string(style)) + ": no completed results");
  }
  acc.value = static_cast<double>(acc.correct) / static_cast<double>(acc.total);
  return acc;
}

std::string format_accuracy(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", value);
  return buf;
}

nlohmann::ordered_json to_json(const SampledSet& s) {
  nlohmann::ordered_json j;
  j["concept_id"] = s.concept_id;
  j["style"] = to_string(s.style);
  j["stimulus_ids"] = s.stimulus_ids;
  j["sample_seed"] = s.sample_seed;
  return j;
}

SampledSet sampled_set_from_json(const nlohmann::json& j) {
  SampledSet s;
  s.concept_id = j.at("concept_id").get<std::string>();
  s.style = parse_style(j.at("style").get<std::string>());
  s.stimulus_ids = j.at("stimulus_ids").get<std::vector<std::string>>();
  s.sample_seed = j.at("sample_seed").get<std::uint64_t>();
  return s;
}

FilterOutcome filter_and_sample(std::span<const IdentificationResult> results,
                                std::span<const StimulusRecord> manifest, std::span<const std::string> gate_models,
                                int n, std::uint64_t seed) {
  if (n <= 0) throw ValidationError("sample size must be positive, got " + std::to_string(n));
  if (gate_models.empty()) throw ValidationError("no models configured for identification filtering");

  std::set<std::pair<std::string, std::string>> correct;  // (model, stimulus)
  for (const auto& r : results) {
    if (r.correct && !r.failed) correct.insert({r.model_id, r.stimulus_id});
  }

  // Canonical order: concepts by id, functional before decorative, survivors in manifest order.
  std::map<std::string, Concept> concepts;
  std::map<std::pair<std::string, StyleFamily>, std::vector<std::string>> surviving;
  for (const auto& s : manifest) {
    concepts.emplace(s.subject.id, s.subject);
    auto& bucket = surviving[{s.subject.id, s.style}];
    const bool ok = std::all_of(gate_models.begin(), gate_models.end(),
                                [&](const std::string& m) { return correct.contains({m, s.stimulus_id}); });
    if (ok) bucket.push_back(s.stimulus_id);
  }

  FilterOutcome out;
  for (const auto& [id, subject] : concepts) {
    bool keep = true;
    for (StyleFamily style : kStyles) {
      const std::size_t count = surviving[{id, style}].size();
      out.survivors[{id, style}] = count;
      if (count < static_cast<std::size_t>(n)) keep = false;
    }
    if (!keep) {
      out.eliminated.push_back(subject);
      continue;
    }
    out.retained.push_back(subject);
    for (StyleFamily style : kStyles) {
      const std::vector<std::string>& pool = surviving[{id, style}];
      SampledSet set;
      set.concept_id = id;
      set.style = style;
      set.sample_seed = derive_seed(seed, {"sample", id, to_string(style)});
      std::vector<std::size_t> idx(pool.size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      std::mt19937_64 rng(set.sample_seed);
      // Partial Fisher-Yates: the first n slots are a uniform draw without replacement.
      for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
        const std::size_t j = i + uniform_below(rng, idx.size() - i);
        std::swap(idx[i], idx[j]);
      }
      idx.resize(static_cast<std::size_t>(n));
      std::sort(idx.begin(), idx.end());
      for (std::size_t i : idx) set.stimulus_ids.push_back(pool[i]);
      out.sets.push_back(std::move(set));
    }
  }
  return out;
}

std::size_t expected_cells_per_stratum(std::size_t n, const PromptSet& prompts) {
  return n * prompts.attribute_templates.size() * static_cast<std::size_t>(prompts.reps);
}

CollectRun collect_attributes(std::span<const SampledSet> sets, std::span<const StimulusRecord> manifest,
                              const fs::path& image_root, std::span<const ModelHandle> models,
                              const PromptSet& prompts, ResponseCache& cache) {
  validate(prompts);
  std::map<std::string, const StimulusRecord*> by_id;
  for (const auto& s : manifest) by_id[s.stimulus_id] = &s;

  struct Cell {
    const StimulusRecord* stimulus;
    int prompt_id;
    int rep;
  };
  std::vector<Cell> cells;
  for (const auto& set : sets) {
    for (const auto& sid : set.stimulus_ids) {
      auto it = by_id.find(sid);
      if (it == by_id.end()) throw ValidationError("sampled stimulus '" + sid + "' is not in the manifest");
      for (int p = 0; p < static_cast<int>(prompts.attribute_templates.size()); ++p) {
        for (int rep = 0; rep < prompts.reps; ++rep) cells.push_back({it->second, p, rep});
      }
    }
  }

  CollectRun run;
  for (const auto& model : models) {
    std::vector<std::optional<ResponseRecord>> replies(cells.size());
    std::vector<std::optional<FailedCell>> failures(cells.size());
    parallel_for(cells.size(), model.max_parallel, [&](std::size_t i) {
      const Cell& c = cells[i];
      const QueryCell cell{*c.stimulus, Phase::attributes, c.prompt_id, c.rep};
      const ChatRequest req = make_request(
          *c.stimulus, image_root,
          instantiate(prompts.attribute_templates[static_cast<std::size_t>(c.prompt_id)], c.stimulus->subject.category));
      try {
        replies[i] = cache.cached_query(model.id, *model.client, cell, req);
      } catch (const TransportError& e) {
        failures[i] = FailedCell{model.id, c.stimulus->stimulus_id, Phase::attributes, c.prompt_id, c.rep, e.what()};
      }
    });
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (replies[i]) {
        run.log.push_back(std::move(*replies[i]));
      } else {
        run.failed.push_back(std::move(*failures[i]));
      }
    }
  }
  return run;
}

}  // namespace vts
