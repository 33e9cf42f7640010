#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vtstyle/modelio.hpp"
#include "vtstyle/stimulus.hpp"

namespace vts {

struct PromptSet {
  std::string identify_template;
  std::vector<std::string> attribute_templates;
  int reps = 5;

  static PromptSet defaults();
  friend bool operator==(const PromptSet&, const PromptSet&) = default;
};

void validate(const PromptSet& p);

// Replaces every "{animal}" with the concept's category noun.
std::string instantiate(const std::string& tmpl, Category category);

// A configured model as the protocol sees it.
struct ModelHandle {
  std::string id;
  ChatClient* client = nullptr;
  unsigned max_parallel = 1;
};

struct FailedCell {
  std::string model_id;
  std::string stimulus_id;
  Phase phase = Phase::identify;
  int prompt_id = 0;
  int rep = 0;
  std::string error;
};

nlohmann::ordered_json to_json(const FailedCell& f);
FailedCell failed_cell_from_json(const nlohmann::json& j);

// Strict identification predicate: trimmed reply equals label ignoring case.
bool is_correct(std::string_view reply, std::string_view label);

struct IdentificationResult {
  std::string stimulus_id;
  std::string concept_id;
  StyleFamily style = StyleFamily::functional;
  std::string model_id;
  std::string reply;
  bool correct = false;
  // The query failed; the stimulus cannot pass the gate.
  bool failed = false;
};

nlohmann::ordered_json to_json(const IdentificationResult& r);
IdentificationResult identification_from_json(const nlohmann::json& j);

struct IdentificationRun {
  std::vector<IdentificationResult> results;
  std::vector<ResponseRecord> log;
  std::vector<FailedCell> failed;
};

ChatRequest make_request(const StimulusRecord& stimulus, const std::filesystem::path& image_root,
                         const std::string& prompt);

// One identify query per (stimulus, model), ordered model-major then by manifest order.
IdentificationRun run_identification(std::span<const StimulusRecord> manifest,
                                     const std::filesystem::path& image_root, std::span<const ModelHandle> models,
                                     const PromptSet& prompts, ResponseCache& cache);

struct Accuracy {
  std::size_t correct = 0;
  std::size_t total = 0;
  std::size_t failed = 0;
  double value = 0.0;
};

// Over completed cells of one model and one style. Throws when there are none.
Accuracy identification_accuracy(std::span<const IdentificationResult> results, const std::string& model_id,
                                 StyleFamily style);
std::string format_accuracy(double value);

struct SampledSet {
  std::string concept_id;
  StyleFamily style = StyleFamily::functional;
  std::vector<std::string> stimulus_ids;
  std::uint64_t sample_seed = 0;

  friend bool operator==(const SampledSet&, const SampledSet&) = default;
};

nlohmann::ordered_json to_json(const SampledSet& s);
SampledSet sampled_set_from_json(const nlohmann::json& j);

struct FilterOutcome {
  std::vector<SampledSet> sets;
  std::vector<Concept> retained;
  std::vector<Concept> eliminated;
  // Surviving stimulus counts per (concept id, style).
  std::map<std::pair<std::string, StyleFamily>, std::size_t> survivors;
};

// `gate_models` lists the models whose identifications must all be correct.
FilterOutcome filter_and_sample(std::span<const IdentificationResult> results,
                                std::span<const StimulusRecord> manifest, std::span<const std::string> gate_models,
                                int n, std::uint64_t seed);

struct CollectRun {
  std::vector<ResponseRecord> log;
  std::vector<FailedCell> failed;
};

// n x prompts x reps independent queries per (concept, style, model).
CollectRun collect_attributes(std::span<const SampledSet> sets, std::span<const StimulusRecord> manifest,
                              const std::filesystem::path& image_root, std::span<const ModelHandle> models,
                              const PromptSet& prompts, ResponseCache& cache);

std::size_t expected_cells_per_stratum(std::size_t n, const PromptSet& prompts);

}  // namespace vts
