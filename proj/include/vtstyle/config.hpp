#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vtstyle/extract.hpp"
#include "vtstyle/modelio.hpp"
#include "vtstyle/protocol.hpp"
#include "vtstyle/stats.hpp"
#include "vtstyle/stimulus.hpp"

namespace vts {

enum class ExtractionMode { rule_based, llm };

struct SamplingConfig {
  int n = 36;
  // Models whose identifications gate a stimulus; empty means all configured models.
  std::vector<std::string> gate_models;

  friend bool operator==(const SamplingConfig&, const SamplingConfig&) = default;
};

struct ExtractionConfig {
  ExtractionMode mode = ExtractionMode::rule_based;
  NormalizationPolicy policy;
  std::optional<ModelEndpoint> extractor;

  friend bool operator==(const ExtractionConfig&, const ExtractionConfig&) = default;
};

struct AnalysisConfig {
  long long tau = 5;
  int top_n = 3;
  CountingMode counting = CountingMode::occurrence;

  friend bool operator==(const AnalysisConfig&, const AnalysisConfig&) = default;
};

struct OutputConfig {
  std::vector<std::string> reports = {"concept_table", "tv_chart", "within_across_chart", "top_n", "run_manifest"};

  friend bool operator==(const OutputConfig&, const OutputConfig&) = default;
};

struct RunConfig {
  std::vector<Concept> concepts;
  std::uint64_t seed = 0;
  Canvas canvas;
  StyleConfig styles;
  std::vector<ModelEndpoint> models;
  SamplingConfig sampling;
  PromptSet prompts = PromptSet::defaults();
  ExtractionConfig extraction;
  AnalysisConfig analysis;
  OutputConfig output;

  std::vector<std::string> gate_models() const;
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// Relative font and concept-file paths resolve against `base_dir`. Unknown
// keys anywhere are rejected with ConfigError.
RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);
std::vector<Concept> parse_concepts(const nlohmann::json& j);

// Every default materialized; parse_config(to_json(c)) == c.
nlohmann::ordered_json to_json(const RunConfig& c);
std::string config_digest(const RunConfig& c);

// Checks cross-field invariants (unique ids, gate models exist, ...).
void validate(const RunConfig& c);

}  // namespace vts
