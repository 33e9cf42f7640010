#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "vtstyle/modelio.hpp"
#include "vtstyle/stimulus.hpp"

namespace vts {

struct NormalizationPolicy {
  bool case_fold = true;
  bool strip_punctuation = true;
  int max_words_per_term = 4;
  bool dedup_within_list = false;

  friend bool operator==(const NormalizationPolicy&, const NormalizationPolicy&) = default;
};

void validate(const NormalizationPolicy& p);

struct AttributeList {
  std::string stimulus_id;
  std::string concept_id;
  StyleFamily style = StyleFamily::functional;
  std::string model_id;
  int prompt_id = 0;
  int rep = 0;
  std::vector<std::string> terms;

  friend bool operator==(const AttributeList&, const AttributeList&) = default;
};

nlohmann::ordered_json to_json(const AttributeList& a);
AttributeList attribute_list_from_json(const nlohmann::json& j);

inline constexpr std::string_view kExtractorSystemPrompt =
    "Act as a text processing system. Extract adjectives (or adjective phrases) from the input and output only a "
    "single-line list separated by comma. No other text.";

// Empty result means the term is dropped.
std::string normalize_term(std::string_view term, const NormalizationPolicy& policy);

std::vector<std::string> extract_rule_based(std::string_view raw_text, const NormalizationPolicy& policy);

// Sends the raw reply to an auxiliary text model and parses its comma list
// with the rule-based pass. Goes through the cache like any other query.
std::vector<std::string> extract_llm(const ResponseRecord& source, const StimulusRecord& stimulus,
                                     const std::string& extractor_id, ChatClient& extractor, ResponseCache& cache,
                                     const NormalizationPolicy& policy);

}  // namespace vts
