#include "vtstyle/extract.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <set>

#include "vtstyle/error.hpp"

namespace vts {

void validate(const NormalizationPolicy& p) {
  if (p.max_words_per_term < 1) throw ConfigError("max_words_per_term must be >= 1");
}

nlohmann::ordered_json to_json(const AttributeList& a) {
  nlohmann::ordered_json j;
  j["stimulus_id"] = a.stimulus_id;
  j["concept_id"] = a.concept_id;
  j["style"] = to_string(a.style);
  j["model_id"] = a.model_id;
  j["prompt_id"] = a.prompt_id;
  j["rep"] = a.rep;
  j["terms"] = a.terms;
  return j;
}

AttributeList attribute_list_from_json(const nlohmann::json& j) {
  AttributeList a;
  a.stimulus_id = j.at("stimulus_id").get<std::string>();
  a.concept_id = j.at("concept_id").get<std::string>();
  a.style = parse_style(j.at("style").get<std::string>());
  a.model_id = j.at("model_id").get<std::string>();
  a.prompt_id = j.at("prompt_id").get<int>();
  a.rep = j.at("rep").get<int>();
  a.terms = j.at("terms").get<std::vector<std::string>>();
  return a;
}

namespace {

constexpr std::string_view kStripAscii = ".,;:!?\"'()[]{}-*_`#>~";
// UTF-8 sequences treated as list punctuation at term edges.
constexpr std::string_view kStripUtf8[] = {"•", "·", "–", "—", "“", "”",
                                           "‘", "’", "‣", "▪"};

bool strip_leading(std::string& s) {
  if (s.empty()) return false;
  if (std::isspace(static_cast<unsigned char>(s.front())) || kStripAscii.find(s.front()) != std::string_view::npos) {
    s.erase(0, 1);
    return true;
  }
  for (auto seq : kStripUtf8) {
    if (s.starts_with(seq)) {
      s.erase(0, seq.size());
      return true;
    }
  }
  return false;
}

bool strip_trailing(std::string& s) {
  if (s.empty()) return false;
  if (std::isspace(static_cast<unsigned char>(s.back())) || kStripAscii.find(s.back()) != std::string_view::npos) {
    s.pop_back();
    return true;
  }
  for (auto seq : kStripUtf8) {
    if (s.ends_with(seq)) {
      s.erase(s.size() - seq.size());
      return true;
    }
  }
  return false;
}

std::string collapse_spaces(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = true;
      continue;
    }
    if (space && !out.empty()) out.push_back(' ');
    space = false;
    out.push_back(c);
  }
  return out;
}

int word_count(std::string_view s) {
  int n = 0;
  bool in_word = false;
  for (char c : s) {
    const bool ws = std::isspace(static_cast<unsigned char>(c));
    if (!ws && !in_word) ++n;
    in_word = !ws;
  }
  return n;
}

}  // namespace

std::string normalize_term(std::string_view term, const NormalizationPolicy& policy) {
  std::string s = collapse_spaces(term);
  if (policy.strip_punctuation) {
    while (strip_leading(s)) {
    }
    while (strip_trailing(s)) {
    }
  }
  if (policy.case_fold) s = to_lower(s);
  return s;
}

std::vector<std::string> extract_rule_based(std::string_view raw_text, const NormalizationPolicy& policy) {
  static const std::regex kLeadingMarker(R"(^\s*(?:\d+[.)]|[-*+]|•)\s+)");
  static const std::regex kInlineNumber(R"(\s+\d+[.)]\s+)");

  std::vector<std::string> items;
  std::string text(raw_text);
  std::replace(text.begin(), text.end(), '\r', '\n');
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = std::regex_replace(text.substr(start, end - start), kLeadingMarker, "");
    line = std::regex_replace(line, kInlineNumber, ";");
    start = end + 1;

    const std::string trimmed = trim(line);
    if (trimmed.empty()) continue;
    // "Here are the attributes:" style headers carry no terms.
    if (trimmed.back() == ':') continue;
    // "**Playful**: loves games" keeps the head before the explanation.
    if (auto colon = trimmed.find(": "); colon != std::string::npos) line = trimmed.substr(0, colon);

    std::size_t piece_start = 0;
    while (piece_start <= line.size()) {
      std::size_t piece_end = line.find_first_of(",;", piece_start);
      if (piece_end == std::string::npos) piece_end = line.size();
      items.push_back(line.substr(piece_start, piece_end - piece_start));
      piece_start = piece_end + 1;
    }
  }

  std::vector<std::string> terms;
  std::set<std::string> seen;
  for (const auto& item : items) {
    std::string term = normalize_term(item, policy);
    if (term.empty()) continue;
    if (word_count(term) > policy.max_words_per_term) continue;
    if (policy.dedup_within_list && !seen.insert(term).second) continue;
    terms.push_back(std::move(term));
  }
  return terms;
}

std::vector<std::string> extract_llm(const ResponseRecord& source, const StimulusRecord& stimulus,
                                     const std::string& extractor_id, ChatClient& extractor, ResponseCache& cache,
                                     const NormalizationPolicy& policy) {
  ChatRequest request;
  request.system_prompt = std::string(kExtractorSystemPrompt);
  request.prompt = source.raw_text;
  // Keyed by the source cell so identical replies from different cells stay distinct entries.
  request.image_digest = source.request_digest;
  QueryCell cell{stimulus, Phase::extract, source.prompt_id, source.rep};
  const ResponseRecord reply = cache.cached_query(extractor_id, extractor, cell, request);
  return extract_rule_based(reply.raw_text, policy);
}

}  // namespace vts
