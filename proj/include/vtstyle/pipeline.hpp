#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vtstyle/config.hpp"
#include "vtstyle/report.hpp"

namespace vts {

inline constexpr std::string_view kToolVersion = "0.1.0";

// Top-level scalars a command line may override.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::vector<std::string>> models;
  std::optional<unsigned> concurrency;
  std::optional<long long> tau;
  std::optional<int> top_n;
};

RunConfig apply_overrides(RunConfig config, const Overrides& o);

// Where every phase reads and writes inside a state directory.
struct StateLayout {
  std::filesystem::path root;

  std::filesystem::path stimuli_dir() const { return root / "stimuli"; }
  std::filesystem::path manifest() const { return stimuli_dir() / "manifest.jsonl"; }
  std::filesystem::path cache_dir() const { return root / "cache"; }
  std::filesystem::path identify_log() const { return root / "identify" / "responses.jsonl"; }
  std::filesystem::path identify_results() const { return root / "identify" / "results.jsonl"; }
  std::filesystem::path identify_failed() const { return root / "identify" / "failed.jsonl"; }
  std::filesystem::path accuracy() const { return root / "identify" / "accuracy.json"; }
  std::filesystem::path sampled() const { return root / "filter" / "sampled.jsonl"; }
  std::filesystem::path filter_report() const { return root / "filter" / "report.json"; }
  std::filesystem::path collect_log() const { return root / "collect" / "responses.jsonl"; }
  std::filesystem::path collect_failed() const { return root / "collect" / "failed.jsonl"; }
  std::filesystem::path attributes() const { return root / "extract" / "attributes.jsonl"; }
  std::filesystem::path extract_failed() const { return root / "extract" / "failed.jsonl"; }
  std::filesystem::path comparisons() const { return root / "analyze" / "comparisons.json"; }
  std::filesystem::path within_across() const { return root / "analyze" / "within_across.json"; }
  std::filesystem::path report_dir() const { return root / "report"; }
};

using ClientFactory = std::function<std::shared_ptr<ChatClient>(const ModelEndpoint&)>;

ClientFactory live_client_factory();
ClientFactory mock_client_factory(const std::filesystem::path& fixture);

nlohmann::ordered_json to_json(const StyleComparison& c);
StyleComparison comparison_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const WithinAcross& w);
WithinAcross within_across_from_json(const nlohmann::json& j);

struct AnalysisResult {
  std::vector<StyleComparison> comparisons;
  // Per model, per concept.
  std::map<std::string, std::map<std::string, WithinAcross>> per_concept;
  // Per model: unweighted mean of the per-concept triples.
  std::map<std::string, WithinAcross> per_model;
};

// Builds every comparison from extracted lists. Throws IncompleteDataError if
// any (concept, style, model) stratum lacks a cell.
AnalysisResult analyze(const RunConfig& config, const std::vector<StimulusRecord>& manifest,
                       const std::vector<SampledSet>& sets, const std::vector<AttributeList>& lists);

class Pipeline {
 public:
  Pipeline(RunConfig config, std::filesystem::path state_dir, ClientFactory factory);

  void render();
  void identify();
  void filter();
  void collect();
  void extract();
  void analyze();
  void report();
  // All phases in order; returns the printed summary.
  std::string run_all();
  std::string summary() const;

  const RunConfig& config() const { return config_; }
  const StateLayout& layout() const { return layout_; }
  // Cache misses across the phases this object ran.
  std::size_t queries_issued() const;

 private:
  std::vector<ModelHandle> handles();
  ChatClient& client_for(const ModelEndpoint& e);
  void require_artifact(const std::filesystem::path& p, std::string_view phase) const;

  RunConfig config_;
  StateLayout layout_;
  ClientFactory factory_;
  std::map<std::string, std::shared_ptr<ChatClient>> clients_;
  std::unique_ptr<ResponseCache> cache_;
};

}  // namespace vts
