#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vtstyle/stats.hpp"

namespace vts {

inline constexpr std::string_view kDogColor = "#1f77b4";
inline constexpr std::string_view kCatColor = "#ff7f0e";
inline constexpr std::string_view kReportCaveat =
    "TV values are computed on each concept's own shared vocabulary, so their sample spaces differ across "
    "concepts; compare magnitudes between concepts with care.";

std::string csv_quote(std::string_view field);
std::string format_p_value(double p);

// Same ordering as every report: model id, then concept label.
std::vector<StyleComparison> sorted_for_report(std::span<const StyleComparison> comparisons);

std::string concept_table_csv(std::span<const StyleComparison> comparisons);
void emit_concept_table(std::span<const StyleComparison> comparisons, const std::filesystem::path& path);

std::string tv_chart_svg(std::span<const StyleComparison> comparisons, const std::string& model_id);
void emit_tv_chart(std::span<const StyleComparison> comparisons, const std::string& model_id,
                   const std::filesystem::path& path);

std::string within_across_chart_svg(const std::map<std::string, WithinAcross>& per_model);
void emit_within_across_chart(const std::map<std::string, WithinAcross>& per_model, const std::filesystem::path& path);

nlohmann::ordered_json top_n_report(std::span<const StyleComparison> comparisons, int n);
void emit_top_n_report(std::span<const StyleComparison> comparisons, int n, const std::filesystem::path& path);

struct RunManifest {
  std::string config_digest;
  std::uint64_t run_seed = 0;
  std::vector<std::string> model_ids;
  std::size_t concepts_original = 0;
  std::vector<std::string> retained;
  std::vector<std::string> eliminated;  // labels
  std::map<std::string, std::size_t> cells;  // phase -> count
  std::string first_response;
  std::string last_response;
  std::string tool_version;
};

nlohmann::ordered_json to_json(const RunManifest& m);
void emit_run_manifest(const RunManifest& m, const std::filesystem::path& path);

}  // namespace vts
