#include "vtstyle/report.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "vtstyle/error.hpp"

namespace vts {

namespace fs = std::filesystem;

std::string csv_quote(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string format_p_value(double p) {
  if (p < 1e-12) return "<1e-12";
  return format_sig(p, 6);
}

std::vector<StyleComparison> sorted_for_report(std::span<const StyleComparison> comparisons) {
  std::vector<StyleComparison> rows(comparisons.begin(), comparisons.end());
  std::stable_sort(rows.begin(), rows.end(), [](const StyleComparison& a, const StyleComparison& b) {
    if (a.model_id != b.model_id) return a.model_id < b.model_id;
    return a.label < b.label;
  });
  return rows;
}

std::string concept_table_csv(std::span<const StyleComparison> comparisons) {
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& c : comparisons) {
    if (!seen.insert({c.concept_id, c.model_id}).second) {
      throw ValidationError("duplicate comparison row for concept '" + c.concept_id + "', model '" + c.model_id + "'");
    }
  }
  std::string out = "concept,category,model,tv,chi2,df,p_value,k_effective,n_functional,n_decorative\r\n";
  for (const auto& c : sorted_for_report(comparisons)) {
    out += csv_quote(c.label) + "," + std::string(to_string(c.category)) + "," + csv_quote(c.model_id) + "," +
           format_sig(c.tv, 6) + "," + format_sig(c.chi2, 6) + "," + std::to_string(c.df) + "," +
           format_p_value(c.p_value) + "," + std::to_string(c.k_effective) + "," + std::to_string(c.n_functional) +
           "," + std::to_string(c.n_decorative) + "\r\n";
  }
  return out;
}

void emit_concept_table(std::span<const StyleComparison> comparisons, const fs::path& path) {
  write_atomic(path, concept_table_csv(comparisons));
}

namespace {

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Two decimals keep SVG bytes stable without visible quantization.
std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

constexpr double kPlotTop = 50.0;
constexpr double kPlotHeight = 300.0;
constexpr double kPlotLeft = 70.0;

void y_axis(std::ostringstream& os, double width, double y_max, const std::string& label) {
  const double bottom = kPlotTop + kPlotHeight;
  os << "<g class=\"axes\" stroke=\"#000000\" stroke-width=\"1\">\n";
  os << "<line x1=\"" << num(kPlotLeft) << "\" y1=\"" << num(kPlotTop) << "\" x2=\"" << num(kPlotLeft) << "\" y2=\""
     << num(bottom) << "\"/>\n";
  os << "<line x1=\"" << num(kPlotLeft) << "\" y1=\"" << num(bottom) << "\" x2=\"" << num(width - 20) << "\" y2=\""
     << num(bottom) << "\"/>\n";
  os << "</g>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = y_max * i / 4.0;
    const double y = bottom - kPlotHeight * i / 4.0;
    os << "<line x1=\"" << num(kPlotLeft - 5) << "\" y1=\"" << num(y) << "\" x2=\"" << num(kPlotLeft) << "\" y2=\""
       << num(y) << "\" stroke=\"#000000\"/>\n";
    os << "<text x=\"" << num(kPlotLeft - 8) << "\" y=\"" << num(y + 4)
       << "\" font-size=\"11\" text-anchor=\"end\">" << format_sig(v, 3) << "</text>\n";
  }
  os << "<text x=\"18\" y=\"" << num(kPlotTop + kPlotHeight / 2) << "\" font-size=\"12\" text-anchor=\"middle\" "
     << "transform=\"rotate(-90 18 " << num(kPlotTop + kPlotHeight / 2) << ")\">" << xml_escape(label) << "</text>\n";
}

}  // namespace

std::string tv_chart_svg(std::span<const StyleComparison> comparisons, const std::string& model_id) {
  std::vector<StyleComparison> rows;
  for (const auto& c : comparisons) {
    if (c.model_id == model_id) rows.push_back(c);
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const StyleComparison& a, const StyleComparison& b) { return a.label < b.label; });

  constexpr double kSlot = 24.0;
  const double width = std::max(400.0, kPlotLeft + kSlot * static_cast<double>(rows.size()) + 40.0);
  const double height = kPlotTop + kPlotHeight + 160.0;
  const double bottom = kPlotTop + kPlotHeight;

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << num(width) << "\" height=\""
     << num(height) << "\" viewBox=\"0 0 " << num(width) << " " << num(height) << "\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << num(width) << "\" height=\"" << num(height) << "\" fill=\"#ffffff\"/>\n";
  os << "<text class=\"title\" x=\"" << num(width / 2) << "\" y=\"25\" font-size=\"14\" text-anchor=\"middle\">"
     << "TV distance between functional and decorative styles: " << xml_escape(model_id) << "</text>\n";
  y_axis(os, width, 1.0, "TV distance");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& c = rows[i];
    const double tv = std::clamp(c.tv, 0.0, 1.0);
    const double h = kPlotHeight * tv;
    const double x = kPlotLeft + kSlot * static_cast<double>(i) + 4.0;
    const std::string_view fill = c.category == Category::dog ? kDogColor : kCatColor;
    os << "<rect class=\"bar\" data-concept=\"" << xml_escape(c.concept_id) << "\" x=\"" << num(x) << "\" y=\""
       << num(bottom - h) << "\" width=\"" << num(kSlot - 8.0) << "\" height=\"" << num(h) << "\" fill=\"" << fill
       << "\"/>\n";
    const double cx = x + (kSlot - 8.0) / 2;
    os << "<text x=\"" << num(cx) << "\" y=\"" << num(bottom + 12) << "\" font-size=\"10\" text-anchor=\"end\" "
       << "transform=\"rotate(-60 " << num(cx) << " " << num(bottom + 12) << ")\">" << xml_escape(c.label)
       << "</text>\n";
  }
  os << "<text x=\"" << num(width / 2) << "\" y=\"" << num(height - 8) << "\" font-size=\"12\" "
     << "text-anchor=\"middle\">Concept (blue: dog, orange: cat)</text>\n";
  os << "</svg>\n";
  return os.str();
}

void emit_tv_chart(std::span<const StyleComparison> comparisons, const std::string& model_id, const fs::path& path) {
  write_atomic(path, tv_chart_svg(comparisons, model_id));
}

std::string within_across_chart_svg(const std::map<std::string, WithinAcross>& per_model) {
  static constexpr std::string_view kSeries[] = {"within functional", "within decorative", "across styles"};
  static constexpr std::string_view kColors[] = {"#2ca02c", "#9467bd", "#d62728"};
  constexpr double kBar = 24.0;
  constexpr double kGroup = 3 * kBar + 30.0;

  double y_max = 0.0;
  for (const auto& [_, w] : per_model) y_max = std::max({y_max, w.within_functional, w.within_decorative, w.across});
  y_max = y_max <= 0.0 ? 0.1 : std::min(1.0, std::ceil(y_max * 10.0) / 10.0);

  const double width = std::max(420.0, kPlotLeft + kGroup * static_cast<double>(per_model.size()) + 40.0);
  const double height = kPlotTop + kPlotHeight + 110.0;
  const double bottom = kPlotTop + kPlotHeight;

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << num(width) << "\" height=\""
     << num(height) << "\" viewBox=\"0 0 " << num(width) << " " << num(height) << "\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << num(width) << "\" height=\"" << num(height) << "\" fill=\"#ffffff\"/>\n";
  os << "<text class=\"title\" x=\"" << num(width / 2) << "\" y=\"25\" font-size=\"14\" text-anchor=\"middle\">"
     << "Average pairwise TV distance between fonts</text>\n";
  y_axis(os, width, y_max, "average TV distance");

  std::size_t g = 0;
  for (const auto& [model, w] : per_model) {
    const double values[] = {w.within_functional, w.within_decorative, w.across};
    const double gx = kPlotLeft + kGroup * static_cast<double>(g) + 15.0;
    os << "<g class=\"group\" data-model=\"" << xml_escape(model) << "\">\n";
    for (int s = 0; s < 3; ++s) {
      const double h = kPlotHeight * std::clamp(values[s] / y_max, 0.0, 1.0);
      os << "<rect class=\"bar\" data-series=\"" << kSeries[s] << "\" x=\"" << num(gx + kBar * s) << "\" y=\""
         << num(bottom - h) << "\" width=\"" << num(kBar - 2) << "\" height=\"" << num(h) << "\" fill=\""
         << kColors[s] << "\"/>\n";
    }
    os << "</g>\n";
    os << "<text x=\"" << num(gx + 1.5 * kBar) << "\" y=\"" << num(bottom + 16) << "\" font-size=\"11\" "
       << "text-anchor=\"middle\">" << xml_escape(model) << "</text>\n";
    ++g;
  }
  os << "<g class=\"legend\">\n";
  for (int s = 0; s < 3; ++s) {
    const double ly = bottom + 40 + 18 * s;
    os << "<rect x=\"" << num(kPlotLeft) << "\" y=\"" << num(ly - 10) << "\" width=\"12\" height=\"12\" fill=\""
       << kColors[s] << "\"/>\n";
    os << "<text x=\"" << num(kPlotLeft + 18) << "\" y=\"" << num(ly) << "\" font-size=\"11\">" << kSeries[s]
       << "</text>\n";
  }
  os << "</g>\n";
  os << "</svg>\n";
  return os.str();
}

void emit_within_across_chart(const std::map<std::string, WithinAcross>& per_model, const fs::path& path) {
  write_atomic(path, within_across_chart_svg(per_model));
}

nlohmann::ordered_json top_n_report(std::span<const StyleComparison> comparisons, int n) {
  nlohmann::ordered_json j;
  j["n"] = n;
  j["caveat"] = kReportCaveat;
  auto entries = nlohmann::ordered_json::array();
  std::map<std::string, int> differing;
  for (const auto& c : sorted_for_report(comparisons)) {
    nlohmann::ordered_json e;
    e["concept_id"] = c.concept_id;
    e["label"] = c.label;
    e["model_id"] = c.model_id;
    e["top_functional"] = c.top_n.top_functional;
    e["top_decorative"] = c.top_n.top_decorative;
    e["only_functional"] = c.top_n.only_functional;
    e["only_decorative"] = c.top_n.only_decorative;
    e["stable"] = c.top_n.stable();
    if (c.top_n.short_vocabulary) e["short_vocabulary"] = true;
    entries.push_back(e);
    differing.try_emplace(c.model_id, 0);
    if (!c.top_n.stable()) ++differing[c.model_id];
  }
  j["entries"] = entries;
  nlohmann::ordered_json counts = nlohmann::ordered_json::object();
  for (const auto& [m, k] : differing) counts[m] = k;
  j["differing_concepts"] = counts;
  return j;
}

void emit_top_n_report(std::span<const StyleComparison> comparisons, int n, const fs::path& path) {
  write_atomic(path, top_n_report(comparisons, n).dump(2) + "\n");
}

nlohmann::ordered_json to_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["config_digest"] = m.config_digest;
  j["run_seed"] = m.run_seed;
  j["models"] = m.model_ids;
  j["concepts"] = {{"original", m.concepts_original},
                   {"retained", m.retained.size()},
                   {"eliminated", m.eliminated.size()},
                   {"eliminated_labels", m.eliminated}};
  nlohmann::ordered_json cells = nlohmann::ordered_json::object();
  for (const auto& [phase, count] : m.cells) cells[phase] = count;
  j["cells"] = cells;
  j["timestamps"] = {{"first_response", m.first_response}, {"last_response", m.last_response}};
  j["tool_version"] = m.tool_version;
  return j;
}

void emit_run_manifest(const RunManifest& m, const fs::path& path) {
  if (m.retained.size() + m.eliminated.size() != m.concepts_original) {
    throw ValidationError("run manifest: retained + eliminated != original concept count");
  }
  write_atomic(path, to_json(m).dump(2) + "\n");
}

}  // namespace vts
