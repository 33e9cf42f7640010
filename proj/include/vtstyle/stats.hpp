#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vtstyle/extract.hpp"
#include "vtstyle/stimulus.hpp"

namespace vts {

enum class CountingMode { occurrence, per_list };

std::string_view to_string(CountingMode m);
CountingMode parse_counting_mode(std::string_view s);

struct Stratum {
  std::string concept_id;
  StyleFamily style = StyleFamily::functional;
  std::string model_id;
  std::optional<std::string> font;
};

struct TermDistribution {
  Stratum stratum;
  std::map<std::string, long long> counts;
  long long total = 0;

  double probability(const std::string& term) const;
};

// Tallies terms over one stratum's lists. Throws InsufficientDataError when no
// term was emitted at all.
TermDistribution build_distribution(std::span<const AttributeList> lists, CountingMode counting,
                                    Stratum stratum = {});

// Union of both supports, ordered by descending combined count then
// lexicographically.
std::vector<std::string> shared_vocabulary(const TermDistribution& p, const TermDistribution& q);

// Half the L1 distance over the shared vocabulary. Evaluated as one integer
// numerator over 2*|P|*|Q| when that fits in a double mantissa, so equal
// distributions give exactly 0 and disjoint ones exactly 1.
double tv_distance(const TermDistribution& p, const TermDistribution& q);

inline constexpr std::string_view kOtherBin = "⟨OTHER⟩";

// Terms that would collide with the reserved bin label get a leading backslash.
std::string escape_term(std::string_view term);

struct ContingencyTable {
  std::vector<std::string> columns;
  // Row 0 functional, row 1 decorative.
  std::vector<long long> functional;
  std::vector<long long> decorative;
  long long tau = 0;
  bool has_other = false;
  std::size_t merged_terms = 0;

  std::size_t k() const { return columns.size(); }
};

ContingencyTable merge_low_freq(const std::map<std::string, long long>& functional,
                                const std::map<std::string, long long>& decorative, long long tau);

struct ChiSquaredResult {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
  // Set when any expected cell count is below 5.
  bool low_expected = false;
};

ChiSquaredResult chi_squared_homogeneity(const ContingencyTable& table);

// Upper tail of the chi-squared distribution: the regularized upper incomplete
// gamma Q(df/2, x/2).
double chi2_upper_tail(double x, int df);

struct WithinAcross {
  double within_functional = 0.0;
  double within_decorative = 0.0;
  double across = 0.0;
  std::size_t pairs_functional = 0;
  std::size_t pairs_decorative = 0;
  std::size_t pairs_across = 0;
};

using FontKey = std::pair<StyleFamily, std::string>;

WithinAcross within_across_tv(const std::map<FontKey, TermDistribution>& per_font);

struct TopNDiff {
  std::vector<std::string> top_functional;
  std::vector<std::string> top_decorative;
  std::vector<std::string> only_functional;
  std::vector<std::string> only_decorative;
  // A side had fewer than n terms, so the difference sets may differ in size.
  bool short_vocabulary = false;

  bool stable() const { return only_functional.empty() && only_decorative.empty(); }
};

// Top-n by count descending, ties lexicographic ascending.
std::vector<std::string> rank_terms(const TermDistribution& d, std::size_t n);
TopNDiff top_n_diff(const TermDistribution& p, const TermDistribution& q, int n);

struct StyleComparison {
  std::string concept_id;
  std::string label;
  Category category = Category::cat;
  std::string model_id;
  double tv = 0.0;
  double chi2 = 0.0;
  int df = 0;
  double p_value = 1.0;
  int k_effective = 0;
  long long n_functional = 0;
  long long n_decorative = 0;
  bool low_expected = false;
  TopNDiff top_n;
};

StyleComparison compare_styles(const Concept& subject, const std::string& model_id,
                               const TermDistribution& functional, const TermDistribution& decorative,
                               long long tau, int top_n);

}  // namespace vts
