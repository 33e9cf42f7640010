#include "vtstyle/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "vtstyle/error.hpp"

namespace vts {

std::string_view to_string(CountingMode m) { return m == CountingMode::occurrence ? "occurrence" : "per_list"; }

CountingMode parse_counting_mode(std::string_view s) {
  if (s == "occurrence") return CountingMode::occurrence;
  if (s == "per_list") return CountingMode::per_list;
  throw ValidationError("unknown counting mode '" + std::string(s) + "'");
}

double TermDistribution::probability(const std::string& term) const {
  if (total <= 0) throw InsufficientDataError("probability of an empty distribution");
  auto it = counts.find(term);
  return it == counts.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(total);
}

namespace {

std::string describe(const Stratum& s) {
  std::string out = "(" + s.concept_id + ", " + std::string(to_string(s.style)) + ", " + s.model_id;
  if (s.font) out += ", font " + *s.font;
  return out + ")";
}

void require_nonempty(const TermDistribution& d) {
  if (d.total <= 0) throw InsufficientDataError("distribution " + describe(d.stratum) + " has zero total");
}

}  // namespace

TermDistribution build_distribution(std::span<const AttributeList> lists, CountingMode counting, Stratum stratum) {
  TermDistribution d;
  d.stratum = std::move(stratum);
  for (const auto& list : lists) {
    if (counting == CountingMode::occurrence) {
      for (const auto& t : list.terms) ++d.counts[t];
    } else {
      const std::set<std::string> unique(list.terms.begin(), list.terms.end());
      for (const auto& t : unique) ++d.counts[t];
    }
  }
  for (const auto& [term, c] : d.counts) d.total += c;
  require_nonempty(d);
  return d;
}

std::vector<std::string> shared_vocabulary(const TermDistribution& p, const TermDistribution& q) {
  std::map<std::string, long long> combined = p.counts;
  for (const auto& [t, c] : q.counts) combined[t] += c;
  std::vector<std::pair<std::string, long long>> items(combined.begin(), combined.end());
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  out.reserve(items.size());
  for (auto& [t, c] : items) out.push_back(std::move(t));
  return out;
}

double tv_distance(const TermDistribution& p, const TermDistribution& q) {
  require_nonempty(p);
  require_nonempty(q);
  const std::vector<std::string> vocab = shared_vocabulary(p, q);
  constexpr long double kExactLimit = 9007199254740992.0L;  // 2^53
  const long double denom = 2.0L * static_cast<long double>(p.total) * static_cast<long double>(q.total);
  if (denom < kExactLimit) {
    long long numer = 0;
    for (const auto& w : vocab) {
      const auto ip = p.counts.find(w);
      const auto iq = q.counts.find(w);
      const long long cp = ip == p.counts.end() ? 0 : ip->second;
      const long long cq = iq == q.counts.end() ? 0 : iq->second;
      numer += std::llabs(cp * q.total - cq * p.total);
    }
    return static_cast<double>(numer) / static_cast<double>(denom);
  }
  double sum = 0.0;
  for (const auto& w : vocab) sum += std::fabs(p.probability(w) - q.probability(w));
  return std::clamp(0.5 * sum, 0.0, 1.0);
}

std::string escape_term(std::string_view term) {
  std::string_view rest = term;
  while (rest.starts_with('\\')) rest.remove_prefix(1);
  if (rest == kOtherBin) return "\\" + std::string(term);
  return std::string(term);
}

ContingencyTable merge_low_freq(const std::map<std::string, long long>& functional,
                                const std::map<std::string, long long>& decorative, long long tau) {
  if (tau < 0) throw ValidationError("tau must be >= 0");
  std::map<std::string, std::pair<long long, long long>> cells;
  for (const auto& [t, c] : functional) {
    if (c < 0) throw ValidationError("negative count for '" + t + "'");
    cells[escape_term(t)].first += c;
  }
  for (const auto& [t, c] : decorative) {
    if (c < 0) throw ValidationError("negative count for '" + t + "'");
    cells[escape_term(t)].second += c;
  }

  std::vector<std::pair<std::string, std::pair<long long, long long>>> items(cells.begin(), cells.end());
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    return a.second.first + a.second.second > b.second.first + b.second.second;
  });

  ContingencyTable table;
  table.tau = tau;
  long long other_f = 0;
  long long other_d = 0;
  for (const auto& [term, c] : items) {
    if (c.first + c.second == 0) continue;
    if (c.first + c.second < tau) {
      other_f += c.first;
      other_d += c.second;
      ++table.merged_terms;
      continue;
    }
    table.columns.push_back(term);
    table.functional.push_back(c.first);
    table.decorative.push_back(c.second);
  }
  if (table.merged_terms > 0) {
    table.has_other = true;
    table.columns.emplace_back(kOtherBin);
    table.functional.push_back(other_f);
    table.decorative.push_back(other_d);
  }
  if (table.k() < 2) {
    throw InsufficientDataError("contingency table has " + std::to_string(table.k()) +
                                " column(s) after merging at tau=" + std::to_string(tau) + "; need at least 2");
  }
  return table;
}

ChiSquaredResult chi_squared_homogeneity(const ContingencyTable& table) {
  const std::size_t k = table.k();
  if (k < 2) throw InsufficientDataError("chi-squared test needs at least 2 columns");
  if (table.functional.size() != k || table.decorative.size() != k) {
    throw ValidationError("contingency table rows do not match its columns");
  }
  long long row_f = 0;
  long long row_d = 0;
  for (std::size_t j = 0; j < k; ++j) {
    row_f += table.functional[j];
    row_d += table.decorative[j];
  }
  if (row_f <= 0 || row_d <= 0) throw ValidationError("contingency table has an empty row");
  const long long grand = row_f + row_d;

  ChiSquaredResult res;
  const long long rows[2] = {row_f, row_d};
  for (std::size_t j = 0; j < k; ++j) {
    const long long col = table.functional[j] + table.decorative[j];
    if (col <= 0) throw ValidationError("column '" + table.columns[j] + "' has zero total");
    const long long observed[2] = {table.functional[j], table.decorative[j]};
    for (int i = 0; i < 2; ++i) {
      // (O - R*C/N)^2 / (R*C/N) == (O*N - R*C)^2 / (R*C*N); the difference is an
      // exact integer, so proportional rows give exactly zero.
      const double rc = static_cast<double>(rows[i]) * static_cast<double>(col);
      const double diff = static_cast<double>(observed[i] * grand - rows[i] * col);
      res.statistic += diff * diff / (rc * static_cast<double>(grand));
      if (rc / static_cast<double>(grand) < 5.0) res.low_expected = true;
    }
  }
  res.df = static_cast<int>(k) - 1;
  res.p_value = chi2_upper_tail(res.statistic, res.df);
  return res;
}

namespace {

constexpr double kEps = 1e-16;
constexpr int kMaxIter = 100000;

// Series expansion of the regularized lower incomplete gamma P(a, x), x < a + 1.
double lower_gamma_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < kMaxIter; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * kEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction for the regularized upper incomplete gamma Q(a, x),
// x >= a + 1, evaluated with the modified Lentz method.
double upper_gamma_fraction(double a, double x) {
  constexpr double kTiny = std::numeric_limits<double>::min() / kEps;
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double chi2_upper_tail(double x, int df) {
  if (df <= 0) throw ValidationError("chi-squared df must be positive, got " + std::to_string(df));
  if (std::isnan(x) || x < 0.0) throw ValidationError("chi-squared statistic must be >= 0");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  const double a = 0.5 * df;
  const double half = 0.5 * x;
  const double q = half < a + 1.0 ? 1.0 - lower_gamma_series(a, half) : upper_gamma_fraction(a, half);
  return std::clamp(q, 0.0, 1.0);
}

WithinAcross within_across_tv(const std::map<FontKey, TermDistribution>& per_font) {
  std::vector<const TermDistribution*> functional;
  std::vector<const TermDistribution*> decorative;
  for (const auto& [key, dist] : per_font) {
    if (dist.total <= 0) {
      throw InsufficientDataError("font '" + key.second + "' (" + std::string(to_string(key.first)) +
                                  ") has a zero-total distribution");
    }
    (key.first == StyleFamily::functional ? functional : decorative).push_back(&dist);
  }
  if (functional.size() < 2 || decorative.size() < 2) {
    throw InsufficientDataError("within/across comparison needs at least 2 fonts per style (have " +
                                std::to_string(functional.size()) + " functional, " +
                                std::to_string(decorative.size()) + " decorative)");
  }
  auto within = [](const std::vector<const TermDistribution*>& fonts, std::size_t& pairs) {
    double sum = 0.0;
    for (std::size_t i = 0; i < fonts.size(); ++i) {
      for (std::size_t j = i + 1; j < fonts.size(); ++j) {
        sum += tv_distance(*fonts[i], *fonts[j]);
        ++pairs;
      }
    }
    return sum / static_cast<double>(pairs);
  };
  WithinAcross out;
  out.within_functional = within(functional, out.pairs_functional);
  out.within_decorative = within(decorative, out.pairs_decorative);
  double sum = 0.0;
  for (const auto* f : functional) {
    for (const auto* d : decorative) {
      sum += tv_distance(*f, *d);
      ++out.pairs_across;
    }
  }
  out.across = sum / static_cast<double>(out.pairs_across);
  return out;
}

std::vector<std::string> rank_terms(const TermDistribution& d, std::size_t n) {
  std::vector<std::pair<std::string, long long>> items(d.counts.begin(), d.counts.end());
  // counts is a std::map, so a stable sort on count keeps ties lexicographic.
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < items.size() && i < n; ++i) out.push_back(items[i].first);
  return out;
}

TopNDiff top_n_diff(const TermDistribution& p, const TermDistribution& q, int n) {
  if (n < 1) throw ValidationError("top-n requires n >= 1");
  require_nonempty(p);
  require_nonempty(q);
  TopNDiff out;
  out.top_functional = rank_terms(p, static_cast<std::size_t>(n));
  out.top_decorative = rank_terms(q, static_cast<std::size_t>(n));
  out.short_vocabulary = out.top_functional.size() < static_cast<std::size_t>(n) ||
                         out.top_decorative.size() < static_cast<std::size_t>(n);
  const std::set<std::string> in_p(out.top_functional.begin(), out.top_functional.end());
  const std::set<std::string> in_q(out.top_decorative.begin(), out.top_decorative.end());
  for (const auto& t : out.top_functional) {
    if (!in_q.contains(t)) out.only_functional.push_back(t);
  }
  for (const auto& t : out.top_decorative) {
    if (!in_p.contains(t)) out.only_decorative.push_back(t);
  }
  return out;
}

StyleComparison compare_styles(const Concept& subject, const std::string& model_id,
                               const TermDistribution& functional, const TermDistribution& decorative,
                               long long tau, int top_n) {
  StyleComparison c;
  c.concept_id = subject.id;
  c.label = subject.label;
  c.category = subject.category;
  c.model_id = model_id;
  c.tv = tv_distance(functional, decorative);
  const ContingencyTable table = merge_low_freq(functional.counts, decorative.counts, tau);
  const ChiSquaredResult chi = chi_squared_homogeneity(table);
  c.chi2 = chi.statistic;
  c.df = chi.df;
  c.p_value = chi.p_value;
  c.low_expected = chi.low_expected;
  c.k_effective = static_cast<int>(table.k());
  c.n_functional = functional.total;
  c.n_decorative = decorative.total;
  c.top_n = top_n_diff(functional, decorative, top_n);
  return c;
}

}  // namespace vts
