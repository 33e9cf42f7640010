#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "vtstyle/error.hpp"
#include "vtstyle/stats.hpp"

using namespace vts;

namespace {

TermDistribution dist(std::map<std::string, long long> counts, StyleFamily style = StyleFamily::functional,
                      std::string font = "") {
  TermDistribution d;
  d.stratum = {"c", style, "m", font.empty() ? std::nullopt : std::optional<std::string>(font)};
  d.counts = std::move(counts);
  for (const auto& [t, c] : d.counts) d.total += c;
  return d;
}

AttributeList list(std::vector<std::string> terms) {
  AttributeList a;
  a.terms = std::move(terms);
  return a;
}

}  // namespace

TEST_CASE("build_distribution counting modes") {
  const std::vector<AttributeList> two = {list({"a", "b"}), list({"a"})};
  const auto occ = build_distribution(two, CountingMode::occurrence);
  CHECK(occ.counts == std::map<std::string, long long>{{"a", 2}, {"b", 1}});
  CHECK(occ.total == 3);

  const std::vector<AttributeList> dup = {list({"a", "a", "b"})};
  const auto per = build_distribution(dup, CountingMode::per_list);
  CHECK(per.counts == std::map<std::string, long long>{{"a", 1}, {"b", 1}});
  CHECK(per.total == 2);

  const std::vector<AttributeList> empty = {list({})};
  CHECK_THROWS_AS(build_distribution(empty, CountingMode::occurrence), InsufficientDataError);
  CHECK_THROWS_AS(build_distribution({}, CountingMode::occurrence), InsufficientDataError);

  double sum = 0;
  for (const auto& [t, c] : occ.counts) sum += occ.probability(t);
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(occ.probability("zzz") == 0.0);
}

TEST_CASE("shared vocabulary order") {
  const auto p = dist({{"b", 2}, {"a", 1}, {"z", 4}});
  const auto q = dist({{"a", 1}, {"c", 2}});
  CHECK(shared_vocabulary(p, q) == std::vector<std::string>{"z", "a", "b", "c"});
}

TEST_CASE("tv distance examples") {
  const auto p = dist({{"a", 2}, {"b", 2}});
  const auto q = dist({{"a", 1}, {"b", 3}});
  CHECK(tv_distance(p, q) == 0.25);
  CHECK(tv_distance(p, p) == 0.0);
  CHECK(tv_distance(p, dist({{"c", 7}})) == 1.0);
  CHECK(tv_distance(p, dist({{"a", 20}, {"b", 20}})) == 0.0);
  TermDistribution empty;
  CHECK_THROWS_AS(tv_distance(p, empty), InsufficientDataError);
}

TEST_CASE("tv matches the brute-force oracle on random tables") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    std::map<std::string, long long> a, b;
    const int vocab = 1 + static_cast<int>(rng() % 20);
    for (int i = 0; i < vocab; ++i) {
      const std::string t = "t" + std::to_string(i);
      if (rng() % 3) a[t] = static_cast<long long>(rng() % 50);
      if (rng() % 3) b[t] = static_cast<long long>(rng() % 50);
    }
    a["t0"] += 1;
    b["t1"] += 1;
    const double tv = tv_distance(dist(a), dist(b));
    CHECK(std::fabs(tv - oracle::brute_tv(a, b)) < 1e-12);
  }
}

TEST_CASE("tv is scale invariant while chi-squared scales") {
  const auto f = dist({{"a", 20}, {"b", 10}});
  const auto d = dist({{"a", 10}, {"b", 20}});
  const auto f2 = dist({{"a", 40}, {"b", 20}});
  const auto d2 = dist({{"a", 20}, {"b", 40}});
  CHECK(tv_distance(f, d) == tv_distance(f2, d2));
  const auto c1 = chi_squared_homogeneity(merge_low_freq(f.counts, d.counts, 0));
  const auto c2 = chi_squared_homogeneity(merge_low_freq(f2.counts, d2.counts, 0));
  CHECK(c2.statistic == doctest::Approx(2 * c1.statistic).epsilon(1e-12));
}

TEST_CASE("merge_low_freq hand example") {
  const std::map<std::string, long long> f = {{"a", 10}, {"b", 2}, {"c", 1}};
  const std::map<std::string, long long> d = {{"a", 8}, {"b", 1}, {"c", 0}};
  const auto t = merge_low_freq(f, d, 5);
  CHECK(t.columns == std::vector<std::string>{"a", std::string(kOtherBin)});
  CHECK(t.functional == std::vector<long long>{10, 3});
  CHECK(t.decorative == std::vector<long long>{8, 1});
  CHECK(t.has_other);
  CHECK(t.merged_terms == 2);

  const auto id = merge_low_freq(f, d, 0);
  CHECK_FALSE(id.has_other);
  CHECK(id.columns == std::vector<std::string>{"a", "b", "c"});
  CHECK(id.functional == std::vector<long long>{10, 2, 1});

  CHECK_THROWS_AS(merge_low_freq(f, d, 100), InsufficientDataError);
  CHECK_THROWS_AS(merge_low_freq(f, d, -1), ValidationError);
}

TEST_CASE("merge threshold is strict less-than on the combined count") {
  const auto t = merge_low_freq({{"a", 3}, {"b", 2}, {"c", 9}}, {{"a", 2}, {"b", 2}, {"c", 9}}, 5);
  // a sums to 5 and stays; b sums to 4 and merges.
  CHECK(t.columns == std::vector<std::string>{"c", "a", std::string(kOtherBin)});
}

TEST_CASE("a literal term named like the bin is escaped") {
  const std::string bin(kOtherBin);
  const auto t = merge_low_freq({{bin, 10}, {"x", 1}, {"y", 20}}, {{bin, 10}, {"x", 1}, {"y", 5}}, 5);
  REQUIRE(t.k() == 3);
  CHECK(t.columns[0] == "y");
  CHECK(t.columns[1] == "\\" + bin);
  CHECK(t.columns[2] == bin);
  CHECK(t.functional[2] == 1);
  CHECK(escape_term("\\" + bin) == "\\\\" + bin);
  CHECK(escape_term("loyal") == "loyal");
}

TEST_CASE("chi-squared examples") {
  auto run = [](std::vector<long long> f, std::vector<long long> d) {
    ContingencyTable t;
    t.columns = {"x", "y"};
    t.functional = std::move(f);
    t.decorative = std::move(d);
    return chi_squared_homogeneity(t);
  };
  const auto homo = run({10, 10}, {10, 10});
  CHECK(homo.statistic == 0.0);
  CHECK(homo.df == 1);
  CHECK(homo.p_value == 1.0);

  const auto split = run({20, 10}, {10, 20});
  CHECK(split.statistic == doctest::Approx(20.0 / 3.0).epsilon(1e-12));
  CHECK(split.statistic == doctest::Approx(oracle::pearson({20, 10}, {10, 20})).epsilon(1e-12));
  CHECK(std::fabs(split.p_value - 0.00982) < 1e-4);
  CHECK(std::fabs(split.p_value - oracle::chi2_upper_tail(20.0 / 3.0, 1)) < 1e-10);

  const auto prop = run({10, 20}, {20, 40});
  CHECK(prop.statistic == 0.0);
  CHECK(prop.p_value == 1.0);

  CHECK(run({1, 1}, {1, 1}).low_expected);
  CHECK_FALSE(split.low_expected);
  CHECK_THROWS_AS(run({0, 0}, {3, 4}), ValidationError);
  CHECK_THROWS_AS(run({3, 0}, {3, 0}), ValidationError);
}

TEST_CASE("chi2_upper_tail against quadrature") {
  CHECK(chi2_upper_tail(0.0, 1) == 1.0);
  CHECK(chi2_upper_tail(0.0, 37) == 1.0);
  CHECK(std::fabs(chi2_upper_tail(3.841459, 1) - 0.05) < 1e-4);
  const double far = chi2_upper_tail(200.0, 1);
  CHECK(far > 0.0);
  CHECK(far < 1e-40);
  for (int df : {1, 2, 3, 7, 20, 120, 500}) {
    double prev = 1.0;
    for (double x : {0.05, 0.5, 1.0, 4.0, 10.0, 50.0, 150.0, 400.0, 600.0}) {
      const double p = chi2_upper_tail(x, df);
      CHECK(std::fabs(p - oracle::chi2_upper_tail(x, df)) < 1e-10);
      CHECK(p <= prev);
      prev = p;
    }
  }
  CHECK_THROWS_AS(chi2_upper_tail(1.0, 0), ValidationError);
  CHECK_THROWS_AS(chi2_upper_tail(-1.0, 2), ValidationError);
  CHECK_THROWS_AS(chi2_upper_tail(std::nan(""), 2), ValidationError);
}

TEST_CASE("within/across pair counts and identity") {
  std::map<FontKey, TermDistribution> fonts;
  for (int i = 0; i < 8; ++i) {
    fonts[{StyleFamily::functional, "f" + std::to_string(i)}] = dist({{"a", 3}, {"b", 1}});
    fonts[{StyleFamily::decorative, "d" + std::to_string(i)}] = dist({{"a", 3}, {"b", 1}});
  }
  auto w = within_across_tv(fonts);
  CHECK(w.pairs_functional == 28);
  CHECK(w.pairs_decorative == 28);
  CHECK(w.pairs_across == 64);
  CHECK(w.within_functional == 0.0);
  CHECK(w.across == 0.0);

  for (int i = 0; i < 8; ++i) fonts[{StyleFamily::decorative, "d" + std::to_string(i)}] = dist({{"a", 1}, {"b", 1}});
  w = within_across_tv(fonts);
  CHECK(w.within_functional == 0.0);
  CHECK(w.within_decorative == 0.0);
  CHECK(w.across == doctest::Approx(0.25).epsilon(1e-15));

  std::map<FontKey, TermDistribution> small = {{{StyleFamily::functional, "f0"}, dist({{"a", 1}})},
                                               {{StyleFamily::functional, "f1"}, dist({{"a", 1}})},
                                               {{StyleFamily::functional, "f2"}, dist({{"a", 1}})},
                                               {{StyleFamily::decorative, "d0"}, dist({{"a", 1}})},
                                               {{StyleFamily::decorative, "d1"}, dist({{"b", 1}})}};
  w = within_across_tv(small);
  CHECK(w.pairs_functional == 3);
  CHECK(w.pairs_decorative == 1);
  CHECK(w.pairs_across == 6);
  CHECK(w.within_decorative == 1.0);
  CHECK(w.across == 0.5);

  small[{StyleFamily::decorative, "Bad Font"}] = TermDistribution{};
  try {
    within_across_tv(small);
    FAIL("expected a zero-total error");
  } catch (const InsufficientDataError& e) {
    CHECK(std::string(e.what()).find("Bad Font") != std::string::npos);
  }
  small.erase({StyleFamily::decorative, "Bad Font"});
  small.erase({StyleFamily::decorative, "d1"});
  CHECK_THROWS_AS(within_across_tv(small), InsufficientDataError);
}

TEST_CASE("top-n diff") {
  const auto p = dist({{"loyal", 100}, {"playful", 90}, {"small", 80}, {"calm", 10}});
  const auto q = dist({{"loyal", 95}, {"playful", 85}, {"calm", 80}, {"small", 9}});
  const auto diff = top_n_diff(p, q, 3);
  CHECK(diff.only_functional == std::vector<std::string>{"small"});
  CHECK(diff.only_decorative == std::vector<std::string>{"calm"});
  CHECK_FALSE(diff.stable());
  CHECK_FALSE(diff.short_vocabulary);

  CHECK(top_n_diff(p, p, 3).stable());
  CHECK(rank_terms(dist({{"b", 5}, {"a", 5}, {"c", 9}}), 2) == std::vector<std::string>{"c", "a"});

  const auto shortv = top_n_diff(dist({{"a", 5}, {"b", 5}}), dist({{"c", 1}, {"a", 2}, {"d", 1}}), 3);
  CHECK(shortv.short_vocabulary);
  CHECK(shortv.only_functional == std::vector<std::string>{"b"});
  CHECK(shortv.only_decorative == std::vector<std::string>{"c", "d"});
  CHECK_THROWS_AS(top_n_diff(p, q, 0), ValidationError);
}

TEST_CASE("compare_styles assembles every field") {
  const Concept c{"beagle", "Beagle", Category::dog};
  const auto f = dist({{"a", 20}, {"b", 10}});
  const auto d = dist({{"a", 10}, {"b", 20}});
  const auto s = compare_styles(c, "m", f, d, 5, 1);
  CHECK(s.label == "Beagle");
  CHECK(s.tv == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(s.df == s.k_effective - 1);
  CHECK(s.k_effective == 2);
  CHECK(s.n_functional == 30);
  CHECK(s.top_n.only_functional == std::vector<std::string>{"a"});
  CHECK(s.top_n.only_decorative == std::vector<std::string>{"b"});
}

TEST_CASE("counting mode names") {
  CHECK(parse_counting_mode(to_string(CountingMode::per_list)) == CountingMode::per_list);
  CHECK_THROWS_AS(parse_counting_mode("bogus"), ValidationError);
}
