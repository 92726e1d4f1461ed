#include <doctest.h>

#include <cmath>
#include <random>

#include "egolayers/error.hpp"
#include "egolayers/validate.hpp"

using namespace egolayers;

namespace {

using u128 = unsigned __int128;

u128 choose(unsigned n, unsigned k) {
  if (k > n) return 0;
  u128 r = 1;
  for (unsigned i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// P(X >= x) as an exact ratio of integers.
double exact_upper(unsigned x, unsigned n, unsigned ic, unsigned jr) {
  u128 num = 0;
  for (unsigned k = x; k <= std::min(ic, jr); ++k) num += choose(ic, k) * choose(n - ic, jr - k);
  return static_cast<double>(static_cast<long double>(num) / static_cast<long double>(choose(n, jr)));
}

}  // namespace

TEST_CASE("hypergeometric pmf examples") {
  CHECK(hypergeom_pmf(4, 10, 5, 4) == doctest::Approx(5.0 / 210).epsilon(1e-12));
  CHECK(hypergeom_pmf(0, 10, 0, 4) == doctest::Approx(1.0));
  double sum = 0;
  for (unsigned x = 0; x <= 7; ++x) sum += hypergeom_pmf(x, 20, 7, 9);
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(hypergeom_pmf(5, 10, 5, 4) == 0.0);
  CHECK_THROWS_AS(hypergeom_pmf(0, 10, 11, 4), ArgumentError);
}

TEST_CASE("over-expression p-value examples") {
  CHECK(overexpression_pvalue(0, 10, 5, 4) == 1.0);
  CHECK(overexpression_pvalue(4, 10, 5, 4) == doctest::Approx(5.0 / 210).epsilon(1e-12));
  CHECK(overexpression_pvalue(1, 4, 2, 2) == doctest::Approx(5.0 / 6).epsilon(1e-12));
}

TEST_CASE("p-value matches exact enumeration on a small grid") {
  for (unsigned n = 1; n <= 24; ++n)
    for (unsigned ic = 0; ic <= n; ++ic)
      for (unsigned jr = 0; jr <= n; ++jr)
        for (unsigned x = 0; x <= std::min(ic, jr) + 1; ++x)
          CHECK(std::abs(overexpression_pvalue(x, n, ic, jr) - exact_upper(x, n, ic, jr)) < 1e-12);
}

TEST_CASE("p-value is non-increasing in the observed count") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 200; ++t) {
    const std::uint64_t n = 50 + rng() % 5000;
    const std::uint64_t ic = rng() % (n + 1), jr = rng() % (n + 1);
    double prev = 1.0;
    for (std::uint64_t x = 0; x <= std::min(ic, jr) + 1; ++x) {
      const double p = overexpression_pvalue(x, n, ic, jr);
      CHECK(p <= prev + 1e-15);
      CHECK(p >= 0.0);
      prev = p;
    }
  }
}

TEST_CASE("tiny tails stay positive and accurate") {
  // X = ic = jr: single top point C(n - ic, 0) / C(n, ic).
  const double p = overexpression_pvalue(40, 100000, 40, 40);
  CHECK(p > 0.0);
  CHECK(std::log(p) == doctest::Approx(hypergeom_log_pmf(40, 100000, 40, 40)).epsilon(1e-12));
}

TEST_CASE("Bonferroni threshold") {
  CHECK(bonferroni_threshold(100, 0.01) == doctest::Approx(0.01 / 4950).epsilon(1e-12));
  CHECK(bonferroni_threshold(2, 0.01) == doctest::Approx(0.01));
  CHECK(bonferroni_threshold(5, 0.05) == doctest::Approx(5e-3));
  CHECK_THROWS_AS(bonferroni_threshold(1, 0.01), ArgumentError);
  CHECK_THROWS_AS(bonferroni_threshold(10, 0.0), ArgumentError);
}

TEST_CASE("retention rules") {
  const double pb = 1e-6;
  CHECK(is_significant(pb / 2, pb / 2, pb, RetentionRule::both_directions));
  CHECK_FALSE(is_significant(pb / 2, 2 * pb, pb, RetentionRule::both_directions));
  CHECK(is_significant(pb / 2, 2 * pb, pb, RetentionRule::either_direction));
}

TEST_CASE("strong pair survives among independent background") {
  std::vector<NamedCount> counts;
  std::mt19937_64 rng(9);
  for (int i = 0; i < 30; ++i)
    for (int j = 0; j < 30; ++j)
      if (i != j && rng() % 3 == 0) counts.push_back({"N" + std::to_string(i), "N" + std::to_string(j), 1});
  counts.push_back({"N0", "N1", 400});
  counts.push_back({"N1", "N0", 400});
  const auto net = WeightedNetwork::from_counts(counts);
  const auto result = validate_network(net);
  CHECK(result.tests == 2 * net.edge_count());
  CHECK(result.threshold == doctest::Approx(bonferroni_threshold(net.node_count(), 0.01)));
  REQUIRE(result.network.edge_count() == 1);
  CHECK(result.network.name(result.network.edges()[0].i) == "N0");
  CHECK(result.report.size() == net.edge_count());
  CHECK(validate_network(net, {}, 4).report.size() == result.report.size());

  const auto tested = validate_network(net, {0.01, RetentionRule::both_directions, BonferroniUniverse::tested_edges});
  CHECK(tested.threshold == doctest::Approx(0.01 / static_cast<double>(net.edge_count())));
}
