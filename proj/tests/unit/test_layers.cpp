#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "egolayers/error.hpp"
#include "egolayers/layers.hpp"
#include "egolayers/synth.hpp"

using namespace egolayers;

namespace {

// Minimal SSE over all contiguous k-partitions of sorted values.
double exhaustive_sse(std::vector<double> v, int k) {
  std::sort(v.begin(), v.end());
  const int n = static_cast<int>(v.size());
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> cuts(k - 1);
  auto cost = [&](int a, int b) {
    double m = 0;
    for (int i = a; i < b; ++i) m += v[i];
    m /= (b - a);
    double s = 0;
    for (int i = a; i < b; ++i) s += (v[i] - m) * (v[i] - m);
    return s;
  };
  auto rec = [&](auto&& self, int start, int depth, double acc) -> void {
    if (depth == k - 1) {
      best = std::min(best, acc + cost(start, n));
      return;
    }
    for (int c = start + 1; c <= n - (k - 1 - depth); ++c) self(self, c, depth + 1, acc + cost(start, c));
  };
  rec(rec, 0, 0, 0.0);
  return best;
}

std::vector<std::vector<int>> groups(std::span<const double> values, std::span<const int> labels) {
  std::map<int, std::vector<int>> by;
  for (std::size_t i = 0; i < values.size(); ++i) by[labels[i]].push_back(static_cast<int>(values[i]));
  std::vector<std::vector<int>> out;
  for (auto& [_, g] : by) {
    std::sort(g.begin(), g.end());
    out.push_back(g);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("weight normalization") {
  const std::vector<double> a{2, 5, 8};
  CHECK(*normalize_weights(a) == std::vector<double>{0, 0.5, 1});
  const std::vector<double> b{1, 11};
  CHECK(*normalize_weights(b) == std::vector<double>{0, 1});
  const std::vector<double> c{3, 3, 3};
  CHECK_FALSE(normalize_weights(c).has_value());
  const std::vector<double> d{3};
  CHECK_THROWS_AS(normalize_weights(d), ArgumentError);
}

TEST_CASE("optimal partition examples") {
  const std::vector<double> a{1, 1, 1, 10, 10, 10};
  const auto p = optimal_partition(a, 2);
  CHECK(p.sse == 0.0);
  CHECK(p.labels == std::vector<int>{0, 0, 0, 1, 1, 1});

  const std::vector<double> b{-1, 2, -1, 2, 4, 5, 6, -1, -1, -1};
  const auto q = optimal_partition(b, 3);
  CHECK(groups(b, q.labels) == std::vector<std::vector<int>>{{-1, -1, -1, -1, -1}, {2, 2}, {4, 5, 6}});

  const std::vector<double> c{0.3, 9, 1, 4};
  const auto r = optimal_partition(c, 4);
  CHECK(r.sse == 0.0);
  CHECK(r.labels == std::vector<int>{0, 3, 1, 2});
  CHECK_THROWS_AS(optimal_partition(c, 5), ArgumentError);
}

TEST_CASE("dynamic program equals exhaustive search") {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 300; ++t) {
    const int n = 1 + static_cast<int>(rng() % 12);
    const int k = 1 + static_cast<int>(rng() % std::min(4, n));
    std::vector<double> v(n);
    for (auto& x : v) x = static_cast<double>(rng() % 50) / 4.0;
    const auto p = optimal_partition(v, k);
    CHECK(p.sse == doctest::Approx(exhaustive_sse(v, k)).epsilon(1e-12).scale(1e-9));
    CHECK(p.sse == doctest::Approx(partition_sse(v, p.labels)).epsilon(1e-12).scale(1e-9));
  }
}

TEST_CASE("BIC picks the planted cluster count") {
  std::mt19937_64 rng(4);
  std::vector<double> v;
  for (double center : {0.0, 0.3, 1.0})
    for (int i = 0; i < 30; ++i) v.push_back(center + std::normal_distribution<double>(0, 0.01)(rng));
  const auto r = kmeans_1d(v, 8);
  CHECK(r.partition.cluster_count == 3);
  CHECK(r.bic.size() == 8);

  const std::vector<double> two{0, 0, 1};
  CHECK(kmeans_1d(two, 8).bic.size() == 2);
}

TEST_CASE("head/tail breaks traces") {
  const std::vector<double> a{1, 1, 1, 1, 1, 1, 6, 12};
  const auto r = ht_break(a);
  CHECK(r.breaks == std::vector<double>{3, 9});
  CHECK(r.partition.cluster_count == 3);
  const auto s = summarize_layers(a, r.partition.labels, LayerAlgorithm::ht_break);
  CHECK(s.layer_counts == std::vector<std::size_t>{1, 1, 6});

  const std::vector<double> b{1, 2, 3, 4};
  const auto q = ht_break(b);
  CHECK(q.breaks == std::vector<double>{2.5});
  CHECK(q.partition.cluster_count == 2);

  const std::vector<double> c{5, 5, 5};
  CHECK(ht_break(c).partition.cluster_count == 1);
  CHECK(ht_break(c).breaks.empty());
}

TEST_CASE("head/tail breaks on heavy tails keep heads under the limit") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> v(10000);
  for (auto& x : v) x = std::pow(1 - u(rng), -1.0 / 1.5);
  const auto r = ht_break(v);
  REQUIRE(r.head_fractions.size() >= 2);
  for (std::size_t i = 0; i + 1 < r.head_fractions.size(); ++i) CHECK(r.head_fractions[i] < 0.4);
}

TEST_CASE("layer summaries") {
  std::vector<double> w;
  std::vector<int> labels;
  const std::size_t sizes[] = {5, 10, 35, 100};
  const double means[] = {1000, 300, 100, 30};
  for (int k = 0; k < 4; ++k)
    for (std::size_t i = 0; i < sizes[k]; ++i) {
      w.push_back(means[k]);
      labels.push_back(10 + k);
    }
  const auto s = summarize_layers(w, labels);
  CHECK(s.cumulative == std::vector<std::size_t>{5, 15, 50, 150});
  REQUIRE(s.ratios.size() == 3);
  CHECK(s.ratios[1] == doctest::Approx(10.0 / 3));
  CHECK(*s.mean_ratio == doctest::Approx((3 + 10.0 / 3 + 3) / 3));

  const std::vector<double> one_w{4, 5};
  const std::vector<int> one_l{0, 0};
  const auto single = summarize_layers(one_w, one_l);
  CHECK(single.cumulative == std::vector<std::size_t>{2});
  CHECK_FALSE(single.mean_ratio.has_value());

  // Inner layer is the higher-mean cluster even when it is larger.
  std::vector<double> w2(28, 10.0);
  w2.insert(w2.end(), 94, 1.0);
  std::vector<int> l2(28, 0);
  l2.insert(l2.end(), 94, 1);
  const auto s2 = summarize_layers(w2, l2);
  CHECK(s2.layer_counts == std::vector<std::size_t>{28, 94});
  CHECK(s2.layer_of.front() == 0);
}

TEST_CASE("Jaccard agreement") {
  const std::vector<int> a{0, 0, 1, 1};
  CHECK(jaccard_compare(a, a) == 1.0);
  const std::vector<int> all{0, 0, 0, 0};
  const std::vector<int> singles{0, 1, 2, 3};
  CHECK(jaccard_compare(all, singles) == 0.0);
  const std::vector<int> b{0, 0, 1, 2};
  CHECK(jaccard_compare(a, b) == doctest::Approx(0.5));
  CHECK(jaccard_compare(a, b) == jaccard_compare(b, a));
  const double bm = jaccard_compare(a, b, JaccardVariant::best_match);
  CHECK(bm > 0.0);
  CHECK(bm <= 1.0);
  const std::vector<int> short_labels{0, 1};
  CHECK_THROWS_AS(jaccard_compare(a, short_labels), ArgumentError);
}

TEST_CASE("census of an empty network") {
  const auto c = layer_census(WeightedNetwork{});
  CHECK(c.egos == 0);
  CHECK(c.rows.empty());
}

TEST_CASE("census of zero-dispersion planted bands") {
  EgoPopulationConfig config;
  config.egos = 50;
  config.bands.dispersions = {0, 0, 0, 0};
  const auto pop = gen_layered_ego_population(config);
  for (auto alg : {LayerAlgorithm::kmeans}) {
    const auto c = layer_census(pop.network, {100, alg, 8, 2});
    CHECK(c.egos == 50);
    REQUIRE(c.rows.size() == 1);
    CHECK(c.rows[0].layers == 4);
    CHECK(c.rows[0].fraction == 1.0);
    CHECK(c.rows[0].mean_cumulative == std::vector<double>{5, 15, 50, 150});
  }
  const auto km = layer_census(pop.network, {100, LayerAlgorithm::kmeans, 8, 1});
  const auto ht = layer_census(pop.network, {100, LayerAlgorithm::ht_break, 8, 1});
  const auto j = mean_jaccard(km, ht);
  REQUIRE(j.has_value());
  CHECK(*j >= 0.0);
  CHECK(*j <= 1.0);
}

TEST_CASE("Dunbar reference row") {
  const auto r = dunbar_reference_row();
  CHECK(r.mean_cumulative == std::vector<double>{5, 15, 50, 150});
  CHECK(*r.mean_ratio == 3.0);
}
