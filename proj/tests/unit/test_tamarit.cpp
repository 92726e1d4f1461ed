#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "egolayers/error.hpp"
#include "egolayers/synth.hpp"
#include "egolayers/tamarit.hpp"

using namespace egolayers;

namespace {

// Every composition of L into r non-negative parts.
void compositions(std::uint64_t total, std::size_t parts,
                  const std::function<void(const std::vector<std::uint64_t>&)>& visit) {
  std::vector<std::uint64_t> c(parts, 0);
  std::function<void(std::size_t, std::uint64_t)> rec = [&](std::size_t k, std::uint64_t left) {
    if (k + 1 == parts) {
      c[k] = left;
      visit(c);
      return;
    }
    for (std::uint64_t v = 0; v <= left; ++v) {
      c[k] = v;
      rec(k + 1, left - v);
    }
  };
  rec(0, total);
}

double log_binomial_factor(std::uint64_t l, std::uint64_t n) {
  const double p = static_cast<double>(l) / static_cast<double>(n - 1);
  return std::lgamma(n) - std::lgamma(l + 1.0) - std::lgamma(static_cast<double>(n - l)) + l * std::log(p) +
         static_cast<double>(n - 1 - l) * std::log1p(-p);
}

}  // namespace

TEST_CASE("two layers have a closed-form estimate") {
  const auto e = estimate_mu({{5, 10}, 1000});
  CHECK(e.mu_hat == doctest::Approx(std::log(2.0)).epsilon(1e-9));
  CHECK(e.ratio_hat == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(e.divergence == Divergence::none);
  for (std::uint64_t a : {1u, 7u, 130u, 500u})
    for (std::uint64_t b : {1u, 3u, 222u, 500u})
      CHECK(std::abs(estimate_mu({{a, b}, 5000}).mu_hat - std::log(static_cast<double>(b) / a)) < 1e-6);
}

TEST_CASE("equal layers give mu = 0") {
  CHECK(std::abs(estimate_mu({{7, 7, 7, 7}, 100}).mu_hat) < 1e-9);
}

TEST_CASE("mu = 0 is the uniform multinomial") {
  const std::vector<std::uint64_t> l{2, 1, 3};
  const double L = 6;
  const double expected = std::lgamma(L + 1) - std::lgamma(3) - std::lgamma(2) - std::lgamma(4) - L * std::log(3.0);
  CHECK(layer_log_probability(l, 0.0) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(layer_log_probability(l, 1e-12) == doctest::Approx(expected).epsilon(1e-9));
  const TamaritInput in{l, 50};
  CHECK(tamarit_log_likelihood(in, 0.0) == doctest::Approx(expected + log_binomial_factor(6, 50)).epsilon(1e-12));
}

TEST_CASE("model probabilities sum to the binomial factor") {
  for (std::uint64_t L = 1; L <= 8; ++L)
    for (std::size_t r = 2; r <= 3; ++r)
      for (double mu : {-2.0, -0.3, 0.0, 0.7, 1.5}) {
        double sum = 0;
        compositions(L, r, [&](const auto& c) { sum += std::exp(tamarit_log_likelihood({c, 10}, mu)); });
        CHECK(std::abs(sum - std::exp(log_binomial_factor(L, 10))) < 1e-10);
      }
  double sum = 0;
  compositions(2, 2, [&](const auto& c) { sum += std::exp(layer_log_probability(c, 0.4)); });
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("the argmax does not depend on the population") {
  const std::vector<std::uint64_t> l{3, 9, 20, 70};
  CHECK(estimate_mu({l, 200}).mu_hat == doctest::Approx(estimate_mu({l, 100000}).mu_hat).epsilon(1e-12));
}

TEST_CASE("expected layer index") {
  CHECK(expected_layer_index(0.0, 4) == doctest::Approx(1.5));
  CHECK(expected_layer_index(50.0, 4) == doctest::Approx(3.0));
  CHECK(expected_layer_index(-50.0, 4) == doctest::Approx(0.0).scale(1));
}

TEST_CASE("boundary estimates are flagged") {
  const auto up = estimate_mu({{0, 0, 12}, 100});
  CHECK(up.divergence == Divergence::toward_positive);
  CHECK(up.mu_hat == kMuBound);
  const auto down = estimate_mu({{12, 0, 0}, 100});
  CHECK(down.divergence == Divergence::toward_negative);
  CHECK_THROWS_AS(estimate_mu({{3}, 100}), ArgumentError);
  CHECK_THROWS_AS(estimate_mu({{3, 4}, 7}), ArgumentError);
}

TEST_CASE("sampling oracle recovers mu") {
  double sum = 0;
  const int egos = 400;
  for (int e = 0; e < egos; ++e) sum += estimate_mu({sample_tamarit(std::log(3.0), 150, 4, e), 10000}).mu_hat;
  CHECK(std::abs(sum / egos - std::log(3.0)) < 0.05);
}

TEST_CASE("ratio population fit") {
  std::mt19937_64 rng(1);
  std::lognormal_distribution<double> d(std::log(3.0), 0.2);
  std::vector<TamaritEstimate> es;
  for (int i = 0; i < 200; ++i) {
    const double r = d(rng);
    es.push_back({std::log(r), r, 0.0, Divergence::none});
  }
  es.push_back({kMuBound, std::exp(kMuBound), 0.0, Divergence::toward_positive});
  const auto fit = ratio_population_fit(es);
  CHECK(fit.used == 200);
  CHECK(fit.excluded == 1);
  CHECK(fit.ratio_at_mu == doctest::Approx(3.0).epsilon(0.05));

  std::vector<TamaritEstimate> few(es.begin(), es.begin() + 20);
  CHECK_THROWS_AS(ratio_population_fit(few), InapplicableError);
  std::vector<TamaritEstimate> same(40, TamaritEstimate{1.0, std::exp(1.0), 0.0, Divergence::none});
  CHECK_THROWS_AS(ratio_population_fit(same), DegenerateSampleError);
}
