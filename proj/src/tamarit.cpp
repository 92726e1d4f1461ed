#include "egolayers/tamarit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/tools/roots.hpp>
#include <fmt/format.h>

#include "egolayers/error.hpp"

namespace egolayers {
namespace {

// log |e^x - 1|
double log_abs_expm1(double x) {
  if (x > 1.0) return x + std::log1p(-std::exp(-x));
  return x > 0 ? std::log(std::expm1(x)) : std::log(-std::expm1(x));
}

// log((e^mu - 1) / (e^{mu r} - 1)), with the limit -log r at mu = 0
double log_normalizer(double mu, std::size_t r) {
  const double rd = static_cast<double>(r);
  if (std::fabs(mu) < 1e-12) return -std::log(rd) - 0.5 * (rd - 1.0) * mu;
  return log_abs_expm1(mu) - log_abs_expm1(mu * rd);
}

double index_sum(std::span<const std::uint64_t> counts) {
  double s = 0.0;
  for (std::size_t k = 0; k < counts.size(); ++k) s += static_cast<double>(k) * static_cast<double>(counts[k]);
  return s;
}

}  // namespace

std::uint64_t TamaritInput::total() const {
  return std::accumulate(layer_counts.begin(), layer_counts.end(), std::uint64_t{0});
}

void check_input(const TamaritInput& input) {
  if (input.layer_counts.size() < 2) throw ArgumentError("layer model needs at least 2 layers");
  const auto l = input.total();
  if (l < 1) throw ArgumentError("layer model needs at least one alter");
  if (input.population <= l)
    throw ArgumentError(fmt::format("population {} must exceed alter count {}", input.population, l));
}

double layer_log_probability(std::span<const std::uint64_t> layer_counts, double mu) {
  if (layer_counts.size() < 2) throw ArgumentError("layer model needs at least 2 layers");
  double l = 0.0, log_multinomial = 0.0;
  for (auto c : layer_counts) {
    l += static_cast<double>(c);
    log_multinomial -= std::lgamma(static_cast<double>(c) + 1.0);
  }
  log_multinomial += std::lgamma(l + 1.0);
  return log_multinomial + l * log_normalizer(mu, layer_counts.size()) + mu * index_sum(layer_counts);
}

double tamarit_log_likelihood(const TamaritInput& input, double mu) {
  check_input(input);
  if (!std::isfinite(mu)) throw ArgumentError("mu must be finite");
  const double l = static_cast<double>(input.total());
  const double trials = static_cast<double>(input.population - 1);
  const double p = l / trials;
  double log_binomial = std::lgamma(trials + 1.0) - std::lgamma(l + 1.0) - std::lgamma(trials - l + 1.0) +
                        l * std::log(p);
  if (trials > l) log_binomial += (trials - l) * std::log1p(-p);
  return log_binomial + layer_log_probability(input.layer_counts, mu);
}

double expected_layer_index(double mu, std::size_t r) {
  const double top = mu > 0 ? mu * static_cast<double>(r - 1) : 0.0;
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < r; ++k) {
    const double w = std::exp(mu * static_cast<double>(k) - top);
    num += static_cast<double>(k) * w;
    den += w;
  }
  return num / den;
}

std::string_view divergence_name(Divergence d) {
  switch (d) {
    case Divergence::none: return "none";
    case Divergence::toward_negative: return "toward_negative";
    case Divergence::toward_positive: return "toward_positive";
  }
  return "none";
}

TamaritEstimate estimate_mu(const TamaritInput& input) {
  check_input(input);
  const std::size_t r = input.layer_counts.size();
  const double l = static_cast<double>(input.total());
  const double s = index_sum(input.layer_counts);
  auto score = [&](double mu) { return s - l * expected_layer_index(mu, r); };

  TamaritEstimate est;
  if (score(-kMuBound) <= 0) {
    est.mu_hat = -kMuBound;
    est.divergence = Divergence::toward_negative;
  } else if (score(kMuBound) >= 0) {
    est.mu_hat = kMuBound;
    est.divergence = Divergence::toward_positive;
  } else {
    std::uintmax_t iters = 200;
    const auto [a, b] = boost::math::tools::toms748_solve(score, -kMuBound, kMuBound,
                                                          boost::math::tools::eps_tolerance<double>(50), iters);
    est.mu_hat = 0.5 * (a + b);
  }
  est.ratio_hat = std::exp(est.mu_hat);
  est.log_likelihood = tamarit_log_likelihood(input, est.mu_hat);
  return est;
}

RatioPopulationFit ratio_population_fit(std::span<const TamaritEstimate> estimates, std::size_t chi2_bins) {
  RatioPopulationFit out;
  std::vector<double> ratios;
  for (const auto& e : estimates) {
    if (e.divergence != Divergence::none) {
      ++out.excluded;
      continue;
    }
    ratios.push_back(e.ratio_hat);
  }
  out.used = ratios.size();
  if (ratios.size() < 30)
    throw InapplicableError(fmt::format("ratio population fit needs 30 finite estimates, got {}", ratios.size()));
  out.fit = fit_family(ratios, Family::log_normal);
  const auto params = out.fit.params;
  const Cdf model = [&](double x) { return cdf(params, x); };
  out.chi2 = chi2_gof(ratios, model, chi2_bins, parameter_count(Family::log_normal));
  out.ks = {out.fit.ks_stat, out.fit.ks_pvalue};
  out.ad = ad_test(ratios, model);
  std::sort(ratios.begin(), ratios.end());
  const std::size_t n = ratios.size();
  out.median_ratio = n % 2 ? ratios[n / 2] : 0.5 * (ratios[n / 2 - 1] + ratios[n / 2]);
  out.ratio_at_mu = std::exp(std::get<LogNormalParams>(params).mu);
  return out;
}

}  // namespace egolayers
