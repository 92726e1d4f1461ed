#pragma once

// Single-parameter layer model: the probability that L alters split into r
// layers with counts l_1..l_r (inner -> outer) is
//   B(L | N-1, L/(N-1)) * L!/prod(l_k!) * ((e^mu - 1)/(e^{mu r} - 1))^L * e^{mu sum_k k l_{k+1}},
// so layer k+1 carries weight proportional to e^{mu k} and e^mu is the scale ratio.

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "egolayers/distfit.hpp"

namespace egolayers {

struct TamaritInput {
  std::vector<std::uint64_t> layer_counts;  // l_1..l_r, inner -> outer
  std::uint64_t population = 0;             // N

  std::uint64_t total() const;  // L
};

/// Throws ArgumentError unless r >= 2, L >= 1 and N > L.
void check_input(const TamaritInput& input);

/// log of the mu-dependent multinomial factor (sums to 1 over compositions of L).
double layer_log_probability(std::span<const std::uint64_t> layer_counts, double mu);
/// log of the full model probability, binomial factor included.
double tamarit_log_likelihood(const TamaritInput& input, double mu);

/// Mean layer index E[k] under weights e^{mu k}, k = 0..r-1.
double expected_layer_index(double mu, std::size_t r);

enum class Divergence { none, toward_negative, toward_positive };
std::string_view divergence_name(Divergence d);

struct TamaritEstimate {
  double mu_hat = 0.0;
  double ratio_hat = 1.0;  // exp(mu_hat)
  double log_likelihood = 0.0;
  Divergence divergence = Divergence::none;
};

inline constexpr double kMuBound = 10.0;

/// Maximum-likelihood mu on [-10, 10] as the root of the (monotone) score
/// sum_k k l_{k+1} - L E_mu[k]. Estimates that would leave the bracket are
/// pinned to the boundary and flagged.
TamaritEstimate estimate_mu(const TamaritInput& input);

struct RatioPopulationFit {
  FitResult fit;  // log-normal fit of the finite ratios
  ChiSquareResult chi2;
  GofResult ks;
  GofResult ad;
  std::size_t used = 0;
  std::size_t excluded = 0;   // divergent estimates
  double median_ratio = 0.0;
  double ratio_at_mu = 0.0;  // exp(mu_L)
};

/// Throws InapplicableError with fewer than 30 non-divergent estimates;
/// DegenerateSampleError propagates when every ratio is equal. chi2_bins = 0
/// uses default_chi2_bins.
RatioPopulationFit ratio_population_fit(std::span<const TamaritEstimate> estimates, std::size_t chi2_bins = 0);

}  // namespace egolayers
