#pragma once

// Maximum-likelihood fits of four candidate families, goodness-of-fit tests,
// AIC selection, and the two-piece (mixed) truncated log-normal threshold scan.

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

namespace egolayers {

enum class Family { power_law, normal, exponential, log_normal };

inline constexpr Family kAllFamilies[] = {Family::power_law, Family::normal, Family::exponential,
                                          Family::log_normal};

std::string_view family_name(Family family);
std::optional<Family> parse_family(std::string_view name);

struct PowerLawParams {
  double alpha = 2.0;
  double x_min = 1.0;
};
struct NormalParams {
  double mu = 0.0;
  double sigma = 1.0;
};
struct ExponentialParams {
  double lambda = 1.0;
  double scale() const { return 1.0 / lambda; }
};
struct LogNormalParams {
  double mu = 0.0;
  double sigma = 1.0;
};

using FamilyParams = std::variant<PowerLawParams, NormalParams, ExponentialParams, LogNormalParams>;

Family family_of(const FamilyParams& params);
/// Number of parameters estimated from the sample (power law counts x_min).
int parameter_count(Family family);

double pdf(const FamilyParams& params, double x);
double log_pdf(const FamilyParams& params, double x);
double cdf(const FamilyParams& params, double x);
double log_likelihood(const FamilyParams& params, std::span<const double> sample);
std::vector<double> sample_family(const FamilyParams& params, std::size_t n, std::mt19937_64& rng);

struct GofResult {
  double statistic = 0.0;
  double pvalue = 1.0;
};

struct FitResult {
  Family family = Family::normal;
  FamilyParams params;
  double log_likelihood = 0.0;
  double aic = 0.0;
  double ks_stat = 0.0;
  double ks_pvalue = 1.0;
};

/// Closed-form MLE (1/n variances; power law with x_min = sample minimum).
/// Throws ArgumentError for n < 3, DomainError for values outside the family's
/// support, DegenerateSampleError when a scale parameter is undefined.
FitResult fit_family(std::span<const double> sample, Family family);
std::vector<FitResult> fit_all_families(std::span<const double> sample);

/// Minimal AIC; ties go to fewer parameters, then to kAllFamilies order.
Family select_by_aic(std::span<const FitResult> results);

using Cdf = std::function<double(double)>;

/// Survival function of the Kolmogorov limiting distribution, P(K > lambda).
double kolmogorov_survival(double lambda);

/// One-sample two-sided KS statistic with the asymptotic p-value Q(sqrt(n) D).
GofResult ks_test(std::span<const double> sample, const Cdf& cdf);

/// Limiting cdf of the Anderson-Darling statistic (Marsaglia & Marsaglia 2004).
double anderson_darling_asymptotic_cdf(double a2);

/// A^2 with the standard weight; p = 1 - asymptotic cdf. Requires n >= 8.
GofResult ad_test(std::span<const double> sample, const Cdf& cdf);

struct ChiSquareResult {
  double statistic = 0.0;
  double pvalue = 1.0;
  std::size_t bins = 0;
  int dof = 0;
};

struct BinnedCounts {
  std::vector<double> observed;
  std::vector<double> expected;
};

/// Merges adjacent bins left to right until each expected count is >= min_expected;
/// a short trailing remainder is folded into the last merged bin.
BinnedCounts merge_sparse_bins(const BinnedCounts& bins, double min_expected = 5.0);

/// Pearson statistic on pre-binned counts after sparse-bin merging;
/// dof = bins - 1 - estimated_params. Throws InapplicableError when fewer than
/// two bins survive or dof < 1.
ChiSquareResult chi2_from_counts(const BinnedCounts& bins, int estimated_params);

/// Equal-probability binning under `cdf`.
ChiSquareResult chi2_gof(std::span<const double> sample, const Cdf& cdf, std::size_t bin_count,
                         int estimated_params);
std::size_t default_chi2_bins(std::size_t n);

enum class GofStatistic { ks, anderson_darling };

/// Parametric bootstrap: refit `family` on B samples drawn from the fit and
/// compare statistics. Returns (observed statistic, (1 + #exceed) / (B + 1)).
GofResult bootstrap_pvalue(std::span<const double> sample, Family family, GofStatistic statistic,
                           std::size_t resamples, std::uint64_t seed, unsigned threads = 1);

/// Log-normal restricted to x <= bound (upper_bounded) or x > bound (lower_bounded).
struct TruncatedLogNormal {
  enum class Kind { upper_bounded, lower_bounded };

  double mu = 0.0;
  double sigma = 1.0;
  double bound = 1.0;
  Kind kind = Kind::upper_bounded;

  double pdf(double x) const;
  double cdf(double x) const;
};

/// Truncated-likelihood MLE of (mu, sigma) from sufficient statistics of ln x.
TruncatedLogNormal fit_truncated_lognormal(std::span<const double> sample, double bound,
                                           TruncatedLogNormal::Kind kind);

struct MixedFitOptions {
  std::size_t min_side = 10;
  std::size_t max_candidates = 400;  // above this, thresholds follow a log-spaced grid
  std::vector<double> candidates;    // explicit grid; empty means derived from the sample
  double flatness_tolerance = 0.6;
  unsigned threads = 1;
};

struct ResidualPoint {
  double threshold = 0.0;
  double residual = 0.0;
};

struct MixedLogNormalFit {
  double threshold = 0.0;
  TruncatedLogNormal lower;  // x <= threshold
  TruncatedLogNormal upper;  // x > threshold
  double residual = 0.0;
  std::size_t n_lower = 0;
  std::size_t n_upper = 0;
  std::vector<ResidualPoint> curve;
  bool flat = false;  // min residual >= (1 - flatness_tolerance) * median residual
};

/// Residual of a two-piece fit: root-mean-square over the distinct sample
/// points of both sides of (K_fit - K_emp) / (K_fit + K_emp), with K the
/// (truncated) cdf and K_emp the mid-rank empirical cdf of that side.
double mixed_residual(std::span<const double> sorted_sample, double threshold,
                      const TruncatedLogNormal& lower, const TruncatedLogNormal& upper);

/// Scans thresholds and returns the residual minimizer (ties -> smaller k_H).
/// Throws InapplicableError when no candidate leaves min_side points per side.
MixedLogNormalFit fit_mixed_lognormal(std::span<const double> sample, const MixedFitOptions& options = {});

}  // namespace egolayers
