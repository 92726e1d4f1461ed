#include "egolayers/distfit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/minima.hpp>
#include <fmt/format.h>

#include "egolayers/error.hpp"
#include "egolayers/parallel.hpp"

namespace egolayers {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kLogSqrt2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double log_norm_cdf(double z) {
  if (z > -30.0) return std::log(norm_cdf(z));
  const double z2 = z * z;
  return -0.5 * z2 - std::log(-z) - kLogSqrt2Pi + std::log1p(-1.0 / z2 + 3.0 / (z2 * z2));
}

double log_norm_pdf(double z) { return -0.5 * z * z - kLogSqrt2Pi; }

struct Moments {
  double mean = 0.0;
  double variance = 0.0;  // 1/n
};

Moments moments(std::span<const double> values) {
  Moments m;
  const double n = static_cast<double>(values.size());
  m.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - m.mean) * (v - m.mean);
  m.variance = ss / n;
  return m;
}

double pdf_impl(const FamilyParams& params, double x, bool log_scale) {
  return std::visit(
      [&](const auto& p) -> double {
        using T = std::decay_t<decltype(p)>;
        double lp;
        if constexpr (std::is_same_v<T, PowerLawParams>) {
          lp = x < p.x_min ? -kInf
                           : std::log(p.alpha - 1.0) - std::log(p.x_min) - p.alpha * std::log(x / p.x_min);
        } else if constexpr (std::is_same_v<T, NormalParams>) {
          lp = log_norm_pdf((x - p.mu) / p.sigma) - std::log(p.sigma);
        } else if constexpr (std::is_same_v<T, ExponentialParams>) {
          lp = x < 0 ? -kInf : std::log(p.lambda) - p.lambda * x;
        } else {
          lp = x <= 0 ? -kInf
                      : log_norm_pdf((std::log(x) - p.mu) / p.sigma) - std::log(p.sigma) - std::log(x);
        }
        return log_scale ? lp : std::exp(lp);
      },
      params);
}

}  // namespace

std::string_view family_name(Family family) {
  switch (family) {
    case Family::power_law: return "power_law";
    case Family::normal: return "normal";
    case Family::exponential: return "exponential";
    case Family::log_normal: return "log_normal";
  }
  return "unknown";
}

std::optional<Family> parse_family(std::string_view name) {
  for (Family f : kAllFamilies)
    if (family_name(f) == name) return f;
  return std::nullopt;
}

Family family_of(const FamilyParams& params) {
  return static_cast<Family>(params.index());
}

int parameter_count(Family family) {
  return family == Family::exponential ? 1 : 2;
}

double pdf(const FamilyParams& params, double x) { return pdf_impl(params, x, false); }
double log_pdf(const FamilyParams& params, double x) { return pdf_impl(params, x, true); }

double cdf(const FamilyParams& params, double x) {
  return std::visit(
      [&](const auto& p) -> double {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, PowerLawParams>) {
          return x < p.x_min ? 0.0 : -std::expm1((1.0 - p.alpha) * std::log(x / p.x_min));
        } else if constexpr (std::is_same_v<T, NormalParams>) {
          return norm_cdf((x - p.mu) / p.sigma);
        } else if constexpr (std::is_same_v<T, ExponentialParams>) {
          return x <= 0 ? 0.0 : -std::expm1(-p.lambda * x);
        } else {
          return x <= 0 ? 0.0 : norm_cdf((std::log(x) - p.mu) / p.sigma);
        }
      },
      params);
}

double log_likelihood(const FamilyParams& params, std::span<const double> sample) {
  double total = 0.0;
  for (double x : sample) total += log_pdf(params, x);
  return total;
}

std::vector<double> sample_family(const FamilyParams& params, std::size_t n, std::mt19937_64& rng) {
  std::vector<double> out(n);
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, PowerLawParams>) {
          std::uniform_real_distribution<double> u(0.0, 1.0);
          for (auto& x : out) x = p.x_min * std::pow(1.0 - u(rng), -1.0 / (p.alpha - 1.0));
        } else if constexpr (std::is_same_v<T, NormalParams>) {
          std::normal_distribution<double> d(p.mu, p.sigma);
          for (auto& x : out) x = d(rng);
        } else if constexpr (std::is_same_v<T, ExponentialParams>) {
          std::exponential_distribution<double> d(p.lambda);
          for (auto& x : out) x = d(rng);
        } else {
          std::lognormal_distribution<double> d(p.mu, p.sigma);
          for (auto& x : out) x = d(rng);
        }
      },
      params);
  return out;
}

FitResult fit_family(std::span<const double> sample, Family family) {
  if (sample.size() < 3) throw ArgumentError("fit_family needs at least 3 values");
  const double n = static_cast<double>(sample.size());
  FitResult result;
  result.family = family;
  switch (family) {
    case Family::normal: {
      const auto m = moments(sample);
      if (!(m.variance > 0)) throw DegenerateSampleError("zero variance: normal fit undefined");
      result.params = NormalParams{m.mean, std::sqrt(m.variance)};
      break;
    }
    case Family::exponential: {
      for (double x : sample)
        if (x < 0) throw DomainError(fmt::format("exponential fit got negative value {}", x));
      const double mean = std::accumulate(sample.begin(), sample.end(), 0.0) / n;
      if (!(mean > 0)) throw DegenerateSampleError("zero mean: exponential fit undefined");
      result.params = ExponentialParams{1.0 / mean};
      break;
    }
    case Family::log_normal: {
      std::vector<double> logs;
      logs.reserve(sample.size());
      for (double x : sample) {
        if (!(x > 0)) throw DomainError(fmt::format("log-normal fit got nonpositive value {}", x));
        logs.push_back(std::log(x));
      }
      const auto m = moments(logs);
      if (!(m.variance > 0)) throw DegenerateSampleError("zero log-variance: log-normal fit undefined");
      result.params = LogNormalParams{m.mean, std::sqrt(m.variance)};
      break;
    }
    case Family::power_law: {
      double x_min = kInf;
      for (double x : sample) {
        if (!(x > 0)) throw DomainError(fmt::format("power-law fit got nonpositive value {}", x));
        x_min = std::min(x_min, x);
      }
      double sum_log = 0.0;
      for (double x : sample) sum_log += std::log(x / x_min);
      if (!(sum_log > 0)) throw DegenerateSampleError("all values equal x_min: power-law fit undefined");
      result.params = PowerLawParams{1.0 + n / sum_log, x_min};
      break;
    }
  }
  result.log_likelihood = log_likelihood(result.params, sample);
  result.aic = 2.0 * parameter_count(family) - 2.0 * result.log_likelihood;
  const auto ks = ks_test(sample, [&](double x) { return cdf(result.params, x); });
  result.ks_stat = ks.statistic;
  result.ks_pvalue = ks.pvalue;
  return result;
}

std::vector<FitResult> fit_all_families(std::span<const double> sample) {
  std::vector<FitResult> fits;
  for (Family f : kAllFamilies) fits.push_back(fit_family(sample, f));
  return fits;
}

Family select_by_aic(std::span<const FitResult> results) {
  if (results.empty()) throw ArgumentError("select_by_aic needs at least one fit");
  const FitResult* best = &results.front();
  for (const auto& r : results) {
    const auto key = [](const FitResult& f) {
      return std::make_tuple(f.aic, parameter_count(f.family), static_cast<int>(f.family));
    };
    if (key(r) < key(*best)) best = &r;
  }
  return best->family;
}

double kolmogorov_survival(double lambda) {
  if (lambda <= 0) return 1.0;
  if (lambda < 1.18) {
    // P(K <= lambda) = sqrt(2 pi)/lambda * sum exp(-(2k-1)^2 pi^2 / (8 lambda^2))
    const double y = std::exp(-std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda));
    const double y8 = std::pow(y, 8);
    const double lower = std::sqrt(2.0 * std::numbers::pi) / lambda * y *
                         (1.0 + y8 * (1.0 + y8 * y8 * (1.0 + y8 * y8 * y8)));
    return std::clamp(1.0 - lower, 0.0, 1.0);
  }
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += sign * term;
    if (term < 1e-18) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

GofResult ks_test(std::span<const double> sample, const Cdf& cdf_fn) {
  if (sample.empty()) throw ArgumentError("ks_test needs at least one value");
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = cdf_fn(sorted[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return {d, kolmogorov_survival(std::sqrt(n) * d)};
}

double anderson_darling_asymptotic_cdf(double z) {
  if (z <= 0) return 0.0;
  if (z < 2.0) {
    return std::exp(-1.2337141 / z) / std::sqrt(z) *
           (2.00012 + (0.247105 - (0.0649821 - (0.0347962 - (0.011672 - 0.00168691 * z) * z) * z) * z) * z);
  }
  return std::exp(-std::exp(1.0776 - (2.30695 - (0.43424 - (0.082433 - (0.008056 - 0.0003146 * z) * z) * z) * z) * z));
}

GofResult ad_test(std::span<const double> sample, const Cdf& cdf_fn) {
  if (sample.size() < 8) throw ArgumentError("ad_test needs at least 8 values");
  std::vector<double> f(sample.size());
  std::transform(sample.begin(), sample.end(), f.begin(), [&](double x) {
    return std::clamp(cdf_fn(x), 1e-300, 1.0 - 1e-16);
  });
  std::sort(f.begin(), f.end());
  const std::size_t n = f.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    s += (2.0 * i + 1.0) * (std::log(f[i]) + std::log1p(-f[n - 1 - i]));
  const double a2 = std::max(0.0, -static_cast<double>(n) - s / static_cast<double>(n));
  return {a2, 1.0 - anderson_darling_asymptotic_cdf(a2)};
}

BinnedCounts merge_sparse_bins(const BinnedCounts& bins, double min_expected) {
  if (bins.observed.size() != bins.expected.size())
    throw ArgumentError("observed and expected bin counts differ in length");
  BinnedCounts merged;
  double acc_o = 0.0, acc_e = 0.0;
  for (std::size_t k = 0; k < bins.expected.size(); ++k) {
    acc_o += bins.observed[k];
    acc_e += bins.expected[k];
    if (acc_e >= min_expected) {
      merged.observed.push_back(acc_o);
      merged.expected.push_back(acc_e);
      acc_o = acc_e = 0.0;
    }
  }
  if (acc_e > 0.0 || acc_o > 0.0) {
    if (merged.expected.empty()) {
      merged.observed.push_back(acc_o);
      merged.expected.push_back(acc_e);
    } else {
      merged.observed.back() += acc_o;
      merged.expected.back() += acc_e;
    }
  }
  return merged;
}

ChiSquareResult chi2_from_counts(const BinnedCounts& bins, int estimated_params) {
  const auto merged = merge_sparse_bins(bins);
  ChiSquareResult result;
  result.bins = merged.expected.size();
  result.dof = static_cast<int>(result.bins) - 1 - estimated_params;
  if (result.bins < 2 || result.dof < 1)
    throw InapplicableError(fmt::format("chi-square test inapplicable: {} bins, {} dof", result.bins,
                                        result.dof));
  for (std::size_t k = 0; k < result.bins; ++k) {
    const double diff = merged.observed[k] - merged.expected[k];
    result.statistic += diff * diff / merged.expected[k];
  }
  result.pvalue = boost::math::gamma_q(result.dof / 2.0, result.statistic / 2.0);
  return result;
}

std::size_t default_chi2_bins(std::size_t n) {
  const auto moore = static_cast<std::size_t>(std::ceil(2.0 * std::pow(static_cast<double>(n), 0.4)));
  return std::max<std::size_t>(2, std::min(moore, n / 5));
}

ChiSquareResult chi2_gof(std::span<const double> sample, const Cdf& cdf_fn, std::size_t bin_count,
                         int estimated_params) {
  if (bin_count == 0) bin_count = default_chi2_bins(sample.size());
  BinnedCounts bins;
  bins.observed.assign(bin_count, 0.0);
  bins.expected.assign(bin_count, static_cast<double>(sample.size()) / static_cast<double>(bin_count));
  for (double x : sample) {
    const double u = std::clamp(cdf_fn(x), 0.0, 1.0);
    const auto k = std::min(bin_count - 1, static_cast<std::size_t>(u * static_cast<double>(bin_count)));
    bins.observed[k] += 1.0;
  }
  return chi2_from_counts(bins, estimated_params);
}

GofResult bootstrap_pvalue(std::span<const double> sample, Family family, GofStatistic statistic,
                           std::size_t resamples, std::uint64_t seed, unsigned threads) {
  const auto fit = fit_family(sample, family);
  auto stat_of = [&](std::span<const double> s, const FamilyParams& params) {
    const Cdf c = [&](double x) { return cdf(params, x); };
    return statistic == GofStatistic::ks ? ks_test(s, c).statistic : ad_test(s, c).statistic;
  };
  const double observed = stat_of(sample, fit.params);
  std::vector<char> exceed(resamples, 0);
  parallel_for(resamples, threads, [&](std::size_t b) {
    std::mt19937_64 rng(derive_seed(seed, 0xB007, b));
    const auto draw = sample_family(fit.params, sample.size(), rng);
    try {
      const auto refit = fit_family(draw, family);
      exceed[b] = stat_of(draw, refit.params) >= observed;
    } catch (const DegenerateSampleError&) {
      exceed[b] = 1;
    }
  });
  const auto hits = static_cast<double>(std::count(exceed.begin(), exceed.end(), 1));
  return {observed, (1.0 + hits) / (static_cast<double>(resamples) + 1.0)};
}

double TruncatedLogNormal::pdf(double x) const {
  const double zb = (std::log(bound) - mu) / sigma;
  if (kind == Kind::upper_bounded) {
    if (x <= 0 || x > bound) return 0.0;
    const double z = (std::log(x) - mu) / sigma;
    return std::exp(log_norm_pdf(z) - log_norm_cdf(zb)) / (x * sigma);
  }
  if (x <= bound) return 0.0;
  const double z = (std::log(x) - mu) / sigma;
  return std::exp(log_norm_pdf(z) - log_norm_cdf(-zb)) / (x * sigma);
}

double TruncatedLogNormal::cdf(double x) const {
  const double zb = (std::log(bound) - mu) / sigma;
  if (kind == Kind::upper_bounded) {
    if (x <= 0) return 0.0;
    if (x >= bound) return 1.0;
    return std::exp(log_norm_cdf((std::log(x) - mu) / sigma) - log_norm_cdf(zb));
  }
  if (x <= bound) return 0.0;
  return -std::expm1(log_norm_cdf(-(std::log(x) - mu) / sigma) - log_norm_cdf(-zb));
}

namespace {

struct LogStats {
  double n = 0.0;
  double mean = 0.0;
  double variance = 0.0;  // 1/n, of ln x
};

// Maximizes the truncated-normal likelihood of y = ln x by nested bounded Brent
// searches. For fixed sigma the log-likelihood is concave in mu, and the
// profile over sigma is unimodal (the family is exponential in (mu/s^2, 1/s^2)).
TruncatedLogNormal fit_truncated_from_stats(const LogStats& s, double bound,
                                            TruncatedLogNormal::Kind kind) {
  if (!(s.variance > 0)) throw DegenerateSampleError("truncated log-normal fit on constant values");
  const double log_bound = std::log(bound);
  const double sd = std::sqrt(s.variance);
  const bool upper = kind == TruncatedLogNormal::Kind::upper_bounded;
  // per-observation negative log-likelihood without constants
  auto nll = [&](double mu, double sigma) {
    const double z = (log_bound - mu) / sigma;
    const double tail = upper ? log_norm_cdf(z) : log_norm_cdf(-z);
    return std::log(sigma) + (s.variance + (s.mean - mu) * (s.mean - mu)) / (2.0 * sigma * sigma) + tail;
  };
  constexpr int kBits = 40;
  auto best_mu = [&](double sigma) {
    std::uintmax_t iters = 200;
    return boost::math::tools::brent_find_minima([&](double mu) { return nll(mu, sigma); },
                                                 s.mean - 60.0 * sd, s.mean + 60.0 * sd, kBits, iters);
  };
  std::uintmax_t iters = 200;
  const auto outer = boost::math::tools::brent_find_minima(
      [&](double log_sigma) { return best_mu(std::exp(log_sigma)).second; }, std::log(sd) - 4.0,
      std::log(sd) + 6.0, kBits, iters);
  const double sigma = std::exp(outer.first);
  return {best_mu(sigma).first, sigma, bound, kind};
}

LogStats stats_from_prefix(std::span<const double> prefix_y, std::span<const double> prefix_y2,
                           std::size_t begin, std::size_t end) {
  LogStats s;
  s.n = static_cast<double>(end - begin);
  const double sum = prefix_y[end] - prefix_y[begin];
  const double sum2 = prefix_y2[end] - prefix_y2[begin];
  s.mean = sum / s.n;
  s.variance = std::max(0.0, sum2 / s.n - s.mean * s.mean);
  return s;
}

// Adds (K_fit - K_emp)^2 / (K_fit + K_emp)^2 over distinct values of one side.
void accumulate_side(std::span<const double> side, const TruncatedLogNormal& piece, double& sum,
                     std::size_t& terms) {
  const double m = static_cast<double>(side.size());
  std::size_t k = 0;
  while (k < side.size()) {
    std::size_t last = k;
    while (last + 1 < side.size() && side[last + 1] == side[k]) ++last;
    const double emp = (static_cast<double>(k + 1) + static_cast<double>(last + 1) - 1.0) / (2.0 * m);
    const double fit = piece.cdf(side[k]);
    const double denom = fit + emp;
    if (denom > 0) {
      const double d = (fit - emp) / denom;
      sum += d * d;
    }
    ++terms;
    k = last + 1;
  }
}

}  // namespace

TruncatedLogNormal fit_truncated_lognormal(std::span<const double> sample, double bound,
                                           TruncatedLogNormal::Kind kind) {
  if (sample.size() < 2) throw ArgumentError("truncated fit needs at least 2 values");
  std::vector<double> logs;
  logs.reserve(sample.size());
  for (double x : sample) {
    if (!(x > 0)) throw DomainError("truncated log-normal fit got a nonpositive value");
    const bool inside = kind == TruncatedLogNormal::Kind::upper_bounded ? x <= bound : x > bound;
    if (!inside) throw ArgumentError("value outside the truncated support");
    logs.push_back(std::log(x));
  }
  const auto m = moments(logs);
  return fit_truncated_from_stats({static_cast<double>(logs.size()), m.mean, m.variance}, bound, kind);
}

double mixed_residual(std::span<const double> sorted_sample, double threshold,
                      const TruncatedLogNormal& lower, const TruncatedLogNormal& upper) {
  const auto split = static_cast<std::size_t>(
      std::upper_bound(sorted_sample.begin(), sorted_sample.end(), threshold) - sorted_sample.begin());
  double sum = 0.0;
  std::size_t terms = 0;
  accumulate_side(sorted_sample.subspan(0, split), lower, sum, terms);
  accumulate_side(sorted_sample.subspan(split), upper, sum, terms);
  return terms == 0 ? 0.0 : std::sqrt(sum / static_cast<double>(terms));
}

MixedLogNormalFit fit_mixed_lognormal(std::span<const double> sample, const MixedFitOptions& options) {
  if (sample.size() < 20) throw ArgumentError("mixed log-normal fit needs at least 20 values");
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  if (!(sorted.front() > 0)) throw DomainError("mixed log-normal fit needs positive values");
  const std::size_t n = sorted.size();

  std::vector<double> prefix_y(n + 1, 0.0), prefix_y2(n + 1, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double y = std::log(sorted[k]);
    prefix_y[k + 1] = prefix_y[k] + y;
    prefix_y2[k + 1] = prefix_y2[k] + y * y;
  }
  auto left_count = [&](double c) {
    return static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), c) - sorted.begin());
  };
  auto admissible = [&](double c) {
    const std::size_t left = left_count(c);
    return left >= options.min_side && n - left >= options.min_side;
  };

  std::vector<double> candidates;
  if (!options.candidates.empty()) {
    for (double c : options.candidates)
      if (admissible(c)) candidates.push_back(c);
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  } else {
    std::vector<double> distinct;
    for (std::size_t k = 0; k < n; ++k)
      if ((k + 1 == n || sorted[k + 1] != sorted[k]) && admissible(sorted[k])) distinct.push_back(sorted[k]);
    if (distinct.size() > options.max_candidates && options.max_candidates >= 2) {
      const double lo = std::log(distinct.front());
      const double hi = std::log(distinct.back());
      for (std::size_t g = 0; g < options.max_candidates; ++g) {
        const double target =
            std::exp(lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(options.max_candidates - 1));
        auto it = std::upper_bound(distinct.begin(), distinct.end(), target * (1.0 + 1e-12));
        if (it != distinct.begin()) candidates.push_back(*std::prev(it));
      }
      candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    } else {
      candidates = std::move(distinct);
    }
  }
  if (candidates.empty())
    throw InapplicableError(fmt::format("no threshold leaves {} points on each side", options.min_side));

  struct Evaluation {
    double residual = kInf;
    TruncatedLogNormal lower, upper;
  };
  std::vector<Evaluation> evals(candidates.size());
  parallel_for(candidates.size(), options.threads, [&](std::size_t c) {
    const double threshold = candidates[c];
    const std::size_t split = left_count(threshold);
    const auto left = stats_from_prefix(prefix_y, prefix_y2, 0, split);
    const auto right = stats_from_prefix(prefix_y, prefix_y2, split, n);
    if (!(left.variance > 1e-14) || !(right.variance > 1e-14)) return;
    auto& e = evals[c];
    e.lower = fit_truncated_from_stats(left, threshold, TruncatedLogNormal::Kind::upper_bounded);
    e.upper = fit_truncated_from_stats(right, threshold, TruncatedLogNormal::Kind::lower_bounded);
    e.residual = mixed_residual(sorted, threshold, e.lower, e.upper);
  });

  MixedLogNormalFit fit;
  std::size_t best = candidates.size();
  std::vector<double> finite;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    if (!std::isfinite(evals[c].residual)) continue;
    fit.curve.push_back({candidates[c], evals[c].residual});
    finite.push_back(evals[c].residual);
    if (best == candidates.size() || evals[c].residual < evals[best].residual) best = c;
  }
  if (best == candidates.size()) throw InapplicableError("every candidate threshold leaves a constant side");

  fit.threshold = candidates[best];
  fit.lower = evals[best].lower;
  fit.upper = evals[best].upper;
  fit.residual = evals[best].residual;
  fit.n_lower = left_count(fit.threshold);
  fit.n_upper = n - fit.n_lower;
  std::sort(finite.begin(), finite.end());
  const std::size_t m = finite.size();
  const double median = m % 2 ? finite[m / 2] : 0.5 * (finite[m / 2 - 1] + finite[m / 2]);
  fit.flat = median - fit.residual <= options.flatness_tolerance * median;
  return fit;
}

}  // namespace egolayers
