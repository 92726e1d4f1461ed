#include "egolayers/validate.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numbers>

#include <fmt/format.h>

#include "egolayers/error.hpp"
#include "egolayers/parallel.hpp"

namespace egolayers {
namespace {

// Saddle-point evaluation of binomial probabilities (Loader 2000). Accurate to
// close to machine precision for arbitrarily large counts, unlike sums of
// log-factorials whose absolute error grows with log(N!).

// log(n!) - log(sqrt(2 pi n) (n/e)^n)
double stirling_error(double n) {
  constexpr double s0 = 1.0 / 12;
  constexpr double s1 = 1.0 / 360;
  constexpr double s2 = 1.0 / 1260;
  constexpr double s3 = 1.0 / 1680;
  constexpr double s4 = 1.0 / 1188;
  if (n <= 15.0) {
    return std::lgamma(n + 1.0) - (n + 0.5) * std::log(n) + n -
           0.5 * std::log(2.0 * std::numbers::pi);
  }
  const double nn = n * n;
  if (n > 500) return (s0 - s1 / nn) / n;
  if (n > 80) return (s0 - (s1 - s2 / nn) / nn) / n;
  if (n > 35) return (s0 - (s1 - (s2 - s3 / nn) / nn) / nn) / n;
  return (s0 - (s1 - (s2 - (s3 - s4 / nn) / nn) / nn) / nn) / n;
}

// x log(x / np) + np - x, with a series for x close to np.
double deviance_term(double x, double np) {
  if (std::fabs(x - np) < 0.1 * (x + np)) {
    double v = (x - np) / (x + np);
    double s = (x - np) * v;
    if (std::fabs(s) < std::numeric_limits<double>::min()) return s;
    double ej = 2 * x * v;
    v *= v;
    for (int j = 1; j < 1000; ++j) {
      ej *= v;
      const double s1 = s + ej / (2 * j + 1);
      if (s1 == s) return s1;
      s = s1;
    }
  }
  return x * std::log(x / np) + np - x;
}

double log_binomial_raw(double x, double n, double p, double q) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  if (p == 0) return x == 0 ? 0.0 : kNegInf;
  if (q == 0) return x == n ? 0.0 : kNegInf;
  if (x == 0) {
    if (n == 0) return 0.0;
    return p < 0.1 ? -deviance_term(n, n * q) - n * p : n * std::log(q);
  }
  if (x == n) return q < 0.1 ? -deviance_term(n, n * p) - n * q : n * std::log(p);
  if (x < 0 || x > n) return kNegInf;
  const double lc = stirling_error(n) - stirling_error(x) - stirling_error(n - x) -
                    deviance_term(x, n * p) - deviance_term(n - x, n * q);
  const double lf = std::log(2.0 * std::numbers::pi) + std::log(x) + std::log1p(-x / n);
  return lc - 0.5 * lf;
}

struct Hypergeom {
  double white;   // N_ic
  double black;   // N - N_ic
  double drawn;   // N_jr
  std::uint64_t lo;
  std::uint64_t hi;
};

Hypergeom make(std::uint64_t total, std::uint64_t initiated, std::uint64_t matched) {
  if (initiated > total || matched > total)
    throw ArgumentError(fmt::format("inconsistent marginals: N={}, N_ic={}, N_jr={}", total,
                                    initiated, matched));
  Hypergeom h{static_cast<double>(initiated), static_cast<double>(total - initiated),
              static_cast<double>(matched), 0, std::min(initiated, matched)};
  const std::uint64_t black = total - initiated;
  h.lo = matched > black ? matched - black : 0;
  return h;
}

double log_pmf(const Hypergeom& h, std::uint64_t x) {
  if (x < h.lo || x > h.hi) return -std::numeric_limits<double>::infinity();
  if (h.drawn == 0) return 0.0;
  const double total = h.white + h.black;
  const double p = h.drawn / total;
  const double q = (total - h.drawn) / total;
  const double xd = static_cast<double>(x);
  return log_binomial_raw(xd, h.white, p, q) + log_binomial_raw(h.drawn - xd, h.black, p, q) -
         log_binomial_raw(h.drawn, total, p, q);
}

// pmf(x + 1) / pmf(x)
double ratio_up(const Hypergeom& h, double x) {
  return (h.white - x) * (h.drawn - x) / ((x + 1) * (h.black - h.drawn + x + 1));
}

constexpr double kTailEpsilon = 1e-17;

// Sum of pmf over [x, hi] relative to pmf(x).
double relative_upper_sum(const Hypergeom& h, std::uint64_t x) {
  double term = 1.0;
  double sum = 1.0;
  for (std::uint64_t k = x; k < h.hi; ++k) {
    const double r = ratio_up(h, static_cast<double>(k));
    term *= r;
    sum += term;
    if (r < 1.0 && term < kTailEpsilon * sum) break;
  }
  return sum;
}

// Sum of pmf over [lo, x] relative to pmf(x).
double relative_lower_sum(const Hypergeom& h, std::uint64_t x) {
  double term = 1.0;
  double sum = 1.0;
  for (std::uint64_t k = x; k > h.lo; --k) {
    const double r = 1.0 / ratio_up(h, static_cast<double>(k - 1));  // pmf(k-1)/pmf(k)
    term *= r;
    sum += term;
    if (r < 1.0 && term < kTailEpsilon * sum) break;
  }
  return sum;
}

std::uint64_t mode_of(const Hypergeom& h) {
  const double total = h.white + h.black;
  const double m = std::floor((h.drawn + 1) * (h.white + 1) / (total + 2));
  return std::clamp(static_cast<std::uint64_t>(m), h.lo, h.hi);
}

}  // namespace

double hypergeom_log_pmf(std::uint64_t x, std::uint64_t total, std::uint64_t initiated,
                         std::uint64_t matched) {
  return log_pmf(make(total, initiated, matched), x);
}

double hypergeom_pmf(std::uint64_t x, std::uint64_t total, std::uint64_t initiated,
                     std::uint64_t matched) {
  return std::exp(hypergeom_log_pmf(x, total, initiated, matched));
}

double hypergeom_upper_tail(std::uint64_t x, std::uint64_t total, std::uint64_t initiated,
                            std::uint64_t matched) {
  const auto h = make(total, initiated, matched);
  if (x <= h.lo) return 1.0;
  if (x > h.hi) return 0.0;
  return std::min(1.0, std::exp(log_pmf(h, x) + std::log(relative_upper_sum(h, x))));
}

double hypergeom_lower_tail(std::uint64_t x, std::uint64_t total, std::uint64_t initiated,
                            std::uint64_t matched) {
  const auto h = make(total, initiated, matched);
  if (x <= h.lo) return 0.0;
  if (x > h.hi) return 1.0;
  return std::min(1.0, std::exp(log_pmf(h, x - 1) + std::log(relative_lower_sum(h, x - 1))));
}

double overexpression_pvalue(std::uint64_t x_obs, std::uint64_t total, std::uint64_t initiated,
                             std::uint64_t matched) {
  const auto h = make(total, initiated, matched);
  if (x_obs <= h.lo) return 1.0;
  if (x_obs > h.hi) return 0.0;
  if (x_obs > mode_of(h))
    return std::min(1.0, std::exp(log_pmf(h, x_obs) + std::log(relative_upper_sum(h, x_obs))));
  const double lower = std::exp(log_pmf(h, x_obs - 1) + std::log(relative_lower_sum(h, x_obs - 1)));
  return std::clamp(1.0 - lower, 0.0, 1.0);
}

double bonferroni_threshold(std::uint64_t node_count, double alpha) {
  if (node_count < 2) throw ArgumentError("Bonferroni threshold needs at least 2 nodes");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("alpha must lie in (0, 1)");
  const double n = static_cast<double>(node_count);
  return alpha / (n * (n - 1.0) / 2.0);
}

double validation_threshold(const WeightedNetwork& network, const ValidationConfig& config) {
  if (config.universe == BonferroniUniverse::maximal_pairs)
    return bonferroni_threshold(network.node_count(), config.alpha);
  if (!(config.alpha > 0.0 && config.alpha < 1.0)) throw ArgumentError("alpha must lie in (0, 1)");
  if (network.edge_count() == 0) throw ArgumentError("tested-edge universe needs at least one edge");
  return config.alpha / static_cast<double>(network.edge_count());
}

bool is_significant(double p_ij, double p_ji, double threshold, RetentionRule rule) {
  return rule == RetentionRule::both_directions ? (p_ij < threshold && p_ji < threshold)
                                                : (p_ij < threshold || p_ji < threshold);
}

ValidationResult validate_network(const WeightedNetwork& network, const ValidationConfig& config,
                                  unsigned threads) {
  ValidationResult result;
  if (network.edge_count() == 0) {
    if (!(config.alpha > 0.0 && config.alpha < 1.0)) throw ArgumentError("alpha must lie in (0, 1)");
    return result;
  }
  result.threshold = validation_threshold(network, config);
  const auto& edges = network.edges();
  result.report.resize(edges.size());
  result.tests = 2 * edges.size();
  const std::uint64_t total = network.grand_total();

  parallel_for(edges.size(), threads, [&](std::size_t k) {
    const auto& e = edges[k];
    auto& row = result.report[k];
    row.i = e.i;
    row.j = e.j;
    row.count_ij = e.count_ij;
    row.count_ji = e.count_ji;
    row.p_ij = e.count_ij == 0 ? 1.0
                               : overexpression_pvalue(e.count_ij, total, network.outgoing_total(e.i),
                                                       network.incoming_total(e.j));
    row.p_ji = e.count_ji == 0 ? 1.0
                               : overexpression_pvalue(e.count_ji, total, network.outgoing_total(e.j),
                                                       network.incoming_total(e.i));
    row.significant = is_significant(row.p_ij, row.p_ji, result.threshold, config.rule);
  });

  std::vector<DirectedEdgeStats> kept;
  for (const auto& row : result.report) {
    if (!row.significant) continue;
    kept.push_back({row.i, row.j, row.count_ij});
    kept.push_back({row.j, row.i, row.count_ji});
  }
  result.network = WeightedNetwork::from_indexed_counts(network.nodes(), std::move(kept));
  return result;
}

void write_validation_report(std::ostream& out, const WeightedNetwork& source,
                             std::span<const EdgeValidation> report) {
  out << "i,j,count_ij,count_ji,p_ij,p_ji,significant\n";
  std::string line;
  for (const auto& r : report) {
    line.clear();
    fmt::format_to(std::back_inserter(line), "{},{},{},{},{:.10e},{:.10e},{}\n", source.name(r.i),
                   source.name(r.j), r.count_ij, r.count_ji, r.p_ij, r.p_ji, r.significant ? 1 : 0);
    out << line;
  }
}

}  // namespace egolayers
