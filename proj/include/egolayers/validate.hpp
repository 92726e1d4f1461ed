#pragma once

// Hypergeometric over-expression test of directed links with a Bonferroni
// family-wise threshold.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "egolayers/netbuild.hpp"

namespace egolayers {

// Hypergeometric law of X = number of the N_jr "matched" events that fall on
// the N_ic "initiated by i" events out of N total:
//   H(X | N, N_ic, N_jr) = C(N_ic, X) C(N - N_ic, N_jr - X) / C(N, N_jr).
// All functions throw ArgumentError when N_ic > N or N_jr > N and return 0
// probability mass outside the support.

double hypergeom_log_pmf(std::uint64_t x, std::uint64_t total, std::uint64_t initiated,
                         std::uint64_t matched);
double hypergeom_pmf(std::uint64_t x, std::uint64_t total, std::uint64_t initiated,
                     std::uint64_t matched);

/// P(X >= x) summed directly over the upper tail.
double hypergeom_upper_tail(std::uint64_t x, std::uint64_t total, std::uint64_t initiated,
                            std::uint64_t matched);
/// P(X < x) summed directly over the lower tail.
double hypergeom_lower_tail(std::uint64_t x, std::uint64_t total, std::uint64_t initiated,
                            std::uint64_t matched);

/// p-value of an observed directed count: P(X >= x_obs). Uses the direct upper
/// sum above the mode (where p can be tiny) and 1 - lower sum otherwise.
double overexpression_pvalue(std::uint64_t x_obs, std::uint64_t total, std::uint64_t initiated,
                             std::uint64_t matched);

/// alpha / (n (n - 1) / 2). Throws ArgumentError for n < 2 or alpha outside (0, 1).
double bonferroni_threshold(std::uint64_t node_count, double alpha);

enum class RetentionRule { both_directions, either_direction };

/// Number of hypotheses the significance budget is divided by.
enum class BonferroniUniverse {
  maximal_pairs,  // n (n - 1) / 2
  tested_edges,   // realized edge count
};

struct ValidationConfig {
  double alpha = 0.01;
  RetentionRule rule = RetentionRule::both_directions;
  BonferroniUniverse universe = BonferroniUniverse::maximal_pairs;
};

struct EdgeValidation {
  NodeIndex i = 0;
  NodeIndex j = 0;
  std::uint64_t count_ij = 0;
  std::uint64_t count_ji = 0;
  double p_ij = 1.0;
  double p_ji = 1.0;
  bool significant = false;
};

struct ValidationResult {
  WeightedNetwork network;             // surviving edges only
  std::vector<EdgeValidation> report;  // one row per input edge, in edge order
  double threshold = 0.0;
  std::size_t tests = 0;
};

double validation_threshold(const WeightedNetwork& network, const ValidationConfig& config);

bool is_significant(double p_ij, double p_ji, double threshold, RetentionRule rule);

/// Tests every edge in both directions. Input marginals are used as-is; the
/// returned network is rebuilt from the surviving directed counts.
ValidationResult validate_network(const WeightedNetwork& network, const ValidationConfig& config = {},
                                  unsigned threads = 1);

/// Columns i,j,count_ij,count_ji,p_ij,p_ji,significant sorted by (i, j).
void write_validation_report(std::ostream& out, const WeightedNetwork& source,
                             std::span<const EdgeValidation> report);

}  // namespace egolayers
