#pragma once

// Per-ego layer detection on tie weights: 1-D k-means with BIC, head/tail
// breaks, layer summaries, clustering agreement, and population census.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "egolayers/netbuild.hpp"

namespace egolayers {

/// Affine map onto [0, 1]. Returns nullopt when all weights are equal.
/// Throws ArgumentError for fewer than 2 weights.
std::optional<std::vector<double>> normalize_weights(std::span<const double> raw);

/// Cluster labels are dense 0..k-1 and ascend with value (0 = lowest values).
struct Partition {
  std::vector<int> labels;  // aligned with the input order
  int cluster_count = 0;
  double sse = 0.0;         // sum over clusters of sum (x - cluster mean)^2
};

/// Within-cluster sum of squares of a labelling, computed two-pass per cluster.
double partition_sse(std::span<const double> values, std::span<const int> labels);

/// Globally SSE-optimal contiguous partition of the sorted values into exactly
/// k clusters (dynamic program; leftmost optimal break on ties).
/// Throws ArgumentError unless 1 <= k <= |values|.
Partition optimal_partition(std::span<const double> values, int k);

struct KMeansResult {
  Partition partition;
  std::vector<double> bic;  // bic[k - 1] for every k tried
};

/// Hard-assignment Gaussian BIC with mixing weights and a variance floor of
/// 1e-6 * range^2: BIC = (3k - 1) ln n - 2 log L. k runs to
/// min(k_max, distinct values); ties go to the smaller k.
double partition_bic(std::span<const double> values, const Partition& partition);
KMeansResult kmeans_1d(std::span<const double> values, int k_max);

struct HtBreakResult {
  std::vector<double> breaks;          // strictly increasing
  std::vector<double> head_fractions;  // |head| / |current| at each recorded break
  Partition partition;                 // bands between breaks
};

/// Head/tail breaks: split at the mean, keep the head while it holds less than
/// `head_limit` of the current values and has at least 2 members.
HtBreakResult ht_break(std::span<const double> values, double head_limit = 0.4);

enum class LayerAlgorithm { kmeans, ht_break };
std::string_view algorithm_name(LayerAlgorithm algorithm);
std::optional<LayerAlgorithm> parse_algorithm(std::string_view name);

struct LayerPartition {
  LayerAlgorithm algorithm = LayerAlgorithm::kmeans;
  std::vector<std::size_t> layer_counts;  // inner -> outer
  std::vector<std::size_t> cumulative;
  std::vector<double> ratios;             // cumulative[k+1] / cumulative[k]
  std::optional<double> mean_ratio;       // arithmetic mean of ratios; absent for one layer
  std::vector<double> layer_mean_weight;
  std::vector<int> layer_of;              // per alter: 0 = innermost
};

/// Orders clusters by descending mean weight. Labels may be any ints.
LayerPartition summarize_layers(std::span<const double> weights, std::span<const int> labels,
                                LayerAlgorithm algorithm = LayerAlgorithm::kmeans);

enum class JaccardVariant {
  co_membership,  // pairs together in both / pairs together in either
  best_match,     // size-weighted best set overlap, averaged over both directions
};

/// Throws ArgumentError when the labellings differ in length.
double jaccard_compare(std::span<const int> a, std::span<const int> b,
                       JaccardVariant variant = JaccardVariant::co_membership);
/// Keyed by alter id; throws ArgumentError when the key sets differ.
double jaccard_compare(const std::map<std::string, int>& a, const std::map<std::string, int>& b,
                       JaccardVariant variant = JaccardVariant::co_membership);

struct EgoLayers {
  std::string ego;
  std::size_t degree = 0;
  bool degenerate = false;  // all tie weights equal
  std::vector<std::string> alters;
  std::vector<double> weights;     // raw W
  std::vector<double> normalized;  // empty when degenerate
  LayerPartition partition;        // single layer when degenerate
};

/// Alters of `ego` with raw weights, sorted by alter id.
EgoLayers ego_weights(const WeightedNetwork& network, NodeIndex ego);

struct CensusConfig {
  std::size_t degree_floor = 100;  // egos with degree > floor
  LayerAlgorithm algorithm = LayerAlgorithm::kmeans;
  int k_max = 8;
  unsigned threads = 1;
};

struct CensusRow {
  int layers = 0;  // c
  std::size_t count = 0;
  double fraction = 0.0;                 // of non-degenerate egos
  std::vector<double> mean_layer_counts;  // mean l_k
  std::vector<double> mean_cumulative;    // mean n_k
  std::optional<double> mean_ratio;
};

struct LayerCensus {
  LayerAlgorithm algorithm = LayerAlgorithm::kmeans;
  std::size_t degree_floor = 0;
  std::size_t egos = 0;        // degree > floor
  std::size_t degenerate = 0;
  std::vector<CensusRow> rows;  // ascending c
  std::vector<EgoLayers> per_ego;  // sorted by ego id
};

EgoLayers detect_layers(EgoLayers ego, LayerAlgorithm algorithm, int k_max);
LayerCensus layer_census(const WeightedNetwork& network, const CensusConfig& config = {});

/// Reference structure 5, 15, 50, 150 with the conventional ratio 3.00.
CensusRow dunbar_reference_row();

/// Mean agreement between two censuses over egos present and non-degenerate in both.
std::optional<double> mean_jaccard(const LayerCensus& a, const LayerCensus& b,
                                   JaccardVariant variant = JaccardVariant::co_membership);

}  // namespace egolayers
