#pragma once

// Text emitters for tables and plot data. Tables are comma-separated with a
// header row; per-ego records are one JSON object per line.

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "egolayers/distfit.hpp"
#include "egolayers/layers.hpp"
#include "egolayers/netbuild.hpp"
#include "egolayers/tamarit.hpp"

namespace egolayers {

/// Shortest round-trip decimal form; empty for NaN.
std::string format_number(double value);

struct Summary {
  double mean = 0.0;
  double sd = 0.0;  // 1/n
  double cv = 0.0;  // sd / mean
};
Summary summarize(std::span<const double> values);

struct DegreeBucket {
  std::string label;  // "k>100", "50<k<=100", "k<=50"
  std::size_t nodes = 0;
  double fraction = 0.0;
  Summary degree;
  Summary weighted_degree;
};

/// Buckets k > 100, 50 < k <= 100, k <= 50; empty buckets are omitted.
std::vector<DegreeBucket> degree_census(const WeightedNetwork& network);
void write_degree_census(std::ostream& out, std::span<const DegreeBucket> buckets);

struct FamilyFitRow {
  std::string sample;
  Family family = Family::normal;
  std::optional<FitResult> fit;  // absent when the family does not apply
  std::string status = "ok";
  std::optional<double> bootstrap_ks_pvalue;
  bool selected = false;
};

/// Fits every family on `values`, marking the AIC winner among applicable fits.
std::vector<FamilyFitRow> fit_sample(const std::string& sample, std::span<const double> values,
                                     std::size_t bootstrap, std::uint64_t seed, unsigned threads);
void write_fit_report(std::ostream& out, std::span<const FamilyFitRow> rows);

void write_mixed_fit(std::ostream& out, const std::string& sample, const MixedLogNormalFit& fit);
void write_residual_curve(std::ostream& out, const MixedLogNormalFit& fit);

/// Log-spaced histogram of positive values: columns value (geometric bin
/// centre), density.
struct DensityPoint {
  double value = 0.0;
  double density = 0.0;
};
std::vector<DensityPoint> empirical_density(std::span<const double> values, std::size_t bins = 30);
void write_density(std::ostream& out, std::span<const DensityPoint> points);

/// Table of layer counts per c: algorithm,c,count,fraction,n1..nK,l1..lK,mean_r.
void write_layer_census(std::ostream& out, std::span<const LayerCensus> censuses,
                        const std::optional<CensusRow>& reference);

/// One JSON object per ego.
void write_ego_layers(std::ostream& out, const LayerCensus& census);

/// Distribution of l_k over egos, per (c, layer): algorithm,c,layer,alter_count,egos.
void write_layer_histograms(std::ostream& out, const LayerCensus& census);
/// Log-normal fit of l_k per (c, layer): algorithm,c,layer,egos,mu_L,sigma_L,status.
void write_layer_fits(std::ostream& out, const LayerCensus& census);

struct EgoEstimate {
  std::string ego;
  LayerAlgorithm algorithm = LayerAlgorithm::kmeans;
  int layers = 0;
  TamaritEstimate estimate;
};

/// Estimates for every non-degenerate ego with at least 2 layers.
std::vector<EgoEstimate> estimate_census(const LayerCensus& census, std::uint64_t population);
void write_estimates(std::ostream& out, std::span<const EgoEstimate> estimates);

struct RatioFitRow {
  LayerAlgorithm algorithm = LayerAlgorithm::kmeans;
  std::optional<RatioPopulationFit> fit;
  std::string status = "ok";
};
void write_ratio_fits(std::ostream& out, std::span<const RatioFitRow> rows);
/// Per (algorithm, c): log-spaced histogram of ratio_hat with the population's fitted density.
void write_ratio_histograms(std::ostream& out, std::span<const EgoEstimate> estimates,
                            std::span<const RatioFitRow> fits);

}  // namespace egolayers
