#pragma once

// Seeded generators: null-model order logs, planted-layer ego populations,
// planted coordination in order logs, and draws from the layer model.
// Every entity draws from its own derived seed, so output does not depend on
// the thread count.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "egolayers/ingest.hpp"
#include "egolayers/netbuild.hpp"

namespace egolayers {

inline constexpr std::int64_t kDefaultSessionStart = 1356998400 + 9 * 3600 + 30 * 60;

struct NullOrderConfig {
  std::uint64_t seed = 1;
  std::size_t investors = 200;
  std::size_t stocks = 5;
  std::size_t days = 1;
  double orders_per_investor_day = 110.0;  // Poisson mean
  std::int64_t session_seconds = 4 * 3600;
  std::int64_t session_start = kDefaultSessionStart;
};

/// Independent uniform order times, stocks and sides; sorted by (time, investor, stock, side).
std::vector<OrderEvent> gen_null_order_log(const NullOrderConfig& config, unsigned threads = 1);

struct BandTemplate {
  std::vector<std::size_t> sizes{5, 10, 35, 100};       // inner -> outer
  std::vector<double> means{1000.0, 300.0, 100.0, 30.0};  // strictly decreasing
  std::vector<double> dispersions{15.0, 15.0, 15.0, 15.0};  // Gaussian sd per band
};

/// Throws ArgumentError unless means strictly decrease and adjacent means are
/// at least 4x the larger of the two dispersions apart.
void check_template(const BandTemplate& bands);

struct EgoPopulationConfig {
  std::uint64_t seed = 1;
  std::size_t egos = 2000;
  BandTemplate bands;
  double size_jitter = 0.0;  // band sizes scaled by U(1 - j, 1 + j) per ego
};

struct EgoTruth {
  std::string ego;
  std::vector<std::string> alters;  // sorted
  std::vector<int> band;            // 0 = innermost
};

struct EgoPopulation {
  WeightedNetwork network;
  std::vector<EgoTruth> truth;  // sorted by ego
};

/// Star forest: ego "E00000" with alters "E00000_A000".. whose integer weight
/// (>= 1) is drawn from the alter's band and split across both directions.
EgoPopulation gen_layered_ego_population(const EgoPopulationConfig& config, unsigned threads = 1);

/// Columns ego,alter,band.
void write_ground_truth(std::ostream& out, const std::vector<EgoTruth>& truth);
std::vector<EgoTruth> read_ground_truth(std::istream& in);

/// Layer counts from the multinomial with probabilities proportional to
/// e^{mu k}, k = 0..r-1 (the population size only enters the model through a
/// mu-free factor, so it is not needed here).
std::vector<std::uint64_t> sample_tamarit(double mu, std::uint64_t alters, std::size_t layers,
                                          std::uint64_t seed);

struct PlantedOrderConfig {
  std::uint64_t seed = 1;
  std::size_t days = 10;
  std::size_t stocks = 50;
  std::size_t background_investors = 360;
  double background_orders_per_day = 100.0;
  std::size_t egos = 40;
  std::vector<std::size_t> band_sizes{5, 10, 35, 100};
  std::vector<std::size_t> episodes_per_day{16, 8, 4, 1};  // per alter, by band
  double size_jitter = 0.2;
  std::int64_t episode_span = 20;  // seconds
  std::int64_t session_seconds = 4 * 3600;
  std::int64_t session_start = kDefaultSessionStart;
};

struct PlantedOrderLog {
  std::vector<OrderEvent> orders;  // sorted like gen_null_order_log
  std::vector<EgoTruth> truth;
};

/// Background investors trade at random; each planted ego shares short
/// same-stock same-side episodes with its alters, more often for inner bands.
PlantedOrderLog gen_planted_order_log(const PlantedOrderConfig& config, unsigned threads = 1);

}  // namespace egolayers
