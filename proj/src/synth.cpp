#include "egolayers/synth.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <tuple>

#include <fmt/format.h>

#include "egolayers/error.hpp"
#include "egolayers/parallel.hpp"

namespace egolayers {
namespace {

enum Stream : std::uint64_t { kNullInvestor = 1, kEgo = 2, kPlantedEgo = 3, kBackground = 4, kTamarit = 5 };

constexpr std::int64_t kDay = 86400;

void sort_orders(std::vector<OrderEvent>& orders) {
  std::sort(orders.begin(), orders.end(), [](const OrderEvent& a, const OrderEvent& b) {
    return std::tie(a.timestamp, a.investor_id, a.stock_id, a.side) <
           std::tie(b.timestamp, b.investor_id, b.stock_id, b.side);
  });
}

template <class Parts>
std::vector<OrderEvent> concat(Parts& parts) {
  std::size_t total = 0;
  for (const auto& p : parts) total += p.size();
  std::vector<OrderEvent> out;
  out.reserve(total);
  for (auto& p : parts) std::move(p.begin(), p.end(), std::back_inserter(out));
  return out;
}

std::string stock_name(std::size_t s) { return fmt::format("S{:03}", s); }

std::vector<OrderEvent> random_orders(const std::string& investor, std::mt19937_64& rng, std::size_t days,
                                      std::size_t stocks, double rate, std::int64_t session_start,
                                      std::int64_t session_seconds) {
  std::vector<OrderEvent> out;
  std::poisson_distribution<int> count(rate);
  std::uniform_int_distribution<std::int64_t> offset(0, session_seconds - 1);
  std::uniform_int_distribution<std::size_t> stock(0, stocks - 1);
  std::bernoulli_distribution sell(0.5);
  for (std::size_t d = 0; d < days; ++d) {
    const int n = count(rng);
    for (int k = 0; k < n; ++k) {
      const std::int64_t t = session_start + static_cast<std::int64_t>(d) * kDay + offset(rng);
      const auto s = stock(rng);
      out.push_back({investor, stock_name(s), sell(rng) ? Side::sell : Side::buy, t});
    }
  }
  return out;
}

std::vector<std::size_t> jittered_sizes(const std::vector<std::size_t>& sizes, double jitter, std::mt19937_64& rng) {
  std::vector<std::size_t> out = sizes;
  if (jitter <= 0) return out;
  std::uniform_real_distribution<double> scale(1.0 - jitter, 1.0 + jitter);
  for (auto& s : out) s = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(s * scale(rng))));
  return out;
}

std::size_t total_size(const std::vector<std::size_t>& sizes) {
  std::size_t t = 0;
  for (auto s : sizes) t += s;
  return t;
}

}  // namespace

std::vector<OrderEvent> gen_null_order_log(const NullOrderConfig& config, unsigned threads) {
  if (config.investors > 0 && (config.stocks == 0 || config.session_seconds <= 0))
    throw ArgumentError("null order log needs at least one stock and a positive session");
  std::vector<std::vector<OrderEvent>> parts(config.investors);
  parallel_for(config.investors, threads, [&](std::size_t i) {
    std::mt19937_64 rng(derive_seed(config.seed, kNullInvestor, i));
    parts[i] = random_orders(fmt::format("I{:05}", i), rng, config.days, config.stocks,
                             config.orders_per_investor_day, config.session_start, config.session_seconds);
  });
  auto orders = concat(parts);
  sort_orders(orders);
  return orders;
}

void check_template(const BandTemplate& bands) {
  const std::size_t r = bands.sizes.size();
  if (r == 0 || bands.means.size() != r || bands.dispersions.size() != r)
    throw ArgumentError("band template needs matching sizes, means and dispersions");
  for (std::size_t k = 0; k < r; ++k) {
    if (bands.sizes[k] == 0) throw ArgumentError("band sizes must be positive");
    if (!(bands.means[k] >= 1.0) || bands.dispersions[k] < 0)
      throw ArgumentError("band means must be >= 1 and dispersions >= 0");
    if (k + 1 < r) {
      const double gap = bands.means[k] - bands.means[k + 1];
      if (!(gap > 0)) throw ArgumentError("band means must strictly decrease");
      if (gap < 4.0 * std::max(bands.dispersions[k], bands.dispersions[k + 1]))
        throw ArgumentError(fmt::format("bands {} and {} are closer than 4 dispersions", k, k + 1));
    }
  }
}

EgoPopulation gen_layered_ego_population(const EgoPopulationConfig& config, unsigned threads) {
  check_template(config.bands);
  struct EgoDraw {
    EgoTruth truth;
    std::vector<NamedCount> counts;
  };
  std::vector<EgoDraw> draws(config.egos);
  parallel_for(config.egos, threads, [&](std::size_t e) {
    std::mt19937_64 rng(derive_seed(config.seed, kEgo, e));
    const auto sizes = jittered_sizes(config.bands.sizes, config.size_jitter, rng);
    auto& d = draws[e];
    d.truth.ego = fmt::format("E{:05}", e);
    std::size_t alter = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      std::normal_distribution<double> weight(config.bands.means[k], config.bands.dispersions[k]);
      for (std::size_t m = 0; m < sizes[k]; ++m, ++alter) {
        const double raw = config.bands.dispersions[k] > 0 ? weight(rng) : config.bands.means[k];
        const auto w = static_cast<std::uint64_t>(std::max(1.0, std::round(raw)));
        auto name = fmt::format("{}_A{:04}", d.truth.ego, alter);
        d.counts.push_back({d.truth.ego, name, (w + 1) / 2});
        d.counts.push_back({name, d.truth.ego, w / 2});
        d.truth.alters.push_back(std::move(name));
        d.truth.band.push_back(static_cast<int>(k));
      }
    }
  });
  EgoPopulation pop;
  std::vector<NamedCount> counts;
  for (auto& d : draws) {
    std::move(d.counts.begin(), d.counts.end(), std::back_inserter(counts));
    pop.truth.push_back(std::move(d.truth));
  }
  pop.network = WeightedNetwork::from_counts(std::move(counts));
  return pop;
}

void write_ground_truth(std::ostream& out, const std::vector<EgoTruth>& truth) {
  out << "ego,alter,band\n";
  for (const auto& t : truth)
    for (std::size_t k = 0; k < t.alters.size(); ++k) out << t.ego << ',' << t.alters[k] << ',' << t.band[k] << '\n';
}

std::vector<EgoTruth> read_ground_truth(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "ego,alter,band") throw SchemaError("ground truth needs header ego,alter,band");
  std::map<std::string, std::map<std::string, int>> by_ego;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string::npos) throw SchemaError(fmt::format("ground truth line {} has too few fields", line_no));
    by_ego[line.substr(0, c1)][line.substr(c1 + 1, c2 - c1 - 1)] = std::stoi(line.substr(c2 + 1));
  }
  std::vector<EgoTruth> truth;
  for (auto& [ego, alters] : by_ego) {
    EgoTruth t{ego, {}, {}};
    for (auto& [alter, band] : alters) {
      t.alters.push_back(alter);
      t.band.push_back(band);
    }
    truth.push_back(std::move(t));
  }
  return truth;
}

std::vector<std::uint64_t> sample_tamarit(double mu, std::uint64_t alters, std::size_t layers,
                                          std::uint64_t seed) {
  if (layers < 2) throw ArgumentError("layer model needs at least 2 layers");
  if (alters < 1) throw ArgumentError("layer model needs at least one alter");
  std::vector<double> weight(layers);
  const double top = mu > 0 ? mu * static_cast<double>(layers - 1) : 0.0;
  for (std::size_t k = 0; k < layers; ++k) weight[k] = std::exp(mu * static_cast<double>(k) - top);
  std::vector<double> suffix(layers + 1, 0.0);
  for (std::size_t k = layers; k-- > 0;) suffix[k] = suffix[k + 1] + weight[k];

  std::mt19937_64 rng(derive_seed(seed, kTamarit, 0));
  std::vector<std::uint64_t> counts(layers, 0);
  std::uint64_t remaining = alters;
  for (std::size_t k = 0; k + 1 < layers && remaining > 0; ++k) {
    const double q = std::clamp(weight[k] / suffix[k], 0.0, 1.0);
    std::binomial_distribution<std::uint64_t> draw(remaining, q);
    counts[k] = draw(rng);
    remaining -= counts[k];
  }
  counts[layers - 1] += remaining;
  return counts;
}

PlantedOrderLog gen_planted_order_log(const PlantedOrderConfig& config, unsigned threads) {
  const std::size_t r = config.band_sizes.size();
  if (r == 0 || config.episodes_per_day.size() != r)
    throw ArgumentError("planted order log needs one episode rate per band");
  if (config.stocks == 0 || config.session_seconds <= config.episode_span)
    throw ArgumentError("planted order log needs stocks and a session longer than an episode");

  std::vector<std::vector<OrderEvent>> background(config.background_investors);
  parallel_for(config.background_investors, threads, [&](std::size_t i) {
    std::mt19937_64 rng(derive_seed(config.seed, kBackground, i));
    background[i] = random_orders(fmt::format("B{:05}", i), rng, config.days, config.stocks,
                                  config.background_orders_per_day, config.session_start, config.session_seconds);
  });

  std::vector<std::vector<OrderEvent>> planted(config.egos);
  std::vector<EgoTruth> truth(config.egos);
  parallel_for(config.egos, threads, [&](std::size_t e) {
    std::mt19937_64 rng(derive_seed(config.seed, kPlantedEgo, e));
    const auto sizes = jittered_sizes(config.band_sizes, config.size_jitter, rng);
    auto& t = truth[e];
    t.ego = fmt::format("P{:04}", e);
    for (std::size_t k = 0; k < r; ++k)
      for (std::size_t m = 0; m < sizes[k]; ++m) {
        t.alters.push_back(fmt::format("{}_A{:04}", t.ego, t.alters.size()));
        t.band.push_back(static_cast<int>(k));
      }
    std::uniform_int_distribution<std::int64_t> start(0, config.session_seconds - 1 - config.episode_span);
    std::uniform_int_distribution<std::int64_t> jitter(0, config.episode_span);
    std::uniform_int_distribution<std::size_t> stock(0, config.stocks - 1);
    std::bernoulli_distribution sell(0.5);
    auto& out = planted[e];
    out.reserve(total_size(sizes) * config.days * 4 * config.episodes_per_day.front());
    for (std::size_t d = 0; d < config.days; ++d) {
      const std::int64_t day_start = config.session_start + static_cast<std::int64_t>(d) * kDay;
      for (std::size_t a = 0; a < t.alters.size(); ++a) {
        for (std::size_t ep = 0; ep < config.episodes_per_day[t.band[a]]; ++ep) {
          const std::int64_t t0 = day_start + start(rng);
          const auto s = stock_name(stock(rng));
          const Side side = sell(rng) ? Side::sell : Side::buy;
          for (int rep = 0; rep < 2; ++rep) {
            out.push_back({t.ego, s, side, t0 + jitter(rng)});
            out.push_back({t.alters[a], s, side, t0 + jitter(rng)});
          }
        }
      }
    }
  });

  PlantedOrderLog log;
  auto a = concat(background);
  auto b = concat(planted);
  log.orders = std::move(a);
  std::move(b.begin(), b.end(), std::back_inserter(log.orders));
  sort_orders(log.orders);
  log.truth = std::move(truth);
  return log;
}

}  // namespace egolayers
