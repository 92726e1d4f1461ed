#include "egolayers/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>

#include <fmt/format.h>
#include <json.hpp>

#include "egolayers/error.hpp"
#include "egolayers/parallel.hpp"

namespace egolayers {
namespace {

std::string opt(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

std::pair<std::string, std::string> param_columns(const FamilyParams& p) {
  return std::visit(
      [](const auto& q) -> std::pair<std::string, std::string> {
        using T = std::decay_t<decltype(q)>;
        if constexpr (std::is_same_v<T, PowerLawParams>)
          return {fmt::format("alpha={}", format_number(q.alpha)), fmt::format("x_min={}", format_number(q.x_min))};
        else if constexpr (std::is_same_v<T, NormalParams>)
          return {fmt::format("mu={}", format_number(q.mu)), fmt::format("sigma={}", format_number(q.sigma))};
        else if constexpr (std::is_same_v<T, ExponentialParams>)
          return {fmt::format("lambda={}", format_number(q.lambda)), fmt::format("scale={}", format_number(q.scale()))};
        else
          return {fmt::format("mu={}", format_number(q.mu)), fmt::format("sigma={}", format_number(q.sigma))};
      },
      p);
}

// Log-spaced edges covering [lo, hi].
std::vector<double> log_edges(double lo, double hi, std::size_t bins) {
  std::vector<double> edges(bins + 1);
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t k = 0; k <= bins; ++k) edges[k] = std::exp(a + (b - a) * static_cast<double>(k) / static_cast<double>(bins));
  edges.front() = lo;
  edges.back() = hi;
  return edges;
}

}  // namespace

std::string format_number(double value) {
  if (std::isnan(value)) return {};
  return fmt::format("{}", value);
}

Summary summarize(std::span<const double> values) {
  Summary s;
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.sd = std::sqrt(ss / n);
  s.cv = s.mean != 0.0 ? s.sd / s.mean : std::nan("");
  return s;
}

std::vector<DegreeBucket> degree_census(const WeightedNetwork& network) {
  struct Range {
    const char* label;
    std::size_t lo;  // exclusive
    std::size_t hi;  // inclusive
  };
  const Range ranges[] = {{"k>100", 100, static_cast<std::size_t>(-1)}, {"50<k<=100", 50, 100}, {"k<=50", 0, 50}};
  std::vector<DegreeBucket> out;
  for (const auto& r : ranges) {
    std::vector<double> k, w;
    for (NodeIndex n = 0; n < network.node_count(); ++n) {
      const auto d = network.degree(n);
      const bool inside = r.lo == 0 ? d <= r.hi : (d > r.lo && d <= r.hi);
      if (!inside) continue;
      k.push_back(static_cast<double>(d));
      w.push_back(static_cast<double>(network.weighted_degree(n)));
    }
    if (k.empty()) continue;
    out.push_back({r.label, k.size(), static_cast<double>(k.size()) / static_cast<double>(network.node_count()),
                   summarize(k), summarize(w)});
  }
  return out;
}

void write_degree_census(std::ostream& out, std::span<const DegreeBucket> buckets) {
  out << "bucket,N,f,k_mean,k_sd,k_cv,w_mean,w_sd,w_cv\n";
  for (const auto& b : buckets)
    out << fmt::format("{},{},{},{},{},{},{},{},{}\n", b.label, b.nodes, format_number(b.fraction),
                       format_number(b.degree.mean), format_number(b.degree.sd), format_number(b.degree.cv),
                       format_number(b.weighted_degree.mean), format_number(b.weighted_degree.sd),
                       format_number(b.weighted_degree.cv));
}

std::vector<FamilyFitRow> fit_sample(const std::string& sample, std::span<const double> values,
                                     std::size_t bootstrap, std::uint64_t seed, unsigned threads) {
  std::vector<FamilyFitRow> rows;
  std::vector<FitResult> fits;
  for (Family f : kAllFamilies) {
    FamilyFitRow row{sample, f, std::nullopt, "ok", std::nullopt, false};
    try {
      row.fit = fit_family(values, f);
      fits.push_back(*row.fit);
      if (bootstrap > 0)
        row.bootstrap_ks_pvalue =
            bootstrap_pvalue(values, f, GofStatistic::ks, bootstrap, derive_seed(seed, 0xF17, static_cast<std::uint64_t>(f)), threads).pvalue;
    } catch (const std::exception& e) {
      row.status = e.what();
    }
    rows.push_back(std::move(row));
  }
  if (!fits.empty()) {
    const Family best = select_by_aic(fits);
    for (auto& r : rows) r.selected = r.fit && r.family == best;
  }
  return rows;
}

void write_fit_report(std::ostream& out, std::span<const FamilyFitRow> rows) {
  out << "sample,family,param1,param2,log_likelihood,aic,ks_d,ks_p,bootstrap_ks_p,selected,status\n";
  for (const auto& r : rows) {
    if (!r.fit) {
      out << fmt::format("{},{},,,,,,,,0,\"{}\"\n", r.sample, family_name(r.family), r.status);
      continue;
    }
    const auto [p1, p2] = param_columns(r.fit->params);
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},ok\n", r.sample, family_name(r.family), p1, p2,
                       format_number(r.fit->log_likelihood), format_number(r.fit->aic),
                       format_number(r.fit->ks_stat), format_number(r.fit->ks_pvalue), opt(r.bootstrap_ks_pvalue),
                       r.selected ? 1 : 0);
  }
}

void write_mixed_fit(std::ostream& out, const std::string& sample, const MixedLogNormalFit& fit) {
  out << "sample,k_H,lower_mu,lower_sigma,upper_mu,upper_sigma,residual,n_lower,n_upper,flat,curve_points,K\n";
  out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},cdf\n", sample, format_number(fit.threshold),
                     format_number(fit.lower.mu), format_number(fit.lower.sigma), format_number(fit.upper.mu),
                     format_number(fit.upper.sigma), format_number(fit.residual), fit.n_lower, fit.n_upper,
                     fit.flat ? 1 : 0, fit.curve.size());
}

void write_residual_curve(std::ostream& out, const MixedLogNormalFit& fit) {
  out << "threshold,residual\n";
  for (const auto& p : fit.curve) out << format_number(p.threshold) << ',' << format_number(p.residual) << '\n';
}

std::vector<DensityPoint> empirical_density(std::span<const double> values, std::size_t bins) {
  std::vector<double> positive;
  for (double v : values)
    if (v > 0) positive.push_back(v);
  if (positive.empty() || bins == 0) return {};
  const auto [lo_it, hi_it] = std::minmax_element(positive.begin(), positive.end());
  const double lo = *lo_it, hi = *hi_it;
  const double n = static_cast<double>(positive.size());
  if (!(hi > lo)) return {{lo, 1.0}};
  const auto edges = log_edges(lo, hi, bins);
  std::vector<double> counts(bins, 0.0);
  for (double v : positive) {
    auto k = static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), v) - edges.begin());
    counts[std::min(bins, std::max<std::size_t>(k, 1)) - 1] += 1.0;
  }
  std::vector<DensityPoint> out;
  for (std::size_t k = 0; k < bins; ++k)
    out.push_back({std::sqrt(edges[k] * edges[k + 1]), counts[k] / (n * (edges[k + 1] - edges[k]))});
  return out;
}

void write_density(std::ostream& out, std::span<const DensityPoint> points) {
  out << "value,density\n";
  for (const auto& p : points) out << format_number(p.value) << ',' << format_number(p.density) << '\n';
}

void write_layer_census(std::ostream& out, std::span<const LayerCensus> censuses,
                        const std::optional<CensusRow>& reference) {
  int width = 6;
  for (const auto& c : censuses)
    for (const auto& r : c.rows) width = std::max(width, r.layers);
  out << "algorithm,c,count,fraction";
  for (int k = 1; k <= width; ++k) out << ",n" << k;
  for (int k = 1; k <= width; ++k) out << ",l" << k;
  out << ",mean_r\n";
  auto row_line = [&](std::string_view name, const CensusRow& r) {
    out << fmt::format("{},{},{},{}", name, r.layers, r.count, format_number(r.fraction));
    for (int k = 0; k < width; ++k) out << ',' << (k < r.layers ? format_number(r.mean_cumulative[k]) : "");
    for (int k = 0; k < width; ++k) out << ',' << (k < r.layers ? format_number(r.mean_layer_counts[k]) : "");
    out << ',' << opt(r.mean_ratio) << '\n';
  };
  for (const auto& c : censuses)
    for (const auto& r : c.rows) row_line(algorithm_name(c.algorithm), r);
  if (reference) row_line("reference", *reference);
}

void write_ego_layers(std::ostream& out, const LayerCensus& census) {
  for (const auto& e : census.per_ego) {
    nlohmann::ordered_json j;
    j["ego"] = e.ego;
    j["algorithm"] = algorithm_name(census.algorithm);
    j["degree"] = e.degree;
    j["degenerate"] = e.degenerate;
    j["c"] = e.partition.layer_counts.size();
    j["layer_counts"] = e.partition.layer_counts;
    j["cumulative"] = e.partition.cumulative;
    j["ratios"] = e.partition.ratios;
    j["mean_ratio"] = e.partition.mean_ratio ? nlohmann::ordered_json(*e.partition.mean_ratio) : nullptr;
    j["layer_mean_weight"] = e.partition.layer_mean_weight;
    out << j.dump() << '\n';
  }
}

void write_layer_histograms(std::ostream& out, const LayerCensus& census) {
  std::map<std::tuple<int, int, std::size_t>, std::size_t> counts;
  for (const auto& e : census.per_ego) {
    if (e.degenerate) continue;
    const int c = static_cast<int>(e.partition.layer_counts.size());
    for (int k = 0; k < c; ++k) ++counts[{c, k + 1, e.partition.layer_counts[k]}];
  }
  out << "algorithm,c,layer,alter_count,egos\n";
  for (const auto& [key, n] : counts)
    out << fmt::format("{},{},{},{},{}\n", algorithm_name(census.algorithm), std::get<0>(key), std::get<1>(key),
                       std::get<2>(key), n);
}

void write_layer_fits(std::ostream& out, const LayerCensus& census) {
  std::map<std::pair<int, int>, std::vector<double>> samples;
  for (const auto& e : census.per_ego) {
    if (e.degenerate) continue;
    const int c = static_cast<int>(e.partition.layer_counts.size());
    for (int k = 0; k < c; ++k) samples[{c, k + 1}].push_back(static_cast<double>(e.partition.layer_counts[k]));
  }
  out << "algorithm,c,layer,egos,mu_L,sigma_L,status\n";
  for (const auto& [key, values] : samples) {
    std::string mu, sigma, status = "ok";
    try {
      const auto fit = fit_family(values, Family::log_normal);
      const auto& p = std::get<LogNormalParams>(fit.params);
      mu = format_number(p.mu);
      sigma = format_number(p.sigma);
    } catch (const std::exception& e) {
      status = fmt::format("\"{}\"", e.what());
    }
    out << fmt::format("{},{},{},{},{},{},{}\n", algorithm_name(census.algorithm), key.first, key.second,
                       values.size(), mu, sigma, status);
  }
}

std::vector<EgoEstimate> estimate_census(const LayerCensus& census, std::uint64_t population) {
  std::vector<EgoEstimate> out;
  for (const auto& e : census.per_ego) {
    if (e.degenerate || e.partition.layer_counts.size() < 2) continue;
    TamaritInput input{{e.partition.layer_counts.begin(), e.partition.layer_counts.end()}, population};
    out.push_back({e.ego, census.algorithm, static_cast<int>(input.layer_counts.size()), estimate_mu(input)});
  }
  return out;
}

void write_estimates(std::ostream& out, std::span<const EgoEstimate> estimates) {
  out << "ego,algorithm,c,mu_hat,ratio_hat,log_likelihood,divergence\n";
  for (const auto& e : estimates)
    out << fmt::format("{},{},{},{},{},{},{}\n", e.ego, algorithm_name(e.algorithm), e.layers,
                       format_number(e.estimate.mu_hat), format_number(e.estimate.ratio_hat),
                       format_number(e.estimate.log_likelihood), divergence_name(e.estimate.divergence));
}

void write_ratio_fits(std::ostream& out, std::span<const RatioFitRow> rows) {
  out << "algorithm,used,excluded,mu_L,sigma_L,median_ratio,ratio_at_mu,chi2,chi2_dof,chi2_p,ks_d,ks_p,ad_a2,ad_p,"
         "status\n";
  for (const auto& r : rows) {
    if (!r.fit) {
      out << fmt::format("{},,,,,,,,,,,,,,\"{}\"\n", algorithm_name(r.algorithm), r.status);
      continue;
    }
    const auto& f = *r.fit;
    const auto& p = std::get<LogNormalParams>(f.fit.params);
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},ok\n", algorithm_name(r.algorithm), f.used,
                       f.excluded, format_number(p.mu), format_number(p.sigma), format_number(f.median_ratio),
                       format_number(f.ratio_at_mu), format_number(f.chi2.statistic), f.chi2.dof,
                       format_number(f.chi2.pvalue), format_number(f.ks.statistic), format_number(f.ks.pvalue),
                       format_number(f.ad.statistic), format_number(f.ad.pvalue));
  }
}

void write_ratio_histograms(std::ostream& out, std::span<const EgoEstimate> estimates,
                            std::span<const RatioFitRow> fits) {
  std::map<std::pair<int, int>, std::vector<double>> groups;  // (algorithm, c)
  for (const auto& e : estimates)
    if (e.estimate.divergence == Divergence::none)
      groups[{static_cast<int>(e.algorithm), e.layers}].push_back(e.estimate.ratio_hat);
  out << "algorithm,c,bin_lower,bin_upper,count,density,fitted_density\n";
  constexpr std::size_t kBins = 20;
  for (const auto& [key, ratios] : groups) {
    const auto algorithm = static_cast<LayerAlgorithm>(key.first);
    std::optional<FamilyParams> model;
    for (const auto& f : fits)
      if (f.algorithm == algorithm && f.fit) model = f.fit->fit.params;
    const auto [lo_it, hi_it] = std::minmax_element(ratios.begin(), ratios.end());
    const double lo = *lo_it, hi = *hi_it > *lo_it ? *hi_it : *lo_it * (1.0 + 1e-9);
    const auto edges = log_edges(lo, hi, kBins);
    std::vector<std::size_t> counts(kBins, 0);
    for (double v : ratios) {
      auto k = static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), v) - edges.begin());
      ++counts[std::min(kBins, std::max<std::size_t>(k, 1)) - 1];
    }
    const double n = static_cast<double>(ratios.size());
    for (std::size_t k = 0; k < kBins; ++k) {
      const double width = edges[k + 1] - edges[k];
      const double centre = std::sqrt(edges[k] * edges[k + 1]);
      out << fmt::format("{},{},{},{},{},{},{}\n", algorithm_name(algorithm), key.second, format_number(edges[k]),
                         format_number(edges[k + 1]), counts[k], format_number(counts[k] / (n * width)),
                         model ? format_number(pdf(*model, centre)) : std::string());
    }
  }
}

}  // namespace egolayers
