#include "egolayers/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <fmt/format.h>

#include "egolayers/error.hpp"
#include "egolayers/parallel.hpp"

namespace egolayers {
namespace {

std::vector<std::size_t> sorted_order(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  return order;
}

// Cost tables of the k-means dynamic program over sorted values.
struct KMeansTables {
  std::vector<std::size_t> order;
  std::vector<std::vector<double>> cost;          // cost[m][j]: best SSE of first j points in m+1 clusters
  std::vector<std::vector<std::size_t>> split;  // start of the last cluster
};

KMeansTables solve_kmeans(std::span<const double> values, int k_max) {
  const std::size_t n = values.size();
  KMeansTables t;
  t.order = sorted_order(values);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = values[t.order[i]];
  const double center = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  std::vector<double> p1(n + 1, 0.0), p2(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double y = x[i] - center;
    p1[i + 1] = p1[i] + y;
    p2[i + 1] = p2[i] + y * y;
  }
  auto sse = [&](std::size_t i, std::size_t j) {
    const double s = p1[j] - p1[i];
    return std::max(0.0, (p2[j] - p2[i]) - s * s / static_cast<double>(j - i));
  };
  const auto k = static_cast<std::size_t>(k_max);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  t.cost.assign(k, std::vector<double>(n + 1, kInf));
  t.split.assign(k, std::vector<std::size_t>(n + 1, 0));
  for (std::size_t j = 1; j <= n; ++j) t.cost[0][j] = sse(0, j);
  for (std::size_t m = 1; m < k; ++m) {
    for (std::size_t j = m + 1; j <= n; ++j) {
      double best = kInf;
      std::size_t arg = m;
      for (std::size_t i = m; i < j; ++i) {
        const double c = t.cost[m - 1][i] + sse(i, j);
        if (c < best) {
          best = c;
          arg = i;
        }
      }
      t.cost[m][j] = best;
      t.split[m][j] = arg;
    }
  }
  return t;
}

Partition backtrack(const KMeansTables& t, std::span<const double> values, int k) {
  const std::size_t n = values.size();
  std::vector<int> sorted_labels(n);
  std::size_t end = n;
  for (int m = k - 1; m >= 0; --m) {
    const std::size_t begin = m == 0 ? 0 : t.split[m][end];
    for (std::size_t i = begin; i < end; ++i) sorted_labels[i] = m;
    end = begin;
  }
  Partition p;
  p.cluster_count = k;
  p.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) p.labels[t.order[i]] = sorted_labels[i];
  p.sse = partition_sse(values, p.labels);
  return p;
}

std::size_t distinct_count(std::span<const double> values) {
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  return static_cast<std::size_t>(std::unique(v.begin(), v.end()) - v.begin());
}

double pairs(double m) { return m * (m - 1.0) / 2.0; }

}  // namespace

std::optional<std::vector<double>> normalize_weights(std::span<const double> raw) {
  if (raw.size() < 2) throw ArgumentError("normalize_weights needs at least 2 weights");
  const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
  const double w_min = *lo, w_max = *hi;
  if (!(w_max > w_min)) return std::nullopt;
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - w_min) / (w_max - w_min);
  return out;
}

double partition_sse(std::span<const double> values, std::span<const int> labels) {
  if (values.size() != labels.size()) throw ArgumentError("labels and values differ in length");
  std::map<int, std::pair<double, double>> sums;  // label -> (sum, count)
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto& s = sums[labels[i]];
    s.first += values[i];
    s.second += 1.0;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto& s = sums[labels[i]];
    const double d = values[i] - s.first / s.second;
    total += d * d;
  }
  return total;
}

Partition optimal_partition(std::span<const double> values, int k) {
  if (k < 1 || static_cast<std::size_t>(k) > values.size())
    throw ArgumentError(fmt::format("cluster count {} outside [1, {}]", k, values.size()));
  return backtrack(solve_kmeans(values, k), values, k);
}

double partition_bic(std::span<const double> values, const Partition& partition) {
  const auto n = static_cast<double>(values.size());
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double floor = 1e-6 * (*hi - *lo) * (*hi - *lo);
  std::vector<double> sum(partition.cluster_count, 0.0), count(partition.cluster_count, 0.0),
      sse(partition.cluster_count, 0.0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    sum[partition.labels[i]] += values[i];
    count[partition.labels[i]] += 1.0;
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    const int c = partition.labels[i];
    const double d = values[i] - sum[c] / count[c];
    sse[c] += d * d;
  }
  double log_l = 0.0;
  for (int c = 0; c < partition.cluster_count; ++c) {
    if (count[c] == 0) continue;
    const double var = std::max(sse[c] / count[c], floor);
    log_l += count[c] * std::log(count[c] / n) - 0.5 * count[c] * std::log(2.0 * std::numbers::pi * var) -
             sse[c] / (2.0 * var);
  }
  return (3.0 * partition.cluster_count - 1.0) * std::log(n) - 2.0 * log_l;
}

KMeansResult kmeans_1d(std::span<const double> values, int k_max) {
  if (k_max < 1) throw ArgumentError("k_max must be at least 1");
  if (values.empty()) throw ArgumentError("kmeans_1d needs at least one value");
  KMeansResult result;
  const int k_top = static_cast<int>(std::min<std::size_t>(k_max, distinct_count(values)));
  if (k_top == 1) {
    result.partition = optimal_partition(values, 1);
    return result;
  }
  const auto tables = solve_kmeans(values, k_top);
  double best = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= k_top; ++k) {
    auto p = backtrack(tables, values, k);
    const double bic = partition_bic(values, p);
    result.bic.push_back(bic);
    if (bic < best) {
      best = bic;
      result.partition = std::move(p);
    }
  }
  return result;
}

HtBreakResult ht_break(std::span<const double> values, double head_limit) {
  if (values.size() < 2) throw ArgumentError("ht_break needs at least 2 values");
  HtBreakResult result;
  std::vector<double> current(values.begin(), values.end());
  while (true) {
    const double m = std::accumulate(current.begin(), current.end(), 0.0) / static_cast<double>(current.size());
    std::vector<double> head;
    std::copy_if(current.begin(), current.end(), std::back_inserter(head), [&](double v) { return v > m; });
    if (head.empty()) break;
    const double fraction = static_cast<double>(head.size()) / static_cast<double>(current.size());
    result.breaks.push_back(m);
    result.head_fractions.push_back(fraction);
    if (!(fraction < head_limit && head.size() >= 2)) break;
    current = std::move(head);
  }
  auto& p = result.partition;
  p.cluster_count = static_cast<int>(result.breaks.size()) + 1;
  p.labels.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    p.labels[i] = static_cast<int>(std::lower_bound(result.breaks.begin(), result.breaks.end(), values[i]) -
                                   result.breaks.begin());
  p.sse = partition_sse(values, p.labels);
  return result;
}

std::string_view algorithm_name(LayerAlgorithm algorithm) {
  return algorithm == LayerAlgorithm::kmeans ? "kmeans" : "ht_break";
}

std::optional<LayerAlgorithm> parse_algorithm(std::string_view name) {
  if (name == "kmeans") return LayerAlgorithm::kmeans;
  if (name == "ht_break" || name == "htbreak") return LayerAlgorithm::ht_break;
  return std::nullopt;
}

LayerPartition summarize_layers(std::span<const double> weights, std::span<const int> labels,
                                LayerAlgorithm algorithm) {
  if (weights.size() != labels.size()) throw ArgumentError("labels and weights differ in length");
  struct Cluster {
    int label;
    double sum = 0.0;
    std::size_t count = 0;
    double mean() const { return sum / static_cast<double>(count); }
  };
  std::map<int, Cluster> by_label;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    auto [it, _] = by_label.try_emplace(labels[i], Cluster{labels[i]});
    it->second.sum += weights[i];
    ++it->second.count;
  }
  std::vector<Cluster> clusters;
  for (const auto& [_, c] : by_label) clusters.push_back(c);
  std::stable_sort(clusters.begin(), clusters.end(),
                   [](const Cluster& a, const Cluster& b) { return a.mean() > b.mean(); });

  LayerPartition out;
  out.algorithm = algorithm;
  std::map<int, int> rank;
  std::size_t running = 0;
  for (std::size_t k = 0; k < clusters.size(); ++k) {
    rank[clusters[k].label] = static_cast<int>(k);
    out.layer_counts.push_back(clusters[k].count);
    out.layer_mean_weight.push_back(clusters[k].mean());
    running += clusters[k].count;
    out.cumulative.push_back(running);
  }
  for (std::size_t k = 0; k + 1 < out.cumulative.size(); ++k)
    out.ratios.push_back(static_cast<double>(out.cumulative[k + 1]) / static_cast<double>(out.cumulative[k]));
  if (!out.ratios.empty())
    out.mean_ratio = std::accumulate(out.ratios.begin(), out.ratios.end(), 0.0) / static_cast<double>(out.ratios.size());
  out.layer_of.resize(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out.layer_of[i] = rank[labels[i]];
  return out;
}

double jaccard_compare(std::span<const int> a, std::span<const int> b, JaccardVariant variant) {
  if (a.size() != b.size()) throw ArgumentError("clusterings cover different alter sets");
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> size_a, size_b;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1.0;
    size_a[a[i]] += 1.0;
    size_b[b[i]] += 1.0;
  }
  if (variant == JaccardVariant::co_membership) {
    double both = 0.0, in_a = 0.0, in_b = 0.0;
    for (const auto& [_, m] : joint) both += pairs(m);
    for (const auto& [_, m] : size_a) in_a += pairs(m);
    for (const auto& [_, m] : size_b) in_b += pairs(m);
    const double either = in_a + in_b - both;
    return either == 0.0 ? 1.0 : both / either;
  }
  if (a.empty()) return 1.0;
  auto directed = [&](const std::map<int, double>& from, const std::map<int, double>& to, bool a_first) {
    double total = 0.0;
    for (const auto& [x, nx] : from) {
      double best = 0.0;
      for (const auto& [y, ny] : to) {
        const auto it = joint.find(a_first ? std::pair{x, y} : std::pair{y, x});
        const double inter = it == joint.end() ? 0.0 : it->second;
        best = std::max(best, inter / (nx + ny - inter));
      }
      total += nx * best;
    }
    return total / static_cast<double>(a.size());
  };
  return 0.5 * (directed(size_a, size_b, true) + directed(size_b, size_a, false));
}

double jaccard_compare(const std::map<std::string, int>& a, const std::map<std::string, int>& b,
                       JaccardVariant variant) {
  if (a.size() != b.size()) throw ArgumentError("clusterings cover different alter sets");
  std::vector<int> la, lb;
  auto ib = b.begin();
  for (const auto& [id, label] : a) {
    if (ib->first != id) throw ArgumentError(fmt::format("alter {} missing from one clustering", id));
    la.push_back(label);
    lb.push_back(ib->second);
    ++ib;
  }
  return jaccard_compare(la, lb, variant);
}

EgoLayers ego_weights(const WeightedNetwork& network, NodeIndex ego) {
  EgoLayers out;
  out.ego = network.name(ego);
  for (const auto& nb : network.neighbors(ego)) {
    out.alters.push_back(network.name(nb.node));
    out.weights.push_back(static_cast<double>(nb.weight));
  }
  out.degree = out.alters.size();
  return out;
}

EgoLayers detect_layers(EgoLayers ego, LayerAlgorithm algorithm, int k_max) {
  std::optional<std::vector<double>> normalized;
  if (ego.weights.size() >= 2) normalized = normalize_weights(ego.weights);
  std::vector<int> labels(ego.weights.size(), 0);
  if (!normalized) {
    ego.degenerate = true;
  } else {
    ego.normalized = std::move(*normalized);
    labels = algorithm == LayerAlgorithm::kmeans ? kmeans_1d(ego.normalized, k_max).partition.labels
                                                 : ht_break(ego.normalized).partition.labels;
  }
  ego.partition = summarize_layers(ego.weights, labels, algorithm);
  return ego;
}

LayerCensus layer_census(const WeightedNetwork& network, const CensusConfig& config) {
  LayerCensus census;
  census.algorithm = config.algorithm;
  census.degree_floor = config.degree_floor;
  std::vector<NodeIndex> egos;
  for (NodeIndex n = 0; n < network.node_count(); ++n)
    if (network.degree(n) > config.degree_floor) egos.push_back(n);
  census.egos = egos.size();
  census.per_ego.resize(egos.size());
  parallel_for(egos.size(), config.threads, [&](std::size_t k) {
    census.per_ego[k] = detect_layers(ego_weights(network, egos[k]), config.algorithm, config.k_max);
  });

  std::map<int, std::vector<const EgoLayers*>> groups;
  for (const auto& e : census.per_ego) {
    if (e.degenerate) {
      ++census.degenerate;
      continue;
    }
    groups[static_cast<int>(e.partition.layer_counts.size())].push_back(&e);
  }
  const double valid = static_cast<double>(census.egos - census.degenerate);
  for (const auto& [c, members] : groups) {
    CensusRow row;
    row.layers = c;
    row.count = members.size();
    row.fraction = static_cast<double>(members.size()) / valid;
    row.mean_layer_counts.assign(c, 0.0);
    row.mean_cumulative.assign(c, 0.0);
    double ratio_sum = 0.0;
    std::size_t ratio_count = 0;
    for (const auto* e : members) {
      for (int k = 0; k < c; ++k) {
        row.mean_layer_counts[k] += static_cast<double>(e->partition.layer_counts[k]);
        row.mean_cumulative[k] += static_cast<double>(e->partition.cumulative[k]);
      }
      if (e->partition.mean_ratio) {
        ratio_sum += *e->partition.mean_ratio;
        ++ratio_count;
      }
    }
    for (int k = 0; k < c; ++k) {
      row.mean_layer_counts[k] /= static_cast<double>(members.size());
      row.mean_cumulative[k] /= static_cast<double>(members.size());
    }
    if (ratio_count > 0) row.mean_ratio = ratio_sum / static_cast<double>(ratio_count);
    census.rows.push_back(std::move(row));
  }
  return census;
}

CensusRow dunbar_reference_row() {
  CensusRow row;
  row.layers = 4;
  row.mean_layer_counts = {5, 10, 35, 100};
  row.mean_cumulative = {5, 15, 50, 150};
  row.mean_ratio = 3.0;
  return row;
}

std::optional<double> mean_jaccard(const LayerCensus& a, const LayerCensus& b, JaccardVariant variant) {
  double total = 0.0;
  std::size_t count = 0;
  auto ib = b.per_ego.begin();
  for (const auto& ea : a.per_ego) {
    while (ib != b.per_ego.end() && ib->ego < ea.ego) ++ib;
    if (ib == b.per_ego.end()) break;
    if (ib->ego != ea.ego || ea.degenerate || ib->degenerate || ea.alters != ib->alters) continue;
    total += jaccard_compare(ea.partition.layer_of, ib->partition.layer_of, variant);
    ++count;
  }
  if (count == 0) return std::nullopt;
  return total / static_cast<double>(count);
}

}  // namespace egolayers
