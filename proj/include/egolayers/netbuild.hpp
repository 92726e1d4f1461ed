#pragma once

// Weighted interaction networks built from order co-occurrence (EIN) and
// reciprocal calls (CN). Directional counts are kept so each edge can later be
// tested for over-expression in both directions.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "egolayers/ingest.hpp"

namespace egolayers {

using NodeIndex = std::uint32_t;

/// Directed count for one ordered pair; `count >= 1` for every stored record.
struct DirectedEdgeStats {
  NodeIndex source = 0;
  NodeIndex target = 0;
  std::uint64_t count = 0;

  friend bool operator==(const DirectedEdgeStats&, const DirectedEdgeStats&) = default;
};

/// Unordered edge {i, j} with i < j (node indices follow lexicographic id order).
struct UndirectedEdge {
  NodeIndex i = 0;
  NodeIndex j = 0;
  std::uint64_t count_ij = 0;
  std::uint64_t count_ji = 0;

  std::uint64_t weight() const { return count_ij + count_ji; }
  friend bool operator==(const UndirectedEdge&, const UndirectedEdge&) = default;
};

struct NamedCount {
  std::string source;
  std::string target;
  std::uint64_t count = 0;
};

struct Neighbor {
  NodeIndex node = 0;
  std::uint64_t weight = 0;
};

/// Per-node marginal totals supplied from outside the retained pair set
/// (used when CN marginals should count non-reciprocal calls too).
struct ExternalMarginals {
  std::map<std::string, std::uint64_t> outgoing;
  std::map<std::string, std::uint64_t> incoming;
  std::uint64_t grand_total = 0;
};

/// Immutable weighted network. Node set is the set of edge endpoints, sorted by
/// id; every stored directed pair is part of an edge. Marginals default to
/// totals over the stored directed counts, so sum(W) == grand_total().
class WeightedNetwork {
 public:
  WeightedNetwork() = default;

  /// Builds from (source, target, count) triples; duplicates are summed, zero
  /// counts and self-pairs are dropped.
  static WeightedNetwork from_counts(std::vector<NamedCount> counts);

  /// Same as from_counts but with ids already interned. `names` may contain
  /// unused or unsorted entries; they are re-indexed.
  static WeightedNetwork from_indexed_counts(std::span<const std::string> names,
                                             std::vector<DirectedEdgeStats> counts);

  /// Replaces marginals with externally supplied totals. Every node must appear
  /// with totals at least as large as its retained counts.
  WeightedNetwork with_marginals(const ExternalMarginals& marginals) const;

  std::size_t node_count() const { return names_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  const std::vector<std::string>& nodes() const { return names_; }
  const std::string& name(NodeIndex n) const { return names_[n]; }
  std::optional<NodeIndex> find(std::string_view id) const;

  const std::vector<DirectedEdgeStats>& directed_stats() const { return directed_; }
  const std::vector<UndirectedEdge>& edges() const { return edges_; }

  std::uint64_t count(NodeIndex source, NodeIndex target) const;
  std::uint64_t outgoing_total(NodeIndex n) const { return out_total_[n]; }
  std::uint64_t incoming_total(NodeIndex n) const { return in_total_[n]; }
  std::uint64_t grand_total() const { return grand_total_; }
  bool has_external_marginals() const { return external_marginals_; }

  std::size_t degree(NodeIndex n) const { return adjacency_offsets_[n + 1] - adjacency_offsets_[n]; }
  std::uint64_t weighted_degree(NodeIndex n) const;
  /// Neighbors sorted by node index (= id order).
  std::span<const Neighbor> neighbors(NodeIndex n) const;

  ExternalMarginals marginals() const;

  friend bool operator==(const WeightedNetwork& a, const WeightedNetwork& b);

 private:
  void finalize();

  std::vector<std::string> names_;
  std::vector<DirectedEdgeStats> directed_;  // sorted by (source, target)
  std::vector<UndirectedEdge> edges_;        // sorted by (i, j)
  std::vector<std::uint64_t> out_total_;
  std::vector<std::uint64_t> in_total_;
  std::uint64_t grand_total_ = 0;
  bool external_marginals_ = false;
  std::vector<std::size_t> adjacency_offsets_{0};
  std::vector<Neighbor> adjacency_;
};

enum class CooccurrenceCounting {
  order_pairs,        // every qualifying (order, order) pair counts once
  initiating_orders,  // each initiating order counts once per counterpart investor
};

struct EinConfig {
  std::int64_t window_seconds = 30;
  std::uint64_t min_cooccurrence = 3;
  CooccurrenceCounting counting = CooccurrenceCounting::order_pairs;
};

/// One trading day: same-stock same-side orders from different investors with
/// 0 <= t_b - t_a <= window count as a pair a -> b; simultaneous orders are
/// attributed from the lexicographically smaller investor id. Pairs whose
/// two-way count reaches min_cooccurrence become edges.
WeightedNetwork build_ein_daily(std::span<const OrderEvent> orders, const EinConfig& config = {});

/// Day index of a timestamp under a fixed offset (seconds east of UTC).
std::int64_t day_of(std::int64_t timestamp, std::int64_t utc_offset_seconds);

std::map<std::int64_t, std::vector<OrderEvent>> split_by_day(std::span<const OrderEvent> orders,
                                                             std::int64_t utc_offset_seconds);

/// Daily EINs over all days in `orders`, aggregated. Equivalent to
/// aggregate_networks(build_ein_daily(day) for each day) but interns ids once
/// and builds days in parallel.
WeightedNetwork build_ein(std::span<const OrderEvent> orders, const EinConfig& config,
                          std::int64_t utc_offset_seconds = 0, unsigned threads = 1);

/// Union of nodes, directed counts summed.
WeightedNetwork aggregate_networks(std::span<const WeightedNetwork> networks);

enum class CnMarginals {
  reciprocal_only,  // marginals over retained (reciprocal) pairs only
  all_calls,        // marginals count every call of retained nodes
};

/// Keeps pairs with calls in both directions.
WeightedNetwork build_cn(std::span<const CallEvent> calls,
                         CnMarginals marginals = CnMarginals::reciprocal_only);

/// Columns i,j,W,count_ij,count_ji sorted by (i, j).
void write_edge_list(std::ostream& out, const WeightedNetwork& network);
WeightedNetwork read_edge_list(std::istream& in);

/// JSON sidecar carrying marginals (needed only when they are external).
void write_marginals(std::ostream& out, const WeightedNetwork& network);
ExternalMarginals read_marginals(std::istream& in);

}  // namespace egolayers
