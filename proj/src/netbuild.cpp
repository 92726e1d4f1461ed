#include "egolayers/netbuild.hpp"

#include <algorithm>
#include <iostream>
#include <numeric>
#include <tuple>
#include <unordered_map>

#include <fmt/format.h>
#include <json.hpp>

#include "egolayers/error.hpp"
#include "egolayers/parallel.hpp"

namespace egolayers {
namespace {

std::uint64_t pair_key(NodeIndex s, NodeIndex t) {
  return (static_cast<std::uint64_t>(s) << 32) | t;
}

// Sorts by (source, target) and sums duplicate pairs; drops zero counts and self-pairs.
void canonicalize(std::vector<DirectedEdgeStats>& counts) {
  std::erase_if(counts, [](const auto& d) { return d.count == 0 || d.source == d.target; });
  std::sort(counts.begin(), counts.end(), [](const auto& a, const auto& b) {
    return std::tie(a.source, a.target) < std::tie(b.source, b.target);
  });
  std::size_t out = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (out > 0 && counts[out - 1].source == counts[k].source &&
        counts[out - 1].target == counts[k].target) {
      counts[out - 1].count += counts[k].count;
    } else {
      counts[out++] = counts[k];
    }
  }
  counts.resize(out);
}

struct CompactOrder {
  std::uint32_t stock;
  std::uint8_t side;
  std::int64_t time;
  std::uint32_t investor;  // lexicographic rank of the investor id
};

struct Interned {
  std::vector<std::string> investors;  // sorted
  std::vector<CompactOrder> orders;    // same order as input
};

Interned intern_orders(std::span<const OrderEvent> orders) {
  Interned out;
  out.investors.reserve(orders.size() / 8 + 1);
  {
    std::vector<std::string_view> ids;
    ids.reserve(orders.size());
    for (const auto& o : orders) ids.push_back(o.investor_id);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    out.investors.assign(ids.begin(), ids.end());
  }
  std::unordered_map<std::string_view, std::uint32_t> investor_rank;
  investor_rank.reserve(out.investors.size() * 2);
  for (std::uint32_t k = 0; k < out.investors.size(); ++k) investor_rank.emplace(out.investors[k], k);
  std::unordered_map<std::string_view, std::uint32_t> stock_index;
  out.orders.reserve(orders.size());
  for (const auto& o : orders) {
    const auto [it, inserted] =
        stock_index.emplace(o.stock_id, static_cast<std::uint32_t>(stock_index.size()));
    out.orders.push_back({it->second, static_cast<std::uint8_t>(o.side), o.timestamp,
                          investor_rank.at(o.investor_id)});
  }
  return out;
}

// Directed co-occurrence counts of one day, filtered to pairs whose two-way
// total reaches the threshold.
std::vector<DirectedEdgeStats> daily_cooccurrence(std::vector<CompactOrder> orders,
                                                  const EinConfig& config) {
  std::sort(orders.begin(), orders.end(), [](const CompactOrder& a, const CompactOrder& b) {
    return std::tie(a.stock, a.side, a.time, a.investor) <
           std::tie(b.stock, b.side, b.time, b.investor);
  });
  std::unordered_map<std::uint64_t, std::uint64_t> counts;
  std::vector<std::uint32_t> seen;
  for (std::size_t p = 0; p < orders.size(); ++p) {
    const auto& a = orders[p];
    seen.clear();
    for (std::size_t q = p + 1; q < orders.size(); ++q) {
      const auto& b = orders[q];
      if (b.stock != a.stock || b.side != a.side || b.time - a.time > config.window_seconds) break;
      if (b.investor == a.investor) continue;
      if (config.counting == CooccurrenceCounting::order_pairs) {
        ++counts[pair_key(a.investor, b.investor)];
      } else if (std::find(seen.begin(), seen.end(), b.investor) == seen.end()) {
        seen.push_back(b.investor);
        ++counts[pair_key(a.investor, b.investor)];
      }
    }
  }
  std::vector<DirectedEdgeStats> directed;
  directed.reserve(counts.size());
  for (const auto& [key, c] : counts) {
    const auto s = static_cast<NodeIndex>(key >> 32);
    const auto t = static_cast<NodeIndex>(key & 0xffffffffu);
    const auto reverse = counts.find(pair_key(t, s));
    const std::uint64_t total = c + (reverse == counts.end() ? 0 : reverse->second);
    if (total >= config.min_cooccurrence) directed.push_back({s, t, c});
  }
  canonicalize(directed);
  return directed;
}

void check_config(const EinConfig& config) {
  if (config.window_seconds <= 0) throw ArgumentError("window_seconds must be positive");
  if (config.min_cooccurrence < 1) throw ArgumentError("min_cooccurrence must be >= 1");
}

}  // namespace

WeightedNetwork WeightedNetwork::from_counts(std::vector<NamedCount> counts) {
  std::vector<std::string> names;
  names.reserve(counts.size() * 2);
  for (const auto& c : counts) {
    names.push_back(c.source);
    names.push_back(c.target);
  }
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  auto index_of = [&](const std::string& id) {
    return static_cast<NodeIndex>(std::lower_bound(names.begin(), names.end(), id) - names.begin());
  };
  std::vector<DirectedEdgeStats> directed;
  directed.reserve(counts.size());
  for (const auto& c : counts) directed.push_back({index_of(c.source), index_of(c.target), c.count});
  return from_indexed_counts(names, std::move(directed));
}

WeightedNetwork WeightedNetwork::from_indexed_counts(std::span<const std::string> names,
                                                     std::vector<DirectedEdgeStats> counts) {
  canonicalize(counts);
  std::vector<NodeIndex> used;
  used.reserve(counts.size() * 2);
  for (const auto& d : counts) {
    if (d.source >= names.size() || d.target >= names.size())
      throw ArgumentError("directed count refers to an unknown node index");
    used.push_back(d.source);
    used.push_back(d.target);
  }
  std::sort(used.begin(), used.end());
  used.erase(std::unique(used.begin(), used.end()), used.end());

  std::vector<std::string> sorted;
  sorted.reserve(used.size());
  for (auto n : used) sorted.push_back(names[n]);
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  std::unordered_map<NodeIndex, NodeIndex> remap;
  remap.reserve(used.size() * 2);
  for (auto n : used)
    remap.emplace(n, static_cast<NodeIndex>(std::lower_bound(sorted.begin(), sorted.end(), names[n]) -
                                            sorted.begin()));
  for (auto& d : counts) {
    d.source = remap.at(d.source);
    d.target = remap.at(d.target);
  }
  canonicalize(counts);

  WeightedNetwork net;
  net.names_ = std::move(sorted);
  net.directed_ = std::move(counts);
  net.finalize();
  return net;
}

void WeightedNetwork::finalize() {
  const std::size_t n = names_.size();
  out_total_.assign(n, 0);
  in_total_.assign(n, 0);
  grand_total_ = 0;
  for (const auto& d : directed_) {
    out_total_[d.source] += d.count;
    in_total_[d.target] += d.count;
    grand_total_ += d.count;
  }

  std::vector<UndirectedEdge> halves;
  halves.reserve(directed_.size());
  for (const auto& d : directed_) {
    if (d.source < d.target)
      halves.push_back({d.source, d.target, d.count, 0});
    else
      halves.push_back({d.target, d.source, 0, d.count});
  }
  std::sort(halves.begin(), halves.end(),
            [](const auto& a, const auto& b) { return std::tie(a.i, a.j) < std::tie(b.i, b.j); });
  edges_.clear();
  for (const auto& h : halves) {
    if (!edges_.empty() && edges_.back().i == h.i && edges_.back().j == h.j) {
      edges_.back().count_ij += h.count_ij;
      edges_.back().count_ji += h.count_ji;
    } else {
      edges_.push_back(h);
    }
  }

  std::vector<std::size_t> degree(n, 0);
  for (const auto& e : edges_) {
    ++degree[e.i];
    ++degree[e.j];
  }
  adjacency_offsets_.assign(n + 1, 0);
  for (std::size_t k = 0; k < n; ++k) adjacency_offsets_[k + 1] = adjacency_offsets_[k] + degree[k];
  adjacency_.assign(adjacency_offsets_[n], {});
  std::vector<std::size_t> fill(adjacency_offsets_.begin(), adjacency_offsets_.end() - 1);
  for (const auto& e : edges_) {
    adjacency_[fill[e.i]++] = {e.j, e.weight()};
    adjacency_[fill[e.j]++] = {e.i, e.weight()};
  }
}

WeightedNetwork WeightedNetwork::with_marginals(const ExternalMarginals& marginals) const {
  WeightedNetwork net = *this;
  std::uint64_t out_sum = 0;
  for (NodeIndex k = 0; k < names_.size(); ++k) {
    const auto out = marginals.outgoing.find(names_[k]);
    const auto in = marginals.incoming.find(names_[k]);
    const std::uint64_t o = out == marginals.outgoing.end() ? 0 : out->second;
    const std::uint64_t i = in == marginals.incoming.end() ? 0 : in->second;
    if (o < out_total_[k] || i < in_total_[k])
      throw ArgumentError(fmt::format("external marginals for '{}' are below its retained counts",
                                      names_[k]));
    net.out_total_[k] = o;
    net.in_total_[k] = i;
    out_sum += o;
  }
  if (marginals.grand_total < out_sum || marginals.grand_total < grand_total_)
    throw ArgumentError("external grand total is below the node marginals");
  net.grand_total_ = marginals.grand_total;
  net.external_marginals_ = true;
  return net;
}

std::optional<NodeIndex> WeightedNetwork::find(std::string_view id) const {
  auto it = std::lower_bound(names_.begin(), names_.end(), id,
                             [](const std::string& a, std::string_view b) { return a < b; });
  if (it == names_.end() || *it != id) return std::nullopt;
  return static_cast<NodeIndex>(it - names_.begin());
}

std::uint64_t WeightedNetwork::count(NodeIndex source, NodeIndex target) const {
  auto it = std::lower_bound(directed_.begin(), directed_.end(), std::make_pair(source, target),
                             [](const DirectedEdgeStats& d, const std::pair<NodeIndex, NodeIndex>& k) {
                               return std::tie(d.source, d.target) < std::tie(k.first, k.second);
                             });
  return it != directed_.end() && it->source == source && it->target == target ? it->count : 0;
}

std::uint64_t WeightedNetwork::weighted_degree(NodeIndex n) const {
  std::uint64_t total = 0;
  for (const auto& nb : neighbors(n)) total += nb.weight;
  return total;
}

std::span<const Neighbor> WeightedNetwork::neighbors(NodeIndex n) const {
  return std::span<const Neighbor>(adjacency_.data() + adjacency_offsets_[n],
                                   adjacency_offsets_[n + 1] - adjacency_offsets_[n]);
}

ExternalMarginals WeightedNetwork::marginals() const {
  ExternalMarginals m;
  for (NodeIndex k = 0; k < names_.size(); ++k) {
    m.outgoing.emplace(names_[k], out_total_[k]);
    m.incoming.emplace(names_[k], in_total_[k]);
  }
  m.grand_total = grand_total_;
  return m;
}

bool operator==(const WeightedNetwork& a, const WeightedNetwork& b) {
  return a.names_ == b.names_ && a.directed_ == b.directed_ && a.out_total_ == b.out_total_ &&
         a.in_total_ == b.in_total_ && a.grand_total_ == b.grand_total_;
}

WeightedNetwork build_ein_daily(std::span<const OrderEvent> orders, const EinConfig& config) {
  check_config(config);
  auto interned = intern_orders(orders);
  auto directed = daily_cooccurrence(std::move(interned.orders), config);
  return WeightedNetwork::from_indexed_counts(interned.investors, std::move(directed));
}

std::int64_t day_of(std::int64_t timestamp, std::int64_t utc_offset_seconds) {
  const std::int64_t shifted = timestamp + utc_offset_seconds;
  constexpr std::int64_t kDay = 86400;
  return shifted >= 0 ? shifted / kDay : -((-shifted + kDay - 1) / kDay);
}

std::map<std::int64_t, std::vector<OrderEvent>> split_by_day(std::span<const OrderEvent> orders,
                                                             std::int64_t utc_offset_seconds) {
  std::map<std::int64_t, std::vector<OrderEvent>> days;
  for (const auto& o : orders) days[day_of(o.timestamp, utc_offset_seconds)].push_back(o);
  return days;
}

WeightedNetwork build_ein(std::span<const OrderEvent> orders, const EinConfig& config,
                          std::int64_t utc_offset_seconds, unsigned threads) {
  check_config(config);
  auto interned = intern_orders(orders);
  std::map<std::int64_t, std::vector<CompactOrder>> by_day;
  for (const auto& o : interned.orders) by_day[day_of(o.time, utc_offset_seconds)].push_back(o);
  std::vector<std::vector<CompactOrder>*> days;
  for (auto& [day, list] : by_day) days.push_back(&list);

  std::vector<std::vector<DirectedEdgeStats>> daily(days.size());
  parallel_for(days.size(), threads,
               [&](std::size_t d) { daily[d] = daily_cooccurrence(std::move(*days[d]), config); });

  std::vector<DirectedEdgeStats> all;
  for (auto& d : daily) all.insert(all.end(), d.begin(), d.end());
  return WeightedNetwork::from_indexed_counts(interned.investors, std::move(all));
}

WeightedNetwork aggregate_networks(std::span<const WeightedNetwork> networks) {
  std::vector<NamedCount> counts;
  for (const auto& net : networks)
    for (const auto& d : net.directed_stats())
      counts.push_back({net.name(d.source), net.name(d.target), d.count});
  return WeightedNetwork::from_counts(std::move(counts));
}

WeightedNetwork build_cn(std::span<const CallEvent> calls, CnMarginals marginals) {
  std::vector<std::string_view> ids;
  ids.reserve(calls.size() * 2);
  for (const auto& c : calls) {
    ids.push_back(c.caller_id);
    ids.push_back(c.callee_id);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  std::unordered_map<std::string_view, NodeIndex> rank;
  rank.reserve(ids.size() * 2);
  for (NodeIndex k = 0; k < ids.size(); ++k) rank.emplace(ids[k], k);

  std::unordered_map<std::uint64_t, std::uint64_t> counts;
  for (const auto& c : calls) {
    if (c.caller_id == c.callee_id) continue;
    ++counts[pair_key(rank.at(c.caller_id), rank.at(c.callee_id))];
  }
  std::vector<DirectedEdgeStats> reciprocal;
  for (const auto& [key, n] : counts) {
    const auto s = static_cast<NodeIndex>(key >> 32);
    const auto t = static_cast<NodeIndex>(key & 0xffffffffu);
    if (counts.contains(pair_key(t, s))) reciprocal.push_back({s, t, n});
  }
  const std::vector<std::string> names(ids.begin(), ids.end());
  auto net = WeightedNetwork::from_indexed_counts(names, std::move(reciprocal));
  if (marginals == CnMarginals::reciprocal_only) return net;

  ExternalMarginals all;
  for (const auto& [key, n] : counts) {
    const auto& source = names[key >> 32];
    const auto& target = names[key & 0xffffffffu];
    all.grand_total += n;
    if (net.find(source)) all.outgoing[source] += n;
    if (net.find(target)) all.incoming[target] += n;
  }
  return net.with_marginals(all);
}

void write_edge_list(std::ostream& out, const WeightedNetwork& network) {
  out << "i,j,W,count_ij,count_ji\n";
  std::string line;
  for (const auto& e : network.edges()) {
    line.clear();
    fmt::format_to(std::back_inserter(line), "{},{},{},{},{}\n", network.name(e.i),
                   network.name(e.j), e.weight(), e.count_ij, e.count_ji);
    out << line;
  }
}

WeightedNetwork read_edge_list(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("edge list is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "i,j,W,count_ij,count_ji")
    throw SchemaError(fmt::format("unexpected edge list header '{}'", line));
  std::vector<NamedCount> counts;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    while (true) {
      const auto pos = line.find(',', start);
      f.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
    if (f.size() != 5) throw SchemaError(fmt::format("edge list line {}: expected 5 fields", line_no));
    std::uint64_t w = 0, cij = 0, cji = 0;
    try {
      w = std::stoull(f[2]);
      cij = std::stoull(f[3]);
      cji = std::stoull(f[4]);
    } catch (const std::exception&) {
      throw SchemaError(fmt::format("edge list line {}: unparseable count", line_no));
    }
    if (w != cij + cji) throw SchemaError(fmt::format("edge list line {}: W != count_ij + count_ji", line_no));
    counts.push_back({f[0], f[1], cij});
    counts.push_back({f[1], f[0], cji});
  }
  return WeightedNetwork::from_counts(std::move(counts));
}

void write_marginals(std::ostream& out, const WeightedNetwork& network) {
  const auto m = network.marginals();
  nlohmann::ordered_json j;
  j["grand_total"] = m.grand_total;
  j["outgoing"] = m.outgoing;
  j["incoming"] = m.incoming;
  out << j.dump(1) << '\n';
}

ExternalMarginals read_marginals(std::istream& in) {
  const auto j = nlohmann::json::parse(in);
  ExternalMarginals m;
  m.grand_total = j.at("grand_total").get<std::uint64_t>();
  m.outgoing = j.at("outgoing").get<std::map<std::string, std::uint64_t>>();
  m.incoming = j.at("incoming").get<std::map<std::string, std::uint64_t>>();
  return m;
}

}  // namespace egolayers
