#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <sstream>

#include "egolayers/netbuild.hpp"

using namespace egolayers;

namespace {

std::vector<OrderEvent> buys(const std::string& who, const std::string& stock, std::vector<std::int64_t> times,
                             Side side = Side::buy) {
  std::vector<OrderEvent> out;
  for (auto t : times) out.push_back({who, stock, side, t});
  return out;
}

std::vector<OrderEvent> concat(std::vector<std::vector<OrderEvent>> parts) {
  std::vector<OrderEvent> out;
  for (auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

std::uint64_t count_of(const WeightedNetwork& net, const std::string& a, const std::string& b) {
  const auto i = net.find(a), j = net.find(b);
  if (!i || !j) return 0;
  return net.count(*i, *j);
}

// Every unordered pair of orders, counted from the earlier order's investor
// (smaller id when simultaneous).
std::map<std::pair<std::string, std::string>, std::uint64_t> brute_force_counts(const std::vector<OrderEvent>& orders,
                                                                                std::int64_t window) {
  std::map<std::pair<std::string, std::string>, std::uint64_t> counts;
  for (std::size_t x = 0; x < orders.size(); ++x)
    for (std::size_t y = x + 1; y < orders.size(); ++y) {
      const auto& a = orders[x];
      const auto& b = orders[y];
      if (a.investor_id == b.investor_id || a.stock_id != b.stock_id || a.side != b.side) continue;
      const auto dt = b.timestamp - a.timestamp;
      if (std::abs(dt) > window) continue;
      if (dt > 0 || (dt == 0 && a.investor_id < b.investor_id))
        ++counts[{a.investor_id, b.investor_id}];
      else
        ++counts[{b.investor_id, a.investor_id}];
    }
  return counts;
}

}  // namespace

TEST_CASE("hand-traced co-occurrence example") {
  const auto orders = concat({buys("A", "S", {0, 10, 20}), buys("B", "S", {5, 15, 25})});
  const auto net = build_ein_daily(orders, {30, 3});
  REQUIRE(net.edge_count() == 1);
  CHECK(count_of(net, "A", "B") == 6);
  CHECK(count_of(net, "B", "A") == 3);
  CHECK(net.edges()[0].weight() == 9);
}

TEST_CASE("different sides never pair") {
  const auto orders = concat({buys("A", "S", {0}), buys("B", "S", {0}, Side::sell)});
  CHECK(build_ein_daily(orders, {30, 1}).edge_count() == 0);
}

TEST_CASE("min_cooccurrence gates the two-way count") {
  const auto orders = concat({buys("A", "S1", {0, 1}), buys("B", "S1", {2, 3})});
  CHECK(build_ein_daily(orders, {30, 3}).edge_count() == 1);
  CHECK(build_ein_daily(orders, {30, 4}).edge_count() == 1);
  CHECK(build_ein_daily(orders, {30, 5}).edge_count() == 0);
}

TEST_CASE("window is inclusive") {
  const auto orders = concat({buys("A", "S", {0}), buys("B", "S", {30}), buys("C", "S", {61})});
  const auto net = build_ein_daily(orders, {30, 1});
  CHECK(count_of(net, "A", "B") == 1);
  CHECK(count_of(net, "B", "C") == 0);
}

TEST_CASE("initiating-order counting counts each order once per counterpart") {
  const auto orders = concat({buys("A", "S", {0}), buys("B", "S", {1, 2, 3})});
  CHECK(count_of(build_ein_daily(orders, {30, 1, CooccurrenceCounting::order_pairs}), "A", "B") == 3);
  CHECK(count_of(build_ein_daily(orders, {30, 1, CooccurrenceCounting::initiating_orders}), "A", "B") == 1);
}

TEST_CASE("daily network matches pair enumeration on random logs") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<OrderEvent> orders;
    const int n = 20 + static_cast<int>(rng() % 60);
    for (int k = 0; k < n; ++k)
      orders.push_back({"I" + std::to_string(rng() % 6), "S" + std::to_string(rng() % 2),
                        rng() % 2 ? Side::buy : Side::sell, static_cast<std::int64_t>(rng() % 200)});
    const std::int64_t window = 10 + static_cast<std::int64_t>(rng() % 30);
    const std::uint64_t min_count = 1 + rng() % 4;
    const auto expected = brute_force_counts(orders, window);
    const auto net = build_ein_daily(orders, {window, min_count});
    for (const auto& [pair, c] : expected) {
      const auto back = expected.contains({pair.second, pair.first}) ? expected.at({pair.second, pair.first}) : 0;
      const bool edge = c + back >= min_count;
      CHECK(count_of(net, pair.first, pair.second) == (edge ? c : 0));
    }
    std::uint64_t total = 0;
    for (const auto& e : net.edges()) total += e.weight();
    CHECK(total == net.grand_total());

    auto shuffled = orders;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(build_ein_daily(shuffled, {window, min_count}) == net);
  }
}

TEST_CASE("aggregation") {
  const auto day = build_ein_daily(concat({buys("A", "S", {0, 1}), buys("B", "S", {2})}), {30, 1});
  CHECK(count_of(day, "A", "B") == 2);
  const std::vector<WeightedNetwork> one{day};
  CHECK(aggregate_networks(one) == day);
  const std::vector<WeightedNetwork> two{day, day};
  CHECK(count_of(aggregate_networks(two), "A", "B") == 4);
  const auto other = build_ein_daily(concat({buys("C", "S", {0}), buys("D", "S", {2})}), {30, 1});
  const std::vector<WeightedNetwork> disjoint{day, other};
  CHECK(aggregate_networks(disjoint).node_count() == 4);
}

TEST_CASE("build_ein splits days and matches per-day aggregation") {
  std::mt19937_64 rng(5);
  std::vector<OrderEvent> orders;
  for (int k = 0; k < 3000; ++k)
    orders.push_back({"I" + std::to_string(rng() % 15), "S" + std::to_string(rng() % 3),
                      rng() % 2 ? Side::buy : Side::sell, static_cast<std::int64_t>(rng() % (3 * 86400))});
  const auto whole = build_ein(orders, {30, 2}, 0, 1);
  std::vector<WeightedNetwork> days;
  for (const auto& [d, part] : split_by_day(orders, 0)) days.push_back(build_ein_daily(part, {30, 2}));
  CHECK(whole == aggregate_networks(days));
  CHECK(build_ein(orders, {30, 2}, 0, 4) == whole);
  CHECK(day_of(86399, 0) == 0);
  CHECK(day_of(86400, 0) == 1);
  CHECK(day_of(0, 3600) == 0);
  CHECK(day_of(86400 - 3600, 3600) == 1);
}

TEST_CASE("call networks keep reciprocal pairs") {
  std::vector<CallEvent> calls{{"A", "B", 1}, {"A", "B", 2}, {"A", "B", 3}};
  CHECK(build_cn(calls).edge_count() == 0);
  calls = {{"A", "B", 1}, {"A", "B", 2}, {"B", "A", 3}};
  const auto net = build_cn(calls);
  REQUIRE(net.edge_count() == 1);
  CHECK(net.edges()[0].weight() == 3);
  CHECK(build_cn({}).node_count() == 0);
}

TEST_CASE("all-calls marginals include non-reciprocal calls of kept nodes") {
  const std::vector<CallEvent> calls{{"A", "B", 1}, {"B", "A", 2}, {"A", "C", 3}, {"A", "C", 4}};
  const auto net = build_cn(calls, CnMarginals::all_calls);
  CHECK(net.has_external_marginals());
  CHECK(net.outgoing_total(*net.find("A")) == 3);
  CHECK(net.grand_total() == 4);

  std::ostringstream out;
  write_marginals(out, net);
  std::istringstream in(out.str());
  const auto m = read_marginals(in);
  CHECK(m.outgoing.at("A") == 3);
  CHECK(m.grand_total == 4);
}

TEST_CASE("edge list round-trip") {
  const auto net = WeightedNetwork::from_counts({{"A", "B", 6}, {"B", "A", 3}, {"B", "C", 2}, {"C", "B", 0}});
  std::ostringstream out;
  write_edge_list(out, net);
  CHECK(out.str() == "i,j,W,count_ij,count_ji\nA,B,9,6,3\nB,C,2,2,0\n");
  std::istringstream in(out.str());
  CHECK(read_edge_list(in) == net);
  CHECK(net.degree(*net.find("B")) == 2);
  CHECK(net.weighted_degree(*net.find("B")) == 11);
}
