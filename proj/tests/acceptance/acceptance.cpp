// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "egolayers/distfit.hpp"
#include "egolayers/layers.hpp"
#include "egolayers/netbuild.hpp"
#include "egolayers/parallel.hpp"
#include "egolayers/pipeline.hpp"
#include "egolayers/synth.hpp"
#include "egolayers/tamarit.hpp"
#include "egolayers/validate.hpp"

using namespace egolayers;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using u128 = unsigned __int128;
using i128 = __int128;

// ---- 1. hypergeometric tail against exact integer enumeration

Outcome hypergeometric_oracle() {
  constexpr unsigned kMax = 60;
  std::vector<std::vector<u128>> C(kMax + 1, std::vector<u128>(kMax + 1, 0));
  for (unsigned n = 0; n <= kMax; ++n) {
    C[n][0] = 1;
    for (unsigned k = 1; k <= n; ++k) C[n][k] = C[n - 1][k - 1] + (k <= n - 1 ? C[n - 1][k] : 0);
  }
  double worst = 0.0;
  std::size_t cases = 0;
  for (unsigned n = 1; n <= kMax; ++n)
    for (unsigned ic = 0; ic <= n; ++ic)
      for (unsigned jr = 0; jr <= n; ++jr) {
        const unsigned lo = ic + jr > n ? ic + jr - n : 0;
        const unsigned hi = std::min(ic, jr);
        // upper[x] = sum_{k >= x} C(ic, k) C(n - ic, jr - k)
        std::vector<u128> upper(hi + 2, 0);
        for (unsigned k = hi + 1; k-- > lo;) upper[k] = upper[k + 1] + C[ic][k] * C[n - ic][jr - k];
        for (unsigned k = lo; k-- > 0;) upper[k] = upper[k + 1];
        const long double den = static_cast<long double>(C[n][jr]);
        for (unsigned x = 0; x <= hi + 1; ++x) {
          const double exact = static_cast<double>(static_cast<long double>(upper[x]) / den);
          worst = std::max(worst, std::abs(overexpression_pvalue(x, n, ic, jr) - exact));
          ++cases;
        }
      }
  return {worst <= 1e-10, fmt::format("{} cases, max |error| {:.3g}", cases, worst)};
}

// ---- 2. null order logs through build -> validate

Outcome null_validation() {
  std::size_t retained = 0, raw_edges = 0;
  const int runs = 50;
  for (int run = 0; run < runs; ++run) {
    NullOrderConfig config;
    config.seed = 1000 + run;
    const auto orders = gen_null_order_log(config);
    const auto net = build_ein(orders, {});
    raw_edges += net.edge_count();
    retained += validate_network(net, {0.01}).network.edge_count();
  }
  const double mean = static_cast<double>(retained) / runs;
  return {mean <= 1.0, fmt::format("mean retained edges {:.3f} per run (mean raw edges {:.1f})", mean,
                                   static_cast<double>(raw_edges) / runs)};
}

// ---- 3. k-means dynamic program against exhaustive search, exact rationals

struct Rational {
  i128 num = 0;
  i128 den = 1;
};

bool less(const Rational& a, const Rational& b) { return a.num * b.den < b.num * a.den; }
bool equal(const Rational& a, const Rational& b) { return a.num * b.den == b.num * a.den; }
Rational add(const Rational& a, const Rational& b) { return {a.num * b.den + b.num * a.den, a.den * b.den}; }

// m * sum x^2 - (sum x)^2 over m, for integer-valued x.
Rational cluster_sse(const std::vector<long>& xs) {
  i128 s = 0, q = 0;
  for (long x : xs) {
    s += x;
    q += static_cast<i128>(x) * x;
  }
  const i128 m = static_cast<i128>(xs.size());
  return {m * q - s * s, m};
}

Rational labelled_sse(const std::vector<long>& values, const std::vector<int>& labels, int k) {
  std::vector<std::vector<long>> groups(k);
  for (std::size_t i = 0; i < values.size(); ++i) groups[labels[i]].push_back(values[i]);
  Rational total;
  for (const auto& g : groups)
    if (!g.empty()) total = add(total, cluster_sse(g));
  return total;
}

Rational exhaustive_sse(std::vector<long> v, int k) {
  std::sort(v.begin(), v.end());
  const int n = static_cast<int>(v.size());
  Rational best{1, 0};  // infinity
  bool have = false;
  std::vector<int> labels(n);
  auto rec = [&](auto&& self, int start, int cluster) -> void {
    if (cluster == k - 1) {
      for (int i = start; i < n; ++i) labels[i] = cluster;
      const auto s = labelled_sse(v, labels, k);
      if (!have || less(s, best)) best = s, have = true;
      return;
    }
    for (int end = start + 1; end <= n - (k - 1 - cluster); ++end) {
      for (int i = start; i < end; ++i) labels[i] = cluster;
      self(self, end, cluster + 1);
    }
  };
  rec(rec, 0, 0);
  return best;
}

Outcome kmeans_exactness() {
  std::mt19937_64 rng(2024);
  int mismatches = 0;
  double worst_float = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const int n = 1 + static_cast<int>(rng() % 12);
    const int k = 1 + static_cast<int>(rng() % std::min(4, n));
    std::vector<long> v(n);
    for (auto& x : v) x = static_cast<long>(rng() % 201) - 100;
    const std::vector<double> d(v.begin(), v.end());
    const auto p = optimal_partition(d, k);
    const auto dp = labelled_sse(v, p.labels, k);
    if (!equal(dp, exhaustive_sse(v, k))) ++mismatches;
    const double exact = static_cast<double>(static_cast<long double>(dp.num) / static_cast<long double>(dp.den));
    worst_float = std::max(worst_float, std::abs(p.sse - exact) / std::max(1.0, exact));
  }
  return {mismatches == 0 && worst_float < 1e-12,
          fmt::format("1000 instances, {} exact mismatches, reported SSE max rel. error {:.2g}", mismatches,
                      worst_float)};
}

// ---- 4. planted Dunbar bands

struct DunbarResult {
  double fraction4 = 0.0;
  std::vector<double> cumulative;
  double mean_r = 0.0;
};

DunbarResult planted_census(double dispersion, std::uint64_t seed) {
  EgoPopulationConfig config;
  config.seed = seed;
  config.bands.dispersions.assign(4, dispersion);
  const auto pop = gen_layered_ego_population(config);
  const auto census = layer_census(pop.network, {100, LayerAlgorithm::kmeans, 8, 1});
  DunbarResult r;
  for (const auto& row : census.rows)
    if (row.layers == 4) {
      r.fraction4 = row.fraction;
      r.cumulative = row.mean_cumulative;
      r.mean_r = row.mean_ratio.value_or(0.0);
    }
  return r;
}

std::string vec(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += fmt::format("{}{:.2f}", s.empty() ? "" : ",", x);
  return "(" + s + ")";
}

Outcome planted_dunbar() {
  const std::vector<double> target{5, 15, 50, 150};
  const auto exact = planted_census(0.0, 41);
  const auto dispersed = planted_census(15.0, 42);
  bool ok = exact.fraction4 >= 0.99 && exact.cumulative == target;
  ok = ok && dispersed.fraction4 >= 0.99 && dispersed.cumulative.size() == 4;
  for (std::size_t k = 0; ok && k < 4; ++k) ok = std::abs(dispersed.cumulative[k] / target[k] - 1) <= 0.02;
  ok = ok && dispersed.mean_r >= 2.9 && dispersed.mean_r <= 3.3;

  const auto edge = planted_census(17.5, 43);
  std::cout << fmt::format(
      "      info: at exactly 4 dispersions (sd 17.5): c=4 for {:.2f}% of egos, mean n {}, <r> {:.3f}\n",
      100 * edge.fraction4, vec(edge.cumulative), edge.mean_r);
  return {ok, fmt::format("zero dispersion: c=4 {:.2f}%, n {}; sd 15: c=4 {:.2f}%, n {}, <r> {:.3f}",
                          100 * exact.fraction4, vec(exact.cumulative), 100 * dispersed.fraction4,
                          vec(dispersed.cumulative), dispersed.mean_r)};
}

// ---- 5. head/tail breaks traces and heavy-tailed samples

Outcome ht_break_conformance() {
  const std::vector<double> a{1, 1, 1, 1, 1, 1, 6, 12};
  const auto ra = ht_break(a);
  const auto la = summarize_layers(a, ra.partition.labels, LayerAlgorithm::ht_break);
  bool ok = ra.breaks == std::vector<double>{3, 9} && la.layer_counts == std::vector<std::size_t>{1, 1, 6};
  const std::vector<double> b{1, 2, 3, 4};
  const auto rb = ht_break(b);
  ok = ok && rb.breaks == std::vector<double>{2.5} && rb.partition.cluster_count == 2;
  const bool traces = ok;

  double worst = 0.0;
  std::size_t splits = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 rng(seed);
    const auto v = sample_family(PowerLawParams{2.5, 1.0}, 10000, rng);
    const auto r = ht_break(v);
    // The last recorded break is the one whose head failed the test.
    for (std::size_t i = 0; i + 1 < r.head_fractions.size(); ++i) {
      worst = std::max(worst, r.head_fractions[i]);
      ++splits;
    }
  }
  ok = ok && splits > 0 && worst < 0.4;
  return {ok, fmt::format("traces {}; 20 samples, {} continuing splits, max head fraction {:.3f}",
                          traces ? "exact" : "MISMATCH", splits, worst)};
}

// ---- 6. AIC selection and recovery

Outcome aic_selection() {
  int selected = 0, recovered = 0;
  for (int t = 0; t < 100; ++t) {
    std::mt19937_64 rng(500 + t);
    const auto s = sample_family(LogNormalParams{1.83, 1.43}, 100000, rng);
    const auto fits = fit_all_families(s);
    if (select_by_aic(fits) == Family::log_normal) ++selected;
    for (const auto& f : fits)
      if (f.family == Family::log_normal) {
        const auto& p = std::get<LogNormalParams>(f.params);
        if (std::abs(p.mu / 1.83 - 1) <= 0.02 && std::abs(p.sigma / 1.43 - 1) <= 0.02) ++recovered;
      }
  }
  return {selected >= 95 && recovered == 100,
          fmt::format("log-normal selected in {}/100, parameters within 2% in {}/100", selected, recovered)};
}

// ---- 7. mixed log-normal threshold

std::vector<double> two_piece(double threshold, LogNormalParams lower, LogNormalParams upper, std::size_t n,
                              std::mt19937_64& rng) {
  std::lognormal_distribution<double> lo(lower.mu, lower.sigma), hi(upper.mu, upper.sigma);
  std::vector<double> s;
  s.reserve(n);
  while (s.size() < n / 2)
    if (const double v = lo(rng); v <= threshold) s.push_back(v);
  while (s.size() < n)
    if (const double v = hi(rng); v > threshold) s.push_back(v);
  return s;
}

Outcome mixed_threshold() {
  struct Case {
    double threshold;
    LogNormalParams lower, upper;
  };
  const Case cases[] = {{152, {1.83, 1.43}, {4.65, 0.39}}, {48, {1.61, 1.30}, {4.20, 0.54}}};
  bool ok = true;
  std::string detail;
  for (const auto& c : cases) {
    int hits = 0;
    for (int t = 0; t < 100; ++t) {
      std::mt19937_64 rng(derive_seed(77, static_cast<std::uint64_t>(c.threshold), t));
      const auto s = two_piece(c.threshold, c.lower, c.upper, 10000, rng);
      if (std::abs(fit_mixed_lognormal(s).threshold / c.threshold - 1) <= 0.1) ++hits;
    }
    ok = ok && hits >= 90;
    detail += fmt::format("{}k_H={}: {}/100 within 10%", detail.empty() ? "" : "; ", c.threshold, hits);
  }
  return {ok, detail};
}

// ---- 8. layer-model estimator

void compositions(std::uint64_t total, std::size_t parts,
                  const std::function<void(const std::vector<std::uint64_t>&)>& visit) {
  std::vector<std::uint64_t> c(parts, 0);
  std::function<void(std::size_t, std::uint64_t)> rec = [&](std::size_t k, std::uint64_t left) {
    if (k + 1 == parts) {
      c[k] = left;
      visit(c);
      return;
    }
    for (std::uint64_t v = 0; v <= left; ++v) {
      c[k] = v;
      rec(k + 1, left - v);
    }
  };
  rec(0, total);
}

Outcome tamarit_estimator() {
  double worst_closed = 0.0;
  for (std::uint64_t a = 1; a <= 500; ++a)
    for (std::uint64_t b = 1; b <= 500; ++b) {
      const double mu = estimate_mu({{a, b}, 10000}).mu_hat;
      worst_closed = std::max(worst_closed, std::abs(mu - std::log(static_cast<double>(b) / a)));
    }

  double sum = 0;
  for (int e = 0; e < 2000; ++e) sum += estimate_mu({sample_tamarit(std::log(3.0), 150, 4, 9000 + e), 10000}).mu_hat;
  const double mean_mu = sum / 2000;

  double worst_norm = 0.0;
  for (std::uint64_t n : {10u, 40u})
    for (std::uint64_t L = 1; L <= 8; ++L)
      for (std::size_t r = 2; r <= 3; ++r)
        for (double mu : {-3.0, -1.0, -0.1, 0.0, 0.1, 1.0, 3.0}) {
          double total = 0;
          compositions(L, r, [&](const auto& c) { total += std::exp(tamarit_log_likelihood({c, n}, mu)); });
          const double p = static_cast<double>(L) / static_cast<double>(n - 1);
          const double binom = std::exp(std::lgamma(static_cast<double>(n)) - std::lgamma(L + 1.0) -
                                        std::lgamma(static_cast<double>(n - L)) + L * std::log(p) +
                                        static_cast<double>(n - 1 - L) * std::log1p(-p));
          worst_norm = std::max(worst_norm, std::abs(total - binom));
        }

  const bool ok = worst_closed <= 1e-6 && std::abs(mean_mu - std::log(3.0)) <= 0.05 && worst_norm <= 1e-10;
  return {ok, fmt::format("r=2 max |error| {:.2g}; mean mu_hat {:.4f} (ln 3 = {:.4f}); normalization max |error| {:.2g}",
                          worst_closed, mean_mu, std::log(3.0), worst_norm)};
}

// ---- 9. ratio population log-normality

Outcome ratio_lognormality() {
  int chi2_ok = 0, ks_ok = 0, ad_ok = 0;
  for (int t = 0; t < 100; ++t) {
    std::mt19937_64 rng(derive_seed(99, 9, t));
    std::lognormal_distribution<double> d(std::log(3.0), 0.2);
    std::vector<TamaritEstimate> es;
    for (int i = 0; i < 1000; ++i) {
      const double r = d(rng);
      es.push_back({std::log(r), r, 0.0, Divergence::none});
    }
    const auto fit = ratio_population_fit(es);
    chi2_ok += fit.chi2.pvalue >= 0.05;
    ks_ok += fit.ks.pvalue >= 0.05;
    ad_ok += fit.ad.pvalue >= 0.05;
  }
  return {chi2_ok >= 90 && ks_ok >= 90 && ad_ok >= 90,
          fmt::format("not rejected at 5%: chi2 {}/100, KS {}/100, AD {}/100 (1000 ratios per trial)", chi2_ok,
                      ks_ok, ad_ok)};
}

// ---- 10. determinism and scale

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> listing(const fs::path& dir) {
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir)) names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  return names;
}

Json stable_manifest(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  auto j = Json::parse(in);
  j.erase("timestamp");
  for (auto& s : j["stages"]) s.erase("seconds");
  return j;
}

Outcome determinism_and_scale() {
  const fs::path root = fs::temp_directory_path() / "egolayers_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  const auto log = gen_planted_order_log({}, 8);
  {
    std::ofstream out(root / "orders.csv", std::ios::binary);
    write_order_log(out, log.orders);
  }

  double slowest = 0.0;
  auto run = [&](const std::string& name, unsigned threads) {
    PipelineConfig config;
    config.threads = threads;
    const auto start = std::chrono::steady_clock::now();
    ManifestInfo info;
    info.config = config_json(config);
    info.inputs["orders.csv"] = sha256_file(root / "orders.csv");
    info.stages = run_all(root / "orders.csv", root / name, config);
    write_manifest(root / name, info);
    slowest = std::max(slowest, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  };
  run("t1a", 1);
  run("t1b", 1);
  run("t8", 8);

  const auto files = listing(root / "t1a");
  bool identical = files == listing(root / "t1b") && files == listing(root / "t8");
  std::size_t compared = 0;
  for (const auto& f : files) {
    if (f == "manifest.json") continue;
    const auto a = slurp(root / "t1a" / f);
    identical = identical && a == slurp(root / "t1b" / f) && a == slurp(root / "t8" / f);
    ++compared;
  }
  identical = identical && stable_manifest(root / "t1a") == stable_manifest(root / "t1b");
  const bool ok = identical && slowest < 600.0 && log.orders.size() >= 900000;
  return {ok, fmt::format("{} events; {} output files {} across runs and thread counts {{1, 8}}; slowest run {:.1f} s",
                          log.orders.size(), compared, identical ? "identical" : "DIFFER", slowest)};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_seconds;  // 0 = no runtime bound
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "hypergeometric oracle", 30, hypergeometric_oracle},
      {2, "null-model validation", 300, null_validation},
      {3, "1-D k-means exactness", 60, kmeans_exactness},
      {4, "planted Dunbar recovery", 120, planted_dunbar},
      {5, "H/T-break trace conformance", 0, ht_break_conformance},
      {6, "MLE/AIC selection", 120, aic_selection},
      {7, "mixed log-normal threshold", 0, mixed_threshold},
      {8, "layer-model estimator", 0, tamarit_estimator},
      {9, "ratio population log-normality", 0, ratio_lognormality},
      {10, "determinism and scale", 600, determinism_and_scale},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, fmt::format("exception: {}", e.what())};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = c.limit_seconds == 0 || seconds < c.limit_seconds;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::cout << fmt::format("{} criterion {:>2} {}: {} [{:.1f} s{}]\n", pass ? "PASS" : "FAIL", c.id, c.name,
                             o.detail, seconds,
                             c.limit_seconds > 0 ? fmt::format(", limit {:.0f} s", c.limit_seconds) : "")
              << std::flush;
  }
  std::cout << fmt::format("{} of {} criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
