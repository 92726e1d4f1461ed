#include "egolayers/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "egolayers/error.hpp"
#include "egolayers/pipeline.hpp"
#include "egolayers/synth.hpp"

namespace egolayers {
namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raw option values; enum-valued options are checked by CLI11 and converted
// afterwards.
struct Options {
  PipelineConfig pipeline;
  std::string delimiter = ",";
  std::string counting = "order_pairs";
  std::string cn_marginals = "reciprocal_only";
  std::string rule = "both";
  std::string universe = "maximal_pairs";
  std::vector<std::string> algorithms{"kmeans", "ht_break"};
  std::string jaccard = "co_membership";
  std::string out_dir = ".";

  std::string orders, calls, edges, marginals;

  // synth
  std::string kind;
  std::size_t investors = 200, stocks = 5, days = 1, egos = 2000;
  double orders_per_day = 110.0;
  double dispersion = 15.0;
  double size_jitter = 0.0;
  std::size_t planted_days = 10, planted_stocks = 50, background_investors = 360, planted_egos = 40;
  double background_orders_per_day = 100.0;
};

PipelineConfig resolve(const Options& o) {
  PipelineConfig c = o.pipeline;
  if (o.delimiter.size() != 1) throw ConfigError("--delimiter must be a single character");
  c.delimiter = o.delimiter[0];
  c.counting = o.counting == "order_pairs" ? CooccurrenceCounting::order_pairs : CooccurrenceCounting::initiating_orders;
  c.cn_marginals = o.cn_marginals == "all_calls" ? CnMarginals::all_calls : CnMarginals::reciprocal_only;
  c.rule = o.rule == "both" ? RetentionRule::both_directions : RetentionRule::either_direction;
  c.universe = o.universe == "maximal_pairs" ? BonferroniUniverse::maximal_pairs : BonferroniUniverse::tested_edges;
  c.jaccard = o.jaccard == "best_match" ? JaccardVariant::best_match : JaccardVariant::co_membership;
  c.algorithms.clear();
  for (const auto& a : o.algorithms) {
    const auto alg = parse_algorithm(a);
    if (!alg) throw ConfigError(fmt::format("unknown algorithm {}", a));
    if (std::find(c.algorithms.begin(), c.algorithms.end(), *alg) == c.algorithms.end()) c.algorithms.push_back(*alg);
  }
  if (c.algorithms.empty()) throw ConfigError("--algorithms needs at least one algorithm");
  if (c.window_seconds <= 0) throw ConfigError("--window-seconds must be positive");
  if (c.min_cooccurrence < 1) throw ConfigError("--min-cooccurrence must be at least 1");
  if (!(c.alpha > 0 && c.alpha < 1)) throw ConfigError("--alpha must lie in (0, 1)");
  if (c.k_max < 1) throw ConfigError("--k-max must be at least 1");
  if (c.threads < 1) throw ConfigError("--threads must be at least 1");
  if (!(c.flatness_tolerance >= 0 && c.flatness_tolerance <= 1)) throw ConfigError("--flatness-tolerance must lie in [0, 1]");
  if (c.mixed_min_side < 2) throw ConfigError("--mixed-min-side must be at least 2");
  return c;
}

std::string join(const std::vector<std::string>& args) {
  std::string out = "egolayers";
  for (const auto& a : args) out += " " + a;
  return out;
}

template <class Write>
StageRecord synth_stage(const fs::path& out_dir, const PipelineConfig& config, Write&& write) {
  StageRecord rec;
  rec.name = "synth";
  rec.params = config_json(config);
  std::vector<fs::path> written;
  try {
    fs::create_directories(out_dir);
    write(rec, [&](const std::string& name, const std::function<void(std::ostream&)>& body) {
      const fs::path tmp = out_dir / (name + ".tmp");
      {
        std::ofstream f(tmp, std::ios::binary);
        body(f);
        if (!f) throw std::runtime_error(fmt::format("cannot write {}", tmp.string()));
      }
      fs::rename(tmp, out_dir / name);
      written.push_back(out_dir / name);
      rec.outputs[name] = sha256_file(out_dir / name);
    });
  } catch (const std::exception& e) {
    std::error_code ec;
    for (const auto& p : written) fs::remove(p, ec);
    throw StageError("synth", e.what());
  }
  return rec;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Ego-network layer analysis of event logs", "egolayers"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file with option values; command-line flags take precedence");
  app.fallthrough();

  Options o;
  auto& p = o.pipeline;
  app.add_option("--out-dir", o.out_dir, "Output directory")->capture_default_str();
  app.add_option("--threads", p.threads, "Worker threads")->capture_default_str();
  app.add_option("--delimiter", o.delimiter, "Input field delimiter")->capture_default_str();
  app.add_option("--blocklist", p.blocklist, "File of ids to drop, one per line");
  app.add_option("--utc-offset-seconds", p.utc_offset_seconds, "Offset of the local trading day")->capture_default_str();
  app.add_option("--window-seconds", p.window_seconds, "Co-occurrence window")->capture_default_str();
  app.add_option("--min-cooccurrence", p.min_cooccurrence, "Minimum pair count per direction")->capture_default_str();
  app.add_option("--counting", o.counting, "Co-occurrence counting")
      ->check(CLI::IsMember({"order_pairs", "initiating_orders"}))
      ->capture_default_str();
  app.add_option("--cn-marginals", o.cn_marginals, "Call-network marginals")
      ->check(CLI::IsMember({"reciprocal_only", "all_calls"}))
      ->capture_default_str();
  app.add_option("--alpha", p.alpha, "Family-wise significance level")->capture_default_str();
  app.add_option("--rule", o.rule, "Edge retention rule")->check(CLI::IsMember({"both", "either"}))->capture_default_str();
  app.add_option("--universe", o.universe, "Bonferroni test count")
      ->check(CLI::IsMember({"maximal_pairs", "tested_edges"}))
      ->capture_default_str();
  app.add_option("--chi2-bins", p.chi2_bins, "Chi-square bins for the ratio fit (0 = default rule)")->capture_default_str();
  app.add_option("--bootstrap", p.bootstrap, "Parametric bootstrap replicates for KS")->capture_default_str();
  app.add_option("--seed", p.seed, "Random seed")->capture_default_str();
  app.add_option("--mixed-min-side", p.mixed_min_side, "Minimum points on each side of the threshold")
      ->capture_default_str();
  app.add_option("--mixed-max-candidates", p.mixed_max_candidates, "Threshold candidates scanned")
      ->capture_default_str();
  app.add_option("--flatness-tolerance", p.flatness_tolerance, "Residual-curve flatness tolerance")
      ->capture_default_str();
  app.add_option("--degree-floor", p.degree_floor, "Egos need degree above this")->capture_default_str();
  app.add_option("--k-max", p.k_max, "Largest layer count tried by k-means")->capture_default_str();
  app.add_option("--algorithms", o.algorithms, "Layer algorithms")
      ->delimiter(',')
      ->check(CLI::IsMember({"kmeans", "ht_break"}))
      ->capture_default_str();
  app.add_option("--jaccard", o.jaccard, "Layer agreement measure")
      ->check(CLI::IsMember({"co_membership", "best_match"}))
      ->capture_default_str();

  auto* build_ein = app.add_subcommand("build-ein", "Order log -> co-occurrence network");
  build_ein->add_option("--orders", o.orders, "Order log CSV")->required();
  auto* build_cn = app.add_subcommand("build-cn", "Call log -> reciprocal call network");
  build_cn->add_option("--calls", o.calls, "Call log CSV")->required();
  auto* validate = app.add_subcommand("validate", "Keep statistically validated edges");
  validate->add_option("--edges", o.edges, "Edge list CSV")->required();
  validate->add_option("--marginals", o.marginals, "Marginals JSON written by build-cn");
  auto* fit = app.add_subcommand("fit-degrees", "Degree distribution fits");
  auto* layers = app.add_subcommand("layers", "Per-ego layer detection");
  auto* census = app.add_subcommand("census", "Layer census across egos");
  auto* tamarit = app.add_subcommand("tamarit", "Per-ego layer-ratio estimates");
  for (auto* sub : {fit, layers, census, tamarit}) sub->add_option("--edges", o.edges, "Edge list CSV")->required();
  auto* run_all_cmd = app.add_subcommand("run-all", "build-ein -> validate -> fit-degrees, layers, census, tamarit");
  run_all_cmd->add_option("--orders", o.orders, "Order log CSV")->required();

  auto* synth = app.add_subcommand("synth", "Seeded synthetic inputs");
  synth->add_option("--kind", o.kind, "What to generate")
      ->required()
      ->check(CLI::IsMember({"null-orders", "ego-population", "planted-orders"}));
  synth->add_option("--investors", o.investors, "null-orders: investors")->capture_default_str();
  synth->add_option("--stocks", o.stocks, "null-orders: stocks")->capture_default_str();
  synth->add_option("--days", o.days, "null-orders: days")->capture_default_str();
  synth->add_option("--orders-per-day", o.orders_per_day, "null-orders: mean orders per investor and day")
      ->capture_default_str();
  synth->add_option("--egos", o.egos, "ego-population: egos")->capture_default_str();
  synth->add_option("--dispersion", o.dispersion, "ego-population: weight sd in every band")->capture_default_str();
  synth->add_option("--size-jitter", o.size_jitter, "ego-population: relative band-size jitter")
      ->capture_default_str();
  synth->add_option("--planted-days", o.planted_days, "planted-orders: days")->capture_default_str();
  synth->add_option("--planted-stocks", o.planted_stocks, "planted-orders: stocks")->capture_default_str();
  synth->add_option("--background-investors", o.background_investors, "planted-orders: background investors")
      ->capture_default_str();
  synth->add_option("--background-orders-per-day", o.background_orders_per_day,
                    "planted-orders: mean orders per background investor and day")
      ->capture_default_str();
  synth->add_option("--planted-egos", o.planted_egos, "planted-orders: planted egos")->capture_default_str();

  PipelineConfig config;
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    config = resolve(o);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfigError;
  }

  const fs::path out_dir = o.out_dir;
  ManifestInfo manifest;
  manifest.command = join(args);
  manifest.config = config_json(config);
  std::string current = app.get_subcommands().front()->get_name();
  auto add_input = [&](const std::string& path) {
    if (!path.empty() && fs::exists(path)) manifest.inputs[path] = sha256_file(path);
  };

  try {
    if (build_ein->parsed()) {
      add_input(o.orders);
      manifest.stages.push_back(stage_build_ein(o.orders, out_dir, config));
    } else if (build_cn->parsed()) {
      add_input(o.calls);
      manifest.stages.push_back(stage_build_cn(o.calls, out_dir, config));
    } else if (validate->parsed()) {
      add_input(o.edges);
      add_input(o.marginals);
      std::optional<fs::path> marginals;
      if (!o.marginals.empty()) marginals = o.marginals;
      manifest.stages.push_back(stage_validate(o.edges, marginals, out_dir, config));
    } else if (fit->parsed()) {
      add_input(o.edges);
      manifest.stages.push_back(stage_fit_degrees(o.edges, out_dir, config));
    } else if (layers->parsed()) {
      add_input(o.edges);
      manifest.stages.push_back(stage_layers(o.edges, out_dir, config));
    } else if (census->parsed()) {
      add_input(o.edges);
      manifest.stages.push_back(stage_census(o.edges, out_dir, config));
    } else if (tamarit->parsed()) {
      add_input(o.edges);
      manifest.stages.push_back(stage_tamarit(o.edges, out_dir, config));
    } else if (run_all_cmd->parsed()) {
      add_input(o.orders);
      std::optional<Json> previous;
      if (std::ifstream in(out_dir / "manifest.json"); in) {
        try {
          previous = Json::parse(in);
        } catch (const std::exception&) {
          previous.reset();
        }
      }
      manifest.stages = run_all(o.orders, out_dir, config, previous);
    } else if (synth->parsed()) {
      manifest.config["kind"] = o.kind;
      manifest.stages.push_back(synth_stage(out_dir, config, [&](StageRecord& rec, auto&& write) {
        if (o.kind == "null-orders") {
          NullOrderConfig nc;
          nc.seed = config.seed;
          nc.investors = o.investors;
          nc.stocks = o.stocks;
          nc.days = o.days;
          nc.orders_per_investor_day = o.orders_per_day;
          const auto orders = gen_null_order_log(nc, config.threads);
          write("orders.csv", [&](std::ostream& out) { write_order_log(out, orders); });
          rec.counts["orders"] = orders.size();
        } else if (o.kind == "ego-population") {
          EgoPopulationConfig ec;
          ec.seed = config.seed;
          ec.egos = o.egos;
          ec.size_jitter = o.size_jitter;
          ec.bands.dispersions.assign(ec.bands.sizes.size(), o.dispersion);
          const auto pop = gen_layered_ego_population(ec, config.threads);
          write("ego_edges.csv", [&](std::ostream& out) { write_edge_list(out, pop.network); });
          write("ground_truth.csv", [&](std::ostream& out) { write_ground_truth(out, pop.truth); });
          rec.counts["egos"] = pop.truth.size();
          rec.counts["edges"] = pop.network.edge_count();
        } else {
          PlantedOrderConfig pc;
          pc.seed = config.seed;
          pc.days = o.planted_days;
          pc.stocks = o.planted_stocks;
          pc.background_investors = o.background_investors;
          pc.background_orders_per_day = o.background_orders_per_day;
          pc.egos = o.planted_egos;
          const auto log = gen_planted_order_log(pc, config.threads);
          write("orders.csv", [&](std::ostream& out) { write_order_log(out, log.orders); });
          write("ground_truth.csv", [&](std::ostream& out) { write_ground_truth(out, log.truth); });
          rec.counts["orders"] = log.orders.size();
        }
      }));
    }
    write_manifest(out_dir, manifest);
    return kExitOk;
  } catch (const StageError& e) {
    manifest.status = "failed";
    manifest.failed_stage = e.stage();
    manifest.error = e.what();
    std::cerr << fmt::format("stage {} failed: {}\n", e.stage(), e.what());
  } catch (const std::exception& e) {
    manifest.status = "failed";
    manifest.failed_stage = current;
    manifest.error = e.what();
    std::cerr << fmt::format("stage {} failed: {}\n", current, e.what());
  }
  try {
    write_manifest(out_dir, manifest);
  } catch (const std::exception& e) {
    std::cerr << "cannot write manifest: " << e.what() << '\n';
  }
  return kExitStageFailure;
}

}  // namespace egolayers
