#include "egolayers/pipeline.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "egolayers/distfit.hpp"
#include "egolayers/error.hpp"
#include "egolayers/ingest.hpp"
#include "egolayers/report.hpp"
#include "egolayers/tamarit.hpp"

namespace egolayers {
namespace {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) throw std::runtime_error("SHA-256 unavailable");
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const char* data, std::size_t size) { EVP_DigestUpdate(ctx_, data, size); }
  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_, md, &len);
    std::string out;
    for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", md[i]);
    return out;
  }

 private:
  EVP_MD_CTX* ctx_;
};

// Files of one stage; written whole through a temporary name and removed again
// if the stage fails.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  void write(const std::string& name, const std::function<void(std::ostream&)>& body) {
    std::ostringstream buffer;
    body(buffer);
    const std::string bytes = buffer.str();
    const fs::path tmp = dir_ / (name + ".tmp");
    {
      std::ofstream f(tmp, std::ios::binary);
      f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
      if (!f) throw std::runtime_error(fmt::format("cannot write {}", tmp.string()));
    }
    fs::rename(tmp, dir_ / name);
    digests_[name] = sha256_bytes(bytes);
  }

  void rollback() {
    std::error_code ec;
    for (const auto& [name, _] : digests_) {
      fs::remove(dir_ / name, ec);
      fs::remove(dir_ / (name + ".tmp"), ec);
    }
  }

  const std::map<std::string, std::string>& digests() const { return digests_; }

 private:
  fs::path dir_;
  std::map<std::string, std::string> digests_;
};

template <class Body>
StageRecord run_stage(const std::string& name, const fs::path& out_dir, const PipelineConfig& config, Body&& body) {
  StageRecord record;
  record.name = name;
  record.params = stage_params(name, config);
  const auto start = std::chrono::steady_clock::now();
  std::optional<Outputs> outputs;
  try {
    outputs.emplace(out_dir);
    body(record, *outputs);
  } catch (const StageError&) {
    if (outputs) outputs->rollback();
    throw;
  } catch (const std::exception& e) {
    if (outputs) outputs->rollback();
    throw StageError(name, e.what());
  }
  record.outputs = outputs->digests();
  record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return record;
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("cannot read {}", path.string()));
  return in;
}

WeightedNetwork load_network(const fs::path& edges, const std::optional<fs::path>& marginals = std::nullopt) {
  auto in = open_input(edges);
  auto network = read_edge_list(in);
  if (marginals) {
    auto m = open_input(*marginals);
    network = network.with_marginals(read_marginals(m));
  }
  return network;
}

template <class Events>
Events filter_blocked(Events events, const PipelineConfig& config, StageRecord& record) {
  if (config.blocklist.empty()) return events;
  record.inputs["blocklist"] = sha256_file(config.blocklist);
  auto in = open_input(config.blocklist);
  const auto blocklist = Blocklist::read(in);
  auto kept = apply_blocklist(events, blocklist);
  record.counts["blocked_rows"] = events.size() - kept.size();
  return kept;
}

template <class Result>
void write_row_errors(Outputs& outputs, const Result& parsed) {
  outputs.write("ingest_errors.csv", [&](std::ostream& out) {
    out << "line,message\n";
    for (const auto& e : parsed.errors) out << e.line << ",\"" << e.message << "\"\n";
  });
}

std::vector<LayerCensus> censuses(const WeightedNetwork& network, const PipelineConfig& config) {
  std::vector<LayerCensus> out;
  for (auto algorithm : config.algorithms)
    out.push_back(layer_census(network, {config.degree_floor, algorithm, config.k_max, config.threads}));
  return out;
}

std::string_view counting_name(CooccurrenceCounting c) {
  return c == CooccurrenceCounting::order_pairs ? "order_pairs" : "initiating_orders";
}
std::string_view cn_marginals_name(CnMarginals m) {
  return m == CnMarginals::reciprocal_only ? "reciprocal_only" : "all_calls";
}
std::string_view rule_name(RetentionRule r) {
  return r == RetentionRule::both_directions ? "both" : "either";
}
std::string_view universe_name(BonferroniUniverse u) {
  return u == BonferroniUniverse::maximal_pairs ? "maximal_pairs" : "tested_edges";
}
std::string_view jaccard_name(JaccardVariant v) {
  return v == JaccardVariant::co_membership ? "co_membership" : "best_match";
}

Json algorithm_list(const PipelineConfig& config) {
  Json list = Json::array();
  for (auto a : config.algorithms) list.push_back(algorithm_name(a));
  return list;
}

std::vector<double> node_values(const WeightedNetwork& network, bool weighted) {
  std::vector<double> v;
  for (NodeIndex n = 0; n < network.node_count(); ++n)
    v.push_back(weighted ? static_cast<double>(network.weighted_degree(n)) : static_cast<double>(network.degree(n)));
  return v;
}

std::string iso_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string sha256_bytes(std::string_view bytes) {
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.hex();
}

std::string sha256_file(const fs::path& path) {
  auto in = open_input(path);
  Sha256 h;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

StageError::StageError(std::string stage, const std::string& message)
    : std::runtime_error(message), stage_(std::move(stage)) {}

Json config_json(const PipelineConfig& c) {
  Json j;
  j["delimiter"] = std::string(1, c.delimiter);
  j["blocklist"] = c.blocklist;
  j["utc_offset_seconds"] = c.utc_offset_seconds;
  j["window_seconds"] = c.window_seconds;
  j["min_cooccurrence"] = c.min_cooccurrence;
  j["counting"] = counting_name(c.counting);
  j["cn_marginals"] = cn_marginals_name(c.cn_marginals);
  j["alpha"] = c.alpha;
  j["rule"] = rule_name(c.rule);
  j["universe"] = universe_name(c.universe);
  j["chi2_bins"] = c.chi2_bins;
  j["bootstrap"] = c.bootstrap;
  j["seed"] = c.seed;
  j["mixed_min_side"] = c.mixed_min_side;
  j["mixed_max_candidates"] = c.mixed_max_candidates;
  j["flatness_tolerance"] = c.flatness_tolerance;
  j["degree_floor"] = c.degree_floor;
  j["k_max"] = c.k_max;
  j["algorithms"] = algorithm_list(c);
  j["jaccard"] = jaccard_name(c.jaccard);
  j["threads"] = c.threads;
  return j;
}

Json stage_params(const std::string& stage, const PipelineConfig& c) {
  Json j = Json::object();
  if (stage == "build-ein" || stage == "build-cn") {
    j["delimiter"] = std::string(1, c.delimiter);
    j["blocklist"] = c.blocklist;
  }
  if (stage == "build-ein") {
    j["utc_offset_seconds"] = c.utc_offset_seconds;
    j["window_seconds"] = c.window_seconds;
    j["min_cooccurrence"] = c.min_cooccurrence;
    j["counting"] = counting_name(c.counting);
  } else if (stage == "build-cn") {
    j["cn_marginals"] = cn_marginals_name(c.cn_marginals);
  } else if (stage == "validate") {
    j["alpha"] = c.alpha;
    j["rule"] = rule_name(c.rule);
    j["universe"] = universe_name(c.universe);
  } else if (stage == "fit-degrees") {
    j["bootstrap"] = c.bootstrap;
    j["seed"] = c.seed;
    j["mixed_min_side"] = c.mixed_min_side;
    j["mixed_max_candidates"] = c.mixed_max_candidates;
    j["flatness_tolerance"] = c.flatness_tolerance;
  } else if (stage == "layers" || stage == "census" || stage == "tamarit") {
    j["degree_floor"] = c.degree_floor;
    j["k_max"] = c.k_max;
    j["algorithms"] = algorithm_list(c);
    if (stage == "census") j["jaccard"] = jaccard_name(c.jaccard);
    if (stage == "tamarit") j["chi2_bins"] = c.chi2_bins;
  }
  return j;
}

StageRecord stage_build_ein(const fs::path& orders, const fs::path& out_dir, const PipelineConfig& config) {
  return run_stage("build-ein", out_dir, config, [&](StageRecord& rec, Outputs& outputs) {
    if (config.window_seconds <= 0) throw ArgumentError("window_seconds must be positive");
    if (config.min_cooccurrence < 1) throw ArgumentError("min_cooccurrence must be at least 1");
    rec.inputs["orders"] = sha256_file(orders);
    auto in = open_input(orders);
    OrderSchema schema;
    schema.delimiter = config.delimiter;
    auto parsed = parse_order_log(in, schema, config.threads);
    rec.counts["data_rows"] = parsed.data_rows;
    rec.counts["row_errors"] = parsed.error_count;
    auto events = filter_blocked(std::move(parsed.events), config, rec);
    std::set<std::int64_t> days;
    for (const auto& e : events) days.insert(day_of(e.timestamp, config.utc_offset_seconds));
    const auto network = build_ein(events, {config.window_seconds, config.min_cooccurrence, config.counting},
                                   config.utc_offset_seconds, config.threads);
    rec.counts["orders"] = events.size();
    rec.counts["days"] = days.size();
    rec.counts["nodes"] = network.node_count();
    rec.counts["edges"] = network.edge_count();
    rec.counts["grand_total"] = network.grand_total();
    outputs.write("ein_edges.csv", [&](std::ostream& out) { write_edge_list(out, network); });
    write_row_errors(outputs, parsed);
  });
}

StageRecord stage_build_cn(const fs::path& calls, const fs::path& out_dir, const PipelineConfig& config) {
  return run_stage("build-cn", out_dir, config, [&](StageRecord& rec, Outputs& outputs) {
    rec.inputs["calls"] = sha256_file(calls);
    auto in = open_input(calls);
    CallSchema schema;
    schema.delimiter = config.delimiter;
    auto parsed = parse_call_log(in, schema, config.threads);
    rec.counts["data_rows"] = parsed.data_rows;
    rec.counts["row_errors"] = parsed.error_count;
    rec.counts["self_calls"] = parsed.self_calls;
    auto events = filter_blocked(std::move(parsed.events), config, rec);
    const auto network = build_cn(events, config.cn_marginals);
    rec.counts["calls"] = events.size();
    rec.counts["nodes"] = network.node_count();
    rec.counts["edges"] = network.edge_count();
    rec.counts["grand_total"] = network.grand_total();
    outputs.write("cn_edges.csv", [&](std::ostream& out) { write_edge_list(out, network); });
    if (config.cn_marginals == CnMarginals::all_calls)
      outputs.write("cn_marginals.json", [&](std::ostream& out) { write_marginals(out, network); });
    write_row_errors(outputs, parsed);
  });
}

StageRecord stage_validate(const fs::path& edges, const std::optional<fs::path>& marginals, const fs::path& out_dir,
                           const PipelineConfig& config) {
  return run_stage("validate", out_dir, config, [&](StageRecord& rec, Outputs& outputs) {
    rec.inputs["edges"] = sha256_file(edges);
    if (marginals) rec.inputs["marginals"] = sha256_file(*marginals);
    const auto network = load_network(edges, marginals);
    const auto result = validate_network(network, {config.alpha, config.rule, config.universe}, config.threads);
    rec.counts["nodes_in"] = network.node_count();
    rec.counts["edges_in"] = network.edge_count();
    rec.counts["tests"] = result.tests;
    rec.counts["p_b"] = result.threshold;
    rec.counts["nodes_out"] = result.network.node_count();
    rec.counts["edges_out"] = result.network.edge_count();
    outputs.write("validated_edges.csv", [&](std::ostream& out) { write_edge_list(out, result.network); });
    outputs.write("validation_report.csv",
                  [&](std::ostream& out) { write_validation_report(out, network, result.report); });
  });
}

StageRecord stage_fit_degrees(const fs::path& edges, const fs::path& out_dir, const PipelineConfig& config) {
  return run_stage("fit-degrees", out_dir, config, [&](StageRecord& rec, Outputs& outputs) {
    rec.inputs["edges"] = sha256_file(edges);
    const auto network = load_network(edges);
    const auto buckets = degree_census(network);
    outputs.write("degree_census.csv", [&](std::ostream& out) { write_degree_census(out, buckets); });

    std::vector<FamilyFitRow> rows;
    for (const bool weighted : {false, true}) {
      const std::string sample = weighted ? "weighted_degree" : "degree";
      const auto values = node_values(network, weighted);
      auto sample_rows = values.size() >= 3 ? fit_sample(sample, values, config.bootstrap, config.seed, config.threads)
                                            : std::vector<FamilyFitRow>{};
      const auto empirical = empirical_density(values);
      outputs.write(fmt::format("plot_{}_empirical.csv", sample),
                    [&](std::ostream& out) { write_density(out, empirical); });
      for (const auto& row : sample_rows) {
        if (!row.fit) continue;
        std::vector<DensityPoint> fitted;
        for (const auto& p : empirical) fitted.push_back({p.value, pdf(row.fit->params, p.value)});
        outputs.write(fmt::format("plot_{}_{}.csv", sample, family_name(row.family)),
                      [&](std::ostream& out) { write_density(out, fitted); });
        if (row.selected) rec.counts[sample + "_selected"] = family_name(row.family);
      }
      rows.insert(rows.end(), sample_rows.begin(), sample_rows.end());

      MixedFitOptions options;
      options.min_side = config.mixed_min_side;
      options.max_candidates = config.mixed_max_candidates;
      options.flatness_tolerance = config.flatness_tolerance;
      options.threads = config.threads;
      try {
        if (values.size() < 20) throw InapplicableError("fewer than 20 values");
        const auto mixed = fit_mixed_lognormal(values, options);
        rec.counts[sample + "_k_H"] = mixed.threshold;
        outputs.write(fmt::format("mixed_fit_{}.csv", sample), [&](std::ostream& out) { write_mixed_fit(out, sample, mixed); });
        outputs.write(fmt::format("residual_curve_{}.csv", sample), [&](std::ostream& out) { write_residual_curve(out, mixed); });
        const double n = static_cast<double>(values.size());
        std::vector<DensityPoint> fitted;
        for (const auto& p : empirical) {
          const bool low = p.value <= mixed.threshold;
          const double share = static_cast<double>(low ? mixed.n_lower : mixed.n_upper) / n;
          fitted.push_back({p.value, share * (low ? mixed.lower.pdf(p.value) : mixed.upper.pdf(p.value))});
        }
        outputs.write(fmt::format("plot_{}_mixed.csv", sample), [&](std::ostream& out) { write_density(out, fitted); });
      } catch (const InapplicableError& e) {
        rec.counts[sample + "_mixed_status"] = e.what();
      } catch (const DegenerateSampleError& e) {
        rec.counts[sample + "_mixed_status"] = e.what();
      }
    }
    outputs.write("fit_report.csv", [&](std::ostream& out) { write_fit_report(out, rows); });
    rec.counts["nodes"] = network.node_count();
  });
}

StageRecord stage_layers(const fs::path& edges, const fs::path& out_dir, const PipelineConfig& config) {
  return run_stage("layers", out_dir, config, [&](StageRecord& rec, Outputs& outputs) {
    rec.inputs["edges"] = sha256_file(edges);
    const auto network = load_network(edges);
    for (const auto& census : censuses(network, config)) {
      const auto name = algorithm_name(census.algorithm);
      outputs.write(fmt::format("layers_{}.jsonl", name), [&](std::ostream& out) { write_ego_layers(out, census); });
      outputs.write(fmt::format("layer_histograms_{}.csv", name),
                    [&](std::ostream& out) { write_layer_histograms(out, census); });
      outputs.write(fmt::format("layer_fits_{}.csv", name), [&](std::ostream& out) { write_layer_fits(out, census); });
      rec.counts[fmt::format("{}_egos", name)] = census.egos;
      rec.counts[fmt::format("{}_degenerate", name)] = census.degenerate;
    }
  });
}

StageRecord stage_census(const fs::path& edges, const fs::path& out_dir, const PipelineConfig& config) {
  return run_stage("census", out_dir, config, [&](StageRecord& rec, Outputs& outputs) {
    rec.inputs["edges"] = sha256_file(edges);
    const auto network = load_network(edges);
    const auto all = censuses(network, config);
    outputs.write("layer_census.csv",
                  [&](std::ostream& out) { write_layer_census(out, all, dunbar_reference_row()); });
    Json summary;
    summary["degree_floor"] = config.degree_floor;
    summary["algorithms"] = Json::array();
    for (const auto& c : all) {
      Json a;
      a["algorithm"] = algorithm_name(c.algorithm);
      a["egos"] = c.egos;
      a["degenerate"] = c.degenerate;
      summary["algorithms"].push_back(a);
    }
    if (all.size() >= 2) {
      const auto j = mean_jaccard(all[0], all[1], config.jaccard);
      summary["jaccard"] = {{"variant", jaccard_name(config.jaccard)},
                            {"between", {algorithm_name(all[0].algorithm), algorithm_name(all[1].algorithm)}},
                            {"mean", j ? Json(*j) : Json(nullptr)}};
      if (j) rec.counts["mean_jaccard"] = *j;
    }
    summary["mean_r"] =
        "arithmetic mean of successive cumulative ratios; the reference row carries the conventional 3.00 although "
        "the arithmetic mean of (3, 3.33, 3) is 3.11";
    outputs.write("census_summary.json", [&](std::ostream& out) { out << summary.dump(2) << '\n'; });
    for (const auto& c : all) rec.counts[fmt::format("{}_rows", algorithm_name(c.algorithm))] = c.rows.size();
  });
}

StageRecord stage_tamarit(const fs::path& edges, const fs::path& out_dir, const PipelineConfig& config) {
  return run_stage("tamarit", out_dir, config, [&](StageRecord& rec, Outputs& outputs) {
    rec.inputs["edges"] = sha256_file(edges);
    const auto network = load_network(edges);
    std::vector<EgoEstimate> estimates;
    std::vector<RatioFitRow> fits;
    for (const auto& census : censuses(network, config)) {
      auto group = estimate_census(census, network.node_count());
      std::vector<TamaritEstimate> plain;
      for (const auto& e : group) plain.push_back(e.estimate);
      RatioFitRow row{census.algorithm, std::nullopt, "ok"};
      try {
        row.fit = ratio_population_fit(plain, config.chi2_bins);
      } catch (const InapplicableError& e) {
        row.status = e.what();
      } catch (const DegenerateSampleError& e) {
        row.status = e.what();
      }
      rec.counts[fmt::format("{}_estimates", algorithm_name(census.algorithm))] = group.size();
      fits.push_back(std::move(row));
      estimates.insert(estimates.end(), group.begin(), group.end());
    }
    outputs.write("tamarit_estimates.csv", [&](std::ostream& out) { write_estimates(out, estimates); });
    outputs.write("ratio_fit.csv", [&](std::ostream& out) { write_ratio_fits(out, fits); });
    outputs.write("ratio_histograms.csv", [&](std::ostream& out) { write_ratio_histograms(out, estimates, fits); });
  });
}

Json record_json(const StageRecord& r) {
  Json j;
  j["name"] = r.name;
  j["params"] = r.params;
  j["inputs"] = r.inputs;
  j["outputs"] = r.outputs;
  j["counts"] = r.counts;
  j["seconds"] = r.seconds;
  j["cached"] = r.cached;
  return j;
}

std::vector<StageRecord> run_all(const fs::path& orders, const fs::path& out_dir, const PipelineConfig& config,
                                 const std::optional<Json>& previous) {
  std::vector<StageRecord> records;
  auto reuse = [&](const std::string& name, const std::map<std::string, std::string>& inputs) -> bool {
    if (!previous || !previous->contains("stages")) return false;
    for (const auto& s : (*previous)["stages"]) {
      if (s.value("name", "") != name) continue;
      if (s["params"] != stage_params(name, config)) return false;
      if (s["inputs"].get<std::map<std::string, std::string>>() != inputs) return false;
      const auto outputs = s["outputs"].get<std::map<std::string, std::string>>();
      for (const auto& [file, digest] : outputs)
        if (!fs::exists(out_dir / file) || sha256_file(out_dir / file) != digest) return false;
      StageRecord r;
      r.name = name;
      r.params = s["params"];
      r.inputs = inputs;
      r.outputs = outputs;
      r.counts = s["counts"];
      r.cached = true;
      records.push_back(std::move(r));
      return true;
    }
    return false;
  };

  std::map<std::string, std::string> ein_inputs{{"orders", sha256_file(orders)}};
  if (!config.blocklist.empty()) ein_inputs["blocklist"] = sha256_file(config.blocklist);
  if (!reuse("build-ein", ein_inputs)) records.push_back(stage_build_ein(orders, out_dir, config));

  const fs::path ein = out_dir / "ein_edges.csv";
  if (!reuse("validate", {{"edges", sha256_file(ein)}}))
    records.push_back(stage_validate(ein, std::nullopt, out_dir, config));

  const fs::path validated = out_dir / "validated_edges.csv";
  const std::map<std::string, std::string> downstream{{"edges", sha256_file(validated)}};
  if (!reuse("fit-degrees", downstream)) records.push_back(stage_fit_degrees(validated, out_dir, config));
  if (!reuse("layers", downstream)) records.push_back(stage_layers(validated, out_dir, config));
  if (!reuse("census", downstream)) records.push_back(stage_census(validated, out_dir, config));
  if (!reuse("tamarit", downstream)) records.push_back(stage_tamarit(validated, out_dir, config));
  return records;
}

void write_manifest(const fs::path& out_dir, const ManifestInfo& info) {
  Json j;
  j["tool"] = "egolayers";
  j["command"] = info.command;
  j["timestamp"] = iso_timestamp();
  j["status"] = info.status;
  if (!info.failed_stage.empty()) j["failed_stage"] = info.failed_stage;
  if (!info.error.empty()) j["error"] = info.error;
  j["config"] = info.config;
  j["inputs"] = info.inputs;
  j["stages"] = Json::array();
  Json outputs = Json::object();
  for (const auto& s : info.stages) {
    j["stages"].push_back(record_json(s));
    for (const auto& [file, digest] : s.outputs) outputs[file] = digest;
  }
  j["outputs"] = outputs;
  fs::create_directories(out_dir);
  std::ofstream out(out_dir / "manifest.json", std::ios::binary);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write manifest.json");
}

}  // namespace egolayers
