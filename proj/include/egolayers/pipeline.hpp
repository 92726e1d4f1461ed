#pragma once

// Stage runners behind the command-line tool. Each stage reads its inputs,
// writes its outputs into one directory and returns a record (parameters,
// input/output SHA-256 digests, counts, timing) for the run manifest.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "egolayers/layers.hpp"
#include "egolayers/netbuild.hpp"
#include "egolayers/validate.hpp"

namespace egolayers {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

struct PipelineConfig {
  // ingest
  char delimiter = ',';
  std::string blocklist;  // optional path
  std::int64_t utc_offset_seconds = 0;
  // networks
  std::int64_t window_seconds = 30;
  std::uint64_t min_cooccurrence = 3;
  CooccurrenceCounting counting = CooccurrenceCounting::order_pairs;
  CnMarginals cn_marginals = CnMarginals::reciprocal_only;
  // validation
  double alpha = 0.01;
  RetentionRule rule = RetentionRule::both_directions;
  BonferroniUniverse universe = BonferroniUniverse::maximal_pairs;
  // distribution fits
  std::size_t chi2_bins = 0;  // 0 = default rule
  std::size_t bootstrap = 0;
  std::uint64_t seed = 1;
  std::size_t mixed_min_side = 10;
  std::size_t mixed_max_candidates = 400;
  double flatness_tolerance = 0.6;
  // layers
  std::size_t degree_floor = 100;
  int k_max = 8;
  std::vector<LayerAlgorithm> algorithms{LayerAlgorithm::kmeans, LayerAlgorithm::ht_break};
  JaccardVariant jaccard = JaccardVariant::co_membership;

  unsigned threads = 1;
};

std::string sha256_file(const fs::path& path);
std::string sha256_bytes(std::string_view bytes);

/// A stage failure carrying the stage name; outputs of that stage are removed.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& message);
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct StageRecord {
  std::string name;
  Json params;
  std::map<std::string, std::string> inputs;   // role -> digest
  std::map<std::string, std::string> outputs;  // file name -> digest
  Json counts = Json::object();
  double seconds = 0.0;
  bool cached = false;
};

/// Parameters that determine a stage's outputs (thread count excluded).
Json stage_params(const std::string& stage, const PipelineConfig& config);

StageRecord stage_build_ein(const fs::path& orders, const fs::path& out_dir, const PipelineConfig& config);
StageRecord stage_build_cn(const fs::path& calls, const fs::path& out_dir, const PipelineConfig& config);
StageRecord stage_validate(const fs::path& edges, const std::optional<fs::path>& marginals, const fs::path& out_dir,
                           const PipelineConfig& config);
StageRecord stage_fit_degrees(const fs::path& edges, const fs::path& out_dir, const PipelineConfig& config);
StageRecord stage_layers(const fs::path& edges, const fs::path& out_dir, const PipelineConfig& config);
StageRecord stage_census(const fs::path& edges, const fs::path& out_dir, const PipelineConfig& config);
StageRecord stage_tamarit(const fs::path& edges, const fs::path& out_dir, const PipelineConfig& config);

/// build-ein -> validate -> fit-degrees, layers, census, tamarit. A stage is
/// skipped when `previous` (an earlier manifest of this directory) holds a
/// record with the same parameters and input digests whose outputs are still
/// present with matching digests.
std::vector<StageRecord> run_all(const fs::path& orders, const fs::path& out_dir, const PipelineConfig& config,
                                 const std::optional<Json>& previous = std::nullopt);

Json config_json(const PipelineConfig& config);
Json record_json(const StageRecord& record);

struct ManifestInfo {
  std::string command;
  Json config;
  std::map<std::string, std::string> inputs;  // path -> digest
  std::vector<StageRecord> stages;
  std::string status = "ok";
  std::string failed_stage;
  std::string error;
};

/// Writes manifest.json; the "timestamp" field and stage timings are the only
/// run-dependent values.
void write_manifest(const fs::path& out_dir, const ManifestInfo& info);

}  // namespace egolayers
