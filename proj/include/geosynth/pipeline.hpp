#pragma once

// End-to-end orchestration: load, aggregate, cluster, synthesize per cluster
// in parallel, reassemble, evaluate, and write artifacts.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "geosynth/cart.hpp"
#include "geosynth/data_model.hpp"
#include "geosynth/dpmpm.hpp"
#include "geosynth/mdav.hpp"
#include "geosynth/risk.hpp"
#include "geosynth/utility.hpp"

namespace geosynth::pipeline {

enum class Synthesizer { cart_categorical, cart_continuous, dpmpm };

Synthesizer parse_synthesizer(const std::string& s);
std::string to_string(Synthesizer s);

/// Alternative target sets evaluated alongside the main run.
struct Variant {
  std::string name;
  std::vector<std::string> synthesis_targets;
  std::optional<Synthesizer> synthesizer;
};

struct PipelineConfig {
  std::filesystem::path input;
  std::filesystem::path schema;
  std::filesystem::path output = "out";
  Synthesizer synthesizer = Synthesizer::cart_categorical;
  /// Ordered; defaults to the schema's synthesis targets.
  std::vector<std::string> synthesis_targets;
  /// CART predictors; default every non-target variable.
  std::optional<std::vector<std::string>> predictors;
  cart::CartConfig cart;
  bool latitude_first = false;
  dpmpm::DpmpmConfig dpmpm;
  std::size_t k = 15000;
  std::size_t m = 5;
  std::uint64_t seed = 1;
  /// Grid size for aggregation before synthesis.
  std::optional<double> aggregation;
  std::vector<risk::IntruderScenario> scenarios;
  utility::UtilitySettings utility;
  std::vector<Variant> variants;

  /// Relative paths are resolved against `base_dir`. Unknown keys are errors.
  static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static PipelineConfig load(const std::filesystem::path& path);
  /// Every tunable, defaults included.
  nlohmann::json to_json() const;
  void validate() const;
};

struct Inputs {
  Dataset original;
  /// The original after optional aggregation; what gets synthesized.
  Dataset synthesis_input;
};

Inputs load_inputs(const PipelineConfig& cfg);

ClusterPartition cluster_stage(const PipelineConfig& cfg, const Inputs& in);

/// Synthesis of one cluster with its own seed.
SyntheticRelease synthesize_part(const Dataset& part, Synthesizer synthesizer,
                                 const std::vector<std::string>& targets, const PipelineConfig& cfg,
                                 std::uint64_t seed, nlohmann::json* diagnostics = nullptr,
                                 dpmpm::ChainTrace* trace = nullptr);

struct SynthesisResult {
  SyntheticRelease release;
  std::vector<std::uint64_t> cluster_seeds;
  /// Per-cluster chain diagnostics (DPMPM only).
  nlohmann::json diagnostics = nlohmann::json::array();
  std::vector<dpmpm::ChainTrace> traces;
};

/// Cluster c uses derive_seed(cfg.seed, {c}). Output is independent of
/// `threads`. Failures name the cluster and stage.
SynthesisResult synthesize_clusters(const PipelineConfig& cfg, const Inputs& in, const ClusterPartition& part,
                                    const std::vector<std::string>& targets, Synthesizer synthesizer,
                                    std::size_t threads);

std::vector<risk::RiskReport> risk_stage(const PipelineConfig& cfg, const Inputs& in, const SyntheticRelease& release,
                                         const ClusterPartition& part, std::size_t threads);

utility::UtilityReport utility_stage(const PipelineConfig& cfg, const Inputs& in, const SyntheticRelease& release);

/// synthetic_<j>.csv for j = 1..m.
void write_release(const SyntheticRelease& release, const std::filesystem::path& dir);
/// Reads synthetic_1.csv ... until a file is missing.
SyntheticRelease read_release(const std::filesystem::path& dir, const Schema& schema,
                              std::vector<std::string> synthesized);

// Subcommands. Each reads its prior artifacts from the output directory.
void run_cluster(const PipelineConfig& cfg);
void run_synthesize(const PipelineConfig& cfg, std::size_t threads);
void run_evaluate_risk(const PipelineConfig& cfg, std::size_t threads,
                       const std::optional<std::filesystem::path>& release_dir = std::nullopt);
void run_evaluate_utility(const PipelineConfig& cfg,
                          const std::optional<std::filesystem::path>& release_dir = std::nullopt);
/// All stages, variants, and the manifest.
void run_pipeline(const PipelineConfig& cfg, std::size_t threads);

}  // namespace geosynth::pipeline
