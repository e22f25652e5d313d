#pragma once

// Re-identification risk of a synthetic release under exact-matching intruders.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>
#include <nlohmann/json_fwd.hpp>

#include "geosynth/data_model.hpp"
#include "geosynth/mdav.hpp"
#include "geosynth/rng.hpp"

namespace geosynth::risk {

using Rational = boost::multiprecision::cpp_rational;

struct IntruderScenario {
  std::string label;
  std::vector<std::string> quasi_identifiers;
  /// Meters per cell side; 0 matches exact geocodes, nullopt ignores them.
  std::optional<double> grid_size = 0.0;
  std::size_t targets_per_cluster = 100;
  bool block_on_cluster = false;

  /// Throws InputError on a negative grid or an unknown variable.
  void validate(const Schema& schema) const;
  /// "exact", "none", or the grid size in meters.
  std::string grid_label() const;
};

struct Target {
  std::size_t record = 0;
  std::uint32_t cluster = 0;
};

/// Uniform sample without replacement of `per_cluster` records from every
/// cluster. Ordered by cluster, then record.
std::vector<Target> sample_targets(const ClusterPartition& part, std::size_t per_cluster, Rng& rng);

struct GridCell {
  std::int64_t x = 0;
  std::int64_t y = 0;
  friend bool operator==(const GridCell&, const GridCell&) = default;
};

/// (floor(x / g), floor(y / g)). Throws InputError unless g > 0.
GridCell coarsen_geocode(const GeoPoint& p, double g);

/// Candidate sets of one target across the m replicates.
struct TargetMatch {
  /// |C_l| for each replicate.
  std::vector<std::size_t> candidate_counts;
  /// (record, bitmask of replicates whose candidate set holds it), by record.
  std::vector<std::pair<std::size_t, std::uint64_t>> members;

  /// (1/m) sum over replicates in `mask` of 1/|C_l|.
  Rational probability(std::uint64_t mask) const;
  double probability_value(std::uint64_t mask) const;
};

/// Exact-key lookup of matching records, one hash table per replicate.
class MatchIndex {
 public:
  /// `clusters` (record -> cluster) is required when the scenario blocks.
  MatchIndex(const SyntheticRelease& release, const IntruderScenario& scenario,
             std::span<const std::uint32_t> clusters = {});

  /// Candidates for a target whose known values are those of `original`'s
  /// row `record` (the original geocode included).
  TargetMatch match(const Dataset& original, const Target& target) const;

  std::size_t replicates() const { return tables_.size(); }

 private:
  std::string key_of(const Dataset& ds, std::size_t row, std::uint32_t cluster) const;

  IntruderScenario scenario_;
  std::vector<std::size_t> qi_;
  bool use_geo_ = false;
  std::vector<std::unordered_map<std::string, std::vector<std::uint32_t>>> tables_;
  std::vector<std::uint32_t> clusters_;
};

/// record -> Pr(J = record | t, release): (1/m) sum_l 1/|C_l| over the
/// replicates whose candidate set C_l contains the record.
std::map<std::size_t, double> match_probabilities(const Dataset& original, const Target& target,
                                                  const SyntheticRelease& release, const IntruderScenario& scenario,
                                                  std::span<const std::uint32_t> clusters = {});
std::map<std::size_t, Rational> exact_match_probabilities(const Dataset& original, const Target& target,
                                                          const SyntheticRelease& release,
                                                          const IntruderScenario& scenario,
                                                          std::span<const std::uint32_t> clusters = {});

struct TargetOutcome {
  std::size_t record = 0;
  std::uint32_t cluster = 0;
  /// Size of the argmax set; 0 when every probability is zero.
  std::size_t c = 0;
  /// True record in the argmax set.
  bool I = false;
  double max_probability = 0.0;
};

/// c_i and I_i with exact rational comparison of probabilities.
TargetOutcome evaluate_target(const TargetMatch& match, const Target& target);

struct RiskReport {
  std::string label;
  std::string grid;
  std::size_t N = 0;
  /// Targets with a unique most likely match.
  std::size_t s = 0;
  double expected_match_risk = 0.0;
  double true_match_rate = 0.0;
  /// Undefined when s = 0.
  std::optional<double> false_match_rate;
  std::vector<TargetOutcome> per_target;
};

RiskReport risk_summaries(std::vector<TargetOutcome> outcomes);

/// Evaluates every target; parallel over targets with `threads` workers.
RiskReport evaluate_risk(const Dataset& original, const SyntheticRelease& release, const IntruderScenario& scenario,
                         std::span<const Target> targets, std::span<const std::uint32_t> clusters = {},
                         std::size_t threads = 1);

/// One report per scenario, in order.
std::vector<RiskReport> risk_grid_sweep(const Dataset& original, const SyntheticRelease& release,
                                        std::span<const IntruderScenario> scenarios, std::span<const Target> targets,
                                        std::span<const std::uint32_t> clusters = {}, std::size_t threads = 1);

nlohmann::json to_json(const RiskReport& r, bool with_targets = true);
/// Columns: scenario, grid, N, s, expected_match_risk, true_match_rate, false_match_rate.
void write_risk_table_csv(std::span<const RiskReport> reports, const std::filesystem::path& path);

}  // namespace geosynth::risk
