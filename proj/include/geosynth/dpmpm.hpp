#pragma once

// Truncated Dirichlet-process mixture of products of multinomials: blocked
// Gibbs sampling and partially synthetic draws.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "geosynth/data_model.hpp"
#include "geosynth/diagnostics.hpp"
#include "geosynth/rng.hpp"

namespace geosynth::dpmpm {

struct DpmpmConfig {
  std::size_t F = 100;
  double a_alpha = 0.25;
  double b_alpha = 0.25;
  /// Hyperparameter for every level when dirichlet_a is empty.
  double dirichlet_default = 1.0;
  /// dirichlet_a[k][c] for variable k, level c (0-based).
  std::vector<std::vector<double>> dirichlet_a;
  std::size_t iterations = 10000;
  std::size_t burn_in = 5000;
  std::size_t thin = 10;
  /// Rerun with `escalated_thin` when |acf(1)| of the saved alpha draws
  /// exceeds this. Negative disables the check.
  double acf_threshold = 0.2;
  std::size_t escalated_thin = 50;

  void validate() const;
};

/// Fully categorical n x p table, row-major, 0-based level codes.
struct Table {
  std::size_t n = 0;
  std::size_t p = 0;
  std::vector<std::int32_t> levels;
  std::vector<std::int32_t> codes;

  std::int32_t at(std::size_t i, std::size_t k) const { return codes[i * p + k]; }
};

/// Every variable of `ds` must be categorical.
Table make_table(const Dataset& ds);

struct DpmpmState {
  /// 0-based class of each record.
  std::vector<std::int32_t> eta;
  std::vector<double> V;
  std::vector<double> pi;
  double alpha = 1.0;
  /// phi[k][f * d_k + c]
  std::vector<std::vector<double>> phi;
  /// Records per class, kept in step with eta.
  std::vector<std::size_t> class_counts;

  std::size_t occupied() const;
};

/// pi_f = V_f prod_{l<f} (1 - V_l). Requires V.back() == 1.
std::vector<double> stick_breaking_weights(std::span<const double> V);

/// alpha = 1; V, phi drawn from their priors; eta unset until the first sweep.
DpmpmState initial_state(const Table& data, const DpmpmConfig& cfg, Rng& rng);

/// One blocked sweep: eta, V, pi, phi, alpha, in that order.
void gibbs_sweep(DpmpmState& state, const Table& data, const DpmpmConfig& cfg, Rng& rng);

struct ChainTrace {
  std::vector<std::size_t> iterations;  // 1-based sweep numbers
  std::vector<double> alpha_draws;
  std::vector<std::size_t> occupied_classes;

  std::size_t size() const { return alpha_draws.size(); }
  void write_csv(const std::filesystem::path& path) const;
};

struct Snapshot {
  std::vector<double> pi;
  /// Only the retained variables, in the order requested.
  std::vector<std::vector<double>> phi;
  double alpha = 0.0;
};

struct ChainResult {
  ChainTrace trace;
  /// Positions (into the saved draws) of the stored snapshots.
  std::vector<std::size_t> snapshot_positions;
  std::vector<Snapshot> snapshots;
};

/// Number of sweeps saved after burn-in.
std::size_t saved_draw_count(const DpmpmConfig& cfg);

/// m positions evenly spread over S saved draws: j*S/(m-1) for j < m-1 and
/// S-1 last; a single replicate uses the last draw.
std::vector<std::size_t> select_snapshots(std::size_t S, std::size_t m);

/// Runs cfg.iterations sweeps. Snapshots hold phi for `retain` (all
/// variables when empty) and are stored only at `keep` positions (all saved
/// draws when nullopt).
ChainResult run_chain(const Table& data, const DpmpmConfig& cfg, Rng& rng, std::span<const std::size_t> retain = {},
                      const std::optional<std::vector<std::size_t>>& keep = std::nullopt);

/// Replicate j draws every record's class from snapshots[j].pi, then each
/// target independently from that class's phi, using stream
/// derive_seed(seed, {j}). Returns [replicate][target] 0-based code columns.
/// `snapshots[j].phi[t]` must belong to targets[t].
std::vector<std::vector<std::vector<std::int32_t>>> synthesize(const Table& data, std::span<const std::size_t> targets,
                                                              std::span<const Snapshot> snapshots,
                                                              std::uint64_t seed);

struct DpmpmRun {
  ChainTrace trace;
  std::size_t thin_used = 0;
  bool escalated = false;
  std::vector<std::size_t> snapshot_positions;
};

/// Dataset-level synthesizer: the geocode (if targeted or present) is encoded
/// as a categorical variable, the chain is run on all variables, and the
/// targets are redrawn. `run` receives the chain trace when non-null.
SyntheticRelease synthesize_dpmpm(const Dataset& ds, std::span<const std::string> targets, const DpmpmConfig& cfg,
                                  std::size_t m, std::uint64_t seed, DpmpmRun* run = nullptr);

}  // namespace geosynth::dpmpm
