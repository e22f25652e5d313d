#pragma once

// Convergence diagnostics for scalar MCMC output.

#include <cstddef>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace geosynth {

/// (mean of first frac_a - mean of last frac_b) / sqrt(se_a^2 + se_b^2),
/// standard errors from batch means (up to 20 batches per window).
/// Throws InputError for chains shorter than 20 or constant in both windows.
double geweke_z(std::span<const double> chain, double frac_a = 0.1, double frac_b = 0.5);

struct HeidelbergerWelch {
  bool passed = false;
  /// First start index whose remaining chain passed; chain size when failed.
  std::size_t start = 0;
  /// Cramer-von Mises statistic at `start` (or at the last tried start).
  double statistic = 0.0;
};

/// Stationarity test discarding 0%, 10%, ..., 50% of the chain. The spectral
/// density at zero comes from an AR fit (order by AIC) to the second half.
/// Requires at least 50 draws.
HeidelbergerWelch heidelberger_welch(std::span<const double> chain, double critical_value = 0.4614);

/// Spectral density at frequency zero of a stationary series, from a
/// Yule-Walker AR fit with order chosen by AIC.
double spectrum0_ar(std::span<const double> x);

/// Sample autocorrelations at lags 0..max_lag, normalized by lag 0.
/// Throws InputError for zero variance or length <= max_lag.
std::vector<double> autocorrelation(std::span<const double> chain, std::size_t max_lag);

/// Geweke, Heidelberger-Welch and the first ACF lags of one chain. Parts that
/// cannot be computed (short or constant chains) are reported as null.
nlohmann::json diagnostics_json(std::span<const double> chain, std::size_t max_lag = 20);

}  // namespace geosynth
