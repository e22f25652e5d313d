#include "geosynth/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "geosynth/error.hpp"

namespace geosynth {

namespace {

double mean_of(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

struct WindowStats {
  double mean = 0.0;
  double se2 = 0.0;
  bool constant = true;
};

WindowStats batch_means(std::span<const double> w) {
  WindowStats s;
  s.mean = mean_of(w);
  for (double v : w) {
    if (v != w.front()) s.constant = false;
  }
  const std::size_t batches = std::min<std::size_t>(20, w.size());
  const std::size_t size = w.size() / batches;
  // Leading remainder dropped so batches are equal.
  const std::size_t skip = w.size() - batches * size;
  std::vector<double> means(batches);
  for (std::size_t b = 0; b < batches; ++b) means[b] = mean_of(w.subspan(skip + b * size, size));
  const double mm = mean_of(means);
  double var = 0.0;
  for (double m : means) var += (m - mm) * (m - mm);
  var /= static_cast<double>(batches - 1);
  s.se2 = var / static_cast<double>(batches);
  return s;
}

}  // namespace

double geweke_z(std::span<const double> chain, double frac_a, double frac_b) {
  if (chain.size() < 20) throw InputError("geweke_z: chain shorter than 20");
  if (!(frac_a > 0.0) || !(frac_b > 0.0) || frac_a + frac_b > 1.0) {
    throw InputError("geweke_z: window fractions must be positive and sum to at most 1");
  }
  const auto n = chain.size();
  const auto na = std::max<std::size_t>(2, static_cast<std::size_t>(std::floor(frac_a * static_cast<double>(n))));
  const auto nb = std::max<std::size_t>(2, static_cast<std::size_t>(std::floor(frac_b * static_cast<double>(n))));
  const WindowStats a = batch_means(chain.first(na));
  const WindowStats b = batch_means(chain.last(nb));
  if (a.constant && b.constant) throw InputError("geweke_z: degenerate chain (zero variance)");
  const double se = std::sqrt(a.se2 + b.se2);
  if (se == 0.0) return a.mean == b.mean ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), a.mean - b.mean);
  return (a.mean - b.mean) / se;
}

double spectrum0_ar(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 2) throw InputError("spectrum0_ar: need at least 2 values");
  const double m = mean_of(x);
  const std::size_t max_order =
      std::min<std::size_t>(n - 1, static_cast<std::size_t>(std::floor(10.0 * std::log10(static_cast<double>(n)))));
  std::vector<double> acov(max_order + 1, 0.0);
  for (std::size_t h = 0; h <= max_order; ++h) {
    double s = 0.0;
    for (std::size_t t = 0; t + h < n; ++t) s += (x[t] - m) * (x[t + h] - m);
    acov[h] = s / static_cast<double>(n);
  }
  if (acov[0] == 0.0) return 0.0;

  // Levinson-Durbin, keeping the AIC-best order.
  std::vector<double> phi, prev;
  double var = acov[0];
  double best_aic = static_cast<double>(n) * std::log(var);
  std::size_t best_order = 0;
  std::vector<double> best_phi;
  double best_var = var;
  for (std::size_t p = 1; p <= max_order; ++p) {
    double num = acov[p];
    for (std::size_t j = 1; j < p; ++j) num -= prev[j - 1] * acov[p - j];
    const double kappa = num / var;
    phi.assign(p, 0.0);
    for (std::size_t j = 1; j < p; ++j) phi[j - 1] = prev[j - 1] - kappa * prev[p - j - 1];
    phi[p - 1] = kappa;
    var *= (1.0 - kappa * kappa);
    if (!(var > 0.0)) break;
    const double aic = static_cast<double>(n) * std::log(var) + 2.0 * static_cast<double>(p);
    if (aic < best_aic) {
      best_aic = aic;
      best_order = p;
      best_phi = phi;
      best_var = var;
    }
    prev = phi;
  }
  const double pred_var = best_var * static_cast<double>(n) / static_cast<double>(n - (best_order + 1));
  const double denom = 1.0 - std::accumulate(best_phi.begin(), best_phi.end(), 0.0);
  return pred_var / (denom * denom);
}

HeidelbergerWelch heidelberger_welch(std::span<const double> chain, double critical_value) {
  const std::size_t n = chain.size();
  if (n < 50) throw InputError("heidelberger_welch: chain shorter than 50");
  const double s0 = spectrum0_ar(chain.subspan(n / 2));
  HeidelbergerWelch out;
  out.start = n;
  for (int step = 0; step <= 5; ++step) {
    const std::size_t start = static_cast<std::size_t>(step) * n / 10;
    const auto y = chain.subspan(start);
    const double n1 = static_cast<double>(y.size());
    double stat = 0.0;
    if (s0 > 0.0) {
      const double ybar = mean_of(y);
      double cum = 0.0;
      for (std::size_t t = 0; t < y.size(); ++t) {
        cum += y[t] - ybar;
        stat += cum * cum;
      }
      stat /= n1 * n1 * s0;
    }
    out.statistic = stat;
    if (stat < critical_value) {
      out.passed = true;
      out.start = start;
      return out;
    }
  }
  return out;
}

std::vector<double> autocorrelation(std::span<const double> chain, std::size_t max_lag) {
  const std::size_t n = chain.size();
  if (n <= max_lag) throw InputError("autocorrelation: chain length must exceed max_lag");
  const double m = mean_of(chain);
  double c0 = 0.0;
  for (double v : chain) c0 += (v - m) * (v - m);
  if (c0 == 0.0) throw InputError("autocorrelation: zero variance");
  std::vector<double> out(max_lag + 1);
  out[0] = 1.0;
  for (std::size_t h = 1; h <= max_lag; ++h) {
    double s = 0.0;
    for (std::size_t t = 0; t + h < n; ++t) s += (chain[t] - m) * (chain[t + h] - m);
    out[h] = s / c0;
  }
  return out;
}

nlohmann::json diagnostics_json(std::span<const double> chain, std::size_t max_lag) {
  nlohmann::json j;
  j["draws"] = chain.size();
  try {
    j["geweke_z"] = geweke_z(chain);
  } catch (const InputError&) {
    j["geweke_z"] = nullptr;
  }
  if (chain.size() >= 50) {
    const auto hw = heidelberger_welch(chain);
    j["heidelberger_welch"] = {{"passed", hw.passed}, {"start", hw.start}, {"statistic", hw.statistic}};
  } else {
    j["heidelberger_welch"] = nullptr;
  }
  try {
    j["acf"] = chain.empty() ? nlohmann::json(nullptr)
                             : nlohmann::json(autocorrelation(chain, std::min(max_lag, chain.size() - 1)));
  } catch (const InputError&) {
    j["acf"] = nullptr;
  }
  return j;
}

}  // namespace geosynth
