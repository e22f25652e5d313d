#include "geosynth/dpmpm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "geosynth/error.hpp"

namespace geosynth::dpmpm {

void DpmpmConfig::validate() const {
  if (F < 1) throw InputError("dpmpm: F must be at least 1");
  if (!(a_alpha > 0.0) || !(b_alpha > 0.0)) throw InputError("dpmpm: a_alpha and b_alpha must be positive");
  if (thin < 1) throw InputError("dpmpm: thin must be at least 1");
  if (burn_in >= iterations) throw InputError("dpmpm: burn_in must be smaller than iterations");
  if (escalated_thin < 1) throw InputError("dpmpm: escalated_thin must be at least 1");
  if (!(dirichlet_default > 0.0)) throw InputError("dpmpm: Dirichlet hyperparameters must be positive");
  for (const auto& row : dirichlet_a) {
    for (double a : row) {
      if (!(a > 0.0)) throw InputError("dpmpm: Dirichlet hyperparameters must be positive");
    }
  }
}

Table make_table(const Dataset& ds) {
  const Schema& schema = ds.schema();
  Table t;
  t.n = ds.rows();
  t.p = schema.size();
  for (std::size_t k = 0; k < t.p; ++k) {
    if (schema.variable(k).is_geocode()) {
      throw InputError("dpmpm: variable '" + schema.variable(k).name + "' is a geocode; encode it first");
    }
    t.levels.push_back(schema.variable(k).cardinality());
  }
  t.codes.resize(t.n * t.p);
  for (std::size_t k = 0; k < t.p; ++k) {
    const auto col = ds.column(k);
    for (std::size_t i = 0; i < t.n; ++i) t.codes[i * t.p + k] = col[i] - 1;
  }
  return t;
}

std::size_t DpmpmState::occupied() const {
  return static_cast<std::size_t>(std::count_if(class_counts.begin(), class_counts.end(),
                                                [](std::size_t c) { return c > 0; }));
}

std::vector<double> stick_breaking_weights(std::span<const double> V) {
  if (V.empty()) throw InputError("stick_breaking_weights: empty V");
  if (V.back() != 1.0) throw InputError("stick_breaking_weights: last stick fraction must equal 1");
  std::vector<double> pi(V.size());
  double rest = 1.0;
  for (std::size_t f = 0; f < V.size(); ++f) {
    if (!(V[f] >= 0.0 && V[f] <= 1.0)) throw InputError("stick_breaking_weights: V outside [0, 1]");
    pi[f] = V[f] * rest;
    rest *= 1.0 - V[f];
  }
  return pi;
}

namespace {

double hyper(const DpmpmConfig& cfg, std::size_t k, std::int32_t c) {
  if (cfg.dirichlet_a.empty()) return cfg.dirichlet_default;
  return cfg.dirichlet_a.at(k).at(static_cast<std::size_t>(c));
}

void check_hyper_shape(const Table& data, const DpmpmConfig& cfg) {
  if (cfg.dirichlet_a.empty()) return;
  if (cfg.dirichlet_a.size() != data.p) throw InputError("dpmpm: dirichlet_a needs one entry per variable");
  for (std::size_t k = 0; k < data.p; ++k) {
    if (cfg.dirichlet_a[k].size() != static_cast<std::size_t>(data.levels[k])) {
      throw InputError("dpmpm: dirichlet_a entry " + std::to_string(k) + " has the wrong number of levels");
    }
  }
}

void draw_phi(DpmpmState& s, const Table& data, const DpmpmConfig& cfg, Rng& rng,
              const std::vector<std::vector<double>>* counts) {
  const std::size_t F = cfg.F;
  s.phi.resize(data.p);
  std::vector<double> a;
  for (std::size_t k = 0; k < data.p; ++k) {
    const auto d = static_cast<std::size_t>(data.levels[k]);
    s.phi[k].assign(F * d, 0.0);
    a.resize(d);
    for (std::size_t f = 0; f < F; ++f) {
      for (std::size_t c = 0; c < d; ++c) {
        a[c] = hyper(cfg, k, static_cast<std::int32_t>(c)) + (counts ? (*counts)[k][f * d + c] : 0.0);
      }
      dirichlet_draw(rng, a, std::span<double>(s.phi[k]).subspan(f * d, d));
    }
  }
}

void draw_pi_from_v(DpmpmState& s, const DpmpmConfig& cfg, Rng& rng) {
  const std::size_t F = cfg.F;
  s.V.assign(F, 1.0);
  std::size_t above = 0;
  for (std::size_t f = F; f-- > 0;) {
    if (f + 1 < F) s.V[f] = beta_draw(rng, 1.0 + static_cast<double>(s.class_counts[f]), s.alpha + static_cast<double>(above));
    above += s.class_counts[f];
  }
  s.pi = stick_breaking_weights(s.V);
}

}  // namespace

DpmpmState initial_state(const Table& data, const DpmpmConfig& cfg, Rng& rng) {
  cfg.validate();
  check_hyper_shape(data, cfg);
  DpmpmState s;
  s.alpha = 1.0;
  s.class_counts.assign(cfg.F, 0);
  draw_pi_from_v(s, cfg, rng);
  draw_phi(s, data, cfg, rng, nullptr);
  return s;
}

void gibbs_sweep(DpmpmState& s, const Table& data, const DpmpmConfig& cfg, Rng& rng) {
  const std::size_t F = cfg.F;
  const std::size_t n = data.n;

  // (i) classes, in log space.
  std::vector<std::vector<double>> log_phi(data.p);
  for (std::size_t k = 0; k < data.p; ++k) {
    log_phi[k].resize(s.phi[k].size());
    std::transform(s.phi[k].begin(), s.phi[k].end(), log_phi[k].begin(), [](double v) { return std::log(v); });
  }
  std::vector<double> log_pi(F);
  std::transform(s.pi.begin(), s.pi.end(), log_pi.begin(), [](double v) { return std::log(v); });
  std::vector<double> lp(F), w(F);
  s.eta.resize(n);
  s.class_counts.assign(F, 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(log_pi.begin(), log_pi.end(), lp.begin());
    for (std::size_t k = 0; k < data.p; ++k) {
      const auto d = static_cast<std::size_t>(data.levels[k]);
      const auto y = static_cast<std::size_t>(data.at(i, k));
      const double* col = log_phi[k].data() + y;
      for (std::size_t f = 0; f < F; ++f) lp[f] += col[f * d];
    }
    const double mx = *std::max_element(lp.begin(), lp.end());
    double total = 0.0;
    for (std::size_t f = 0; f < F; ++f) {
      total += std::exp(lp[f] - mx);
      w[f] = total;
    }
    const double u = uniform01(rng) * total;
    auto f = static_cast<std::size_t>(std::upper_bound(w.begin(), w.end(), u) - w.begin());
    if (f >= F) {
      // u rounded up to the total: take the last class with positive weight.
      f = F - 1;
      while (f > 0 && w[f] == w[f - 1]) --f;
    }
    s.eta[i] = static_cast<std::int32_t>(f);
    ++s.class_counts[f];
  }

  // (ii) + (iii)
  draw_pi_from_v(s, cfg, rng);

  // (iv)
  std::vector<std::vector<double>> counts(data.p);
  for (std::size_t k = 0; k < data.p; ++k) counts[k].assign(F * static_cast<std::size_t>(data.levels[k]), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto f = static_cast<std::size_t>(s.eta[i]);
    for (std::size_t k = 0; k < data.p; ++k) {
      counts[k][f * static_cast<std::size_t>(data.levels[k]) + static_cast<std::size_t>(data.at(i, k))] += 1.0;
    }
  }
  draw_phi(s, data, cfg, rng, &counts);

  // (v)
  double log_rest = 0.0;
  for (std::size_t f = 0; f + 1 < F; ++f) log_rest += std::log1p(-std::min(s.V[f], 1.0 - 1e-12));
  const double shape = cfg.a_alpha + static_cast<double>(F) - 1.0;
  const double rate = cfg.b_alpha - log_rest;
  s.alpha = gamma_draw(rng, shape, 1.0 / rate);
  if (!(s.alpha > 0.0)) s.alpha = std::numeric_limits<double>::min();
}

void ChainTrace::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(17);
  out << "iteration,alpha,occupied_classes\n";
  for (std::size_t s = 0; s < size(); ++s) {
    out << iterations[s] << ',' << alpha_draws[s] << ',' << occupied_classes[s] << '\n';
  }
  if (!out) throw Error("I/O failure writing " + path.string());
}

std::size_t saved_draw_count(const DpmpmConfig& cfg) { return (cfg.iterations - cfg.burn_in) / cfg.thin; }

std::vector<std::size_t> select_snapshots(std::size_t S, std::size_t m) {
  if (S == 0) throw InputError("select_snapshots: no saved draws");
  if (m == 0) throw InputError("select_snapshots: m must be positive");
  if (m == 1) return {S - 1};
  std::vector<std::size_t> out(m);
  for (std::size_t j = 0; j < m; ++j) out[j] = std::min(S - 1, j * S / (m - 1));
  return out;
}

ChainResult run_chain(const Table& data, const DpmpmConfig& cfg, Rng& rng, std::span<const std::size_t> retain,
                      const std::optional<std::vector<std::size_t>>& keep) {
  std::vector<std::size_t> vars(retain.begin(), retain.end());
  if (vars.empty()) {
    for (std::size_t k = 0; k < data.p; ++k) vars.push_back(k);
  }
  for (std::size_t k : vars) {
    if (k >= data.p) throw InputError("run_chain: retained variable out of range");
  }
  DpmpmState s = initial_state(data, cfg, rng);
  ChainResult out;
  std::size_t saved = 0;
  for (std::size_t t = 1; t <= cfg.iterations; ++t) {
    gibbs_sweep(s, data, cfg, rng);
    if (t <= cfg.burn_in || (t - cfg.burn_in) % cfg.thin != 0) continue;
    out.trace.iterations.push_back(t);
    out.trace.alpha_draws.push_back(s.alpha);
    out.trace.occupied_classes.push_back(s.occupied());
    const bool store = !keep || std::find(keep->begin(), keep->end(), saved) != keep->end();
    if (store) {
      Snapshot snap;
      snap.pi = s.pi;
      snap.alpha = s.alpha;
      for (std::size_t k : vars) snap.phi.push_back(s.phi[k]);
      out.snapshot_positions.push_back(saved);
      out.snapshots.push_back(std::move(snap));
    }
    ++saved;
  }
  return out;
}

namespace {

std::size_t draw_index(std::span<const double> cumulative, Rng& rng) {
  const double u = uniform01(rng) * cumulative.back();
  auto idx = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
  return std::min(idx, cumulative.size() - 1);
}

}  // namespace

std::vector<std::vector<std::vector<std::int32_t>>> synthesize(const Table& data, std::span<const std::size_t> targets,
                                                              std::span<const Snapshot> snapshots,
                                                              std::uint64_t seed) {
  std::vector<std::vector<std::vector<std::int32_t>>> out(snapshots.size());
  for (std::size_t j = 0; j < snapshots.size(); ++j) {
    const Snapshot& snap = snapshots[j];
    if (snap.phi.size() != targets.size()) throw Error("dpmpm synthesize: snapshot does not match targets");
    const std::size_t F = snap.pi.size();
    Rng rng = make_rng(derive_seed(seed, {j}));
    std::vector<double> cum_pi(F);
    std::partial_sum(snap.pi.begin(), snap.pi.end(), cum_pi.begin());
    // Per-class cumulative category probabilities of each target.
    std::vector<std::vector<double>> cum_phi(targets.size());
    for (std::size_t t = 0; t < targets.size(); ++t) {
      const auto d = static_cast<std::size_t>(data.levels.at(targets[t]));
      cum_phi[t] = snap.phi[t];
      for (std::size_t f = 0; f < F; ++f) {
        auto row = std::span<double>(cum_phi[t]).subspan(f * d, d);
        std::partial_sum(row.begin(), row.end(), row.begin());
      }
    }
    out[j].assign(targets.size(), std::vector<std::int32_t>(data.n));
    for (std::size_t i = 0; i < data.n; ++i) {
      const std::size_t f = draw_index(cum_pi, rng);
      for (std::size_t t = 0; t < targets.size(); ++t) {
        const auto d = static_cast<std::size_t>(data.levels[targets[t]]);
        out[j][t][i] = static_cast<std::int32_t>(draw_index(std::span<const double>(cum_phi[t]).subspan(f * d, d), rng));
      }
    }
  }
  return out;
}

SyntheticRelease synthesize_dpmpm(const Dataset& ds, std::span<const std::string> targets, const DpmpmConfig& cfg,
                                  std::size_t m, std::uint64_t seed, DpmpmRun* run) {
  cfg.validate();
  if (targets.empty()) throw InputError("dpmpm: no synthesis targets");
  if (m == 0) throw InputError("dpmpm: m must be positive");
  const Schema& schema = ds.schema();
  const auto geo = schema.geocode_index();
  std::optional<GeocodeEncoding> enc;
  if (geo) enc = concat_geocode_as_categorical(ds);
  const Dataset& work = enc ? enc->dataset : ds;
  const Table data = make_table(work);

  std::vector<std::size_t> target_idx;
  for (const auto& name : targets) {
    const std::size_t k = schema.index_of(name);
    if (std::find(target_idx.begin(), target_idx.end(), k) != target_idx.end()) {
      throw InputError("dpmpm: duplicate target '" + name + "'");
    }
    target_idx.push_back(k);
  }

  DpmpmConfig used = cfg;
  const std::uint64_t chain_seed = derive_seed(seed, {0x636861696eULL});
  if (saved_draw_count(used) == 0) throw InputError("dpmpm: no draws are saved after burn-in");
  auto chain = [&](std::uint64_t s) {
    Rng rng = make_rng(s);
    return run_chain(data, used, rng, target_idx, select_snapshots(saved_draw_count(used), m));
  };
  ChainResult result = chain(chain_seed);
  bool escalated = false;
  if (cfg.acf_threshold >= 0.0 && result.trace.size() > 2 && cfg.escalated_thin > cfg.thin) {
    double acf1 = 0.0;
    try {
      acf1 = autocorrelation(result.trace.alpha_draws, 1)[1];
    } catch (const InputError&) {
      acf1 = 0.0;
    }
    DpmpmConfig longer = cfg;
    longer.thin = cfg.escalated_thin;
    if (std::abs(acf1) > cfg.acf_threshold && saved_draw_count(longer) > 0) {
      used = longer;
      escalated = true;
      result = chain(derive_seed(chain_seed, {1}));
    }
  }

  // Snapshots are stored in position order; map each replicate to its one.
  const auto wanted = select_snapshots(saved_draw_count(used), m);
  std::vector<Snapshot> snaps;
  for (std::size_t pos : wanted) {
    const auto it = std::find(result.snapshot_positions.begin(), result.snapshot_positions.end(), pos);
    snaps.push_back(result.snapshots[static_cast<std::size_t>(it - result.snapshot_positions.begin())]);
  }
  const auto drawn = synthesize(data, target_idx, snaps, derive_seed(seed, {0x73796e7468ULL}));

  SyntheticRelease release;
  release.synthesized_variables.assign(targets.begin(), targets.end());
  for (const auto& rep : drawn) {
    Dataset out = work;
    for (std::size_t t = 0; t < target_idx.size(); ++t) {
      std::vector<std::int32_t> codes(rep[t].size());
      std::transform(rep[t].begin(), rep[t].end(), codes.begin(), [](std::int32_t c) { return c + 1; });
      out = out.with_column(target_idx[t], std::move(codes));
    }
    if (enc) out = decode_geocode(out, *geo, enc->codebook);
    release.replicates.push_back(std::move(out));
  }
  if (run) {
    run->trace = std::move(result.trace);
    run->thin_used = used.thin;
    run->escalated = escalated;
    run->snapshot_positions = wanted;
  }
  return release;
}

}  // namespace geosynth::dpmpm
