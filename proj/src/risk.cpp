#include "geosynth/risk.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "geosynth/csv.hpp"
#include "geosynth/error.hpp"

namespace geosynth::risk {

void IntruderScenario::validate(const Schema& schema) const {
  if (grid_size && !(*grid_size >= 0.0 && std::isfinite(*grid_size))) {
    throw InputError("scenario '" + label + "': grid_size must be a non-negative number");
  }
  for (const auto& q : quasi_identifiers) {
    const std::size_t k = schema.index_of(q);
    if (schema.variable(k).is_geocode()) {
      throw InputError("scenario '" + label + "': the geocode is controlled by grid_size, not listed as '" + q + "'");
    }
  }
}

std::string IntruderScenario::grid_label() const {
  if (!grid_size) return "none";
  if (*grid_size == 0.0) return "exact";
  std::ostringstream s;
  s << *grid_size;
  return s.str();
}

std::vector<Target> sample_targets(const ClusterPartition& part, std::size_t per_cluster, Rng& rng) {
  std::vector<Target> out;
  const auto members = part.members();
  for (std::size_t c = 0; c < members.size(); ++c) {
    std::vector<std::size_t> pool = members[c];
    if (per_cluster > pool.size()) {
      throw InputError("sample_targets: " + std::to_string(per_cluster) + " targets requested but cluster " +
                       std::to_string(c) + " holds " + std::to_string(pool.size()) + " records");
    }
    // Partial Fisher-Yates.
    for (std::size_t j = 0; j < per_cluster; ++j) {
      const std::size_t rest = pool.size() - j;
      std::size_t pick = j + static_cast<std::size_t>(uniform01(rng) * static_cast<double>(rest));
      pick = std::min(pick, pool.size() - 1);
      std::swap(pool[j], pool[pick]);
    }
    std::sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(per_cluster));
    for (std::size_t j = 0; j < per_cluster; ++j) out.push_back({pool[j], static_cast<std::uint32_t>(c)});
  }
  return out;
}

GridCell coarsen_geocode(const GeoPoint& p, double g) {
  if (!(g > 0.0)) throw InputError("coarsen_geocode: grid size must be positive");
  return {static_cast<std::int64_t>(std::floor(p.x / g)), static_cast<std::int64_t>(std::floor(p.y / g))};
}

Rational TargetMatch::probability(std::uint64_t mask) const {
  Rational p = 0;
  for (std::size_t l = 0; l < candidate_counts.size(); ++l) {
    if (mask >> l & 1u) p += Rational(1, static_cast<long long>(candidate_counts[l]));
  }
  return p / static_cast<long long>(candidate_counts.size());
}

double TargetMatch::probability_value(std::uint64_t mask) const {
  double p = 0.0;
  for (std::size_t l = 0; l < candidate_counts.size(); ++l) {
    if (mask >> l & 1u) p += 1.0 / static_cast<double>(candidate_counts[l]);
  }
  return p / static_cast<double>(candidate_counts.size());
}

namespace {

template <class T>
void append_bytes(std::string& key, const T& v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  key.append(buf, sizeof(T));
}

}  // namespace

MatchIndex::MatchIndex(const SyntheticRelease& release, const IntruderScenario& scenario,
                       std::span<const std::uint32_t> clusters)
    : scenario_(scenario), clusters_(clusters.begin(), clusters.end()) {
  if (release.replicates.empty()) throw InputError("risk: release has no replicates");
  if (release.m() > 64) throw InputError("risk: at most 64 replicates are supported");
  const Schema& schema = release.replicates.front().schema();
  scenario.validate(schema);
  for (const auto& q : scenario.quasi_identifiers) qi_.push_back(schema.index_of(q));
  use_geo_ = scenario.grid_size.has_value();
  if (use_geo_ && !schema.geocode_index()) throw InputError("risk: scenario uses the geocode but the schema has none");
  const std::size_t n = release.replicates.front().rows();
  if (scenario.block_on_cluster && clusters_.size() != n) {
    throw InputError("risk: cluster blocking needs a cluster id for every record");
  }
  tables_.resize(release.m());
  for (std::size_t l = 0; l < release.m(); ++l) {
    const Dataset& rep = release.replicates[l];
    if (rep.rows() != n) throw InputError("risk: replicates differ in size");
    auto& table = tables_[l];
    for (std::size_t i = 0; i < n; ++i) {
      table[key_of(rep, i, scenario.block_on_cluster ? clusters_[i] : 0)].push_back(static_cast<std::uint32_t>(i));
    }
  }
}

std::string MatchIndex::key_of(const Dataset& ds, std::size_t row, std::uint32_t cluster) const {
  std::string key;
  key.reserve(qi_.size() * 4 + 20);
  for (std::size_t k : qi_) append_bytes(key, ds.code(row, k));
  if (use_geo_) {
    const GeoPoint& p = ds.geocodes()[row];
    if (*scenario_.grid_size > 0.0) {
      const GridCell c = coarsen_geocode(p, *scenario_.grid_size);
      append_bytes(key, c.x);
      append_bytes(key, c.y);
    } else {
      // +0.0 folds -0.0 into 0.0 so that equal values share a key.
      append_bytes(key, p.x + 0.0);
      append_bytes(key, p.y + 0.0);
    }
  }
  if (scenario_.block_on_cluster) append_bytes(key, cluster);
  return key;
}

TargetMatch MatchIndex::match(const Dataset& original, const Target& target) const {
  TargetMatch out;
  out.candidate_counts.assign(tables_.size(), 0);
  const std::string key = key_of(original, target.record, target.cluster);
  std::vector<std::pair<std::size_t, std::uint64_t>> hits;
  for (std::size_t l = 0; l < tables_.size(); ++l) {
    const auto it = tables_[l].find(key);
    if (it == tables_[l].end()) continue;
    out.candidate_counts[l] = it->second.size();
    for (auto r : it->second) hits.emplace_back(r, std::uint64_t{1} << l);
  }
  std::sort(hits.begin(), hits.end());
  for (const auto& [r, bit] : hits) {
    if (!out.members.empty() && out.members.back().first == r) {
      out.members.back().second |= bit;
    } else {
      out.members.emplace_back(r, bit);
    }
  }
  return out;
}

std::map<std::size_t, double> match_probabilities(const Dataset& original, const Target& target,
                                                  const SyntheticRelease& release, const IntruderScenario& scenario,
                                                  std::span<const std::uint32_t> clusters) {
  const MatchIndex index(release, scenario, clusters);
  const TargetMatch tm = index.match(original, target);
  std::map<std::size_t, double> out;
  for (const auto& [r, mask] : tm.members) out[r] = tm.probability_value(mask);
  return out;
}

std::map<std::size_t, Rational> exact_match_probabilities(const Dataset& original, const Target& target,
                                                          const SyntheticRelease& release,
                                                          const IntruderScenario& scenario,
                                                          std::span<const std::uint32_t> clusters) {
  const MatchIndex index(release, scenario, clusters);
  const TargetMatch tm = index.match(original, target);
  std::map<std::size_t, Rational> out;
  for (const auto& [r, mask] : tm.members) out[r] = tm.probability(mask);
  return out;
}

TargetOutcome evaluate_target(const TargetMatch& match, const Target& target) {
  TargetOutcome o;
  o.record = target.record;
  o.cluster = target.cluster;
  if (match.members.empty()) return o;
  // Records sharing a membership mask share a probability.
  std::map<std::uint64_t, std::size_t> by_mask;
  std::uint64_t true_mask = 0;
  for (const auto& [r, mask] : match.members) {
    ++by_mask[mask];
    if (r == target.record) true_mask = mask;
  }
  Rational best = -1;
  std::vector<std::uint64_t> best_masks;
  for (const auto& [mask, count] : by_mask) {
    const Rational p = match.probability(mask);
    if (p > best) {
      best = p;
      best_masks.assign(1, mask);
    } else if (p == best) {
      best_masks.push_back(mask);
    }
  }
  for (auto mask : best_masks) {
    o.c += by_mask[mask];
    if (mask == true_mask) o.I = true;
  }
  o.max_probability = match.probability_value(best_masks.front());
  return o;
}

RiskReport risk_summaries(std::vector<TargetOutcome> outcomes) {
  RiskReport r;
  r.N = outcomes.size();
  std::size_t true_matches = 0, false_matches = 0;
  for (const auto& o : outcomes) {
    if (o.c == 0) continue;
    if (o.I) r.expected_match_risk += 1.0 / static_cast<double>(o.c);
    if (o.c == 1) {
      ++r.s;
      (o.I ? true_matches : false_matches) += 1;
    }
  }
  r.true_match_rate = r.N == 0 ? 0.0 : 100.0 * static_cast<double>(true_matches) / static_cast<double>(r.N);
  if (r.s > 0) r.false_match_rate = 100.0 * static_cast<double>(false_matches) / static_cast<double>(r.s);
  r.per_target = std::move(outcomes);
  return r;
}

RiskReport evaluate_risk(const Dataset& original, const SyntheticRelease& release, const IntruderScenario& scenario,
                         std::span<const Target> targets, std::span<const std::uint32_t> clusters,
                         std::size_t threads) {
  for (const auto& rep : release.replicates) {
    if (rep.rows() != original.rows() || !(rep.schema() == original.schema())) {
      throw InputError("risk: release replicates must match the original's records and schema");
    }
  }
  const MatchIndex index(release, scenario, clusters);
  std::vector<TargetOutcome> outcomes(targets.size());
  auto work = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t t = lo; t < hi; ++t) outcomes[t] = evaluate_target(index.match(original, targets[t]), targets[t]);
  };
  threads = std::max<std::size_t>(1, std::min(threads, targets.size()));
  if (threads == 1) {
    work(0, targets.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (targets.size() + threads - 1) / threads;
    for (std::size_t w = 0; w < threads; ++w) {
      const std::size_t lo = w * chunk, hi = std::min(targets.size(), lo + chunk);
      if (lo < hi) pool.emplace_back(work, lo, hi);
    }
    for (auto& t : pool) t.join();
  }
  RiskReport r = risk_summaries(std::move(outcomes));
  r.label = scenario.label;
  r.grid = scenario.grid_label();
  return r;
}

std::vector<RiskReport> risk_grid_sweep(const Dataset& original, const SyntheticRelease& release,
                                        std::span<const IntruderScenario> scenarios, std::span<const Target> targets,
                                        std::span<const std::uint32_t> clusters, std::size_t threads) {
  std::vector<RiskReport> out;
  for (const auto& sc : scenarios) out.push_back(evaluate_risk(original, release, sc, targets, clusters, threads));
  return out;
}

nlohmann::json to_json(const RiskReport& r, bool with_targets) {
  nlohmann::json j;
  j["scenario"] = r.label;
  j["grid"] = r.grid;
  j["N"] = r.N;
  j["s"] = r.s;
  j["expected_match_risk"] = r.expected_match_risk;
  j["true_match_rate"] = r.true_match_rate;
  j["false_match_rate"] = r.false_match_rate ? nlohmann::json(*r.false_match_rate) : nlohmann::json(nullptr);
  if (with_targets) {
    auto& arr = j["targets"] = nlohmann::json::array();
    for (const auto& o : r.per_target) {
      arr.push_back({{"record", o.record}, {"cluster", o.cluster}, {"c", o.c}, {"I", o.I},
                     {"declared_match", o.c == 1}, {"max_probability", o.max_probability}});
    }
  }
  return j;
}

void write_risk_table_csv(std::span<const RiskReport> reports, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  auto num = [](double v) {
    std::ostringstream s;
    s.precision(10);
    s << v;
    return s.str();
  };
  const std::vector<std::string> header{"scenario", "grid", "N", "s", "expected_match_risk", "true_match_rate",
                                        "false_match_rate"};
  write_csv_row(out, header);
  for (const auto& r : reports) {
    const std::vector<std::string> row{r.label,
                                       r.grid,
                                       std::to_string(r.N),
                                       std::to_string(r.s),
                                       num(r.expected_match_risk),
                                       num(r.true_match_rate),
                                       r.false_match_rate ? num(*r.false_match_rate) : std::string("NA")};
    write_csv_row(out, row);
  }
  if (!out) throw Error("I/O failure writing " + path.string());
}

}  // namespace geosynth::risk
