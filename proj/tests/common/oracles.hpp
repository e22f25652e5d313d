#pragma once

// From-scratch reference computations used by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <vector>

#include "geosynth/cart.hpp"
#include "geosynth/data_model.hpp"
#include "geosynth/risk.hpp"

namespace oracle {

using geosynth::cart::CategoricalColumn;
using geosynth::cart::ContinuousColumn;
using geosynth::cart::Frame;

// n * impurity of the target restricted to rows
inline double child_risk(const Frame& f, std::size_t target, const std::vector<std::size_t>& rows) {
  if (rows.empty()) return 0.0;
  const double n = static_cast<double>(rows.size());
  if (const auto* c = std::get_if<CategoricalColumn>(&f.column(target))) {
    std::map<std::int32_t, double> cnt;
    for (auto r : rows) cnt[c->codes[r]] += 1.0;
    double s = 0.0;
    for (const auto& [k, v] : cnt) s += (v / n) * (v / n);
    return n * (1.0 - s);
  }
  const auto& v = std::get<ContinuousColumn>(f.column(target)).values;
  double mean = 0.0;
  for (auto r : rows) mean += v[r];
  mean /= n;
  double ss = 0.0;
  for (auto r : rows) ss += (v[r] - mean) * (v[r] - mean);
  return ss;
}

struct BestSplit {
  double risk = std::numeric_limits<double>::infinity();  // left + right
  bool found = false;
};

// every binary partition of every predictor, children >= minbucket
inline BestSplit best_root_split(const Frame& f, std::size_t target, const std::vector<std::size_t>& predictors,
                                 std::size_t minbucket) {
  BestSplit best;
  const std::size_t n = f.rows();
  auto consider = [&](const std::vector<bool>& left) {
    std::vector<std::size_t> L, R;
    for (std::size_t i = 0; i < n; ++i) (left[i] ? L : R).push_back(i);
    if (L.size() < minbucket || R.size() < minbucket) return;
    const double r = child_risk(f, target, L) + child_risk(f, target, R);
    if (r < best.risk) best.risk = r;
    best.found = true;
  };
  for (auto p : predictors) {
    if (const auto* c = std::get_if<CategoricalColumn>(&f.column(p))) {
      std::vector<std::int32_t> present;
      for (auto code : c->codes) present.push_back(code);
      std::sort(present.begin(), present.end());
      present.erase(std::unique(present.begin(), present.end()), present.end());
      const std::size_t q = present.size();
      for (std::uint64_t mask = 1; mask + 1 < (std::uint64_t{1} << q); ++mask) {
        std::vector<bool> left(n);
        for (std::size_t i = 0; i < n; ++i) {
          const auto pos = std::lower_bound(present.begin(), present.end(), c->codes[i]) - present.begin();
          left[i] = (mask >> pos) & 1U;
        }
        consider(left);
      }
    } else {
      const auto& v = std::get<ContinuousColumn>(f.column(p)).values;
      std::vector<double> u(v);
      std::sort(u.begin(), u.end());
      u.erase(std::unique(u.begin(), u.end()), u.end());
      for (std::size_t t = 0; t + 1 < u.size(); ++t) {
        std::vector<bool> left(n);
        for (std::size_t i = 0; i < n; ++i) left[i] = v[i] <= u[t];
        consider(left);
      }
    }
  }
  return best;
}

inline bool routes_left(const geosynth::cart::Split& s, const Frame& f, std::size_t row) {
  if (s.categorical) {
    const auto c = std::get<CategoricalColumn>(f.column(s.predictor)).codes[row];
    if (c < 1 || static_cast<std::size_t>(c) >= s.left_levels.size()) return s.unseen_left;
    return s.left_levels[c] != 0;
  }
  return std::get<ContinuousColumn>(f.column(s.predictor)).values[row] <= s.threshold;
}

// Pr(J = i) by direct comparison of every record in every replicate
inline std::map<std::size_t, geosynth::risk::Rational> match_probabilities(
    const geosynth::Dataset& original, std::size_t target, const geosynth::SyntheticRelease& release,
    const geosynth::risk::IntruderScenario& scenario, const std::vector<std::uint32_t>& clusters = {}) {
  using geosynth::risk::Rational;
  const auto& schema = original.schema();
  std::vector<std::size_t> qi;
  for (const auto& q : scenario.quasi_identifiers) qi.push_back(schema.index_of(q));
  const auto t_geo = original.geocodes().empty() ? geosynth::GeoPoint{} : original.geocodes()[target];
  auto cell = [&](double v) { return std::floor(v / *scenario.grid_size); };
  std::map<std::size_t, Rational> p;
  const Rational m(static_cast<long long>(release.m()));
  for (const auto& rep : release.replicates) {
    std::vector<std::size_t> cand;
    for (std::size_t i = 0; i < rep.rows(); ++i) {
      bool ok = true;
      for (auto k : qi) ok = ok && rep.code(i, k) == original.code(target, k);
      if (ok && scenario.grid_size) {
        const auto g = rep.geocodes()[i];
        if (*scenario.grid_size == 0.0) {
          ok = g.x == t_geo.x && g.y == t_geo.y;
        } else {
          ok = cell(g.x) == cell(t_geo.x) && cell(g.y) == cell(t_geo.y);
        }
      }
      if (ok && scenario.block_on_cluster) ok = clusters[i] == clusters[target];
      if (ok) cand.push_back(i);
    }
    for (auto i : cand) p[i] += Rational(1) / (m * Rational(static_cast<long long>(cand.size())));
  }
  return p;
}

}  // namespace oracle
