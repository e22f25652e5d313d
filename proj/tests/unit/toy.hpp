#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "geosynth/data_model.hpp"
#include "geosynth/rng.hpp"

namespace toy {

using geosynth::Dataset;
using geosynth::GeoPoint;
using geosynth::Schema;
using geosynth::Variable;
using geosynth::VariableKind;

inline std::vector<std::string> labels(const std::string& p, int d) {
  std::vector<std::string> out;
  for (int c = 1; c <= d; ++c) out.push_back(p + std::to_string(c));
  return out;
}

// categorical columns a, b, ... with given cardinalities plus "geo"
inline Schema schema(const std::vector<int>& cards, std::vector<std::string> targets = {"geo"},
                     std::vector<std::string> qis = {}) {
  std::vector<Variable> vars;
  for (std::size_t k = 0; k < cards.size(); ++k) {
    const std::string name(1, static_cast<char>('a' + k));
    vars.push_back({name, VariableKind::categorical, labels(name, cards[k])});
  }
  vars.push_back({"geo", VariableKind::geocode, {}});
  if (qis.empty()) {
    for (std::size_t k = 0; k < cards.size(); ++k) qis.emplace_back(1, static_cast<char>('a' + k));
  }
  return Schema(std::move(vars), std::move(targets), std::move(qis));
}

inline Dataset make(const Schema& s, std::vector<std::vector<std::int32_t>> cat, std::vector<GeoPoint> geo) {
  std::vector<std::vector<std::int32_t>> codes(cat);
  codes.emplace_back();
  const std::size_t n = geo.size();
  return Dataset(s, n, std::move(codes), std::move(geo));
}

// random categorical table; geocodes on an integer lattice
inline Dataset random(std::uint64_t seed, std::size_t n, const std::vector<int>& cards, int lattice = 20,
                      int sites = 0) {
  geosynth::Rng rng = geosynth::make_rng(seed);
  const Schema s = schema(cards);
  std::vector<std::vector<std::int32_t>> cat(cards.size());
  for (std::size_t k = 0; k < cards.size(); ++k) {
    for (std::size_t i = 0; i < n; ++i) cat[k].push_back(1 + static_cast<std::int32_t>(rng() % cards[k]));
  }
  std::vector<GeoPoint> pool;
  if (sites > 0) {
    for (int j = 0; j < sites; ++j) {
      pool.push_back({static_cast<double>(rng() % lattice), static_cast<double>(rng() % lattice)});
    }
  }
  std::vector<GeoPoint> geo;
  for (std::size_t i = 0; i < n; ++i) {
    if (sites > 0) {
      geo.push_back(pool[rng() % pool.size()]);
    } else {
      geo.push_back({static_cast<double>(rng() % lattice), static_cast<double>(rng() % lattice)});
    }
  }
  return make(s, std::move(cat), std::move(geo));
}

}  // namespace toy
