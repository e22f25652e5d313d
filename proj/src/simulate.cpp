#include "geosynth/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "geosynth/error.hpp"
#include "geosynth/rng.hpp"

namespace geosynth {

namespace {

constexpr std::int32_t kAge = 6, kIndustry = 6, kOccupation = 8, kWage = 3;

std::vector<std::string> labels(const char* prefix, std::int32_t n) {
  std::vector<std::string> out;
  for (std::int32_t i = 1; i <= n; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%s%02d", prefix, i);
    out.emplace_back(buf);
  }
  return out;
}

std::int32_t draw_code(std::span<const double> w, Rng& rng) {
  double total = 0.0;
  for (double v : w) total += v;
  double u = uniform01(rng) * total;
  for (std::size_t c = 0; c < w.size(); ++c) {
    if (u < w[c]) return static_cast<std::int32_t>(c) + 1;
    u -= w[c];
  }
  return static_cast<std::int32_t>(w.size());
}

double normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

}  // namespace

Schema population_schema(std::size_t zip_levels) {
  std::vector<Variable> vars{
      {"zip", VariableKind::categorical, labels("Z", static_cast<std::int32_t>(zip_levels))},
      {"sex", VariableKind::categorical, {"male", "female"}},
      {"age", VariableKind::categorical, {"18-24", "25-34", "35-44", "45-54", "55-64", "65+"}},
      {"foreign", VariableKind::categorical, {"no", "yes"}},
      {"industry", VariableKind::categorical, labels("I", kIndustry)},
      {"occupation", VariableKind::categorical, labels("O", kOccupation)},
      {"wage", VariableKind::categorical, {"low", "mid", "high"}},
      {"geo", VariableKind::geocode, {}},
  };
  return Schema(std::move(vars), {"geo"}, {"sex", "age", "foreign", "industry", "occupation"});
}

Dataset simulate_population(const PopulationConfig& cfg) {
  if (cfg.records == 0 || cfg.towns == 0 || cfg.zip_grid == 0 || !(cfg.extent > 0.0) ||
      !(cfg.records_per_site >= 1.0)) {
    throw InputError("simulate_population: invalid configuration");
  }
  Rng rng = make_rng(derive_seed(cfg.seed, {0x706f70ULL}));
  const std::size_t zips = cfg.zip_grid * cfg.zip_grid;
  const Schema schema = population_schema(zips);

  struct Town {
    GeoPoint centre;
    double spread;
    double foreign;
    std::vector<double> industry;
  };
  std::vector<Town> towns(cfg.towns);
  for (auto& t : towns) {
    t.centre = {cfg.extent * (0.1 + 0.8 * uniform01(rng)), cfg.extent * (0.1 + 0.8 * uniform01(rng))};
    t.spread = cfg.extent * (0.02 + 0.05 * uniform01(rng));
    t.foreign = 0.02 + 0.25 * uniform01(rng) * uniform01(rng);
    t.industry.resize(kIndustry);
    for (auto& w : t.industry) w = gamma_draw(rng, 0.6, 1.0) + 1e-3;
  }
  std::vector<std::vector<double>> occupation_given_industry(kIndustry, std::vector<double>(kOccupation));
  for (auto& row : occupation_given_industry) {
    for (auto& w : row) w = gamma_draw(rng, 0.5, 1.0) + 1e-3;
  }

  const auto sites = std::max<std::size_t>(1, static_cast<std::size_t>(static_cast<double>(cfg.records) / cfg.records_per_site));
  std::vector<GeoPoint> site_point(sites);
  std::vector<std::size_t> site_town(sites);
  for (std::size_t s = 0; s < sites; ++s) {
    const std::size_t t = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(cfg.towns));
    site_town[s] = std::min(t, cfg.towns - 1);
    const Town& town = towns[site_town[s]];
    const double x = std::clamp(town.centre.x + town.spread * normal(rng), 0.0, cfg.extent - 1.0);
    const double y = std::clamp(town.centre.y + town.spread * normal(rng), 0.0, cfg.extent - 1.0);
    site_point[s] = {std::round(x), std::round(y)};
  }

  const std::size_t n = cfg.records;
  std::vector<std::vector<std::int32_t>> codes(schema.size());
  for (std::size_t k = 0; k + 1 < schema.size(); ++k) codes[k].resize(n);
  std::vector<GeoPoint> geo(n);
  const double zip_side = cfg.extent / static_cast<double>(cfg.zip_grid);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t s = std::min(sites - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(sites)));
    const Town& town = towns[site_town[s]];
    geo[i] = site_point[s];
    const auto zx = std::min(cfg.zip_grid - 1, static_cast<std::size_t>(geo[i].x / zip_side));
    const auto zy = std::min(cfg.zip_grid - 1, static_cast<std::size_t>(geo[i].y / zip_side));
    codes[0][i] = static_cast<std::int32_t>(zy * cfg.zip_grid + zx) + 1;
    const std::int32_t sex = uniform01(rng) < 0.52 ? 1 : 2;
    const double age_w[kAge] = {0.10, 0.22, 0.23, 0.24, 0.17, 0.04};
    const std::int32_t age = draw_code(age_w, rng);
    const std::int32_t foreign = uniform01(rng) < town.foreign ? 2 : 1;
    const std::int32_t industry = draw_code(town.industry, rng);
    const std::int32_t occupation = draw_code(occupation_given_industry[industry - 1], rng);
    // Wage rises with age and occupation code; women earn less on average.
    const double score = 0.35 * (age - 1) + 0.25 * (occupation - 1) - (sex == 2 ? 0.6 : 0.0) +
                         (foreign == 2 ? -0.4 : 0.0) + normal(rng);
    const std::int32_t wage = score < 1.0 ? 1 : (score < 2.4 ? 2 : 3);
    codes[1][i] = sex;
    codes[2][i] = age;
    codes[3][i] = foreign;
    codes[4][i] = industry;
    codes[5][i] = occupation;
    codes[6][i] = wage;
  }
  return Dataset(schema, n, std::move(codes), std::move(geo));
}

}  // namespace geosynth
