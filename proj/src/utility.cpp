#include "geosynth/utility.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "geosynth/error.hpp"

namespace geosynth::utility {

namespace {

// mean of xs taken as offsets from ref, so m copies of ref average to ref exactly
template <typename Range>
double mean_around(double ref, const Range& xs, std::size_t m) {
  if (!std::isfinite(ref)) {
    double sum = 0.0;
    for (double x : xs) sum += x;
    return sum / static_cast<double>(m);
  }
  double dev = 0.0;
  for (double x : xs) dev += x - ref;
  return ref + dev / static_cast<double>(m);
}

}  // namespace

RegionAssigner::RegionAssigner(std::span<const GeoPoint> original, std::span<const std::int32_t> region_of_original)
    : index_(original), regions_(region_of_original.begin(), region_of_original.end()) {
  if (original.empty()) throw InputError("assign_regions: original data is empty");
  if (original.size() != region_of_original.size()) {
    throw InputError("assign_regions: one region id per original record is required");
  }
}

std::vector<std::int32_t> assign_regions(const Dataset& syn, const Dataset& orig,
                                         std::span<const std::int32_t> region_of_orig) {
  const RegionAssigner assigner(orig.geocodes(), region_of_orig);
  std::vector<std::int32_t> out;
  out.reserve(syn.rows());
  for (const auto& p : syn.geocodes()) out.push_back(assigner.region_of(p));
  return out;
}

std::map<std::int32_t, double> region_shares(const Dataset& ds, std::span<const std::int32_t> regions,
                                             const RecordPredicate& pred) {
  if (regions.size() != ds.rows()) throw InputError("region_shares: one region id per record is required");
  std::map<std::int32_t, std::pair<std::size_t, std::size_t>> tally;
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    auto& [hit, total] = tally[regions[i]];
    ++total;
    if (pred(ds, i)) ++hit;
  }
  std::map<std::int32_t, double> out;
  for (const auto& [r, t] : tally) out[r] = static_cast<double>(t.first) / static_cast<double>(t.second);
  return out;
}

bool InteractionTables::same_layout(const InteractionTables& o) const {
  return level == o.level && regions == o.regions && subsets == o.subsets && cells == o.cells;
}

namespace {

void combinations(std::size_t n, std::size_t k, std::vector<std::size_t>& cur, std::size_t from,
                  std::vector<std::vector<std::size_t>>& out) {
  if (cur.size() == k) {
    out.push_back(cur);
    return;
  }
  for (std::size_t i = from; i < n; ++i) {
    cur.push_back(i);
    combinations(n, k, cur, i + 1, out);
    cur.pop_back();
  }
}

}  // namespace

InteractionTables interaction_tables(const Dataset& ds, std::span<const std::int32_t> regions, std::size_t level,
                                     std::span<const std::size_t> variables,
                                     std::optional<std::vector<std::int32_t>> region_list) {
  if (regions.size() != ds.rows()) throw InputError("interaction_tables: one region id per record is required");
  if (level == 0 || level > variables.size()) {
    throw InputError("interaction_tables: level " + std::to_string(level) + " needs at least that many variables");
  }
  const Schema& schema = ds.schema();
  for (std::size_t k : variables) {
    if (k >= schema.size() || schema.variable(k).is_geocode()) {
      throw InputError("interaction_tables: table variables must be categorical");
    }
  }
  InteractionTables t;
  t.level = level;
  if (region_list) {
    t.regions = std::move(*region_list);
    std::sort(t.regions.begin(), t.regions.end());
    t.regions.erase(std::unique(t.regions.begin(), t.regions.end()), t.regions.end());
  } else {
    std::set<std::int32_t> present(regions.begin(), regions.end());
    t.regions.assign(present.begin(), present.end());
  }
  std::vector<std::size_t> cur;
  std::vector<std::vector<std::size_t>> idx;
  combinations(variables.size(), level, cur, 0, idx);
  for (const auto& c : idx) {
    std::vector<std::size_t> sub;
    std::size_t cells = 1;
    for (std::size_t j : c) {
      sub.push_back(variables[j]);
      cells *= static_cast<std::size_t>(schema.variable(variables[j]).cardinality());
    }
    t.subsets.push_back(std::move(sub));
    t.cells.push_back(cells);
  }
  t.region_counts.assign(t.regions.size(), 0);
  t.freq.resize(t.regions.size());
  for (auto& per_region : t.freq) {
    per_region.resize(t.subsets.size());
    for (std::size_t s = 0; s < t.subsets.size(); ++s) per_region[s].assign(t.cells[s], 0.0);
  }
  std::vector<std::ptrdiff_t> pos_of(ds.rows(), -1);
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    const auto it = std::lower_bound(t.regions.begin(), t.regions.end(), regions[i]);
    if (it != t.regions.end() && *it == regions[i]) {
      pos_of[i] = it - t.regions.begin();
      ++t.region_counts[static_cast<std::size_t>(pos_of[i])];
    }
  }
  for (std::size_t s = 0; s < t.subsets.size(); ++s) {
    const auto& sub = t.subsets[s];
    for (std::size_t i = 0; i < ds.rows(); ++i) {
      if (pos_of[i] < 0) continue;
      std::size_t cell = 0;
      for (std::size_t k : sub) {
        cell = cell * static_cast<std::size_t>(schema.variable(k).cardinality()) +
               static_cast<std::size_t>(ds.code(i, k) - 1);
      }
      t.freq[static_cast<std::size_t>(pos_of[i])][s][cell] += 1.0;
    }
  }
  for (std::size_t r = 0; r < t.regions.size(); ++r) {
    if (t.region_counts[r] == 0) continue;
    const double n = static_cast<double>(t.region_counts[r]);
    for (auto& table : t.freq[r]) {
      for (double& v : table) v /= n;
    }
  }
  return t;
}

ULResult ul_measure(const InteractionTables& orig, std::span<const InteractionTables> syn, bool weighted) {
  if (syn.empty()) throw InputError("ul_measure: no synthetic tables");
  for (const auto& s : syn) {
    if (!orig.same_layout(s)) throw InputError("ul_measure: synthetic and original tables differ in layout");
  }
  ULResult out;
  const double m = static_cast<double>(syn.size());
  double num = 0.0, den = 0.0;
  for (std::size_t r = 0; r < orig.regions.size(); ++r) {
    const double w = weighted ? static_cast<double>(orig.region_counts[r]) : 1.0;
    for (std::size_t s = 0; s < orig.subsets.size(); ++s) {
      for (std::size_t c = 0; c < orig.cells[s]; ++c) {
        double dev = 0.0;
        for (const auto& t : syn) dev += t.freq[r][s][c] - orig.freq[r][s][c];
        const double d = dev / m;
        out.differences.push_back(d);
        num += w * std::abs(d);
        den += w;
      }
    }
  }
  out.ul = den > 0.0 ? num / den : 0.0;
  return out;
}

namespace {

struct TypeCounts {
  std::size_t n = 0;
  std::size_t n_i = 0;
};

TypeCounts check_k_inputs(std::span<const GeoPoint> points, std::span<const std::int32_t> types,
                          std::int32_t type_i, double domain_area) {
  if (points.size() != types.size()) throw InputError("multitype_k: one type per point is required");
  if (!(domain_area > 0.0)) throw InputError("multitype_k: domain area must be positive");
  TypeCounts c;
  c.n = points.size();
  c.n_i = static_cast<std::size_t>(std::count(types.begin(), types.end(), type_i));
  if (c.n_i == 0) throw InputError("multitype_k: no points of type " + std::to_string(type_i));
  return c;
}

void check_radii(std::span<const double> radii) {
  for (std::size_t j = 0; j < radii.size(); ++j) {
    if (!(radii[j] >= 0.0)) throw InputError("k_curve: radii must be non-negative");
    if (j > 0 && radii[j] < radii[j - 1]) throw InputError("k_curve: radii must be ascending");
  }
}

}  // namespace

double multitype_k(std::span<const GeoPoint> points, std::span<const std::int32_t> types, std::int32_t type_i,
                   double r, double domain_area) {
  const double radii[] = {r};
  return k_curve_bruteforce(points, types, type_i, radii, domain_area)[0];
}

std::vector<double> k_curve_bruteforce(std::span<const GeoPoint> points, std::span<const std::int32_t> types,
                                       std::int32_t type_i, std::span<const double> radii, double domain_area) {
  const TypeCounts tc = check_k_inputs(points, types, type_i, domain_area);
  for (double r : radii) {
    if (!(r >= 0.0)) throw InputError("multitype_k: radius must be non-negative");
  }
  std::vector<std::size_t> pairs(radii.size(), 0);
  for (std::size_t a = 0; a < points.size(); ++a) {
    if (types[a] != type_i) continue;
    for (std::size_t b = 0; b < points.size(); ++b) {
      if (b == a) continue;
      const double d2 = squared_distance(points[a], points[b]);
      for (std::size_t j = 0; j < radii.size(); ++j) {
        if (d2 <= radii[j] * radii[j]) ++pairs[j];
      }
    }
  }
  const double scale = domain_area / (static_cast<double>(tc.n) * static_cast<double>(tc.n_i));
  std::vector<double> out(radii.size());
  for (std::size_t j = 0; j < radii.size(); ++j) out[j] = scale * static_cast<double>(pairs[j]);
  return out;
}

std::vector<double> k_curve(std::span<const GeoPoint> points, std::span<const std::int32_t> types,
                            std::int32_t type_i, std::span<const double> radii, double domain_area) {
  const TypeCounts tc = check_k_inputs(points, types, type_i, domain_area);
  check_radii(radii);
  if (radii.empty()) return {};
  std::vector<double> r2(radii.size());
  for (std::size_t j = 0; j < radii.size(); ++j) r2[j] = radii[j] * radii[j];
  const double rmax = radii.back();
  const GridIndex index(points, rmax > 0.0 ? rmax : 0.0);
  // hist[j]: pairs whose squared distance first fits radius j.
  std::vector<std::size_t> hist(radii.size() + 1, 0);
  for (std::size_t a = 0; a < points.size(); ++a) {
    if (types[a] != type_i) continue;
    index.for_each_within(points[a], rmax, [&](std::size_t b, double d2) {
      if (b == a) return;
      ++hist[static_cast<std::size_t>(std::lower_bound(r2.begin(), r2.end(), d2) - r2.begin())];
    });
  }
  const double scale = domain_area / (static_cast<double>(tc.n) * static_cast<double>(tc.n_i));
  std::vector<double> out(radii.size());
  std::size_t cum = 0;
  for (std::size_t j = 0; j < radii.size(); ++j) {
    cum += hist[j];
    out[j] = scale * static_cast<double>(cum);
  }
  return out;
}

namespace {

struct Box {
  double xmin, xmax, ymin, ymax;
};

Box bounding_box(std::span<const GeoPoint> points) {
  if (points.empty()) throw InputError("bounding box of an empty point set");
  Box b{points[0].x, points[0].x, points[0].y, points[0].y};
  for (const auto& p : points) {
    b.xmin = std::min(b.xmin, p.x);
    b.xmax = std::max(b.xmax, p.x);
    b.ymin = std::min(b.ymin, p.y);
    b.ymax = std::max(b.ymax, p.y);
  }
  return b;
}

}  // namespace

std::vector<double> default_radii(std::span<const GeoPoint> points, std::size_t count) {
  const Box b = bounding_box(points);
  const double top = std::min(b.xmax - b.xmin, b.ymax - b.ymin) / 4.0;
  std::vector<double> out(count, 0.0);
  if (count < 2) return out;
  for (std::size_t j = 0; j < count; ++j) out[j] = top * static_cast<double>(j) / static_cast<double>(count - 1);
  return out;
}

double bounding_box_area(std::span<const GeoPoint> points) {
  const Box b = bounding_box(points);
  return (b.xmax - b.xmin) * (b.ymax - b.ymin);
}

namespace {

std::vector<double> l_curve_of(const Dataset& ds, const RecordPredicate& is_type, std::span<const double> radii,
                               double area) {
  std::vector<std::int32_t> types(ds.rows());
  for (std::size_t i = 0; i < ds.rows(); ++i) types[i] = is_type(ds, i) ? 1 : 0;
  const auto k = k_curve(ds.geocodes(), types, 1, radii, area);
  std::vector<double> l(k.size());
  for (std::size_t j = 0; j < k.size(); ++j) l[j] = l_function(k[j], radii[j]);
  return l;
}

}  // namespace

LCurves l_curves(const SyntheticRelease& release, const Dataset& orig, const RecordPredicate& is_type,
                 std::span<const double> radii, double domain_area) {
  if (release.replicates.empty()) throw InputError("l_curves: release has no replicates");
  LCurves out;
  out.radii.assign(radii.begin(), radii.end());
  out.original = l_curve_of(orig, is_type, radii, domain_area);
  for (const auto& rep : release.replicates) out.per_replicate.push_back(l_curve_of(rep, is_type, radii, domain_area));
  out.synthetic_mean.resize(radii.size());
  std::vector<double> column(release.m());
  for (std::size_t j = 0; j < radii.size(); ++j) {
    for (std::size_t l = 0; l < release.m(); ++l) column[l] = out.per_replicate[l][j];
    out.synthetic_mean[j] = mean_around(out.original[j], column, release.m());
  }
  return out;
}

RecordPredicate Outcome::predicate(const Schema& schema) const {
  const std::size_t k = schema.index_of(variable);
  const Variable& v = schema.variable(k);
  if (v.is_geocode()) throw InputError("outcome '" + name + "': variable must be categorical");
  std::vector<bool> hit(static_cast<std::size_t>(v.cardinality()) + 1, false);
  for (const auto& label : levels) {
    const auto it = std::find(v.levels.begin(), v.levels.end(), label);
    if (it == v.levels.end()) {
      throw InputError("outcome '" + name + "': '" + label + "' is not a level of " + variable);
    }
    hit[static_cast<std::size_t>(it - v.levels.begin()) + 1] = true;
  }
  return [k, hit](const Dataset& ds, std::size_t i) { return hit[static_cast<std::size_t>(ds.code(i, k))]; };
}

UtilityReport evaluate_utility(const Dataset& orig, const SyntheticRelease& release, const UtilitySettings& settings) {
  if (release.replicates.empty()) throw InputError("evaluate_utility: release has no replicates");
  const Schema& schema = orig.schema();
  std::vector<std::int32_t> orig_regions(orig.rows(), 0);
  std::optional<std::size_t> region_var;
  if (!settings.region_variable.empty()) {
    region_var = schema.index_of(settings.region_variable);
    if (schema.variable(*region_var).is_geocode()) throw InputError("utility: region variable must be categorical");
    const auto col = orig.column(*region_var);
    orig_regions.assign(col.begin(), col.end());
  }
  const bool has_geo = schema.geocode_index().has_value();
  std::vector<std::vector<std::int32_t>> syn_regions;
  if (region_var && has_geo) {
    const RegionAssigner assigner(orig.geocodes(), orig_regions);
    for (const auto& rep : release.replicates) {
      std::vector<std::int32_t> r;
      r.reserve(rep.rows());
      for (const auto& p : rep.geocodes()) r.push_back(assigner.region_of(p));
      syn_regions.push_back(std::move(r));
    }
  } else {
    for (const auto& rep : release.replicates) syn_regions.emplace_back(rep.rows(), 0);
  }

  std::vector<std::size_t> vars;
  if (!settings.table_variables.empty()) {
    for (const auto& name : settings.table_variables) vars.push_back(schema.index_of(name));
  } else {
    for (std::size_t k : schema.categorical_indices()) {
      if (!region_var || k != *region_var) vars.push_back(k);
    }
  }

  UtilityReport report;
  std::set<std::int32_t> region_set(orig_regions.begin(), orig_regions.end());
  const std::vector<std::int32_t> region_list(region_set.begin(), region_set.end());
  for (std::size_t level : settings.levels) {
    const auto ot = interaction_tables(orig, orig_regions, level, vars, region_list);
    std::vector<InteractionTables> st;
    for (std::size_t l = 0; l < release.m(); ++l) {
      st.push_back(interaction_tables(release.replicates[l], syn_regions[l], level, vars, region_list));
    }
    report.ul_by_level[level] = ul_measure(ot, st, settings.weighted);
  }

  for (const auto& outcome : settings.share_outcomes) {
    const auto pred = outcome.predicate(schema);
    ShareTable table;
    table.name = outcome.name;
    table.original = region_shares(orig, orig_regions, pred);
    std::map<std::int32_t, std::vector<double>> acc;
    for (std::size_t l = 0; l < release.m(); ++l) {
      for (const auto& [r, v] : region_shares(release.replicates[l], syn_regions[l], pred)) acc[r].push_back(v);
    }
    for (const auto& [r, vs] : acc) {
      const auto it = table.original.find(r);
      table.synthetic[r] = mean_around(it == table.original.end() ? vs.front() : it->second, vs, vs.size());
    }
    report.shares.push_back(std::move(table));
  }

  if (!settings.l_outcomes.empty()) {
    if (!has_geo) throw InputError("utility: L-functions need a geocode");
    report.domain_area = settings.domain_area ? *settings.domain_area : bounding_box_area(orig.geocodes());
    const auto radii = settings.radii ? *settings.radii : default_radii(orig.geocodes(), settings.r_count);
    for (const auto& outcome : settings.l_outcomes) {
      report.l_curves.emplace_back(outcome.name,
                                   l_curves(release, orig, outcome.predicate(schema), radii, report.domain_area));
    }
  }
  return report;
}

nlohmann::json to_json(const UtilityReport& r) {
  nlohmann::json j;
  auto& ul = j["ul_by_level"] = nlohmann::json::object();
  for (const auto& [level, res] : r.ul_by_level) {
    ul[std::to_string(level)] = {{"ul", res.ul}, {"cells", res.differences.size()}};
  }
  auto& shares = j["shares"] = nlohmann::json::array();
  for (const auto& t : r.shares) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& [region, v] : t.original) {
      const auto it = t.synthetic.find(region);
      rows.push_back({{"region", region},
                      {"original", v},
                      {"synthetic", it == t.synthetic.end() ? nlohmann::json(nullptr) : nlohmann::json(it->second)}});
    }
    shares.push_back({{"name", t.name}, {"regions", rows}});
  }
  auto& curves = j["l_curves"] = nlohmann::json::array();
  for (const auto& [name, c] : r.l_curves) {
    curves.push_back({{"name", name}, {"radii", c.radii}, {"original", c.original}, {"synthetic_mean", c.synthetic_mean}});
  }
  j["domain_area"] = r.domain_area;
  return j;
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(17);
  return out;
}

}  // namespace

void write_utility_csvs(const UtilityReport& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    auto out = open_csv(dir / "ul_summary.csv");
    out << "level,ul,cells\n";
    for (const auto& [level, res] : r.ul_by_level) out << level << ',' << res.ul << ',' << res.differences.size() << '\n';
  }
  for (const auto& [level, res] : r.ul_by_level) {
    auto out = open_csv(dir / ("ul_differences_level" + std::to_string(level) + ".csv"));
    out << "difference\n";
    for (double d : res.differences) out << d << '\n';
  }
  for (const auto& t : r.shares) {
    auto out = open_csv(dir / ("shares_" + t.name + ".csv"));
    out << "region,original,synthetic\n";
    for (const auto& [region, v] : t.original) {
      out << region << ',' << v << ',';
      if (const auto it = t.synthetic.find(region); it != t.synthetic.end()) out << it->second;
      out << '\n';
    }
  }
  for (const auto& [name, c] : r.l_curves) {
    auto out = open_csv(dir / ("l_curve_" + name + ".csv"));
    out << "r,original,synthetic_mean";
    for (std::size_t l = 0; l < c.per_replicate.size(); ++l) out << ",replicate_" << (l + 1);
    out << '\n';
    for (std::size_t j = 0; j < c.radii.size(); ++j) {
      out << c.radii[j] << ',' << c.original[j] << ',' << c.synthetic_mean[j];
      for (const auto& rep : c.per_replicate) out << ',' << rep[j];
      out << '\n';
    }
  }
}

}  // namespace geosynth::utility
