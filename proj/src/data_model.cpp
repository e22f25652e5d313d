#include "geosynth/data_model.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "geosynth/csv.hpp"
#include "geosynth/error.hpp"

namespace geosynth {

bool same_bits(const GeoPoint& a, const GeoPoint& b) {
  return std::bit_cast<std::uint64_t>(a.x) == std::bit_cast<std::uint64_t>(b.x) &&
         std::bit_cast<std::uint64_t>(a.y) == std::bit_cast<std::uint64_t>(b.y);
}

bool operator==(const Variable& a, const Variable& b) {
  return a.name == b.name && a.kind == b.kind && a.levels == b.levels;
}

// ---------------------------------------------------------------- Schema

Schema::Schema(std::vector<Variable> variables, std::vector<std::string> synthesis_targets,
               std::vector<std::string> quasi_identifiers)
    : variables_(std::move(variables)),
      synthesis_targets_(std::move(synthesis_targets)),
      quasi_identifiers_(std::move(quasi_identifiers)) {}

Schema Schema::from_json(const nlohmann::json& j) {
  try {
    std::vector<Variable> vars;
    for (const auto& v : j.at("variables")) {
      Variable var;
      var.name = v.at("name").get<std::string>();
      const auto kind = v.value("kind", std::string("categorical"));
      if (kind == "categorical") {
        var.kind = VariableKind::categorical;
        var.levels = v.at("levels").get<std::vector<std::string>>();
      } else if (kind == "geocode") {
        var.kind = VariableKind::geocode;
      } else {
        throw InputError("schema: variable '" + var.name + "' has unknown kind '" + kind + "'");
      }
      vars.push_back(std::move(var));
    }
    Schema s(std::move(vars), j.value("synthesis_targets", std::vector<std::string>{}),
             j.value("quasi_identifiers", std::vector<std::string>{}));
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("schema: ") + e.what());
  }
}

Schema Schema::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open schema file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("schema file " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

nlohmann::json Schema::to_json() const {
  nlohmann::json vars = nlohmann::json::array();
  for (const auto& v : variables_) {
    nlohmann::json jv = {{"name", v.name}, {"kind", v.is_geocode() ? "geocode" : "categorical"}};
    if (!v.is_geocode()) jv["levels"] = v.levels;
    vars.push_back(std::move(jv));
  }
  return {{"variables", vars},
          {"synthesis_targets", synthesis_targets_},
          {"quasi_identifiers", quasi_identifiers_}};
}

void Schema::validate() const {
  std::set<std::string> names;
  std::size_t geocodes = 0;
  for (const auto& v : variables_) {
    if (v.name.empty()) throw InputError("schema: empty variable name");
    if (!names.insert(v.name).second) throw InputError("schema: duplicate variable '" + v.name + "'");
    if (v.is_geocode()) {
      ++geocodes;
      if (v.name == kGeoXColumn || v.name == kGeoYColumn) {
        throw InputError("schema: geocode variable may not be named geo_x/geo_y");
      }
      continue;
    }
    if (v.cardinality() < 2) {
      throw InputError("schema: variable '" + v.name + "' needs at least 2 levels");
    }
    std::set<std::string> levels(v.levels.begin(), v.levels.end());
    if (levels.size() != v.levels.size()) {
      throw InputError("schema: variable '" + v.name + "' has duplicate levels");
    }
  }
  if (geocodes != 1) throw InputError("schema: exactly one geocode variable is required");
  for (const auto& t : synthesis_targets_) {
    if (!names.count(t)) throw InputError("schema: synthesis target '" + t + "' is not declared");
  }
  for (const auto& q : quasi_identifiers_) {
    if (!names.count(q)) throw InputError("schema: quasi-identifier '" + q + "' is not declared");
  }
}

std::optional<std::size_t> Schema::find(std::string_view name) const {
  for (std::size_t k = 0; k < variables_.size(); ++k) {
    if (variables_[k].name == name) return k;
  }
  return std::nullopt;
}

std::size_t Schema::index_of(std::string_view name) const {
  if (auto k = find(name)) return *k;
  throw InputError("unknown variable '" + std::string(name) + "'");
}

std::optional<std::size_t> Schema::geocode_index() const {
  for (std::size_t k = 0; k < variables_.size(); ++k) {
    if (variables_[k].is_geocode()) return k;
  }
  return std::nullopt;
}

std::vector<std::size_t> Schema::categorical_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < variables_.size(); ++k) {
    if (!variables_[k].is_geocode()) out.push_back(k);
  }
  return out;
}

Schema Schema::with_variable(std::size_t k, Variable v) const {
  Schema s = *this;
  s.variables_.at(k) = std::move(v);
  return s;
}

Schema Schema::with_synthesis_targets(std::vector<std::string> targets) const {
  Schema s = *this;
  s.synthesis_targets_ = std::move(targets);
  return s;
}

bool operator==(const Schema& a, const Schema& b) {
  return a.variables_ == b.variables_ && a.synthesis_targets_ == b.synthesis_targets_ &&
         a.quasi_identifiers_ == b.quasi_identifiers_;
}

// ---------------------------------------------------------------- Dataset

Dataset::Dataset(Schema schema, std::size_t rows, std::vector<std::vector<std::int32_t>> codes,
                 std::vector<GeoPoint> geocodes)
    : schema_(std::move(schema)), rows_(rows), codes_(std::move(codes)), geocodes_(std::move(geocodes)) {
  if (codes_.size() != schema_.size()) throw InputError("dataset: column count differs from schema");
  for (std::size_t k = 0; k < schema_.size(); ++k) {
    const auto& var = schema_.variable(k);
    if (var.is_geocode()) {
      if (!codes_[k].empty()) throw InputError("dataset: geocode slot must not hold codes");
      if (geocodes_.size() != rows_) throw InputError("dataset: geocode column length differs from n");
      for (const auto& p : geocodes_) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw InputError("dataset: non-finite geocode");
      }
      continue;
    }
    if (codes_[k].size() != rows_) {
      throw InputError("dataset: column '" + var.name + "' length differs from n");
    }
    const std::int32_t d = var.cardinality();
    for (std::size_t i = 0; i < rows_; ++i) {
      const std::int32_t c = codes_[k][i];
      if (c < 1 || c > d) {
        throw InputError("dataset: row " + std::to_string(i) + ", variable '" + var.name +
                         "': code " + std::to_string(c) + " outside 1.." + std::to_string(d));
      }
    }
  }
  if (!schema_.geocode_index() && !geocodes_.empty()) {
    throw InputError("dataset: geocodes given but schema has no geocode variable");
  }
}

Dataset Dataset::with_column(std::size_t k, std::vector<std::int32_t> codes) const {
  auto all = codes_;
  all.at(k) = std::move(codes);
  return Dataset(schema_, rows_, std::move(all), geocodes_);
}

Dataset Dataset::with_geocodes(std::vector<GeoPoint> geocodes) const {
  return Dataset(schema_, rows_, codes_, std::move(geocodes));
}

Dataset Dataset::with_variable(std::size_t k, Variable v, std::vector<std::int32_t> codes,
                               std::vector<GeoPoint> geocodes) const {
  auto all = codes_;
  all.at(k) = std::move(codes);
  auto geo = geocodes_;
  if (v.is_geocode()) {
    geo = std::move(geocodes);
  } else if (schema_.variable(k).is_geocode()) {
    geo.clear();
  }
  return Dataset(schema_.with_variable(k, std::move(v)), rows_, std::move(all), std::move(geo));
}

Dataset Dataset::select_rows(std::span<const std::size_t> rows) const {
  std::vector<std::vector<std::int32_t>> codes(codes_.size());
  for (std::size_t k = 0; k < codes_.size(); ++k) {
    if (codes_[k].empty()) continue;
    codes[k].reserve(rows.size());
    for (std::size_t r : rows) codes[k].push_back(codes_[k].at(r));
  }
  std::vector<GeoPoint> geo;
  if (!geocodes_.empty()) {
    geo.reserve(rows.size());
    for (std::size_t r : rows) geo.push_back(geocodes_.at(r));
  }
  return Dataset(schema_, rows.size(), std::move(codes), std::move(geo));
}

bool operator==(const Dataset& a, const Dataset& b) {
  if (!(a.schema_ == b.schema_) || a.rows_ != b.rows_ || a.codes_ != b.codes_) return false;
  if (a.geocodes_.size() != b.geocodes_.size()) return false;
  for (std::size_t i = 0; i < a.geocodes_.size(); ++i) {
    if (!same_bits(a.geocodes_[i], b.geocodes_[i])) return false;
  }
  return true;
}

void check_release(const Dataset& original, const SyntheticRelease& release) {
  std::set<std::string> synthesized(release.synthesized_variables.begin(),
                                    release.synthesized_variables.end());
  const auto& schema = original.schema();
  for (std::size_t r = 0; r < release.m(); ++r) {
    const Dataset& rep = release.replicates[r];
    const std::string tag = "release replicate " + std::to_string(r + 1);
    if (rep.rows() != original.rows()) throw Error(tag + ": record count differs from original");
    if (!(rep.schema() == schema)) throw Error(tag + ": schema differs from original");
    for (std::size_t k = 0; k < schema.size(); ++k) {
      const auto& var = schema.variable(k);
      if (synthesized.count(var.name)) continue;
      bool same = true;
      if (var.is_geocode()) {
        for (std::size_t i = 0; i < rep.rows() && same; ++i) {
          same = same_bits(rep.geocodes()[i], original.geocodes()[i]);
        }
      } else {
        same = std::ranges::equal(rep.column(k), original.column(k));
      }
      if (!same) throw Error(tag + ": unsynthesized variable '" + var.name + "' was altered");
    }
  }
}

// ---------------------------------------------------------------- CSV

namespace {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const Schema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  CsvReader reader(in);
  const std::string where = path.string();

  std::vector<std::string> header;
  if (!reader.next(header)) throw InputError(where + ": missing header row");

  // Column position of each expected field.
  std::map<std::string, std::size_t> position;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (!position.emplace(header[c], c).second) {
      throw InputError(where + ": duplicate header column '" + header[c] + "'");
    }
  }
  std::vector<std::string> expected;
  for (const auto& v : schema.variables()) {
    if (v.is_geocode()) {
      expected.emplace_back(kGeoXColumn);
      expected.emplace_back(kGeoYColumn);
    } else {
      expected.push_back(v.name);
    }
  }
  if (expected.size() != header.size()) {
    throw InputError(where + ": header has " + std::to_string(header.size()) +
                     " columns, schema expects " + std::to_string(expected.size()));
  }
  for (const auto& e : expected) {
    if (!position.count(e)) throw InputError(where + ": header lacks column '" + e + "'");
  }

  std::vector<std::unordered_map<std::string, std::int32_t>> dictionaries(schema.size());
  for (std::size_t k = 0; k < schema.size(); ++k) {
    const auto& levels = schema.variable(k).levels;
    for (std::size_t c = 0; c < levels.size(); ++c) {
      dictionaries[k].emplace(levels[c], static_cast<std::int32_t>(c + 1));
    }
  }

  std::vector<std::vector<std::int32_t>> codes(schema.size());
  std::vector<GeoPoint> geo;
  std::size_t rows = 0;
  std::vector<std::string> fields;
  while (reader.next(fields)) {
    const std::size_t line = reader.line();
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    const std::string at = where + ": line " + std::to_string(line);
    if (fields.size() != header.size()) {
      throw InputError(at + ": expected " + std::to_string(header.size()) + " fields, found " +
                       std::to_string(fields.size()));
    }
    for (std::size_t k = 0; k < schema.size(); ++k) {
      const auto& var = schema.variable(k);
      if (var.is_geocode()) {
        const auto& sx = fields[position.at(std::string(kGeoXColumn))];
        const auto& sy = fields[position.at(std::string(kGeoYColumn))];
        auto x = parse_double(sx);
        auto y = parse_double(sy);
        if (!x) throw InputError(at + ", column geo_x: non-numeric geocode '" + sx + "'");
        if (!y) throw InputError(at + ", column geo_y: non-numeric geocode '" + sy + "'");
        geo.push_back({*x, *y});
        continue;
      }
      const auto& label = fields[position.at(var.name)];
      auto it = dictionaries[k].find(label);
      if (it == dictionaries[k].end()) {
        throw InputError(at + ", column " + var.name + ": unknown category label '" + label + "'");
      }
      codes[k].push_back(it->second);
    }
    ++rows;
  }
  return Dataset(schema, rows, std::move(codes), std::move(geo));
}

void save_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  const auto& schema = ds.schema();
  std::vector<std::string> row;
  for (const auto& v : schema.variables()) {
    if (v.is_geocode()) {
      row.emplace_back(kGeoXColumn);
      row.emplace_back(kGeoYColumn);
    } else {
      row.push_back(v.name);
    }
  }
  write_csv_row(out, row);
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    row.clear();
    for (std::size_t k = 0; k < schema.size(); ++k) {
      const auto& v = schema.variable(k);
      if (v.is_geocode()) {
        row.push_back(format_double(ds.geocodes()[i].x));
        row.push_back(format_double(ds.geocodes()[i].y));
      } else {
        row.push_back(v.levels[ds.code(i, k) - 1]);
      }
    }
    write_csv_row(out, row);
  }
  out.flush();
  if (!out) throw Error("I/O failure writing " + path.string());
}

// ---------------------------------------------------------------- geocode encoding

std::int32_t GeoCodebook::encode(const GeoPoint& p) const {
  auto less = [](const GeoPoint& a, const GeoPoint& b) {
    if (a.x != b.x) return a.x < b.x;
    if (a.y != b.y) return a.y < b.y;
    return std::pair(std::bit_cast<std::uint64_t>(a.x), std::bit_cast<std::uint64_t>(a.y)) <
           std::pair(std::bit_cast<std::uint64_t>(b.x), std::bit_cast<std::uint64_t>(b.y));
  };
  auto it = std::lower_bound(points.begin(), points.end(), p, less);
  if (it == points.end() || !same_bits(*it, p)) throw Error("geocode not present in codebook");
  return static_cast<std::int32_t>(it - points.begin()) + 1;
}

GeocodeEncoding concat_geocode_as_categorical(const Dataset& ds) {
  const auto gk = ds.schema().geocode_index();
  if (!gk) throw InputError("dataset has no geocode variable to encode");
  const auto geo = ds.geocodes();

  struct Key {
    double x, y;
    std::uint64_t bx, by;
  };
  std::vector<Key> keys;
  keys.reserve(geo.size());
  for (const auto& p : geo) {
    keys.push_back({p.x, p.y, std::bit_cast<std::uint64_t>(p.x), std::bit_cast<std::uint64_t>(p.y)});
  }
  auto less = [](const Key& a, const Key& b) {
    if (a.x != b.x) return a.x < b.x;
    if (a.y != b.y) return a.y < b.y;
    return std::pair(a.bx, a.by) < std::pair(b.bx, b.by);
  };
  std::sort(keys.begin(), keys.end(), less);
  keys.erase(std::unique(keys.begin(), keys.end(),
                         [](const Key& a, const Key& b) { return a.bx == b.bx && a.by == b.by; }),
             keys.end());

  GeoCodebook book;
  book.points.reserve(keys.size());
  for (const auto& k : keys) book.points.push_back({k.x, k.y});

  Variable var;
  var.name = ds.schema().variable(*gk).name;
  var.kind = VariableKind::categorical;
  var.levels.reserve(keys.size());
  for (const auto& p : book.points) var.levels.push_back(format_double(p.x) + "|" + format_double(p.y));

  std::vector<std::int32_t> codes;
  codes.reserve(geo.size());
  for (const auto& p : geo) codes.push_back(book.encode(p));
  return {ds.with_variable(*gk, std::move(var), std::move(codes)), std::move(book)};
}

Dataset decode_geocode(const Dataset& encoded, std::size_t k, const GeoCodebook& codebook) {
  const auto codes = encoded.column(k);
  std::vector<GeoPoint> geo;
  geo.reserve(codes.size());
  for (std::int32_t c : codes) geo.push_back(codebook.decode(c));
  Variable var{encoded.schema().variable(k).name, VariableKind::geocode, {}};
  return encoded.with_variable(k, std::move(var), {}, std::move(geo));
}

}  // namespace geosynth
