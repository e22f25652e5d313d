#pragma once

// Typed microdata: categorical attributes plus one point geocode per record.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace geosynth {

enum class VariableKind { categorical, geocode };

struct Variable {
  std::string name;
  VariableKind kind = VariableKind::categorical;
  /// Level labels; code c (1-based) denotes levels[c - 1]. Empty for geocodes.
  std::vector<std::string> levels;

  std::int32_t cardinality() const { return static_cast<std::int32_t>(levels.size()); }
  bool is_geocode() const { return kind == VariableKind::geocode; }
};

/// Meters east (x) and north (y) of a fixed reference point.
struct GeoPoint {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

/// Exact bit identity, so that -0.0 and 0.0 are distinct points.
bool same_bits(const GeoPoint& a, const GeoPoint& b);

/// Names of the two CSV columns that carry the geocode.
inline constexpr std::string_view kGeoXColumn = "geo_x";
inline constexpr std::string_view kGeoYColumn = "geo_y";

class Schema {
 public:
  Schema() = default;
  explicit Schema(std::vector<Variable> variables,
                  std::vector<std::string> synthesis_targets = {},
                  std::vector<std::string> quasi_identifiers = {});

  static Schema from_json(const nlohmann::json& j);
  static Schema load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  /// Checks the invariants required of user-supplied schemas: exactly one
  /// geocode variable, every categorical d_k >= 2, unique names, and target /
  /// quasi-identifier lists naming declared variables. Throws InputError.
  void validate() const;

  const std::vector<Variable>& variables() const { return variables_; }
  const Variable& variable(std::size_t k) const { return variables_.at(k); }
  std::size_t size() const { return variables_.size(); }

  std::optional<std::size_t> find(std::string_view name) const;
  /// Throws InputError when `name` is not declared.
  std::size_t index_of(std::string_view name) const;
  std::optional<std::size_t> geocode_index() const;
  /// Indices of the categorical variables, in declaration order.
  std::vector<std::size_t> categorical_indices() const;

  const std::vector<std::string>& synthesis_targets() const { return synthesis_targets_; }
  const std::vector<std::string>& quasi_identifiers() const { return quasi_identifiers_; }

  Schema with_variable(std::size_t k, Variable v) const;
  Schema with_synthesis_targets(std::vector<std::string> targets) const;

  friend bool operator==(const Schema&, const Schema&);

 private:
  std::vector<Variable> variables_;
  std::vector<std::string> synthesis_targets_;
  std::vector<std::string> quasi_identifiers_;
};

bool operator==(const Variable& a, const Variable& b);

/// Column-major table of n records. Categorical cells hold 1-based codes;
/// the geocode column (if the schema declares one) holds GeoPoints.
/// Immutable once built: the `with_*` members return modified copies.
class Dataset {
 public:
  Dataset() = default;
  /// `codes` has one entry per schema variable; the geocode slot is empty.
  /// Throws InputError if any code lies outside 1..d_k or a size disagrees.
  Dataset(Schema schema, std::size_t rows, std::vector<std::vector<std::int32_t>> codes,
          std::vector<GeoPoint> geocodes);

  const Schema& schema() const { return schema_; }
  std::size_t rows() const { return rows_; }

  std::span<const std::int32_t> column(std::size_t k) const { return codes_.at(k); }
  std::span<const std::int32_t> column(std::string_view name) const {
    return column(schema_.index_of(name));
  }
  std::int32_t code(std::size_t row, std::size_t k) const { return codes_[k][row]; }
  std::span<const GeoPoint> geocodes() const { return geocodes_; }

  Dataset with_column(std::size_t k, std::vector<std::int32_t> codes) const;
  Dataset with_geocodes(std::vector<GeoPoint> geocodes) const;
  /// Replaces variable k (schema entry and data) in one step. `geocodes` is
  /// used only when `v` is a geocode variable.
  Dataset with_variable(std::size_t k, Variable v, std::vector<std::int32_t> codes,
                        std::vector<GeoPoint> geocodes = {}) const;
  Dataset select_rows(std::span<const std::size_t> rows) const;

  friend bool operator==(const Dataset&, const Dataset&);

 private:
  Schema schema_;
  std::size_t rows_ = 0;
  std::vector<std::vector<std::int32_t>> codes_;
  std::vector<GeoPoint> geocodes_;
};

/// m partially synthetic copies of one original dataset.
struct SyntheticRelease {
  std::vector<Dataset> replicates;
  std::vector<std::string> synthesized_variables;

  std::size_t m() const { return replicates.size(); }
};

/// Verifies the release invariants against its original: same n and schema
/// in every replicate, and every unsynthesized column identical. Throws Error.
void check_release(const Dataset& original, const SyntheticRelease& release);

Dataset load_csv(const std::filesystem::path& path, const Schema& schema);
void save_csv(const Dataset& ds, const std::filesystem::path& path);

/// Level c (1-based) of an encoded geocode variable decodes to points[c - 1].
struct GeoCodebook {
  std::vector<GeoPoint> points;

  std::int32_t size() const { return static_cast<std::int32_t>(points.size()); }
  const GeoPoint& decode(std::int32_t code) const { return points.at(code - 1); }
  /// Throws Error when the point is not in the codebook.
  std::int32_t encode(const GeoPoint& p) const;
};

struct GeocodeEncoding {
  Dataset dataset;
  GeoCodebook codebook;
};

/// Replaces the geocode by an unordered categorical variable whose levels are
/// the distinct (x, y) pairs present, ordered by (x, y). The encoded schema
/// may carry a geocode level count of 1.
GeocodeEncoding concat_geocode_as_categorical(const Dataset& ds);

/// Inverse of concat_geocode_as_categorical: restores a geocode variable at
/// the encoded slot and decodes every cell through the codebook.
Dataset decode_geocode(const Dataset& encoded, std::size_t k, const GeoCodebook& codebook);

}  // namespace geosynth
