#pragma once

// Analytical validity: regional shares, the UL table-difference measure, and
// multitype K / L functions.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "geosynth/data_model.hpp"
#include "geosynth/spatial.hpp"

namespace geosynth::utility {

/// Region of the Euclidean-nearest original geocode; ties to the lowest
/// original index.
class RegionAssigner {
 public:
  RegionAssigner(std::span<const GeoPoint> original, std::span<const std::int32_t> region_of_original);

  std::int32_t region_of(const GeoPoint& p) const { return regions_[index_.nearest(p)]; }

 private:
  GridIndex index_;
  std::vector<std::int32_t> regions_;
};

std::vector<std::int32_t> assign_regions(const Dataset& syn, const Dataset& orig,
                                         std::span<const std::int32_t> region_of_orig);

using RecordPredicate = std::function<bool(const Dataset&, std::size_t)>;

/// Per nonempty region, the fraction of records satisfying `pred`.
std::map<std::int32_t, double> region_shares(const Dataset& ds, std::span<const std::int32_t> regions,
                                             const RecordPredicate& pred);

/// Relative frequencies of every size-`level` subset of `variables`, per
/// region. Cells of a table are the full cross product of the levels, laid
/// out with the first variable varying slowest.
struct InteractionTables {
  std::size_t level = 0;
  std::vector<std::int32_t> regions;
  std::vector<std::size_t> region_counts;
  std::vector<std::vector<std::size_t>> subsets;
  std::vector<std::size_t> cells;
  /// freq[region][subset] is a table of cells[subset] relative frequencies.
  /// A region with no records has all-zero tables.
  std::vector<std::vector<std::vector<double>>> freq;

  bool same_layout(const InteractionTables& o) const;
};

/// `region_list` fixes the regions reported (default: those present in ds).
InteractionTables interaction_tables(const Dataset& ds, std::span<const std::int32_t> regions, std::size_t level,
                                     std::span<const std::size_t> variables,
                                     std::optional<std::vector<std::int32_t>> region_list = std::nullopt);

struct ULResult {
  double ul = 0.0;
  /// Synthetic minus original, region by region, table by table.
  std::vector<double> differences;
};

/// Synthetic tables are averaged over replicates before differencing. With
/// `weighted`, cells are weighted by the original region size.
ULResult ul_measure(const InteractionTables& orig, std::span<const InteractionTables> syn, bool weighted = false);

/// |D| * #{(a, b): a of type_i, b != a, |s_a - s_b| <= r} / (n * n_i).
double multitype_k(std::span<const GeoPoint> points, std::span<const std::int32_t> types, std::int32_t type_i,
                   double r, double domain_area);

/// K over a radius grid by exhaustive pair enumeration.
std::vector<double> k_curve_bruteforce(std::span<const GeoPoint> points, std::span<const std::int32_t> types,
                                       std::int32_t type_i, std::span<const double> radii, double domain_area);
/// Same values through grid bucketing; agrees exactly with the brute force.
std::vector<double> k_curve(std::span<const GeoPoint> points, std::span<const std::int32_t> types,
                            std::int32_t type_i, std::span<const double> radii, double domain_area);

/// sqrt(K / pi) - r.
inline double l_function(double k_value, double r) { return std::sqrt(k_value / std::numbers::pi) - r; }

/// `count` evenly spaced radii from 0 to a quarter of the bounding box's
/// shorter side.
std::vector<double> default_radii(std::span<const GeoPoint> points, std::size_t count = 50);
double bounding_box_area(std::span<const GeoPoint> points);

struct LCurves {
  std::vector<double> radii;
  std::vector<double> original;
  std::vector<double> synthetic_mean;
  std::vector<std::vector<double>> per_replicate;
};

/// Points satisfying `is_type` form type i; all records are "other points".
LCurves l_curves(const SyntheticRelease& release, const Dataset& orig, const RecordPredicate& is_type,
                 std::span<const double> radii, double domain_area);

// ---------------------------------------------------------------- report

struct Outcome {
  std::string name;
  std::string variable;
  /// Labels counted as the outcome.
  std::vector<std::string> levels;

  RecordPredicate predicate(const Schema& schema) const;
};

struct UtilitySettings {
  /// Categorical variable holding the region (e.g. ZIP); empty = one region.
  std::string region_variable;
  /// Table variables; default every categorical variable but the region.
  std::vector<std::string> table_variables;
  std::vector<std::size_t> levels{1, 2, 3};
  bool weighted = false;
  std::vector<Outcome> share_outcomes;
  std::vector<Outcome> l_outcomes;
  std::size_t r_count = 50;
  std::optional<std::vector<double>> radii;
  std::optional<double> domain_area;
};

struct ShareTable {
  std::string name;
  std::map<std::int32_t, double> original;
  /// Mean over the replicates in which the region is nonempty.
  std::map<std::int32_t, double> synthetic;
};

struct UtilityReport {
  std::map<std::size_t, ULResult> ul_by_level;
  std::vector<ShareTable> shares;
  std::vector<std::pair<std::string, LCurves>> l_curves;
  double domain_area = 0.0;
};

UtilityReport evaluate_utility(const Dataset& orig, const SyntheticRelease& release, const UtilitySettings& settings);

nlohmann::json to_json(const UtilityReport& r);
/// ul_summary.csv, ul_differences_level<k>.csv, shares_<name>.csv, l_curve_<name>.csv.
void write_utility_csvs(const UtilityReport& r, const std::filesystem::path& dir);

}  // namespace geosynth::utility
