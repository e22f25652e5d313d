#include "geosynth/aggregation.hpp"

#include <cmath>

#include "geosynth/error.hpp"
#include "geosynth/spatial.hpp"

namespace geosynth {

namespace {

double floor_to(double v, double g) {
  const double c = std::floor(v / g);
  double r = c * g;
  // c*g can round just below the cell edge; step up until it re-floors to c.
  while (std::floor(r / g) < c) r = std::nextafter(r, INFINITY);
  return r;
}

}  // namespace

GeoPoint cell_corner(const GeoPoint& p, double g) {
  if (!(g > 0.0) || !std::isfinite(g)) throw InputError("aggregation: grid size must be positive");
  return {floor_to(p.x, g), floor_to(p.y, g)};
}

Dataset aggregate_geocodes(const Dataset& ds, double g) {
  if (!(g > 0.0) || !std::isfinite(g)) throw InputError("aggregation: grid size must be positive");
  if (!ds.schema().geocode_index()) throw InputError("aggregation: dataset has no geocode");
  std::vector<GeoPoint> out;
  out.reserve(ds.rows());
  for (const auto& p : ds.geocodes()) out.push_back(cell_corner(p, g));
  return ds.with_geocodes(std::move(out));
}

std::int32_t region_for_cell(const GeoPoint& corner, const Dataset& orig, std::span<const std::int32_t> region_ids) {
  if (orig.rows() == 0) throw InputError("region_for_cell: original data is empty");
  if (region_ids.size() != orig.rows()) throw InputError("region_for_cell: one region id per original record is required");
  return region_ids[nearest_exhaustive(orig.geocodes(), corner)];
}

}  // namespace geosynth
