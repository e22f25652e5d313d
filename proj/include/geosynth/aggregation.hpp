#pragma once

// Coarsening of geocodes to square grid cells before synthesis.

#include <cstdint>
#include <span>

#include "geosynth/data_model.hpp"

namespace geosynth {

/// Lower-left corner (floor(x/g)*g, floor(y/g)*g) of the cell holding p.
/// The corner always maps to itself, so aggregation is idempotent.
GeoPoint cell_corner(const GeoPoint& p, double g);

/// Every geocode replaced by its cell corner. Throws InputError unless g > 0.
Dataset aggregate_geocodes(const Dataset& ds, double g);

/// Region of the original record nearest to the cell corner; ties to the
/// lowest original index.
std::int32_t region_for_cell(const GeoPoint& corner, const Dataset& orig, std::span<const std::int32_t> region_ids);

}  // namespace geosynth
