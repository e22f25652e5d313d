#pragma once

// Simulated employee-level populations with spatially correlated attributes.

#include <cstddef>
#include <cstdint>

#include "geosynth/data_model.hpp"

namespace geosynth {

struct PopulationConfig {
  std::size_t records = 3000;
  std::uint64_t seed = 1;
  /// Square study area side, meters.
  double extent = 20000.0;
  std::size_t towns = 6;
  /// Zip regions form a zip_grid x zip_grid tiling of the area.
  std::size_t zip_grid = 4;
  /// Mean records per distinct geocode.
  double records_per_site = 3.0;
};

/// Variables: zip, sex, age, foreign, industry, occupation, wage, geo.
/// Geocode is the only synthesis target; the quasi-identifiers are sex, age,
/// foreign, industry and occupation.
Schema population_schema(std::size_t zip_levels = 16);

/// Sites cluster around towns; industry mix and foreign share vary by town,
/// occupation depends on industry, wage on age, sex and occupation. Geocodes
/// are whole meters.
Dataset simulate_population(const PopulationConfig& cfg);

}  // namespace geosynth
