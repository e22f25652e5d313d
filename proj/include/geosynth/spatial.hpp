#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "geosynth/data_model.hpp"

namespace geosynth {

inline double squared_distance(const GeoPoint& a, const GeoPoint& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

/// Uniform-grid bucketing of a fixed point set for exact nearest-neighbour
/// and fixed-radius queries. Within a cell, point indices are ascending, and
/// every query reports exactly what an exhaustive scan would.
class GridIndex {
 public:
  /// `cell_size` <= 0 picks a size giving about two points per cell.
  explicit GridIndex(std::span<const GeoPoint> points, double cell_size = 0.0);

  std::size_t size() const { return points_.size(); }
  double cell_size() const { return cell_; }

  /// Index of the point nearest to q; ties go to the lowest index.
  /// Requires a nonempty point set.
  std::size_t nearest(const GeoPoint& q) const;

  /// Calls fn(index, squared_distance) for every point with
  /// squared_distance(q, p) <= radius * radius, in no particular order.
  template <class Fn>
  void for_each_within(const GeoPoint& q, double radius, Fn&& fn) const {
    if (points_.empty() || radius < 0.0) return;
    const double r2 = radius * radius;
    const auto [cx0, cy0] = cell_of(GeoPoint{q.x - radius, q.y - radius});
    const auto [cx1, cy1] = cell_of(GeoPoint{q.x + radius, q.y + radius});
    const std::int64_t xa = std::max<std::int64_t>(cx0, 0), xb = std::min<std::int64_t>(cx1, nx_ - 1);
    const std::int64_t ya = std::max<std::int64_t>(cy0, 0), yb = std::min<std::int64_t>(cy1, ny_ - 1);
    for (std::int64_t cy = ya; cy <= yb; ++cy) {
      for (std::int64_t cx = xa; cx <= xb; ++cx) {
        const std::size_t cell = static_cast<std::size_t>(cy * nx_ + cx);
        for (std::size_t s = start_[cell]; s < start_[cell + 1]; ++s) {
          const std::uint32_t idx = order_[s];
          const double d2 = squared_distance(q, points_[idx]);
          if (d2 <= r2) fn(static_cast<std::size_t>(idx), d2);
        }
      }
    }
  }

 private:
  std::pair<std::int64_t, std::int64_t> cell_of(const GeoPoint& p) const;

  std::vector<GeoPoint> points_;
  double x0_ = 0.0, y0_ = 0.0, cell_ = 1.0;
  std::int64_t nx_ = 1, ny_ = 1;
  std::vector<std::size_t> start_;    // CSR offsets, nx*ny + 1 entries
  std::vector<std::uint32_t> order_;  // point indices grouped by cell
};

/// Exhaustive nearest-neighbour scan; ties go to the lowest index.
std::size_t nearest_exhaustive(std::span<const GeoPoint> points, const GeoPoint& q);

}  // namespace geosynth
