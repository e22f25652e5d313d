#include "geosynth/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "geosynth/error.hpp"

namespace geosynth {

namespace {
constexpr std::int64_t kMaxCellsPerAxis = 1 << 12;
}

GridIndex::GridIndex(std::span<const GeoPoint> points, double cell_size)
    : points_(points.begin(), points.end()) {
  if (points_.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw Error("GridIndex: too many points");
  }
  if (points_.empty()) {
    start_.assign(2, 0);
    return;
  }
  double xmin = points_[0].x, xmax = xmin, ymin = points_[0].y, ymax = ymin;
  for (const auto& p : points_) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  const double w = xmax - xmin, h = ymax - ymin;
  if (cell_size <= 0.0) {
    const double area = std::max(w, 1e-9) * std::max(h, 1e-9);
    cell_size = std::sqrt(2.0 * area / static_cast<double>(points_.size()));
    if (!(cell_size > 0.0) || !std::isfinite(cell_size)) cell_size = 1.0;
  }
  // Keep the grid bounded for degenerate extents.
  cell_size = std::max({cell_size, w / kMaxCellsPerAxis, h / kMaxCellsPerAxis});
  // A tiny requested cell over a wide extent would allocate mostly empty cells.
  const double cell_limit = 4.0 * static_cast<double>(points_.size()) + 1024.0;
  while ((std::floor(w / cell_size) + 1.0) * (std::floor(h / cell_size) + 1.0) > cell_limit) cell_size *= 1.5;
  cell_ = cell_size;
  x0_ = xmin;
  y0_ = ymin;
  nx_ = static_cast<std::int64_t>(std::floor(w / cell_)) + 1;
  ny_ = static_cast<std::int64_t>(std::floor(h / cell_)) + 1;
  nx_ = std::min(nx_, kMaxCellsPerAxis + 1);
  ny_ = std::min(ny_, kMaxCellsPerAxis + 1);

  const std::size_t cells = static_cast<std::size_t>(nx_ * ny_);
  std::vector<std::size_t> cell_of_point(points_.size());
  start_.assign(cells + 1, 0);
  for (std::size_t i = 0; i < points_.size(); ++i) {
    auto [cx, cy] = cell_of(points_[i]);
    cx = std::clamp<std::int64_t>(cx, 0, nx_ - 1);
    cy = std::clamp<std::int64_t>(cy, 0, ny_ - 1);
    cell_of_point[i] = static_cast<std::size_t>(cy * nx_ + cx);
    ++start_[cell_of_point[i] + 1];
  }
  for (std::size_t c = 0; c < cells; ++c) start_[c + 1] += start_[c];
  order_.resize(points_.size());
  std::vector<std::size_t> fill(start_.begin(), start_.end() - 1);
  for (std::size_t i = 0; i < points_.size(); ++i) {
    order_[fill[cell_of_point[i]]++] = static_cast<std::uint32_t>(i);
  }
}

std::pair<std::int64_t, std::int64_t> GridIndex::cell_of(const GeoPoint& p) const {
  auto axis = [this](double v, double origin) {
    const double c = std::floor((v - origin) / cell_);
    const double lim = static_cast<double>(kMaxCellsPerAxis) * 4.0;
    return static_cast<std::int64_t>(std::clamp(c, -lim, lim));
  };
  return {axis(p.x, x0_), axis(p.y, y0_)};
}

std::size_t GridIndex::nearest(const GeoPoint& q) const {
  if (points_.empty()) throw Error("GridIndex::nearest on empty point set");
  const auto [qx, qy] = cell_of(q);
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_idx = 0;

  auto scan_cell = [&](std::int64_t cx, std::int64_t cy) {
    if (cx < 0 || cy < 0 || cx >= nx_ || cy >= ny_) return;
    const std::size_t cell = static_cast<std::size_t>(cy * nx_ + cx);
    for (std::size_t s = start_[cell]; s < start_[cell + 1]; ++s) {
      const std::uint32_t idx = order_[s];
      const double d2 = squared_distance(q, points_[idx]);
      if (d2 < best || (d2 == best && idx < best_idx)) {
        best = d2;
        best_idx = idx;
      }
    }
  };

  const std::int64_t max_ring =
      std::max({qx, nx_ - 1 - qx, qy, ny_ - 1 - qy, std::int64_t{0}});
  for (std::int64_t r = 0; r <= max_ring; ++r) {
    // Cells at Chebyshev distance exactly r from the query cell, clipped to the grid.
    const std::int64_t xa = std::max<std::int64_t>(qx - r, 0), xb = std::min<std::int64_t>(qx + r, nx_ - 1);
    const std::int64_t ya = std::max<std::int64_t>(qy - r, 0), yb = std::min<std::int64_t>(qy + r, ny_ - 1);
    if (xa <= xb && ya <= yb) {
      if (qy - r >= 0) for (std::int64_t cx = xa; cx <= xb; ++cx) scan_cell(cx, qy - r);
      if (r > 0 && qy + r < ny_) for (std::int64_t cx = xa; cx <= xb; ++cx) scan_cell(cx, qy + r);
      const std::int64_t yi0 = std::max<std::int64_t>(qy - r + 1, 0);
      const std::int64_t yi1 = std::min<std::int64_t>(qy + r - 1, ny_ - 1);
      for (std::int64_t cy = yi0; cy <= yi1; ++cy) {
        if (qx - r >= 0) scan_cell(qx - r, cy);
        if (r > 0 && qx + r < nx_) scan_cell(qx + r, cy);
      }
    }
    // Every point outside the (2r+1)^2 block is at least `gap` away.
    const double left = q.x - (x0_ + static_cast<double>(qx - r) * cell_);
    const double right = (x0_ + static_cast<double>(qx + r + 1) * cell_) - q.x;
    const double down = q.y - (y0_ + static_cast<double>(qy - r) * cell_);
    const double up = (y0_ + static_cast<double>(qy + r + 1) * cell_) - q.y;
    const double gap = std::max(0.0, std::min({left, right, down, up}));
    if (best < gap * gap) break;
  }
  return best_idx;
}

std::size_t nearest_exhaustive(std::span<const GeoPoint> points, const GeoPoint& q) {
  if (points.empty()) throw Error("nearest_exhaustive on empty point set");
  std::size_t best_idx = 0;
  double best = squared_distance(points[0], q);
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double d2 = squared_distance(points[i], q);
    if (d2 < best) {
      best = d2;
      best_idx = i;
    }
  }
  return best_idx;
}

}  // namespace geosynth
