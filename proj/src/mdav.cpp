#include "geosynth/mdav.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

#include "geosynth/csv.hpp"
#include "geosynth/error.hpp"
#include "geosynth/spatial.hpp"

namespace geosynth {

std::vector<std::size_t> ClusterPartition::sizes() const {
  std::vector<std::size_t> out(clusters, 0);
  for (auto c : assignments) ++out.at(c);
  return out;
}

std::vector<std::vector<std::size_t>> ClusterPartition::members() const {
  std::vector<std::vector<std::size_t>> out(clusters);
  for (std::size_t i = 0; i < assignments.size(); ++i) out.at(assignments[i]).push_back(i);
  return out;
}

namespace {

class MdavState {
 public:
  MdavState(std::span<const GeoPoint> points, std::size_t k)
      : points_(points), k_(k), assignments_(points.size(), kUnassigned) {
    remaining_.resize(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) remaining_[i] = static_cast<std::uint32_t>(i);
  }

  std::size_t remaining() const { return remaining_.size(); }

  GeoPoint centroid() const {
    double sx = 0.0, sy = 0.0;
    for (auto i : remaining_) {
      sx += points_[i].x;
      sy += points_[i].y;
    }
    const double n = static_cast<double>(remaining_.size());
    return {sx / n, sy / n};
  }

  std::uint32_t farthest_from(const GeoPoint& ref) const {
    // remaining_ is ascending, so strict '>' keeps the lowest index on ties.
    double best = -1.0;
    std::uint32_t best_idx = remaining_.front();
    for (auto i : remaining_) {
      const double d2 = squared_distance(points_[i], ref);
      if (d2 > best) {
        best = d2;
        best_idx = i;
      }
    }
    return best_idx;
  }

  /// Forms a cluster of `seed` and its k-1 nearest unassigned records.
  void take_cluster_around(std::uint32_t seed) {
    const GeoPoint ref = points_[seed];
    scratch_.clear();
    for (auto i : remaining_) {
      if (i != seed) scratch_.push_back({squared_distance(points_[i], ref), i});
    }
    const std::size_t need = k_ - 1;
    if (need < scratch_.size()) {
      std::nth_element(scratch_.begin(), scratch_.begin() + static_cast<std::ptrdiff_t>(need),
                       scratch_.end());
    }
    const auto id = static_cast<std::uint32_t>(next_cluster_++);
    assignments_[seed] = id;
    for (std::size_t j = 0; j < std::min(need, scratch_.size()); ++j) assignments_[scratch_[j].second] = id;
    compact();
  }

  void take_rest() {
    const auto id = static_cast<std::uint32_t>(next_cluster_++);
    for (auto i : remaining_) assignments_[i] = id;
    remaining_.clear();
  }

  ClusterPartition finish() && {
    return ClusterPartition{std::move(assignments_), k_, next_cluster_};
  }

 private:
  static constexpr std::uint32_t kUnassigned = std::numeric_limits<std::uint32_t>::max();

  void compact() {
    std::erase_if(remaining_, [this](std::uint32_t i) { return assignments_[i] != kUnassigned; });
  }

  std::span<const GeoPoint> points_;
  std::size_t k_;
  std::vector<std::uint32_t> assignments_;
  std::vector<std::uint32_t> remaining_;
  std::vector<std::pair<double, std::uint32_t>> scratch_;
  std::size_t next_cluster_ = 0;
};

}  // namespace

ClusterPartition mdav_partition(std::span<const GeoPoint> points, std::size_t k) {
  if (points.empty()) throw InputError("mdav_partition: no records");
  if (k == 0) throw InputError("mdav_partition: k must be positive");
  if (points.size() >= std::numeric_limits<std::uint32_t>::max()) {
    throw InputError("mdav_partition: too many records");
  }
  MdavState state(points, std::min(k, points.size()));
  while (state.remaining() >= 3 * k) {
    const auto r = state.farthest_from(state.centroid());
    const GeoPoint pr = points[r];
    state.take_cluster_around(r);
    const auto s = state.farthest_from(pr);
    state.take_cluster_around(s);
  }
  if (state.remaining() >= 2 * k) {
    state.take_cluster_around(state.farthest_from(state.centroid()));
  }
  if (state.remaining() > 0) state.take_rest();
  auto part = std::move(state).finish();
  part.k = k;
  return part;
}

ClusterSplit split_dataset(const Dataset& ds, const ClusterPartition& part) {
  if (part.assignments.size() != ds.rows()) {
    throw InputError("split_dataset: partition covers " + std::to_string(part.assignments.size()) +
                     " records, dataset has " + std::to_string(ds.rows()));
  }
  ClusterSplit out;
  out.provenance = part.members();
  out.parts.reserve(part.clusters);
  for (const auto& rows : out.provenance) out.parts.push_back(ds.select_rows(rows));
  return out;
}

Dataset reassemble(const ClusterSplit& split, std::size_t rows) {
  if (split.parts.empty()) throw Error("reassemble: no parts");
  std::vector<std::pair<std::size_t, std::size_t>> source(rows, {SIZE_MAX, 0});
  for (std::size_t c = 0; c < split.parts.size(); ++c) {
    for (std::size_t j = 0; j < split.provenance[c].size(); ++j) {
      source.at(split.provenance[c][j]) = {c, j};
    }
  }
  const Schema& schema = split.parts.front().schema();
  std::vector<std::vector<std::int32_t>> codes(schema.size());
  std::vector<GeoPoint> geo;
  for (std::size_t k = 0; k < schema.size(); ++k) {
    if (schema.variable(k).is_geocode()) {
      geo.reserve(rows);
      for (const auto& [c, j] : source) {
        if (c == SIZE_MAX) throw Error("reassemble: record not covered by any part");
        geo.push_back(split.parts[c].geocodes()[j]);
      }
    } else {
      codes[k].reserve(rows);
      for (const auto& [c, j] : source) {
        if (c == SIZE_MAX) throw Error("reassemble: record not covered by any part");
        codes[k].push_back(split.parts[c].code(j, k));
      }
    }
  }
  return Dataset(schema, rows, std::move(codes), std::move(geo));
}

void save_partition_csv(const ClusterPartition& part, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << "record_index,cluster_id\n";
  for (std::size_t i = 0; i < part.assignments.size(); ++i) {
    out << i << ',' << part.assignments[i] << '\n';
  }
  if (!out) throw Error("I/O failure writing " + path.string());
}

ClusterPartition load_partition_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open partition file " + path.string());
  CsvReader reader(in);
  std::vector<std::string> f;
  if (!reader.next(f) || f.size() != 2 || f[0] != "record_index" || f[1] != "cluster_id") {
    throw InputError(path.string() + ": expected header record_index,cluster_id");
  }
  std::vector<std::pair<std::size_t, std::uint32_t>> rows;
  while (reader.next(f)) {
    if (f.size() == 1 && f[0].empty()) continue;
    if (f.size() != 2) throw InputError(path.string() + ": line " + std::to_string(reader.line()) + ": expected 2 fields");
    try {
      rows.emplace_back(std::stoull(f[0]), static_cast<std::uint32_t>(std::stoul(f[1])));
    } catch (const std::exception&) {
      throw InputError(path.string() + ": line " + std::to_string(reader.line()) + ": malformed number");
    }
  }
  ClusterPartition part;
  part.assignments.assign(rows.size(), 0);
  std::vector<bool> seen(rows.size(), false);
  for (const auto& [i, c] : rows) {
    if (i >= rows.size() || seen[i]) throw InputError(path.string() + ": record indices must be a permutation of 0..n-1");
    seen[i] = true;
    part.assignments[i] = c;
    part.clusters = std::max<std::size_t>(part.clusters, c + 1);
  }
  const auto sizes = part.sizes();
  if (std::find(sizes.begin(), sizes.end(), 0) != sizes.end()) {
    throw InputError(path.string() + ": cluster ids must be contiguous from 0");
  }
  part.k = sizes.size() == 1 ? sizes[0] : *std::min_element(sizes.begin(), sizes.end());
  return part;
}

}  // namespace geosynth
