#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "geosynth/data_model.hpp"

namespace geosynth {

/// Assignment of every record to one of C spatial clusters. Cluster ids are
/// assigned in formation order; the last id is the remainder cluster.
struct ClusterPartition {
  std::vector<std::uint32_t> assignments;
  std::size_t k = 0;
  std::size_t clusters = 0;

  std::vector<std::size_t> sizes() const;
  /// Record indices of each cluster, ascending within a cluster.
  std::vector<std::vector<std::size_t>> members() const;
};

/// Fixed-size MDAV: every cluster holds exactly k records except the last,
/// which holds between k and 2k-1 (or all n when n < k). Distances are
/// Euclidean; equidistant candidates resolve to the lowest record index.
ClusterPartition mdav_partition(std::span<const GeoPoint> points, std::size_t k);

/// One dataset per cluster, preserving within-cluster record order.
/// `provenance[c][j]` is the original row of row j in cluster c.
struct ClusterSplit {
  std::vector<Dataset> parts;
  std::vector<std::vector<std::size_t>> provenance;
};

ClusterSplit split_dataset(const Dataset& ds, const ClusterPartition& part);

/// Inverse of split_dataset: scatters the parts back to their original rows.
Dataset reassemble(const ClusterSplit& split, std::size_t rows);

void save_partition_csv(const ClusterPartition& part, const std::filesystem::path& path);
/// Reads (record_index, cluster_id) rows; `k` is recovered from the sizes.
ClusterPartition load_partition_csv(const std::filesystem::path& path);

}  // namespace geosynth
