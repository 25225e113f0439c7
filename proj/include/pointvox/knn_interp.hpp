#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pointvox/core.hpp"
#include "pointvox/voxelizer.hpp"

namespace pointvox {

struct KnnRequest {
  std::vector<Vec3> queries;
  std::size_t k = 8;
  int window = 2;  // half-width v in cells; scans (2v+1)^3 cells
};

struct KnnNeighbor {
  std::size_t voxel = 0;  // entry index into the grid
  double distance = 0.0;
};

/// Up to k neighbors per query, nearest first.
struct KnnResult {
  std::size_t k = 0;
  std::vector<std::vector<KnnNeighbor>> neighbors;

  std::size_t query_count() const noexcept { return neighbors.size(); }
  std::size_t count(std::size_t q) const { return neighbors[q].size(); }

  friend bool operator==(const KnnResult& a, const KnnResult& b);
};

struct KnnCounters {
  std::uint64_t window_scans = 0;
  std::uint64_t cells_probed = 0;
  std::uint64_t candidates = 0;
};

// All three variants rank by (distance to voxel center, cell index) and agree
// whenever the window holds the true k nearest voxels.

KnnResult voxel_knn(const SparseVoxelGrid& grid, const KnnRequest& req, KnnCounters* counters = nullptr);

/// Deduplicates queries by containing cell, scans each unique window once,
/// then re-ranks per query. Identical output to voxel_knn.
KnnResult conquer_fetch_knn(const SparseVoxelGrid& grid, const KnnRequest& req, KnnCounters* counters = nullptr);

KnnResult brute_knn(const SparseVoxelGrid& grid, std::span<const Vec3> queries, std::size_t k);

/// Below this distance a neighbor is treated as coincident with the query.
inline constexpr double kCoincidenceEpsilon = 1e-8;

/// Inverse-distance weighted average of neighbor features, weights 1 / ||c_j - p||.
/// A coincident neighbor (lowest index among them) is returned verbatim.
/// Throws NoNeighbors for an empty neighbor list.
FeatureRow interpolate(const Vec3& query, std::span<const Vec3> centers, const FeatureMatrix& features);

/// Normalized weights used by interpolate (one-hot on coincidence).
std::vector<double> interpolation_weights(const Vec3& query, std::span<const Vec3> centers);

/// Interpolates every query from its KNN neighbors in grid.
/// Rows of queries with no neighbors are zero and flagged false in valid.
FeatureMatrix interpolate_from_knn(const SparseVoxelGrid& grid, std::span<const Vec3> queries, const KnnResult& knn,
                                   std::vector<bool>* valid = nullptr);

}  // namespace pointvox
