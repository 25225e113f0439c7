#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <unordered_map>
#include <vector>

#include "pointvox/core.hpp"

namespace pointvox {

struct CellIndex {
  int x = 0;
  int y = 0;
  int z = 0;

  friend auto operator<=>(const CellIndex&, const CellIndex&) = default;
};

struct CellIndexHash {
  std::size_t operator()(const CellIndex& c) const noexcept {
    std::uint64_t h = static_cast<std::uint32_t>(c.x);
    h = h * 73856093ULL ^ static_cast<std::uint32_t>(c.y) * 19349663ULL;
    h = h * 83492791ULL ^ static_cast<std::uint32_t>(c.z);
    return static_cast<std::size_t>(splitmix64(h));
  }
};

struct BevCell {
  int x = 0;
  int y = 0;

  friend auto operator<=>(const BevCell&, const BevCell&) = default;
};

/// Axis-aligned voxel lattice: cell i covers [origin + i*size, origin + (i+1)*size).
struct VoxelGridSpec {
  Vec3 origin = Vec3::Zero();
  Vec3 voxel_size = Vec3::Ones();
  std::array<int, 3> extents{1, 1, 1};

  /// Throws InvalidArgument for non-positive sizes or extents.
  void validate() const;

  /// Unbounded cell coordinates (floor convention), valid or not.
  CellIndex cell_of_unbounded(const Vec3& p) const;
  /// Cell containing p, or nullopt when p lies outside the extents.
  std::optional<CellIndex> cell_of(const Vec3& p) const;
  bool contains(const CellIndex& c) const;
  Vec3 center_of(const CellIndex& c) const;
};

enum class Reducer { Mean, Max };

/// Non-empty voxels, stored in lexicographic cell order.
class SparseVoxelGrid {
 public:
  SparseVoxelGrid(VoxelGridSpec spec, std::vector<CellIndex> cells, FeatureMatrix features);

  const VoxelGridSpec& spec() const noexcept { return spec_; }
  std::size_t size() const noexcept { return cells_.size(); }
  bool empty() const noexcept { return cells_.empty(); }
  Eigen::Index feature_dim() const noexcept { return features_.cols(); }

  const std::vector<CellIndex>& cells() const noexcept { return cells_; }
  const std::vector<Vec3>& centers() const noexcept { return centers_; }
  const FeatureMatrix& features() const noexcept { return features_; }

  std::optional<std::size_t> find(const CellIndex& c) const;

  /// Same cells with a new feature matrix (one row per entry).
  SparseVoxelGrid with_features(FeatureMatrix features) const;

 private:
  VoxelGridSpec spec_;
  std::vector<CellIndex> cells_;
  std::vector<Vec3> centers_;
  FeatureMatrix features_;
  std::unordered_map<CellIndex, std::size_t, CellIndexHash> lookup_;
};

struct BevGridSpec {
  Vec2 origin = Vec2::Zero();
  Vec2 cell_size = Vec2::Ones();
  int nx = 1;
  int ny = 1;

  static BevGridSpec from(const VoxelGridSpec& spec);
  Vec2 center_of(const BevCell& c) const;
};

/// Non-empty BEV cells in lexicographic (ix, iy) order.
struct SparseBevGrid {
  BevGridSpec spec;
  std::vector<BevCell> cells;
  FeatureMatrix features;

  std::size_t size() const noexcept { return cells.size(); }
  std::vector<Vec2> centers() const;
};

/// Dense nx * ny raster of feature rows; cell (ix, iy) is row ix * ny + iy.
class BevFeatureMap {
 public:
  BevFeatureMap(BevGridSpec spec, Eigen::Index dim);

  const BevGridSpec& spec() const noexcept { return spec_; }
  Eigen::Index dim() const noexcept { return data_.cols(); }

  auto cell(int ix, int iy) { return data_.row(static_cast<Eigen::Index>(ix) * spec_.ny + iy); }
  auto cell(int ix, int iy) const { return data_.row(static_cast<Eigen::Index>(ix) * spec_.ny + iy); }
  const FeatureMatrix& data() const noexcept { return data_; }
  FeatureMatrix& data() noexcept { return data_; }

 private:
  BevGridSpec spec_;
  FeatureMatrix data_;
};

/// Throws EmptyGrid when no point falls inside the extents. Without point
/// features each voxel gets [reduced offset from cell center (3), point count].
SparseVoxelGrid voxelize(const PointCloud& pc, const VoxelGridSpec& spec, Reducer reducer = Reducer::Mean);

/// Elementwise max over each (ix, iy) height column.
SparseBevGrid collapse_height(const SparseVoxelGrid& grid);

BevFeatureMap densify(const SparseBevGrid& bev);

/// Shared per-cell linear map (dim_out x dim_in weights) applied to every raster cell.
BevFeatureMap apply_cell_linear(const BevFeatureMap& map, const Eigen::MatrixXd& weights, const Eigen::VectorXd& bias);

/// Bilinear blend of the four surrounding cell-center values (centers at
/// origin + (i + 0.5) * size). Inside the outer half-cell ring, the edge row
/// is replicated. Outside the metric extent: OutOfBounds, unless clamp is set.
FeatureRow bilinear_lookup(const BevFeatureMap& map, const Vec2& xy, bool clamp = false);

// Test golden dumps: `ix,iy,iz,f0,...` and `ix,iy,f0,...`.
void write_grid_csv(std::ostream& out, const SparseVoxelGrid& grid);
void write_bev_csv(std::ostream& out, const SparseBevGrid& bev);

}  // namespace pointvox
