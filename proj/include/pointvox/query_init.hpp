#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pointvox/core.hpp"
#include "pointvox/sampler.hpp"
#include "pointvox/voxelizer.hpp"

namespace pointvox {

/// Per sampled voxel offset toward the object center; lifted height is z0 + dz.
struct LiftParams {
  std::vector<Vec3> offsets;
  double base_height = 0.0;
};

struct QuerySet {
  std::vector<Vec3> reference_points;
  FeatureMatrix content;                // one row per reference point
  std::vector<std::size_t> provenance;  // index into the sampled BEV cells
};

/// Surrogate foreground probabilities used in place of a segmentation head.
struct ForegroundScoring {
  double foreground = 1.0;
  double background = 0.1;
};

/// Throws ShapeMismatch unless there is one offset per voxel.
std::vector<Vec3> lift(std::span<const Vec2> voxel_centers, const LiftParams& params);

/// Foreground labels of BEV centers: inside any box footprint (height ignored).
std::vector<int> foreground_labels(std::span<const Vec2> centers, std::span<const BoundingBox3D> boxes);

std::vector<double> foreground_scores(std::span<const Vec2> centers, std::span<const BoundingBox3D> boxes,
                                      const ForegroundScoring& scoring = {});

/// Index of the containing box (footprint test) whose center is nearest, or -1.
int nearest_containing_box(const Vec2& center, std::span<const BoundingBox3D> boxes);

/// Offsets that move foreground voxels onto the nearest containing box center
/// (dz = box center height - base_height); background voxels get zero offsets.
LiftParams oracle_offsets(std::span<const Vec2> centers, std::span<const BoundingBox3D> boxes, double base_height = 0.0);

struct QueryInitOptions {
  SamplingStrategy strategy = SamplingStrategy::SemanticFps;
  ForegroundScoring scoring;
  bool use_oracle_offsets = true;
  double base_height = 0.0;
};

/// Everything produced along the way, for diagnostics and loss targets.
struct QueryInitTrace {
  SparseBevGrid bev;
  std::vector<Vec2> bev_centers;
  std::vector<double> scores;
  SampleResult selection;
  LiftParams lift;
};

/// collapse -> score -> sample(m) -> lift -> bilinear lookup on bev_map
/// (clamped to the raster for references lifted past its edge).
QuerySet init_queries_from_grid(const SparseVoxelGrid& grid, std::span<const BoundingBox3D> boxes,
                                const BevFeatureMap& bev_map, std::size_t m, const QueryInitOptions& options = {},
                                QueryInitTrace* trace = nullptr);

/// voxelize(pc, spec) followed by init_queries_from_grid.
QuerySet init_queries(const PointCloud& pc, std::span<const BoundingBox3D> boxes, const BevFeatureMap& bev_map,
                      const VoxelGridSpec& spec, std::size_t m, const QueryInitOptions& options = {},
                      QueryInitTrace* trace = nullptr);

}  // namespace pointvox
