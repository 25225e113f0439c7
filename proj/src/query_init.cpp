#include "pointvox/query_init.hpp"

#include <limits>

namespace pointvox {

std::vector<Vec3> lift(std::span<const Vec2> voxel_centers, const LiftParams& params) {
  if (params.offsets.size() != voxel_centers.size()) {
    throw Error(ErrorCode::ShapeMismatch, "lift needs one offset per sampled voxel");
  }
  std::vector<Vec3> out;
  out.reserve(voxel_centers.size());
  for (std::size_t i = 0; i < voxel_centers.size(); ++i) {
    const Vec3& o = params.offsets[i];
    if (!o.allFinite()) throw Error(ErrorCode::InvalidArgument, "lift offsets must be finite");
    out.emplace_back(voxel_centers[i].x() + o.x(), voxel_centers[i].y() + o.y(), params.base_height + o.z());
  }
  return out;
}

std::vector<int> foreground_labels(std::span<const Vec2> centers, std::span<const BoundingBox3D> boxes) {
  std::vector<int> labels(centers.size(), 0);
  for (std::size_t i = 0; i < centers.size(); ++i) {
    labels[i] = nearest_containing_box(centers[i], boxes) >= 0 ? 1 : 0;
  }
  return labels;
}

std::vector<double> foreground_scores(std::span<const Vec2> centers, std::span<const BoundingBox3D> boxes,
                                      const ForegroundScoring& scoring) {
  const auto labels = foreground_labels(centers, boxes);
  std::vector<double> scores(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) scores[i] = labels[i] ? scoring.foreground : scoring.background;
  return scores;
}

int nearest_containing_box(const Vec2& center, std::span<const BoundingBox3D> boxes) {
  const Vec3 p(center.x(), center.y(), 0.0);
  int best = -1;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < boxes.size(); ++b) {
    if (!point_in_box(p, boxes[b], true)) continue;
    const double d = (boxes[b].center().head<2>() - center).norm();
    if (d < best_dist) {
      best_dist = d;
      best = static_cast<int>(b);
    }
  }
  return best;
}

LiftParams oracle_offsets(std::span<const Vec2> centers, std::span<const BoundingBox3D> boxes, double base_height) {
  LiftParams params;
  params.base_height = base_height;
  params.offsets.assign(centers.size(), Vec3::Zero());
  for (std::size_t i = 0; i < centers.size(); ++i) {
    const int b = nearest_containing_box(centers[i], boxes);
    if (b < 0) continue;
    const Vec3& c = boxes[static_cast<std::size_t>(b)].center();
    params.offsets[i] = Vec3(c.x() - centers[i].x(), c.y() - centers[i].y(), c.z() - base_height);
  }
  return params;
}

QuerySet init_queries_from_grid(const SparseVoxelGrid& grid, std::span<const BoundingBox3D> boxes,
                                const BevFeatureMap& bev_map, std::size_t m, const QueryInitOptions& options,
                                QueryInitTrace* trace) {
  QueryInitTrace local;
  QueryInitTrace& t = trace ? *trace : local;

  t.bev = collapse_height(grid);
  t.bev_centers = t.bev.centers();
  t.scores = foreground_scores(t.bev_centers, boxes, options.scoring);

  SampleRequest req;
  req.candidates.reserve(t.bev_centers.size());
  for (const auto& c : t.bev_centers) req.candidates.emplace_back(c.x(), c.y(), 0.0);
  req.scores = t.scores;
  req.count = m;
  req.strategy = options.strategy;
  t.selection = sample(req);

  std::vector<Vec2> picked;
  picked.reserve(m);
  for (auto i : t.selection.indices) picked.push_back(t.bev_centers[i]);
  if (options.use_oracle_offsets) {
    t.lift = oracle_offsets(picked, boxes, options.base_height);
  } else {
    t.lift = LiftParams{std::vector<Vec3>(picked.size(), Vec3::Zero()), options.base_height};
  }

  QuerySet q;
  q.reference_points = lift(picked, t.lift);
  q.provenance = t.selection.indices;
  q.content.resize(static_cast<Eigen::Index>(m), bev_map.dim());
  for (std::size_t i = 0; i < m; ++i) {
    // Lifting can carry a reference past the raster edge (box partly outside the grid).
    q.content.row(static_cast<Eigen::Index>(i)) = bilinear_lookup(bev_map, q.reference_points[i].head<2>(), true);
  }
  return q;
}

QuerySet init_queries(const PointCloud& pc, std::span<const BoundingBox3D> boxes, const BevFeatureMap& bev_map,
                      const VoxelGridSpec& spec, std::size_t m, const QueryInitOptions& options,
                      QueryInitTrace* trace) {
  const SparseVoxelGrid grid = voxelize(pc, spec);
  return init_queries_from_grid(grid, boxes, bev_map, m, options, trace);
}

}  // namespace pointvox
