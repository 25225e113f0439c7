#include "pointvox/knn_interp.hpp"

#include <algorithm>
#include <unordered_map>

namespace pointvox {

bool operator==(const KnnResult& a, const KnnResult& b) {
  if (a.k != b.k || a.neighbors.size() != b.neighbors.size()) return false;
  for (std::size_t q = 0; q < a.neighbors.size(); ++q) {
    const auto& x = a.neighbors[q];
    const auto& y = b.neighbors[q];
    if (x.size() != y.size()) return false;
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (x[j].voxel != y[j].voxel || x[j].distance != y[j].distance) return false;
    }
  }
  return true;
}

namespace {

void validate(const KnnRequest& req) {
  if (req.k < 1) throw Error(ErrorCode::InvalidArgument, "KNN needs k >= 1");
  if (req.window < 1) throw Error(ErrorCode::InvalidArgument, "KNN window half-width must be >= 1");
}

// Entry indices follow lexicographic cell order, so comparing them compares cells.
bool closer(const KnnNeighbor& a, const KnnNeighbor& b) {
  return a.distance < b.distance || (a.distance == b.distance && a.voxel < b.voxel);
}

void scan_window(const SparseVoxelGrid& grid, const CellIndex& center, int v, std::vector<std::size_t>& out,
                 KnnCounters& counters) {
  out.clear();
  ++counters.window_scans;
  for (int dx = -v; dx <= v; ++dx) {
    for (int dy = -v; dy <= v; ++dy) {
      for (int dz = -v; dz <= v; ++dz) {
        ++counters.cells_probed;
        if (const auto idx = grid.find({center.x + dx, center.y + dy, center.z + dz})) out.push_back(*idx);
      }
    }
  }
}

std::vector<KnnNeighbor> rank(const SparseVoxelGrid& grid, const Vec3& query, std::span<const std::size_t> candidates,
                              std::size_t k) {
  thread_local std::vector<KnnNeighbor> ranked;
  ranked.clear();
  for (auto c : candidates) ranked.push_back({c, (grid.centers()[c] - query).norm()});
  const auto take = static_cast<std::ptrdiff_t>(std::min(k, ranked.size()));
  std::partial_sort(ranked.begin(), ranked.begin() + take, ranked.end(), closer);
  return {ranked.begin(), ranked.begin() + take};
}

}  // namespace

KnnResult voxel_knn(const SparseVoxelGrid& grid, const KnnRequest& req, KnnCounters* counters) {
  validate(req);
  KnnCounters local;
  KnnResult res;
  res.k = req.k;
  res.neighbors.reserve(req.queries.size());
  std::vector<std::size_t> candidates;
  for (const auto& q : req.queries) {
    scan_window(grid, grid.spec().cell_of_unbounded(q), req.window, candidates, local);
    local.candidates += candidates.size();
    res.neighbors.push_back(rank(grid, q, candidates, req.k));
  }
  if (counters) {
    counters->window_scans += local.window_scans;
    counters->cells_probed += local.cells_probed;
    counters->candidates += local.candidates;
  }
  return res;
}

KnnResult conquer_fetch_knn(const SparseVoxelGrid& grid, const KnnRequest& req, KnnCounters* counters) {
  validate(req);
  KnnCounters local;

  // Conquer: one group per distinct containing cell.
  std::unordered_map<CellIndex, std::size_t, CellIndexHash> group_of;
  std::vector<CellIndex> group_cells;
  std::vector<std::size_t> query_group(req.queries.size());
  for (std::size_t i = 0; i < req.queries.size(); ++i) {
    const CellIndex c = grid.spec().cell_of_unbounded(req.queries[i]);
    const auto [it, inserted] = group_of.emplace(c, group_cells.size());
    if (inserted) group_cells.push_back(c);
    query_group[i] = it->second;
  }

  std::vector<std::vector<std::size_t>> group_candidates(group_cells.size());
  for (std::size_t g = 0; g < group_cells.size(); ++g) {
    scan_window(grid, group_cells[g], req.window, group_candidates[g], local);
  }

  // Fetch: each query ranks its group's candidates by its own coordinates.
  KnnResult res;
  res.k = req.k;
  res.neighbors.reserve(req.queries.size());
  for (std::size_t i = 0; i < req.queries.size(); ++i) {
    const auto& cand = group_candidates[query_group[i]];
    local.candidates += cand.size();
    res.neighbors.push_back(rank(grid, req.queries[i], cand, req.k));
  }
  if (counters) {
    counters->window_scans += local.window_scans;
    counters->cells_probed += local.cells_probed;
    counters->candidates += local.candidates;
  }
  return res;
}

KnnResult brute_knn(const SparseVoxelGrid& grid, std::span<const Vec3> queries, std::size_t k) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "KNN needs k >= 1");
  std::vector<std::size_t> all(grid.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  KnnResult res;
  res.k = k;
  res.neighbors.reserve(queries.size());
  for (const auto& q : queries) res.neighbors.push_back(rank(grid, q, all, k));
  return res;
}

std::vector<double> interpolation_weights(const Vec3& query, std::span<const Vec3> centers) {
  if (centers.empty()) throw Error(ErrorCode::NoNeighbors, "interpolation needs at least one neighbor");
  std::vector<double> w(centers.size(), 0.0);
  if (centers.size() == 1) {
    w[0] = 1.0;
    return w;
  }
  for (std::size_t j = 0; j < centers.size(); ++j) {
    if ((centers[j] - query).norm() < kCoincidenceEpsilon) {
      w[j] = 1.0;
      return w;
    }
  }
  double total = 0.0;
  for (std::size_t j = 0; j < centers.size(); ++j) {
    w[j] = 1.0 / (centers[j] - query).norm();
    total += w[j];
  }
  for (auto& x : w) x /= total;
  return w;
}

FeatureRow interpolate(const Vec3& query, std::span<const Vec3> centers, const FeatureMatrix& features) {
  if (centers.empty()) throw Error(ErrorCode::NoNeighbors, "interpolation needs at least one neighbor");
  if (static_cast<std::size_t>(features.rows()) != centers.size()) {
    throw Error(ErrorCode::ShapeMismatch, "one feature row per neighbor required");
  }
  if (centers.size() == 1) return features.row(0);
  for (std::size_t j = 0; j < centers.size(); ++j) {
    if ((centers[j] - query).norm() < kCoincidenceEpsilon) return features.row(static_cast<Eigen::Index>(j));
  }
  FeatureRow acc = FeatureRow::Zero(features.cols());
  double total = 0.0;
  for (std::size_t j = 0; j < centers.size(); ++j) {
    const double w = 1.0 / (centers[j] - query).norm();
    acc += w * features.row(static_cast<Eigen::Index>(j));
    total += w;
  }
  return acc / total;
}

FeatureMatrix interpolate_from_knn(const SparseVoxelGrid& grid, std::span<const Vec3> queries, const KnnResult& knn,
                                   std::vector<bool>* valid) {
  if (knn.query_count() != queries.size()) throw Error(ErrorCode::ShapeMismatch, "KNN result does not match queries");
  FeatureMatrix out = FeatureMatrix::Zero(static_cast<Eigen::Index>(queries.size()), grid.feature_dim());
  if (valid) valid->assign(queries.size(), false);
  std::vector<Vec3> centers;
  FeatureMatrix feats;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const auto& nb = knn.neighbors[q];
    if (nb.empty()) continue;
    centers.clear();
    feats.resize(static_cast<Eigen::Index>(nb.size()), grid.feature_dim());
    for (std::size_t j = 0; j < nb.size(); ++j) {
      centers.push_back(grid.centers()[nb[j].voxel]);
      feats.row(static_cast<Eigen::Index>(j)) = grid.features().row(static_cast<Eigen::Index>(nb[j].voxel));
    }
    out.row(static_cast<Eigen::Index>(q)) = interpolate(queries[q], centers, feats);
    if (valid) (*valid)[q] = true;
  }
  return out;
}

}  // namespace pointvox
