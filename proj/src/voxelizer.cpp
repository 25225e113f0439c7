#include "pointvox/voxelizer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <string>

namespace pointvox {

// ---------------------------------------------------------------------------
// VoxelGridSpec

void VoxelGridSpec::validate() const {
  if (!origin.allFinite()) throw Error(ErrorCode::InvalidArgument, "grid origin must be finite");
  if (!voxel_size.allFinite() || (voxel_size.array() <= 0.0).any()) {
    throw Error(ErrorCode::InvalidArgument, "voxel sizes must be positive");
  }
  if (extents[0] <= 0 || extents[1] <= 0 || extents[2] <= 0) {
    throw Error(ErrorCode::InvalidArgument, "grid extents must be positive");
  }
}

CellIndex VoxelGridSpec::cell_of_unbounded(const Vec3& p) const {
  const Vec3 rel = ((p - origin).array() / voxel_size.array()).floor();
  const auto clamp_int = [](double v) {
    constexpr double lim = 1e9;
    return static_cast<int>(std::clamp(v, -lim, lim));
  };
  return {clamp_int(rel.x()), clamp_int(rel.y()), clamp_int(rel.z())};
}

std::optional<CellIndex> VoxelGridSpec::cell_of(const Vec3& p) const {
  const CellIndex c = cell_of_unbounded(p);
  if (!contains(c)) return std::nullopt;
  return c;
}

bool VoxelGridSpec::contains(const CellIndex& c) const {
  return c.x >= 0 && c.y >= 0 && c.z >= 0 && c.x < extents[0] && c.y < extents[1] && c.z < extents[2];
}

Vec3 VoxelGridSpec::center_of(const CellIndex& c) const {
  return origin + (Vec3(c.x, c.y, c.z).array() + 0.5).matrix().cwiseProduct(voxel_size);
}

// ---------------------------------------------------------------------------
// SparseVoxelGrid

SparseVoxelGrid::SparseVoxelGrid(VoxelGridSpec spec, std::vector<CellIndex> cells, FeatureMatrix features)
    : spec_(std::move(spec)), cells_(std::move(cells)), features_(std::move(features)) {
  spec_.validate();
  if (static_cast<std::size_t>(features_.rows()) != cells_.size()) {
    throw Error(ErrorCode::ShapeMismatch, "one feature row per voxel required");
  }
  lookup_.reserve(cells_.size());
  centers_.reserve(cells_.size());
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    if (!spec_.contains(cells_[i])) throw Error(ErrorCode::OutOfBounds, "voxel index outside grid extents");
    if (!lookup_.emplace(cells_[i], i).second) throw Error(ErrorCode::InvalidArgument, "duplicate voxel index");
    centers_.push_back(spec_.center_of(cells_[i]));
  }
}

std::optional<std::size_t> SparseVoxelGrid::find(const CellIndex& c) const {
  const auto it = lookup_.find(c);
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

SparseVoxelGrid SparseVoxelGrid::with_features(FeatureMatrix features) const {
  return SparseVoxelGrid(spec_, cells_, std::move(features));
}

// ---------------------------------------------------------------------------
// voxelize

SparseVoxelGrid voxelize(const PointCloud& pc, const VoxelGridSpec& spec, Reducer reducer) {
  spec.validate();
  const bool surrogate = !pc.has_features();
  const Eigen::Index dim = surrogate ? 4 : pc.feature_dim();

  std::unordered_map<CellIndex, std::size_t, CellIndexHash> slot_of;
  std::vector<CellIndex> cells;
  std::vector<std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const auto cell = spec.cell_of(pc.position(i));
    if (!cell) continue;
    const auto [it, inserted] = slot_of.emplace(*cell, cells.size());
    if (inserted) {
      cells.push_back(*cell);
      members.emplace_back();
    }
    members[it->second].push_back(i);
  }
  if (cells.empty()) throw Error(ErrorCode::EmptyGrid, "no point falls inside the voxel grid extents");

  std::vector<std::size_t> order(cells.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return cells[a] < cells[b]; });

  std::vector<CellIndex> sorted_cells;
  sorted_cells.reserve(cells.size());
  FeatureMatrix features(static_cast<Eigen::Index>(cells.size()), dim);
  for (std::size_t r = 0; r < order.size(); ++r) {
    const std::size_t slot = order[r];
    sorted_cells.push_back(cells[slot]);
    const auto& idx = members[slot];
    const Vec3 center = spec.center_of(cells[slot]);
    const auto row_of = [&](std::size_t point) -> FeatureRow {
      if (!surrogate) return pc.features().row(static_cast<Eigen::Index>(point));
      return (pc.position(point) - center).transpose();
    };
    FeatureRow acc = row_of(idx.front());
    for (std::size_t m = 1; m < idx.size(); ++m) {
      if (reducer == Reducer::Max) {
        acc = acc.cwiseMax(row_of(idx[m]));
      } else {
        acc += row_of(idx[m]);
      }
    }
    if (reducer == Reducer::Mean) acc /= static_cast<double>(idx.size());
    const auto row = static_cast<Eigen::Index>(r);
    if (surrogate) {
      features.row(row).head(3) = acc;
      features(row, 3) = static_cast<double>(idx.size());
    } else {
      features.row(row) = acc;
    }
  }
  return SparseVoxelGrid(spec, std::move(sorted_cells), std::move(features));
}

// ---------------------------------------------------------------------------
// BEV

BevGridSpec BevGridSpec::from(const VoxelGridSpec& spec) {
  BevGridSpec b;
  b.origin = spec.origin.head<2>();
  b.cell_size = spec.voxel_size.head<2>();
  b.nx = spec.extents[0];
  b.ny = spec.extents[1];
  return b;
}

Vec2 BevGridSpec::center_of(const BevCell& c) const {
  return origin + Vec2(c.x + 0.5, c.y + 0.5).cwiseProduct(cell_size);
}

std::vector<Vec2> SparseBevGrid::centers() const {
  std::vector<Vec2> out;
  out.reserve(cells.size());
  for (const auto& c : cells) out.push_back(spec.center_of(c));
  return out;
}

SparseBevGrid collapse_height(const SparseVoxelGrid& grid) {
  SparseBevGrid bev;
  bev.spec = BevGridSpec::from(grid.spec());
  // Cells are lexicographically sorted, so a height column is a contiguous run.
  std::vector<std::pair<std::size_t, std::size_t>> runs;
  const auto& cells = grid.cells();
  for (std::size_t i = 0; i < cells.size();) {
    std::size_t j = i + 1;
    while (j < cells.size() && cells[j].x == cells[i].x && cells[j].y == cells[i].y) ++j;
    runs.emplace_back(i, j);
    i = j;
  }
  bev.features.resize(static_cast<Eigen::Index>(runs.size()), grid.feature_dim());
  bev.cells.reserve(runs.size());
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto [begin, end] = runs[r];
    bev.cells.push_back({cells[begin].x, cells[begin].y});
    FeatureRow acc = grid.features().row(static_cast<Eigen::Index>(begin));
    for (std::size_t k = begin + 1; k < end; ++k) acc = acc.cwiseMax(grid.features().row(static_cast<Eigen::Index>(k)));
    bev.features.row(static_cast<Eigen::Index>(r)) = acc;
  }
  return bev;
}

BevFeatureMap::BevFeatureMap(BevGridSpec spec, Eigen::Index dim) : spec_(std::move(spec)) {
  if (spec_.nx <= 0 || spec_.ny <= 0) throw Error(ErrorCode::InvalidArgument, "BEV raster must be non-empty");
  data_ = FeatureMatrix::Zero(static_cast<Eigen::Index>(spec_.nx) * spec_.ny, dim);
}

BevFeatureMap densify(const SparseBevGrid& bev) {
  BevFeatureMap map(bev.spec, bev.features.cols());
  for (std::size_t i = 0; i < bev.cells.size(); ++i) {
    const auto& c = bev.cells[i];
    if (c.x < 0 || c.y < 0 || c.x >= bev.spec.nx || c.y >= bev.spec.ny) {
      throw Error(ErrorCode::OutOfBounds, "BEV cell outside raster");
    }
    map.cell(c.x, c.y) = bev.features.row(static_cast<Eigen::Index>(i));
  }
  return map;
}

BevFeatureMap apply_cell_linear(const BevFeatureMap& map, const Eigen::MatrixXd& weights, const Eigen::VectorXd& bias) {
  if (weights.cols() != map.dim() || bias.size() != weights.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "cell linear map does not match raster dimension");
  }
  BevFeatureMap out(map.spec(), weights.rows());
  out.data() = (map.data() * weights.transpose()).rowwise() + bias.transpose();
  return out;
}

FeatureRow bilinear_lookup(const BevFeatureMap& map, const Vec2& xy, bool clamp) {
  const auto& spec = map.spec();
  const Vec2 extent = Vec2(spec.nx, spec.ny).cwiseProduct(spec.cell_size);
  Vec2 rel = xy - spec.origin;
  if (!xy.allFinite()) throw Error(ErrorCode::OutOfBounds, "non-finite BEV query");
  const bool inside = rel.x() >= 0.0 && rel.y() >= 0.0 && rel.x() <= extent.x() && rel.y() <= extent.y();
  if (!inside) {
    if (!clamp) throw Error(ErrorCode::OutOfBounds, "BEV query outside raster extent");
    rel = rel.cwiseMax(Vec2::Zero()).cwiseMin(extent);
  }
  // Continuous cell coordinates with centers at integers.
  const double u = std::clamp(rel.x() / spec.cell_size.x() - 0.5, 0.0, static_cast<double>(spec.nx - 1));
  const double v = std::clamp(rel.y() / spec.cell_size.y() - 0.5, 0.0, static_cast<double>(spec.ny - 1));
  const int x0 = std::min(static_cast<int>(std::floor(u)), spec.nx - 1);
  const int y0 = std::min(static_cast<int>(std::floor(v)), spec.ny - 1);
  const int x1 = std::min(x0 + 1, spec.nx - 1);
  const int y1 = std::min(y0 + 1, spec.ny - 1);
  const double fx = u - x0;
  const double fy = v - y0;
  FeatureRow out = (1.0 - fx) * (1.0 - fy) * map.cell(x0, y0);
  if (fx > 0.0) out += fx * (1.0 - fy) * map.cell(x1, y0);
  if (fy > 0.0) out += (1.0 - fx) * fy * map.cell(x0, y1);
  if (fx > 0.0 && fy > 0.0) out += fx * fy * map.cell(x1, y1);
  return out;
}

void write_grid_csv(std::ostream& out, const SparseVoxelGrid& grid) {
  out << "ix,iy,iz";
  for (Eigen::Index j = 0; j < grid.feature_dim(); ++j) out << ",f" << j;
  out << '\n' << std::setprecision(17);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto& c = grid.cells()[i];
    out << c.x << ',' << c.y << ',' << c.z;
    for (Eigen::Index j = 0; j < grid.feature_dim(); ++j) out << ',' << grid.features()(static_cast<Eigen::Index>(i), j);
    out << '\n';
  }
}

void write_bev_csv(std::ostream& out, const SparseBevGrid& bev) {
  out << "ix,iy";
  for (Eigen::Index j = 0; j < bev.features.cols(); ++j) out << ",f" << j;
  out << '\n' << std::setprecision(17);
  for (std::size_t i = 0; i < bev.cells.size(); ++i) {
    out << bev.cells[i].x << ',' << bev.cells[i].y;
    for (Eigen::Index j = 0; j < bev.features.cols(); ++j) out << ',' << bev.features(static_cast<Eigen::Index>(i), j);
    out << '\n';
  }
}

}  // namespace pointvox
