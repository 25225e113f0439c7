#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <numbers>
#include <span>
#include <variant>
#include <vector>

#include "pointvox/core.hpp"

namespace pointvox {

// ---------------------------------------------------------------------------
// Augmentation log

struct GlobalRotation {
  double angle = 0.0;  // about +z, radians
};
struct FlipAxis {
  int axis = 1;  // coordinate that is negated: 0 = x, 1 = y
};
struct GlobalScale {
  double factor = 1.0;
};
/// Points [begin, end) of the cloud were pasted from other frames at their
/// original positions; no coordinate change to undo.
struct CopyPaste {
  std::size_t begin = 0;
  std::size_t end = 0;
};

using AugmentationStep = std::variant<GlobalRotation, FlipAxis, GlobalScale, CopyPaste>;

class AugmentationRecord {
 public:
  AugmentationRecord() = default;
  explicit AugmentationRecord(std::vector<AugmentationStep> steps);

  const std::vector<AugmentationStep>& steps() const noexcept { return steps_; }
  bool empty() const noexcept { return steps_.empty(); }
  void push(AugmentationStep step);

  /// Steps in recorded order.
  Vec3 apply(const Vec3& p) const;
  PointCloud apply(const PointCloud& pc) const;
  BoundingBox3D apply(const BoundingBox3D& box) const;
  /// Inverses in reverse order.
  Vec3 invert(const Vec3& p) const;

 private:
  std::vector<AugmentationStep> steps_;
};

PointCloud inverse_augment(const PointCloud& points, const AugmentationRecord& rec);
std::vector<Vec3> inverse_augment(std::span<const Vec3> points, const AugmentationRecord& rec);

// One step per line: `rotate <rad>`, `flip <axis>`, `scale <f>`, `paste <begin> <end>`.
void write_augmentation(std::ostream& out, const AugmentationRecord& rec);
AugmentationRecord read_augmentation(std::istream& in);
AugmentationRecord read_augmentation(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Virtual range image

struct RangeImageSpec {
  int rows = 64;
  int cols = 2048;
  double inclination_min = -25.0 * std::numbers::pi / 180.0;
  double inclination_max = 15.0 * std::numbers::pi / 180.0;

  void validate() const;
};

struct PixelCoord {
  int row = 0;
  int col = 0;
};

/// Spherical raster over all points; each pixel owns a contiguous [start, end)
/// range of a pixel-sorted point array (CSR layout). Row 0 is the highest
/// inclination band and column 0 starts just above azimuth -pi.
class VirtualRangeImage {
 public:
  /// to_sensor maps cloud coordinates into the frame of the sensor whose
  /// spherical geometry defines the raster.
  static VirtualRangeImage build(const PointCloud& points, const RigidTransform& to_sensor, const RangeImageSpec& spec);

  const RangeImageSpec& spec() const noexcept { return spec_; }
  const RigidTransform& to_sensor() const noexcept { return to_sensor_; }
  std::size_t size() const noexcept { return original_index_.size(); }

  PixelCoord pixel_of(const SphericalCoordinate& s) const;
  /// Column before wrapping into [0, cols); used for window arithmetic.
  long long unwrapped_col(double azimuth) const;
  int row_of(double inclination) const;

  std::uint32_t start(int row, int col) const { return offsets_[pixel_id(row, col)]; }
  std::uint32_t end(int row, int col) const { return offsets_[pixel_id(row, col) + 1]; }

  // Sorted-array views. Positions are in the input cloud's frame.
  const std::vector<std::uint32_t>& offsets() const noexcept { return offsets_; }
  const std::vector<Vec3>& sorted_positions() const noexcept { return positions_; }
  const std::vector<SphericalCoordinate>& sorted_spherical() const noexcept { return spherical_; }
  const std::vector<std::uint32_t>& original_index() const noexcept { return original_index_; }

  void write_debug_csv(std::ostream& out) const;

 private:
  std::size_t pixel_id(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(spec_.cols) + static_cast<std::size_t>(col);
  }

  RangeImageSpec spec_;
  RigidTransform to_sensor_;
  std::vector<std::uint32_t> offsets_;  // rows * cols + 1
  std::vector<Vec3> positions_;
  std::vector<SphericalCoordinate> spherical_;
  std::vector<std::uint32_t> original_index_;
};

enum class SelectionMode { Random, Sequential };

struct BallQueryRequest {
  double radius = 0.8;
  std::size_t max_neighbors = 32;
  int kernel = 16;  // full window side in pixels
  SelectionMode mode = SelectionMode::Random;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Fixed m x k slots; slots at or beyond count(q) are invalid (-1).
struct BallQueryResult {
  std::size_t max_neighbors = 0;
  std::vector<std::int64_t> indices;
  std::vector<std::uint32_t> counts;

  std::size_t query_count() const noexcept { return counts.size(); }
  std::size_t count(std::size_t q) const { return counts[q]; }
  bool valid(std::size_t q, std::size_t slot) const { return slot < counts[q]; }
  std::span<const std::int64_t> neighbors(std::size_t q) const {
    return {indices.data() + q * max_neighbors, counts[q]};
  }
};

struct BallQueryCounters {
  std::uint64_t queries = 0;
  std::uint64_t pixels_visited = 0;
  std::uint64_t candidates_inspected = 0;
  std::uint64_t kept = 0;

  BallQueryCounters& operator+=(const BallQueryCounters& o);
};

/// Radius test is strict (distance < radius) on the cloud-frame positions.
/// Random mode draws from the kept set, ordered by original index, with the
/// generator SeededRng(seed).fork(query index), so results do not depend on
/// the worker count. Sequential mode keeps the first k in window scan order.
BallQueryResult ball_query(const VirtualRangeImage& img, std::span<const Vec3> queries, const BallQueryRequest& req,
                           BallQueryCounters* counters = nullptr, unsigned workers = 1);

/// Exhaustive O(mn) scan with the same radius and selection rules
/// (Sequential keeps the first k by index).
BallQueryResult brute_force_ball_query(const PointCloud& pc, std::span<const Vec3> queries, const BallQueryRequest& req,
                                       BallQueryCounters* counters = nullptr);

/// True when every point within radius of the query must fall inside the
/// query's kernel window, so the window scan cannot miss a neighbor.
bool window_covers_ball(const VirtualRangeImage& img, const Vec3& query, double radius, int kernel);

}  // namespace pointvox
