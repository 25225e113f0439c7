#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstddef>
#include <cstdint>
#include <vector>

#include "pointvox/error.hpp"

namespace pointvox {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

// Row-major so that one point / voxel / token feature is one contiguous row.
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using FeatureRow = Eigen::RowVectorXd;

/// Columnar xyz positions plus optional per-point feature rows.
///
/// An empty feature matrix (0 columns) means "no features". Construction
/// validates that every coordinate is finite and that the feature matrix has
/// one row per point.
class PointCloud {
 public:
  PointCloud() = default;
  explicit PointCloud(std::vector<Vec3> positions);
  PointCloud(std::vector<Vec3> positions, FeatureMatrix features);

  std::size_t size() const noexcept { return positions_.size(); }
  bool empty() const noexcept { return positions_.empty(); }
  bool has_features() const noexcept { return features_.cols() > 0; }
  Eigen::Index feature_dim() const noexcept { return features_.cols(); }

  const std::vector<Vec3>& positions() const noexcept { return positions_; }
  const FeatureMatrix& features() const noexcept { return features_; }
  const Vec3& position(std::size_t i) const { return positions_[i]; }

 private:
  std::vector<Vec3> positions_;
  FeatureMatrix features_;
};

/// Rigid motion stored as a 4x4 homogeneous matrix.
class RigidTransform {
 public:
  RigidTransform() : matrix_(Eigen::Matrix4d::Identity()) {}

  /// Throws InvalidArgument unless the rotation block is orthonormal with
  /// positive determinant and the last row is [0, 0, 0, 1].
  explicit RigidTransform(const Eigen::Matrix4d& matrix);

  static RigidTransform identity() { return {}; }
  static RigidTransform from_rotation_translation(const Eigen::Matrix3d& rotation, const Vec3& translation);
  static RigidTransform translation(const Vec3& t);
  static RigidTransform rotation_z(double angle);
  static RigidTransform rotation(const Vec3& axis, double angle);

  const Eigen::Matrix4d& matrix() const noexcept { return matrix_; }
  Eigen::Matrix3d rotation_block() const { return matrix_.topLeftCorner<3, 3>(); }
  Vec3 translation_part() const { return matrix_.topRightCorner<3, 1>(); }

  Vec3 apply(const Vec3& p) const { return rotation_block() * p + translation_part(); }
  PointCloud apply(const PointCloud& pc) const;

  RigidTransform inverse() const;

  /// (a * b).apply(p) == a.apply(b.apply(p))
  friend RigidTransform operator*(const RigidTransform& a, const RigidTransform& b);

 private:
  struct Unchecked {};
  RigidTransform(const Eigen::Matrix4d& m, Unchecked) : matrix_(m) {}

  Eigen::Matrix4d matrix_;
};

struct SphericalCoordinate {
  double azimuth = 0.0;      // (-pi, pi]
  double inclination = 0.0;  // [-pi/2, pi/2]
  double range = 0.0;        // >= 0
};

SphericalCoordinate cartesian_to_spherical(const Vec3& p);
Vec3 spherical_to_cartesian(const SphericalCoordinate& s);

/// Wraps an angle into (-pi, pi].
double normalize_angle(double angle);

/// Oriented box: yaw rotates the length axis away from +x about +z.
class BoundingBox3D {
 public:
  BoundingBox3D(const Vec3& center, const Vec3& size, double yaw);

  const Vec3& center() const noexcept { return center_; }
  const Vec3& size() const noexcept { return size_; }
  double yaw() const noexcept { return yaw_; }

  Vec3 to_local(const Vec3& p) const;
  Vec3 to_world(const Vec3& local) const;

  /// Box after moving it with a rigid transform whose rotation is about +z.
  BoundingBox3D transformed(const RigidTransform& t) const;

 private:
  Vec3 center_;
  Vec3 size_;
  double yaw_;
};

bool point_in_box(const Vec3& p, const BoundingBox3D& box, bool ignore_height = false);

/// Counter-based generator: draw i is splitmix64(seed + (i + 1) * golden).
///
/// The output depends only on (seed, counter), so sequences are bit-exact on
/// every platform. Child generators for parallel work come from fork(), which
/// derives a new seed instead of sharing state.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Unbiased uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);
  /// Standard normal via Box-Muller (two draws per call, no caching).
  double normal();

  SeededRng fork(std::uint64_t stream) const;

  /// min(count, population) distinct indices from [0, population), uniformly
  /// without replacement (partial Fisher-Yates). Returned in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t population, std::size_t count);

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace pointvox
