#include "pointvox/core.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace pointvox {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptyGrid: return "EmptyGrid";
    case ErrorCode::InvalidCount: return "InvalidCount";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::NoNeighbors: return "NoNeighbors";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::PlacementFailure: return "PlacementFailure";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Config: return "Config";
  }
  return "Unknown";
}

// ---------------------------------------------------------------------------
// PointCloud

PointCloud::PointCloud(std::vector<Vec3> positions) : PointCloud(std::move(positions), FeatureMatrix()) {}

PointCloud::PointCloud(std::vector<Vec3> positions, FeatureMatrix features)
    : positions_(std::move(positions)), features_(std::move(features)) {
  if (features_.cols() > 0 && static_cast<std::size_t>(features_.rows()) != positions_.size()) {
    throw Error(ErrorCode::ShapeMismatch, "feature rows (" + std::to_string(features_.rows()) +
                                              ") != point count (" + std::to_string(positions_.size()) + ")");
  }
  if (features_.cols() == 0) {
    features_.resize(static_cast<Eigen::Index>(positions_.size()), 0);
  }
  for (std::size_t i = 0; i < positions_.size(); ++i) {
    if (!positions_[i].allFinite()) {
      throw Error(ErrorCode::InvalidArgument, "non-finite coordinate at point " + std::to_string(i));
    }
  }
}

// ---------------------------------------------------------------------------
// RigidTransform

namespace {

constexpr double kOrthoTol = 1e-9;

void check_rigid(const Eigen::Matrix4d& m) {
  if (!m.allFinite()) throw Error(ErrorCode::InvalidArgument, "transform has non-finite entries");
  const Eigen::Matrix3d r = m.topLeftCorner<3, 3>();
  const double ortho_err = (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (ortho_err >= kOrthoTol) throw Error(ErrorCode::InvalidArgument, "rotation block is not orthonormal");
  if (r.determinant() <= 0.0) throw Error(ErrorCode::InvalidArgument, "rotation block is a reflection");
  const Eigen::RowVector4d last = m.row(3);
  if (last != Eigen::RowVector4d(0, 0, 0, 1)) throw Error(ErrorCode::InvalidArgument, "last row must be [0,0,0,1]");
}

}  // namespace

RigidTransform::RigidTransform(const Eigen::Matrix4d& matrix) : matrix_(matrix) { check_rigid(matrix_); }

RigidTransform RigidTransform::from_rotation_translation(const Eigen::Matrix3d& rotation, const Vec3& translation) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return RigidTransform(m);
}

RigidTransform RigidTransform::translation(const Vec3& t) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topRightCorner<3, 1>() = t;
  return RigidTransform(m, Unchecked{});
}

RigidTransform RigidTransform::rotation_z(double angle) {
  return rotation(Vec3::UnitZ(), angle);
}

RigidTransform RigidTransform::rotation(const Vec3& axis, double angle) {
  if (!(axis.norm() > 0.0)) throw Error(ErrorCode::InvalidArgument, "rotation axis must be non-zero");
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
  return RigidTransform(m, Unchecked{});
}

PointCloud RigidTransform::apply(const PointCloud& pc) const {
  std::vector<Vec3> out;
  out.reserve(pc.size());
  for (const auto& p : pc.positions()) out.push_back(apply(p));
  return PointCloud(std::move(out), pc.features());
}

RigidTransform RigidTransform::inverse() const {
  const Eigen::Matrix3d rt = rotation_block().transpose();
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rt;
  m.topRightCorner<3, 1>() = -rt * translation_part();
  return RigidTransform(m, Unchecked{});
}

RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) {
  Eigen::Matrix4d m = a.matrix_ * b.matrix_;
  m.row(3) << 0, 0, 0, 1;
  return RigidTransform(m, RigidTransform::Unchecked{});
}

// ---------------------------------------------------------------------------
// Spherical coordinates

SphericalCoordinate cartesian_to_spherical(const Vec3& p) {
  const double horizontal = std::hypot(p.x(), p.y());
  SphericalCoordinate s;
  s.range = p.norm();
  if (s.range == 0.0) return s;
  s.azimuth = std::atan2(p.y(), p.x());
  // atan2 may return -pi for (-x, -0.0); the azimuth range is half-open at -pi.
  if (s.azimuth == -std::numbers::pi) s.azimuth = std::numbers::pi;
  s.inclination = std::atan2(p.z(), horizontal);
  return s;
}

Vec3 spherical_to_cartesian(const SphericalCoordinate& s) {
  const double c = std::cos(s.inclination);
  return {s.range * c * std::cos(s.azimuth), s.range * c * std::sin(s.azimuth), s.range * std::sin(s.inclination)};
}

double normalize_angle(double angle) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double a = std::remainder(angle, two_pi);  // [-pi, pi]
  if (a <= -std::numbers::pi) a += two_pi;
  return a;
}

// ---------------------------------------------------------------------------
// BoundingBox3D

BoundingBox3D::BoundingBox3D(const Vec3& center, const Vec3& size, double yaw)
    : center_(center), size_(size), yaw_(normalize_angle(yaw)) {
  if (!center.allFinite() || !size.allFinite() || !std::isfinite(yaw)) {
    throw Error(ErrorCode::InvalidArgument, "box parameters must be finite");
  }
  if ((size.array() <= 0.0).any()) throw Error(ErrorCode::InvalidArgument, "box size must be strictly positive");
}

Vec3 BoundingBox3D::to_local(const Vec3& p) const {
  const Vec3 d = p - center_;
  const double c = std::cos(yaw_);
  const double s = std::sin(yaw_);
  return {c * d.x() + s * d.y(), -s * d.x() + c * d.y(), d.z()};
}

Vec3 BoundingBox3D::to_world(const Vec3& local) const {
  const double c = std::cos(yaw_);
  const double s = std::sin(yaw_);
  return center_ + Vec3(c * local.x() - s * local.y(), s * local.x() + c * local.y(), local.z());
}

BoundingBox3D BoundingBox3D::transformed(const RigidTransform& t) const {
  const Eigen::Matrix3d r = t.rotation_block();
  if (std::abs(r(2, 2) - 1.0) > 1e-9) {
    throw Error(ErrorCode::InvalidArgument, "boxes only support rotations about +z");
  }
  const double delta_yaw = std::atan2(r(1, 0), r(0, 0));
  return BoundingBox3D(t.apply(center_), size_, yaw_ + delta_yaw);
}

bool point_in_box(const Vec3& p, const BoundingBox3D& box, bool ignore_height) {
  const Vec3 local = box.to_local(p);
  const Vec3 half = 0.5 * box.size();
  if (std::abs(local.x()) > half.x() || std::abs(local.y()) > half.y()) return false;
  return ignore_height || std::abs(local.z()) <= half.z();
}

// ---------------------------------------------------------------------------
// SeededRng

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t SeededRng::next_u64() {
  ++counter_;
  return splitmix64(seed_ + counter_ * 0x9E3779B97F4A7C15ULL);
}

double SeededRng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t SeededRng::below(std::uint64_t bound) {
  if (bound == 0) throw Error(ErrorCode::InvalidArgument, "SeededRng::below requires bound > 0");
  // Rejection on the top of the range keeps the draw unbiased.
  const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % bound + 1) % bound;
  for (;;) {
    const std::uint64_t x = next_u64();
    if (x <= limit) return x % bound;
  }
}

double SeededRng::normal() {
  double u1 = uniform();
  const double u2 = uniform();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

SeededRng SeededRng::fork(std::uint64_t stream) const {
  return SeededRng(splitmix64(seed_ ^ splitmix64(stream + 0x632BE59BD9B4E019ULL)));
}

std::vector<std::size_t> SeededRng::sample_without_replacement(std::size_t population, std::size_t count) {
  count = std::min(count, population);
  std::vector<std::size_t> pool(population);
  for (std::size_t i = 0; i < population; ++i) pool[i] = i;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(below(population - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return pool;
}

}  // namespace pointvox
