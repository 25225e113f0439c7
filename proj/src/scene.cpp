#include "pointvox/scene.hpp"

#include <cmath>
#include <numbers>

namespace pointvox {

void SceneSpec::validate() const {
  if (!(extent > 0.0)) throw Error(ErrorCode::InvalidArgument, "scene extent must be positive");
  if (objects < 0 || points_per_object < 0 || background_points < 0) {
    throw Error(ErrorCode::InvalidArgument, "scene counts must be >= 0");
  }
  if (!(noise >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise sigma must be >= 0");
}

const std::set<std::string>& SceneSpec::config_keys() {
  static const std::set<std::string> keys{"extent", "objects", "points_per_object", "background_points",
                                          "noise", "seed", "augment"};
  return keys;
}

SceneSpec SceneSpec::from_config(const KeyValueConfig& cfg) {
  SceneSpec s;
  s.extent = cfg.get_double("extent", s.extent);
  s.objects = static_cast<int>(cfg.get_int("objects", s.objects));
  s.points_per_object = static_cast<int>(cfg.get_int("points_per_object", s.points_per_object));
  s.background_points = static_cast<int>(cfg.get_int("background_points", s.background_points));
  s.noise = cfg.get_double("noise", s.noise);
  s.seed = static_cast<std::uint64_t>(cfg.get_int("seed", static_cast<long long>(s.seed)));
  s.augment = cfg.get_bool("augment", s.augment);
  s.validate();
  return s;
}

namespace {

constexpr int kPlacementAttempts = 1000;
constexpr double kSensorClearance = 3.0;

Vec3 sample_on_surface(const BoundingBox3D& box, SeededRng& rng) {
  const Vec3 s = box.size();
  const double areas[3] = {s.y() * s.z(), s.x() * s.z(), s.x() * s.y()};  // faces normal to x, y, z
  const double total = 2.0 * (areas[0] + areas[1] + areas[2]);
  double pick = rng.uniform() * total;
  int face_axis = 2;
  for (int a = 0; a < 3; ++a) {
    if (pick < 2.0 * areas[a]) {
      face_axis = a;
      break;
    }
    pick -= 2.0 * areas[a];
  }
  Vec3 local;
  for (int a = 0; a < 3; ++a) local[a] = rng.uniform(-0.5, 0.5) * s[a];
  local[face_axis] = (rng.uniform() < 0.5 ? -0.5 : 0.5) * s[face_axis];
  return box.to_world(local);
}

}  // namespace

Scene gen_scene(const SceneSpec& spec) {
  spec.validate();
  SeededRng rng(spec.seed);

  std::vector<BoundingBox3D> boxes;
  std::vector<double> radii;
  for (int b = 0; b < spec.objects; ++b) {
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
      const Vec3 size(rng.uniform(3.5, 5.0), rng.uniform(1.6, 2.2), rng.uniform(1.4, 2.0));
      const double radius = 0.5 * std::hypot(size.x(), size.y());
      const double reach = spec.extent - radius;
      const double x = rng.uniform(-reach, reach);
      const double y = rng.uniform(-reach, reach);
      const double yaw = rng.uniform(-std::numbers::pi, std::numbers::pi);
      if (reach <= 0.0 || std::hypot(x, y) < radius + kSensorClearance) continue;
      bool clear = true;
      for (std::size_t o = 0; o < boxes.size() && clear; ++o) {
        clear = std::hypot(x - boxes[o].center().x(), y - boxes[o].center().y()) > radius + radii[o];
      }
      if (!clear) continue;
      boxes.emplace_back(Vec3(x, y, 0.5 * size.z()), size, yaw);
      radii.push_back(radius);
      placed = true;
    }
    if (!placed) {
      throw Error(ErrorCode::PlacementFailure, "could not place box " + std::to_string(b) + " after " +
                                                   std::to_string(kPlacementAttempts) + " attempts");
    }
  }

  std::vector<Vec3> points;
  points.reserve(static_cast<std::size_t>(spec.objects) * static_cast<std::size_t>(spec.points_per_object) +
                 static_cast<std::size_t>(spec.background_points));
  const auto jitter = [&]() -> Vec3 {
    if (spec.noise == 0.0) return Vec3::Zero();
    return Vec3(rng.normal(), rng.normal(), rng.normal()) * spec.noise;
  };
  for (const auto& box : boxes) {
    for (int i = 0; i < spec.points_per_object; ++i) points.push_back(sample_on_surface(box, rng) + jitter());
  }
  for (int i = 0; i < spec.background_points; ++i) {
    const double r = spec.extent * std::sqrt(rng.uniform());
    const double a = rng.uniform(-std::numbers::pi, std::numbers::pi);
    points.push_back(Vec3(r * std::cos(a), r * std::sin(a), 0.0) + jitter());
  }

  Scene scene;
  if (spec.augment) {
    scene.augmentation.push(GlobalRotation{rng.uniform(-std::numbers::pi / 4, std::numbers::pi / 4)});
    if (rng.uniform() < 0.5) scene.augmentation.push(FlipAxis{1});
    scene.augmentation.push(GlobalScale{rng.uniform(0.95, 1.05)});
  }
  for (auto& p : points) p = scene.augmentation.apply(p);
  for (const auto& b : boxes) scene.boxes.push_back(scene.augmentation.apply(b));
  scene.cloud = PointCloud(std::move(points));
  return scene;
}

}  // namespace pointvox
