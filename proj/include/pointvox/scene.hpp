#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "pointvox/config.hpp"
#include "pointvox/core.hpp"
#include "pointvox/range_image.hpp"

namespace pointvox {

struct SceneSpec {
  double extent = 50.0;  // half-width of the square placement area, meters
  int objects = 10;
  int points_per_object = 500;
  int background_points = 5000;
  double noise = 0.02;  // per-axis Gaussian sigma, meters
  std::uint64_t seed = 0;
  bool augment = true;

  void validate() const;
  static SceneSpec from_config(const KeyValueConfig& cfg);
  static const std::set<std::string>& config_keys();
};

/// Cloud and boxes are in the augmented frame; `augmentation` undoes it.
struct Scene {
  PointCloud cloud;
  std::vector<BoundingBox3D> boxes;
  AugmentationRecord augmentation;
};

/// Object points first (box by box, sampled on box surfaces by face area),
/// then background points on the ground disc of radius `extent`.
/// Boxes stand on z = 0 and their footprint circles never overlap.
/// Throws PlacementFailure when a box cannot be placed in 1000 attempts.
Scene gen_scene(const SceneSpec& spec);

}  // namespace pointvox
