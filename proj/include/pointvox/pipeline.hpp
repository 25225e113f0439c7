#pragma once

#include <cstdint>
#include <iosfwd>
#include <set>
#include <string>
#include <vector>

#include "pointvox/config.hpp"
#include "pointvox/losses.hpp"
#include "pointvox/query_init.hpp"
#include "pointvox/range_image.hpp"
#include "pointvox/scene.hpp"
#include "pointvox/transformer.hpp"

namespace pointvox {

/// Defaults follow the published detector settings where they exist.
struct PipelineConfig {
  std::size_t references = 512;
  std::size_t neighbors = 128;  // voxel tokens and point tokens per reference
  double voxel_radius = 8.0;
  double point_radius = 3.2;
  Eigen::Index model_dim = 128;
  Eigen::Index ffn_dim = 512;
  Eigen::Index heads = 4;
  int blocks = 1;
  std::size_t interp_k = 8;
  int knn_window = 2;
  PosEncodingMode pos_encoding = PosEncodingMode::ContextualRelative;
  SamplingStrategy sampling = SamplingStrategy::SemanticFps;
  SelectionMode ball_mode = SelectionMode::Random;
  int kernel = 16;
  RangeImageSpec range_image;
  double sensor_height = 1.8;
  Vec3 voxel_size{0.1, 0.1, 0.15};
  int backbone_stride = 8;  // token voxels are voxel_size * stride (x, y, z)
  Vec3 range_min{-75.2, -75.2, -2.0};
  Vec3 range_max{75.2, 75.2, 4.0};
  bool seeded_bev_linear = false;
  std::uint64_t seed = 0;

  void validate() const;
  VoxelGridSpec grid_spec() const;
  static PipelineConfig from_config(const KeyValueConfig& cfg);
  static const std::set<std::string>& config_keys();
};

struct PipelineDiagnostics {
  std::size_t points = 0;
  std::size_t voxels = 0;
  std::size_t bev_voxels = 0;
  std::size_t foreground_bev_voxels = 0;
  std::size_t references = 0;
  std::size_t foreground_references = 0;
  std::size_t voxel_tokens = 0;
  std::size_t point_tokens = 0;
  std::size_t max_voxel_tokens = 0;
  std::size_t max_point_tokens = 0;
  double token_mask_rate = 0.0;
  std::uint64_t knn_window_scans = 0;
  std::uint64_t knn_queries = 0;
  std::uint64_t ball_candidates = 0;
  double seg_loss = 0.0;
  double offset_loss = 0.0;
  double cls_loss = 0.0;
  double cls_loss_floor = 0.0;  // label entropy, the minimum reachable cls loss
  double head_cls_loss = 0.0;   // seeded linear head on the fused features
  loss::RegLoss reg;
  double feature_checksum = 0.0;
  double elapsed_ms = 0.0;  // the only non-deterministic field

  /// `key,value` rows.
  void write_csv(std::ostream& out) const;
};

struct PipelineResult {
  QuerySet queries;
  FeatureMatrix fused;
  PipelineDiagnostics diagnostics;
};

/// voxelize -> collapse -> init queries -> voxel and point tokens ->
/// transformer blocks -> losses against oracle targets (oracle predictions
/// for the segmentation, offset, classification and regression terms).
PipelineResult run_pipeline(const Scene& scene, const PipelineConfig& config);

}  // namespace pointvox
