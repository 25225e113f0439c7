#pragma once

#include <span>
#include <vector>

#include "pointvox/core.hpp"

namespace pointvox::loss {

/// Lower bound applied to every probability before it enters a logarithm.
inline constexpr double kProbEpsilon = 1e-7;
inline constexpr double kDefaultBeta = 1.0;

struct SegBatch {
  std::vector<double> probs;  // predicted foreground probability per voxel
  std::vector<int> labels;    // 0 or 1
};

struct OffsetBatch {
  std::vector<Vec3> predicted;  // foreground rows only
  std::vector<Vec3> targets;
};

struct ClsBatch {
  std::vector<double> scores;  // predicted score per reference point
  std::vector<double> labels;  // centerness in [0, 1]
};

struct BoxParams {
  Vec3 center;
  Vec3 size;
  double yaw = 0.0;
};

struct RegLoss {
  double center = 0.0;
  double size = 0.0;
  double angle = 0.0;

  double total() const { return center + size + angle; }
};

double smooth_l1(double error, double beta = kDefaultBeta);

/// -t ln p - (1 - t) ln(1 - p), each log argument floored at kProbEpsilon.
double binary_cross_entropy(double prob, double target);

/// Mean binary cross entropy over voxels. EmptyBatch when no voxels.
double seg_loss(const SegBatch& b);

/// Mean over foreground rows of the summed per-axis smooth-l1. EmptyBatch when no rows.
double offset_loss(const OffsetBatch& b, double beta = kDefaultBeta);

/// (min(f,b)/max(f,b) * min(l,r)/max(l,r) * min(t,d)/max(t,d))^(1/3) from the
/// distances to opposite faces in the box frame; 0 outside the box.
double centerness_target(const Vec3& p, const BoundingBox3D& box);

/// Mean soft-label binary cross entropy. EmptyBatch when no rows.
double cls_loss(const ClsBatch& b);

/// Mean binary entropy of the labels: the minimum cls_loss over all predictions.
double cls_loss_floor(std::span<const double> labels);

/// Per component means over pairs: smooth-l1 on the center delta, on the
/// log size ratio, and on sin(yaw delta). EmptyBatch when no pairs.
RegLoss reg_loss(std::span<const BoxParams> predicted, std::span<const BoxParams> targets, double beta = kDefaultBeta);

}  // namespace pointvox::loss
