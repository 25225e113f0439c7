#include "pointvox/losses.hpp"

#include <algorithm>
#include <cmath>

namespace pointvox::loss {

double smooth_l1(double error, double beta) {
  const double a = std::abs(error);
  return a < beta ? 0.5 * a * a / beta : a - 0.5 * beta;
}

double binary_cross_entropy(double prob, double target) {
  double loss = 0.0;
  if (target > 0.0) loss -= target * std::log(std::max(prob, kProbEpsilon));
  if (target < 1.0) loss -= (1.0 - target) * std::log(std::max(1.0 - prob, kProbEpsilon));
  return loss;
}

double seg_loss(const SegBatch& b) {
  if (b.probs.empty()) throw Error(ErrorCode::EmptyBatch, "segmentation loss over zero voxels");
  if (b.probs.size() != b.labels.size()) throw Error(ErrorCode::ShapeMismatch, "one label per voxel required");
  double sum = 0.0;
  for (std::size_t i = 0; i < b.probs.size(); ++i) {
    if (b.labels[i] != 0 && b.labels[i] != 1) throw Error(ErrorCode::InvalidArgument, "segmentation labels are 0/1");
    sum += binary_cross_entropy(b.probs[i], b.labels[i]);
  }
  return sum / static_cast<double>(b.probs.size());
}

double offset_loss(const OffsetBatch& b, double beta) {
  if (b.predicted.empty()) throw Error(ErrorCode::EmptyBatch, "offset loss over zero foreground voxels");
  if (b.predicted.size() != b.targets.size()) throw Error(ErrorCode::ShapeMismatch, "one target per offset required");
  double sum = 0.0;
  for (std::size_t i = 0; i < b.predicted.size(); ++i) {
    const Vec3 e = b.predicted[i] - b.targets[i];
    for (int a = 0; a < 3; ++a) sum += smooth_l1(e[a], beta);
  }
  return sum / static_cast<double>(b.predicted.size());
}

double centerness_target(const Vec3& p, const BoundingBox3D& box) {
  if (!point_in_box(p, box)) return 0.0;
  const Vec3 local = box.to_local(p);
  const Vec3 half = 0.5 * box.size();
  double product = 1.0;
  for (int a = 0; a < 3; ++a) {
    const double near_face = half[a] - local[a];
    const double far_face = half[a] + local[a];
    product *= std::min(near_face, far_face) / std::max(near_face, far_face);
  }
  return std::cbrt(std::max(product, 0.0));
}

double cls_loss(const ClsBatch& b) {
  if (b.scores.empty()) throw Error(ErrorCode::EmptyBatch, "classification loss over zero references");
  if (b.scores.size() != b.labels.size()) throw Error(ErrorCode::ShapeMismatch, "one label per score required");
  double sum = 0.0;
  for (std::size_t i = 0; i < b.scores.size(); ++i) {
    if (!(b.labels[i] >= 0.0 && b.labels[i] <= 1.0)) throw Error(ErrorCode::InvalidArgument, "labels lie in [0, 1]");
    sum += binary_cross_entropy(b.scores[i], b.labels[i]);
  }
  return sum / static_cast<double>(b.scores.size());
}

double cls_loss_floor(std::span<const double> labels) {
  if (labels.empty()) throw Error(ErrorCode::EmptyBatch, "entropy of zero labels");
  double sum = 0.0;
  for (double t : labels) sum += binary_cross_entropy(t, t);
  return sum / static_cast<double>(labels.size());
}

RegLoss reg_loss(std::span<const BoxParams> predicted, std::span<const BoxParams> targets, double beta) {
  if (predicted.empty()) throw Error(ErrorCode::EmptyBatch, "regression loss over zero boxes");
  if (predicted.size() != targets.size()) throw Error(ErrorCode::ShapeMismatch, "one target per predicted box");
  RegLoss out;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const auto& p = predicted[i];
    const auto& t = targets[i];
    if ((p.size.array() <= 0.0).any() || (t.size.array() <= 0.0).any()) {
      throw Error(ErrorCode::InvalidArgument, "box sizes must be positive");
    }
    for (int a = 0; a < 3; ++a) {
      out.center += smooth_l1(p.center[a] - t.center[a], beta);
      out.size += smooth_l1(std::log(p.size[a] / t.size[a]), beta);
    }
    out.angle += smooth_l1(std::sin(p.yaw - t.yaw), beta);
  }
  const auto n = static_cast<double>(predicted.size());
  out.center /= n;
  out.size /= n;
  out.angle /= n;
  return out;
}

}  // namespace pointvox::loss
