#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pointvox/core.hpp"
#include "pointvox/knn_interp.hpp"
#include "pointvox/query_init.hpp"
#include "pointvox/range_image.hpp"
#include "pointvox/voxelizer.hpp"

namespace pointvox {

enum class TokenKind : std::uint8_t { Voxel, Point };

/// Keys/values for one reference point. Masked rows never enter attention.
struct TokenSet {
  FeatureMatrix coords;  // L x 3
  FeatureMatrix features;  // L x d
  std::vector<TokenKind> kinds;
  std::vector<bool> valid;

  std::size_t size() const noexcept { return valid.size(); }
  std::size_t valid_count() const;

  static TokenSet empty(Eigen::Index dim);
  static TokenSet concat(const TokenSet& a, const TokenSet& b);
};

enum class PosEncodingMode { None, ContextualRelative, BiasRelative, Absolute };

const char* to_string(PosEncodingMode mode);
PosEncodingMode parse_pos_encoding(const std::string& name);

struct Linear {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out

  Eigen::Index in_dim() const { return weight.cols(); }
  Eigen::Index out_dim() const { return weight.rows(); }
};

struct LayerNormParams {
  Eigen::VectorXd gamma;
  Eigen::VectorXd beta;
  double eps = 1e-5;
};

/// One transformer block's parameters.
struct AttentionWeights {
  Eigen::Index dim = 128;
  Eigen::Index heads = 4;
  Eigen::Index ffn_dim = 512;

  Linear q, k, v, out;
  Linear ffn1, ffn2;
  LayerNormParams norm1, norm2;

  // Absolute: 3 -> dim -> dim perceptron, added to query and key inputs.
  Linear abs_pe1, abs_pe2;
  // BiasRelative: 3 -> heads, added to logits.
  Linear bias_pe;
  // ContextualRelative: 3 -> dim -> 2 * dim; first dim outputs are key-side,
  // the rest value-side, each split into heads of dim / heads.
  Linear ctx_pe1, ctx_pe2;

  Eigen::Index head_dim() const { return dim / heads; }

  /// Uniform in [-1/sqrt(dim), 1/sqrt(dim)] for every matrix and bias;
  /// layer norms start at gamma = 1, beta = 0.
  static AttentionWeights seeded(std::uint64_t seed, Eigen::Index dim = 128, Eigen::Index heads = 4,
                                 Eigen::Index ffn_dim = 512);

  /// Throws ShapeMismatch on inconsistent shapes.
  void validate() const;

  struct TensorRef {
    std::string name;
    double* data;
    Eigen::Index rows;
    Eigen::Index cols;
  };
  /// Every parameter tensor in a fixed order (used by snapshot I/O).
  /// Row-major element order; vectors have one column.
  std::vector<TensorRef> tensors();
};

/// Multi-head cross attention of each query over its token set, before any
/// residual. Rows with no valid token produce a zero row. Optionally returns
/// per query the softmax rows (heads x L, masked entries 0).
FeatureMatrix cross_attention(std::span<const Vec3> query_points, const FeatureMatrix& query_features,
                              std::span<const TokenSet> tokens, const AttentionWeights& w, PosEncodingMode mode,
                              std::vector<Eigen::MatrixXd>* attention = nullptr);

/// X = LN(Attn + F_query); Y = LN(FFN(X) + X).
FeatureMatrix transformer_block(std::span<const Vec3> query_points, const FeatureMatrix& query_features,
                                std::span<const TokenSet> tokens, const AttentionWeights& w, PosEncodingMode mode);

/// Runs one block per weight set in order, updating the query features.
FeatureMatrix attention_forward(const QuerySet& queries, std::span<const TokenSet> tokens,
                                std::span<const AttentionWeights> blocks, PosEncodingMode mode);

FeatureRow layer_norm(const FeatureRow& x, const LayerNormParams& p);

// ---------------------------------------------------------------------------
// Token generation

/// Uniform sample without replacement of min(l, in-radius) voxels whose
/// centers lie strictly within radius of ref. Always l rows; the rest masked.
TokenSet gen_voxel_tokens(const Vec3& ref, const SparseVoxelGrid& grid, double radius, std::size_t l, SeededRng& rng);

struct PointTokenParams {
  double radius = 3.2;
  std::size_t count = 128;
  int kernel = 16;
  SelectionMode mode = SelectionMode::Random;
  std::size_t interp_k = 8;
  int knn_window = 2;
};

struct PointTokenStats {
  BallQueryCounters ball;
  KnnCounters knn;
  std::size_t points_gathered = 0;
};

/// For every reference: range-image ball query (after undoing augmentation),
/// then conquer-fetch KNN over all gathered points at once and inverse-distance
/// interpolation. Token coordinates are the cloud's (augmented) positions.
/// Each result has params.count rows; rows past the ball-query count are masked.
std::vector<TokenSet> gen_point_tokens(std::span<const Vec3> refs, const AugmentationRecord& rec,
                                       const VirtualRangeImage& img, const PointCloud& cloud,
                                       const SparseVoxelGrid& grid, const PointTokenParams& params,
                                       std::uint64_t seed, PointTokenStats* stats = nullptr);

TokenSet gen_point_tokens(const Vec3& ref, const VirtualRangeImage& img, const PointCloud& cloud,
                          const SparseVoxelGrid& grid, const PointTokenParams& params, SeededRng& rng);

}  // namespace pointvox
