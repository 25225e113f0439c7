#include "pointvox/transformer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pointvox {

// ---------------------------------------------------------------------------
// TokenSet

std::size_t TokenSet::valid_count() const {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), true));
}

TokenSet TokenSet::empty(Eigen::Index dim) {
  TokenSet t;
  t.coords.resize(0, 3);
  t.features.resize(0, dim);
  return t;
}

TokenSet TokenSet::concat(const TokenSet& a, const TokenSet& b) {
  if (a.features.cols() != b.features.cols()) throw Error(ErrorCode::ShapeMismatch, "token feature dims differ");
  TokenSet t;
  t.coords.resize(a.coords.rows() + b.coords.rows(), 3);
  t.coords << a.coords, b.coords;
  t.features.resize(a.features.rows() + b.features.rows(), a.features.cols());
  t.features << a.features, b.features;
  t.kinds = a.kinds;
  t.kinds.insert(t.kinds.end(), b.kinds.begin(), b.kinds.end());
  t.valid = a.valid;
  t.valid.insert(t.valid.end(), b.valid.begin(), b.valid.end());
  return t;
}

const char* to_string(PosEncodingMode mode) {
  switch (mode) {
    case PosEncodingMode::None: return "none";
    case PosEncodingMode::ContextualRelative: return "contextual";
    case PosEncodingMode::BiasRelative: return "bias";
    case PosEncodingMode::Absolute: return "absolute";
  }
  return "unknown";
}

PosEncodingMode parse_pos_encoding(const std::string& name) {
  if (name == "none") return PosEncodingMode::None;
  if (name == "contextual") return PosEncodingMode::ContextualRelative;
  if (name == "bias") return PosEncodingMode::BiasRelative;
  if (name == "absolute") return PosEncodingMode::Absolute;
  throw Error(ErrorCode::Config, "unknown positional encoding '" + name + "' (none|contextual|bias|absolute)");
}

// ---------------------------------------------------------------------------
// Weights

namespace {

Linear seeded_linear(SeededRng& rng, Eigen::Index in, Eigen::Index out, double bound) {
  Linear l;
  l.weight.resize(out, in);
  l.bias.resize(out);
  for (Eigen::Index r = 0; r < out; ++r) {
    for (Eigen::Index c = 0; c < in; ++c) l.weight(r, c) = rng.uniform(-bound, bound);
  }
  for (Eigen::Index r = 0; r < out; ++r) l.bias(r) = rng.uniform(-bound, bound);
  return l;
}

LayerNormParams unit_norm(Eigen::Index dim) {
  return {Eigen::VectorXd::Ones(dim), Eigen::VectorXd::Zero(dim), 1e-5};
}

void check_linear(const Linear& l, Eigen::Index in, Eigen::Index out, const char* name) {
  if (l.weight.rows() != out || l.weight.cols() != in || l.bias.size() != out) {
    throw Error(ErrorCode::ShapeMismatch, std::string("weight '") + name + "' has wrong shape");
  }
  if (!l.weight.allFinite() || !l.bias.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, std::string("weight '") + name + "' is not finite");
  }
}

}  // namespace

AttentionWeights AttentionWeights::seeded(std::uint64_t seed, Eigen::Index dim, Eigen::Index heads,
                                          Eigen::Index ffn_dim) {
  if (heads < 1 || dim < 1 || dim % heads != 0) {
    throw Error(ErrorCode::ShapeMismatch, "model dim must be a positive multiple of the head count");
  }
  SeededRng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  AttentionWeights w;
  w.dim = dim;
  w.heads = heads;
  w.ffn_dim = ffn_dim;
  w.q = seeded_linear(rng, dim, dim, bound);
  w.k = seeded_linear(rng, dim, dim, bound);
  w.v = seeded_linear(rng, dim, dim, bound);
  w.out = seeded_linear(rng, dim, dim, bound);
  w.ffn1 = seeded_linear(rng, dim, ffn_dim, bound);
  w.ffn2 = seeded_linear(rng, ffn_dim, dim, bound);
  w.norm1 = unit_norm(dim);
  w.norm2 = unit_norm(dim);
  w.abs_pe1 = seeded_linear(rng, 3, dim, bound);
  w.abs_pe2 = seeded_linear(rng, dim, dim, bound);
  w.bias_pe = seeded_linear(rng, 3, heads, bound);
  w.ctx_pe1 = seeded_linear(rng, 3, dim, bound);
  w.ctx_pe2 = seeded_linear(rng, dim, 2 * dim, bound);
  return w;
}

void AttentionWeights::validate() const {
  if (heads < 1 || dim < 1 || dim % heads != 0 || ffn_dim < 1) {
    throw Error(ErrorCode::ShapeMismatch, "model dim must be a positive multiple of the head count");
  }
  check_linear(q, dim, dim, "q");
  check_linear(k, dim, dim, "k");
  check_linear(v, dim, dim, "v");
  check_linear(out, dim, dim, "out");
  check_linear(ffn1, dim, ffn_dim, "ffn1");
  check_linear(ffn2, ffn_dim, dim, "ffn2");
  check_linear(abs_pe1, 3, dim, "abs_pe1");
  check_linear(abs_pe2, dim, dim, "abs_pe2");
  check_linear(bias_pe, 3, heads, "bias_pe");
  check_linear(ctx_pe1, 3, dim, "ctx_pe1");
  check_linear(ctx_pe2, dim, 2 * dim, "ctx_pe2");
  for (const auto* n : {&norm1, &norm2}) {
    if (n->gamma.size() != dim || n->beta.size() != dim) throw Error(ErrorCode::ShapeMismatch, "layer norm shape");
  }
}

std::vector<AttentionWeights::TensorRef> AttentionWeights::tensors() {
  std::vector<TensorRef> out_refs;
  // Column-major W read row-major is W^T, hence the swapped shape.
  const auto add_linear = [&](const std::string& name, Linear& l) {
    out_refs.push_back({name + ".weight_t", l.weight.data(), l.weight.cols(), l.weight.rows()});
    out_refs.push_back({name + ".bias", l.bias.data(), l.bias.size(), 1});
  };
  const auto add_norm = [&](const std::string& name, LayerNormParams& n) {
    out_refs.push_back({name + ".gamma", n.gamma.data(), n.gamma.size(), 1});
    out_refs.push_back({name + ".beta", n.beta.data(), n.beta.size(), 1});
  };
  add_linear("q", q);
  add_linear("k", k);
  add_linear("v", v);
  add_linear("out", out);
  add_linear("ffn1", ffn1);
  add_linear("ffn2", ffn2);
  add_norm("norm1", norm1);
  add_norm("norm2", norm2);
  add_linear("abs_pe1", abs_pe1);
  add_linear("abs_pe2", abs_pe2);
  add_linear("bias_pe", bias_pe);
  add_linear("ctx_pe1", ctx_pe1);
  add_linear("ctx_pe2", ctx_pe2);
  return out_refs;
}

// ---------------------------------------------------------------------------
// Forward pass

namespace {

// Applies l to each row of x.
Eigen::MatrixXd apply_rows(const Linear& l, const Eigen::MatrixXd& x) {
  return (x * l.weight.transpose()).rowwise() + l.bias.transpose();
}

Eigen::MatrixXd relu(Eigen::MatrixXd x) { return x.cwiseMax(0.0); }

Eigen::MatrixXd absolute_encoding(const AttentionWeights& w, const Eigen::MatrixXd& coords) {
  return apply_rows(w.abs_pe2, relu(apply_rows(w.abs_pe1, coords)));
}

void check_shapes(std::span<const Vec3> query_points, const FeatureMatrix& query_features,
                  std::span<const TokenSet> tokens, const AttentionWeights& w) {
  w.validate();
  const auto m = static_cast<std::size_t>(query_features.rows());
  if (query_points.size() != m || tokens.size() != m) {
    throw Error(ErrorCode::ShapeMismatch, "queries, query features and token sets must have equal counts");
  }
  if (query_features.cols() != w.dim) throw Error(ErrorCode::ShapeMismatch, "query feature dim != model dim");
  for (const auto& t : tokens) {
    const auto l = static_cast<Eigen::Index>(t.valid.size());
    if (t.coords.rows() != l || t.coords.cols() != 3 || t.features.rows() != l ||
        (l > 0 && t.features.cols() != w.dim)) {
      throw Error(ErrorCode::ShapeMismatch, "token set shapes are inconsistent with the model");
    }
  }
}

}  // namespace

FeatureMatrix cross_attention(std::span<const Vec3> query_points, const FeatureMatrix& query_features,
                              std::span<const TokenSet> tokens, const AttentionWeights& w, PosEncodingMode mode,
                              std::vector<Eigen::MatrixXd>* attention) {
  check_shapes(query_points, query_features, tokens, w);
  const Eigen::Index m = query_features.rows();
  const Eigen::Index d = w.dim;
  const Eigen::Index dh = w.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  FeatureMatrix out = FeatureMatrix::Zero(m, d);
  if (attention) attention->assign(static_cast<std::size_t>(m), Eigen::MatrixXd());

  for (Eigen::Index qi = 0; qi < m; ++qi) {
    const TokenSet& set = tokens[static_cast<std::size_t>(qi)];
    std::vector<Eigen::Index> live;
    for (std::size_t j = 0; j < set.valid.size(); ++j) {
      if (set.valid[j]) live.push_back(static_cast<Eigen::Index>(j));
    }
    if (attention) {
      (*attention)[static_cast<std::size_t>(qi)] = Eigen::MatrixXd::Zero(w.heads, static_cast<Eigen::Index>(set.size()));
    }
    if (live.empty()) continue;

    const auto n = static_cast<Eigen::Index>(live.size());
    Eigen::MatrixXd coords(n, 3);
    Eigen::MatrixXd feats(n, d);
    for (Eigen::Index j = 0; j < n; ++j) {
      coords.row(j) = set.coords.row(live[static_cast<std::size_t>(j)]);
      feats.row(j) = set.features.row(live[static_cast<std::size_t>(j)]);
    }
    const Eigen::RowVector3d qp = query_points[static_cast<std::size_t>(qi)].transpose();
    Eigen::RowVectorXd q_in = query_features.row(qi);
    Eigen::MatrixXd k_in = feats;
    if (mode == PosEncodingMode::Absolute) {
      q_in += absolute_encoding(w, qp);
      k_in += absolute_encoding(w, coords);
    }
    const Eigen::RowVectorXd query = q_in * w.q.weight.transpose() + w.q.bias.transpose();
    const Eigen::MatrixXd keys = apply_rows(w.k, k_in);
    Eigen::MatrixXd values = apply_rows(w.v, feats);

    const Eigen::MatrixXd rel = coords.rowwise() - qp;
    Eigen::MatrixXd logit_bias;
    Eigen::MatrixXd ctx;
    if (mode == PosEncodingMode::BiasRelative) logit_bias = apply_rows(w.bias_pe, rel);
    if (mode == PosEncodingMode::ContextualRelative) {
      ctx = apply_rows(w.ctx_pe2, relu(apply_rows(w.ctx_pe1, rel)));
      values += ctx.rightCols(d);
    }

    Eigen::RowVectorXd fused(d);
    for (Eigen::Index h = 0; h < w.heads; ++h) {
      const auto qh = query.segment(h * dh, dh).transpose();
      Eigen::VectorXd logits = keys.middleCols(h * dh, dh) * qh * scale;
      if (mode == PosEncodingMode::ContextualRelative) logits += ctx.middleCols(h * dh, dh) * qh * scale;
      if (mode == PosEncodingMode::BiasRelative) logits += logit_bias.col(h);
      const double peak = logits.maxCoeff();
      Eigen::VectorXd weights = (logits.array() - peak).exp().matrix();
      weights /= weights.sum();
      fused.segment(h * dh, dh) = weights.transpose() * values.middleCols(h * dh, dh);
      if (attention) {
        for (Eigen::Index j = 0; j < n; ++j) (*attention)[static_cast<std::size_t>(qi)](h, live[static_cast<std::size_t>(j)]) = weights(j);
      }
    }
    out.row(qi) = fused * w.out.weight.transpose() + w.out.bias.transpose();
  }
  return out;
}

FeatureRow layer_norm(const FeatureRow& x, const LayerNormParams& p) {
  const double mean = x.mean();
  const double var = (x.array() - mean).square().mean();
  const double inv = 1.0 / std::sqrt(var + p.eps);
  return (((x.array() - mean) * inv) * p.gamma.transpose().array() + p.beta.transpose().array()).matrix();
}

FeatureMatrix transformer_block(std::span<const Vec3> query_points, const FeatureMatrix& query_features,
                                std::span<const TokenSet> tokens, const AttentionWeights& w, PosEncodingMode mode) {
  const FeatureMatrix attn = cross_attention(query_points, query_features, tokens, w, mode);
  FeatureMatrix y(query_features.rows(), w.dim);
  for (Eigen::Index i = 0; i < query_features.rows(); ++i) {
    const FeatureRow x = layer_norm(attn.row(i) + query_features.row(i), w.norm1);
    const Eigen::RowVectorXd hidden = (x * w.ffn1.weight.transpose() + w.ffn1.bias.transpose()).cwiseMax(0.0);
    const Eigen::RowVectorXd ffn = hidden * w.ffn2.weight.transpose() + w.ffn2.bias.transpose();
    y.row(i) = layer_norm(ffn + x, w.norm2);
  }
  return y;
}

FeatureMatrix attention_forward(const QuerySet& queries, std::span<const TokenSet> tokens,
                                std::span<const AttentionWeights> blocks, PosEncodingMode mode) {
  FeatureMatrix features = queries.content;
  for (const auto& w : blocks) features = transformer_block(queries.reference_points, features, tokens, w, mode);
  return features;
}

// ---------------------------------------------------------------------------
// Token generation

TokenSet gen_voxel_tokens(const Vec3& ref, const SparseVoxelGrid& grid, double radius, std::size_t l, SeededRng& rng) {
  if (!(radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "voxel token radius must be > 0");
  if (l < 1) throw Error(ErrorCode::InvalidArgument, "voxel token count must be >= 1");
  std::vector<std::size_t> inside;
  const double r2 = radius * radius;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if ((grid.centers()[i] - ref).squaredNorm() < r2) inside.push_back(i);
  }
  auto picks = rng.sample_without_replacement(inside.size(), l);
  std::sort(picks.begin(), picks.end());

  TokenSet t;
  const auto rows = static_cast<Eigen::Index>(l);
  t.coords = FeatureMatrix::Zero(rows, 3);
  t.features = FeatureMatrix::Zero(rows, grid.feature_dim());
  t.kinds.assign(l, TokenKind::Voxel);
  t.valid.assign(l, false);
  for (std::size_t j = 0; j < picks.size(); ++j) {
    const std::size_t v = inside[picks[j]];
    const auto row = static_cast<Eigen::Index>(j);
    t.coords.row(row) = grid.centers()[v].transpose();
    t.features.row(row) = grid.features().row(static_cast<Eigen::Index>(v));
    t.valid[j] = true;
  }
  return t;
}

std::vector<TokenSet> gen_point_tokens(std::span<const Vec3> refs, const AugmentationRecord& rec,
                                       const VirtualRangeImage& img, const PointCloud& cloud,
                                       const SparseVoxelGrid& grid, const PointTokenParams& params,
                                       std::uint64_t seed, PointTokenStats* stats) {
  if (img.size() != cloud.size()) throw Error(ErrorCode::ShapeMismatch, "range image was not built from this cloud");
  BallQueryRequest req;
  req.radius = params.radius;
  req.max_neighbors = params.count;
  req.kernel = params.kernel;
  req.mode = params.mode;
  req.seed = seed;

  const std::vector<Vec3> raw_refs = inverse_augment(refs, rec);
  BallQueryCounters ball_counters;
  const BallQueryResult ball = ball_query(img, raw_refs, req, &ball_counters);

  KnnRequest knn_req;
  knn_req.k = params.interp_k;
  knn_req.window = params.knn_window;
  for (std::size_t q = 0; q < refs.size(); ++q) {
    for (auto idx : ball.neighbors(q)) knn_req.queries.push_back(cloud.position(static_cast<std::size_t>(idx)));
  }
  KnnCounters knn_counters;
  const KnnResult knn = conquer_fetch_knn(grid, knn_req, &knn_counters);
  std::vector<bool> interp_valid;
  const FeatureMatrix interp = interpolate_from_knn(grid, knn_req.queries, knn, &interp_valid);

  std::vector<TokenSet> out;
  out.reserve(refs.size());
  const auto rows = static_cast<Eigen::Index>(params.count);
  std::size_t cursor = 0;
  for (std::size_t q = 0; q < refs.size(); ++q) {
    TokenSet t;
    t.coords = FeatureMatrix::Zero(rows, 3);
    t.features = FeatureMatrix::Zero(rows, grid.feature_dim());
    t.kinds.assign(params.count, TokenKind::Point);
    t.valid.assign(params.count, false);
    const auto nb = ball.neighbors(q);
    for (std::size_t j = 0; j < nb.size(); ++j, ++cursor) {
      const auto row = static_cast<Eigen::Index>(j);
      t.coords.row(row) = knn_req.queries[cursor].transpose();
      t.features.row(row) = interp.row(static_cast<Eigen::Index>(cursor));
      t.valid[j] = interp_valid[cursor];
    }
    out.push_back(std::move(t));
  }
  if (stats) {
    stats->ball += ball_counters;
    stats->knn.window_scans += knn_counters.window_scans;
    stats->knn.cells_probed += knn_counters.cells_probed;
    stats->knn.candidates += knn_counters.candidates;
    stats->points_gathered += knn_req.queries.size();
  }
  return out;
}

TokenSet gen_point_tokens(const Vec3& ref, const VirtualRangeImage& img, const PointCloud& cloud,
                          const SparseVoxelGrid& grid, const PointTokenParams& params, SeededRng& rng) {
  const Vec3 refs[1] = {ref};
  auto sets = gen_point_tokens(refs, AugmentationRecord{}, img, cloud, grid, params, rng.next_u64());
  return std::move(sets.front());
}

}  // namespace pointvox
