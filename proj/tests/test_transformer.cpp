#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "pointvox/transformer.hpp"

using namespace pointvox;

namespace {

constexpr Eigen::Index kDim = 8;
constexpr Eigen::Index kHeads = 2;

TokenSet random_tokens(SeededRng& rng, std::size_t l, std::size_t masked) {
  TokenSet t;
  t.coords.resize(static_cast<Eigen::Index>(l), 3);
  t.features.resize(static_cast<Eigen::Index>(l), kDim);
  for (Eigen::Index r = 0; r < t.coords.rows(); ++r) {
    for (Eigen::Index c = 0; c < 3; ++c) t.coords(r, c) = rng.uniform(-3, 3);
    for (Eigen::Index c = 0; c < kDim; ++c) t.features(r, c) = rng.uniform(-1, 1);
  }
  t.kinds.assign(l, TokenKind::Voxel);
  t.valid.assign(l, true);
  for (std::size_t j = 0; j < masked && j < l; ++j) t.valid[l - 1 - j] = false;
  return t;
}

FeatureMatrix random_rows(SeededRng& rng, Eigen::Index rows) {
  FeatureMatrix f(rows, kDim);
  for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = rng.uniform(-1, 1);
  return f;
}

void make_identity(Linear& l) {
  l.weight = Eigen::MatrixXd::Identity(l.weight.rows(), l.weight.cols());
  l.bias.setZero();
}

constexpr PosEncodingMode kModes[] = {PosEncodingMode::None, PosEncodingMode::ContextualRelative,
                                      PosEncodingMode::BiasRelative, PosEncodingMode::Absolute};

}  // namespace

TEST_CASE("pos encoding names") {
  for (auto m : kModes) CHECK(parse_pos_encoding(to_string(m)) == m);
  CHECK_THROWS_AS(parse_pos_encoding("rotary"), Error);
}

TEST_CASE("seeded weights validate and are deterministic") {
  auto a = AttentionWeights::seeded(3, kDim, kHeads, 16);
  auto b = AttentionWeights::seeded(3, kDim, kHeads, 16);
  a.validate();
  CHECK(a.q.weight == b.q.weight);
  CHECK(a.ctx_pe2.out_dim() == 2 * kDim);
  CHECK(a.q.weight.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(double(kDim)));
  CHECK_THROWS_AS(AttentionWeights::seeded(1, 10, 4, 16), Error);
  a.k.weight.resize(3, 3);
  CHECK_THROWS_AS(a.validate(), Error);
}

TEST_CASE("softmax rows are normalized and masked slots get zero") {
  SeededRng rng(2);
  const auto w = AttentionWeights::seeded(5, kDim, kHeads, 16);
  const std::vector<Vec3> qp{Vec3(0.1, 0.2, 0.3)};
  const auto qf = random_rows(rng, 1);
  const std::vector<TokenSet> tokens{random_tokens(rng, 6, 2)};
  for (auto mode : kModes) {
    std::vector<Eigen::MatrixXd> att;
    cross_attention(qp, qf, tokens, w, mode, &att);
    for (Eigen::Index h = 0; h < kHeads; ++h) {
      CHECK(std::abs(att[0].row(h).sum() - 1.0) < 1e-9);
      CHECK(att[0](h, 4) == 0.0);
      CHECK(att[0](h, 5) == 0.0);
    }
  }
}

TEST_CASE("single token and symmetric pair") {
  auto w = AttentionWeights::seeded(6, kDim, kHeads, 16);
  make_identity(w.v);
  make_identity(w.out);
  SeededRng rng(3);
  const std::vector<Vec3> qp{Vec3::Zero()};
  const auto qf = random_rows(rng, 1);

  TokenSet one = random_tokens(rng, 1, 0);
  const std::vector<TokenSet> single{one};
  const auto out = cross_attention(qp, qf, single, w, PosEncodingMode::None);
  CHECK((out.row(0) - one.features.row(0)).norm() < 1e-9);

  TokenSet pair = random_tokens(rng, 2, 0);
  pair.features.row(1) = pair.features.row(0);
  make_identity(w.k);
  w.k.weight.setZero();  // constant keys
  const std::vector<TokenSet> two{pair};
  std::vector<Eigen::MatrixXd> att;
  const auto out2 = cross_attention(qp, qf, two, w, PosEncodingMode::None, &att);
  CHECK((out2.row(0) - pair.features.row(0)).norm() < 1e-9);
  CHECK(std::abs(att[0](0, 0) - 0.5) < 1e-12);
}

TEST_CASE("all tokens masked leaves only the residual path") {
  const auto w = AttentionWeights::seeded(7, kDim, kHeads, 16);
  SeededRng rng(4);
  const std::vector<Vec3> qp{Vec3(1, 2, 3)};
  const auto qf = random_rows(rng, 1);
  const std::vector<TokenSet> tokens{random_tokens(rng, 4, 4)};
  const auto attn = cross_attention(qp, qf, tokens, w, PosEncodingMode::ContextualRelative);
  CHECK(attn.isZero());
  const auto out = transformer_block(qp, qf, tokens, w, PosEncodingMode::ContextualRelative);
  const FeatureRow x = layer_norm(qf.row(0), w.norm1);
  const Eigen::RowVectorXd hidden =
      (x * w.ffn1.weight.transpose() + w.ffn1.bias.transpose()).cwiseMax(0.0);
  const FeatureRow y = layer_norm(hidden * w.ffn2.weight.transpose() + w.ffn2.bias.transpose() + x, w.norm2);
  CHECK((out.row(0) - y).norm() < 1e-12);
}

TEST_CASE("invariances across positional modes") {
  const auto w = AttentionWeights::seeded(8, kDim, kHeads, 16);
  SeededRng rng(5);
  const std::vector<Vec3> qp{Vec3(0.5, -0.2, 1.0), Vec3(-1, 2, 0)};
  const auto qf = random_rows(rng, 2);
  std::vector<TokenSet> tokens{random_tokens(rng, 7, 2), random_tokens(rng, 5, 0)};

  for (auto mode : kModes) {
    CAPTURE(to_string(mode));
    const auto base = transformer_block(qp, qf, tokens, w, mode);

    // Permutation, including masked rows.
    std::vector<TokenSet> perm = tokens;
    for (auto& t : perm) {
      std::vector<Eigen::Index> order(t.size());
      std::iota(order.begin(), order.end(), 0);
      std::reverse(order.begin(), order.end());
      TokenSet p = t;
      for (std::size_t j = 0; j < order.size(); ++j) {
        p.coords.row(static_cast<Eigen::Index>(j)) = t.coords.row(order[j]);
        p.features.row(static_cast<Eigen::Index>(j)) = t.features.row(order[j]);
        p.valid[j] = t.valid[static_cast<std::size_t>(order[j])];
      }
      t = p;
    }
    CHECK((transformer_block(qp, qf, perm, w, mode) - base).cwiseAbs().maxCoeff() < 1e-9);

    // Masked rows are a no-op whatever they hold.
    std::vector<TokenSet> noisy = tokens;
    noisy[0].features.row(6).setConstant(1e6);
    noisy[0].coords.row(6).setConstant(-50);
    CHECK((transformer_block(qp, qf, noisy, w, mode) - base).cwiseAbs().maxCoeff() < 1e-12);

    // Translation.
    const Vec3 shift(10, -4, 2);
    std::vector<Vec3> qs = qp;
    for (auto& p : qs) p += shift;
    std::vector<TokenSet> ts = tokens;
    for (auto& t : ts) t.coords.rowwise() += shift.transpose();
    const double moved = (transformer_block(qs, qf, ts, w, mode) - base).cwiseAbs().maxCoeff();
    if (mode == PosEncodingMode::Absolute) {
      CHECK(moved > 1e-6);
    } else {
      CHECK(moved < 1e-9);
    }
  }
}

TEST_CASE("attention_forward chains blocks and checks shapes") {
  const std::vector<AttentionWeights> blocks{AttentionWeights::seeded(1, kDim, kHeads, 16),
                                             AttentionWeights::seeded(2, kDim, kHeads, 16)};
  SeededRng rng(6);
  QuerySet q;
  q.reference_points = {Vec3::Zero()};
  q.content = random_rows(rng, 1);
  q.provenance = {0};
  const std::vector<TokenSet> tokens{random_tokens(rng, 3, 1)};
  const auto once = transformer_block(q.reference_points, q.content, tokens, blocks[0], PosEncodingMode::BiasRelative);
  const auto twice = transformer_block(q.reference_points, once, tokens, blocks[1], PosEncodingMode::BiasRelative);
  CHECK((attention_forward(q, tokens, blocks, PosEncodingMode::BiasRelative) - twice).norm() == 0.0);

  const std::vector<TokenSet> none;
  CHECK_THROWS_AS(attention_forward(q, none, blocks, PosEncodingMode::None), Error);
}

TEST_CASE("voxel tokens") {
  VoxelGridSpec spec;
  spec.extents = {20, 20, 2};
  FeatureMatrix f(3, 2);
  f << 1, 2, 3, 4, 5, 6;
  const SparseVoxelGrid grid(spec, {{0, 0, 0}, {1, 0, 0}, {15, 15, 1}}, f);
  SeededRng rng(1);

  auto t = gen_voxel_tokens(Vec3(0.5, 0.5, 0.5), grid, 0.5, 4, rng);
  CHECK(t.size() == 4);
  REQUIRE(t.valid_count() == 1);
  CHECK(t.features.row(0) == f.row(0));

  t = gen_voxel_tokens(Vec3(100, 100, 0), grid, 1.0, 4, rng);
  CHECK(t.valid_count() == 0);

  t = gen_voxel_tokens(Vec3(1, 0.5, 0.5), grid, 2.0, 8, rng);
  CHECK(t.valid_count() == 2);
  t = gen_voxel_tokens(Vec3(8, 8, 1), grid, 30.0, 2, rng);
  CHECK(t.valid_count() == 2);
}

TEST_CASE("point tokens") {
  VoxelGridSpec spec;
  spec.origin = Vec3(-10, -10, -2);
  spec.voxel_size = Vec3::Ones();
  spec.extents = {20, 20, 4};
  std::vector<Vec3> pts;
  SeededRng rng(2);
  for (int i = 0; i < 30; ++i) pts.emplace_back(5.2 + 0.5 * rng.uniform(), 1.2 + 0.5 * rng.uniform(), 0.2 + 0.5 * rng.uniform());
  const PointCloud cloud(pts);
  FeatureMatrix f(1, 3);
  f << 1, -2, 3;
  const SparseVoxelGrid grid(spec, {spec.cell_of_unbounded(pts[0])}, f);
  const auto img = VirtualRangeImage::build(cloud, RigidTransform::identity(), RangeImageSpec{});

  PointTokenParams params;
  params.radius = 1.0;
  params.count = 16;
  params.kernel = 128;
  REQUIRE(window_covers_ball(img, Vec3(5.45, 1.45, 0.45), params.radius, params.kernel));
  SeededRng q(3);
  auto t = gen_point_tokens(Vec3(5.45, 1.45, 0.45), img, cloud, grid, params, q);
  CHECK(t.size() == 16);
  CHECK(t.valid_count() == 16);
  for (std::size_t j = 0; j < t.size(); ++j) CHECK(t.features.row(static_cast<Eigen::Index>(j)) == f.row(0));

  t = gen_point_tokens(Vec3(-5, -5, 0), img, cloud, grid, params, q);
  CHECK(t.valid_count() == 0);

  params.count = 64;
  const std::vector<Vec3> refs{Vec3(5.45, 1.45, 0.45), Vec3(-5, -5, 0)};
  PointTokenStats stats;
  const auto batch = gen_point_tokens(refs, AugmentationRecord{}, img, cloud, grid, params, 9, &stats);
  CHECK(batch[0].valid_count() == 30);
  CHECK(batch[1].valid_count() == 0);
  CHECK(stats.points_gathered == 30);
  CHECK(stats.knn.window_scans == 1);
}

TEST_CASE("point tokens undo augmentation before the range-image query") {
  VoxelGridSpec spec;
  spec.origin = Vec3(-20, -20, -2);
  spec.voxel_size = Vec3::Ones();
  spec.extents = {40, 40, 4};
  std::vector<Vec3> raw;
  SeededRng rng(7);
  for (int i = 0; i < 200; ++i) raw.emplace_back(rng.uniform(4, 6), rng.uniform(-1, 1), rng.uniform(-0.5, 0.5));
  AugmentationRecord rec;
  rec.push(GlobalRotation{1.2});
  rec.push(FlipAxis{1});
  rec.push(GlobalScale{1.03});
  const PointCloud augmented = rec.apply(PointCloud(raw));
  const auto img = VirtualRangeImage::build(PointCloud(raw), RigidTransform::identity(), RangeImageSpec{});
  const auto grid = voxelize(augmented, spec);
  const std::vector<Vec3> refs{augmented.position(0)};
  PointTokenParams params;
  params.radius = 0.6;
  params.count = 256;
  params.kernel = 128;
  REQUIRE(window_covers_ball(img, raw[0], params.radius, params.kernel));
  const auto out = gen_point_tokens(refs, rec, img, augmented, grid, params, 1);

  std::size_t expected = 0;
  for (const auto& p : raw) expected += (p - raw[0]).norm() < params.radius;
  CHECK(out[0].valid_count() == expected);
  for (std::size_t j = 0; j < out[0].valid_count(); ++j) {
    const Vec3 c = out[0].coords.row(static_cast<Eigen::Index>(j)).transpose();
    CHECK((rec.invert(c) - raw[0]).norm() < params.radius);
  }
}
