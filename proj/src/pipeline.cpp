#include "pointvox/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>

#include "pointvox/losses.hpp"

namespace pointvox {

// ---------------------------------------------------------------------------
// Config

void PipelineConfig::validate() const {
  if (references < 1 || neighbors < 1 || interp_k < 1 || blocks < 1) {
    throw Error(ErrorCode::Config, "references, neighbors, interp_k and blocks must be >= 1");
  }
  if (!(voxel_radius > 0.0) || !(point_radius > 0.0)) throw Error(ErrorCode::Config, "radii must be positive");
  if (heads < 1 || model_dim % heads != 0) throw Error(ErrorCode::Config, "model_dim must be a multiple of heads");
  if (ffn_dim < 1 || knn_window < 1 || kernel < 1 || backbone_stride < 1) {
    throw Error(ErrorCode::Config, "ffn_dim, knn_window, kernel and backbone_stride must be >= 1");
  }
  range_image.validate();
  grid_spec().validate();
}

VoxelGridSpec PipelineConfig::grid_spec() const {
  VoxelGridSpec spec;
  spec.origin = range_min;
  spec.voxel_size = voxel_size * static_cast<double>(backbone_stride);
  for (int a = 0; a < 3; ++a) {
    spec.extents[static_cast<std::size_t>(a)] =
        static_cast<int>(std::ceil((range_max[a] - range_min[a]) / spec.voxel_size[a] - 1e-9));
  }
  return spec;
}

const std::set<std::string>& PipelineConfig::config_keys() {
  static const std::set<std::string> keys{
      "references", "neighbors",   "voxel_radius",   "point_radius",   "model_dim",      "ffn_dim",
      "heads",      "blocks",      "interp_k",       "knn_window",     "pos_encoding",   "sampling",
      "ball_mode",  "kernel",      "rv_rows",        "rv_cols",        "rv_incl_min_deg", "rv_incl_max_deg",
      "sensor_height", "voxel_size", "backbone_stride", "range_min",   "range_max",      "bev_linear",
      "seed"};
  return keys;
}

PipelineConfig PipelineConfig::from_config(const KeyValueConfig& cfg) {
  PipelineConfig c;
  const auto count = [&](const char* key, std::size_t fallback) {
    const long long v = cfg.get_int(key, static_cast<long long>(fallback));
    if (v < 1) throw Error(ErrorCode::Config, std::string("key '") + key + "' must be >= 1");
    return static_cast<std::size_t>(v);
  };
  c.references = count("references", c.references);
  c.neighbors = count("neighbors", c.neighbors);
  c.voxel_radius = cfg.get_double("voxel_radius", c.voxel_radius);
  c.point_radius = cfg.get_double("point_radius", c.point_radius);
  c.model_dim = static_cast<Eigen::Index>(count("model_dim", static_cast<std::size_t>(c.model_dim)));
  c.ffn_dim = static_cast<Eigen::Index>(count("ffn_dim", static_cast<std::size_t>(c.ffn_dim)));
  c.heads = static_cast<Eigen::Index>(count("heads", static_cast<std::size_t>(c.heads)));
  c.blocks = static_cast<int>(count("blocks", static_cast<std::size_t>(c.blocks)));
  c.interp_k = count("interp_k", c.interp_k);
  c.knn_window = static_cast<int>(count("knn_window", static_cast<std::size_t>(c.knn_window)));
  c.pos_encoding = parse_pos_encoding(cfg.get("pos_encoding", to_string(c.pos_encoding)));

  const std::string sampling = cfg.get("sampling", "sfps");
  if (sampling == "sfps") {
    c.sampling = SamplingStrategy::SemanticFps;
  } else if (sampling == "fps") {
    c.sampling = SamplingStrategy::Fps;
  } else if (sampling == "topk") {
    c.sampling = SamplingStrategy::TopK;
  } else {
    throw Error(ErrorCode::Config, "sampling must be sfps|fps|topk");
  }
  const std::string mode = cfg.get("ball_mode", "random");
  if (mode == "random") {
    c.ball_mode = SelectionMode::Random;
  } else if (mode == "sequential") {
    c.ball_mode = SelectionMode::Sequential;
  } else {
    throw Error(ErrorCode::Config, "ball_mode must be random|sequential");
  }
  c.kernel = static_cast<int>(count("kernel", static_cast<std::size_t>(c.kernel)));
  c.range_image.rows = static_cast<int>(count("rv_rows", static_cast<std::size_t>(c.range_image.rows)));
  c.range_image.cols = static_cast<int>(count("rv_cols", static_cast<std::size_t>(c.range_image.cols)));
  constexpr double deg = std::numbers::pi / 180.0;
  c.range_image.inclination_min = cfg.get_double("rv_incl_min_deg", c.range_image.inclination_min / deg) * deg;
  c.range_image.inclination_max = cfg.get_double("rv_incl_max_deg", c.range_image.inclination_max / deg) * deg;
  c.sensor_height = cfg.get_double("sensor_height", c.sensor_height);
  c.voxel_size = cfg.get_vec3("voxel_size", c.voxel_size);
  c.backbone_stride = static_cast<int>(count("backbone_stride", static_cast<std::size_t>(c.backbone_stride)));
  c.range_min = cfg.get_vec3("range_min", c.range_min);
  c.range_max = cfg.get_vec3("range_max", c.range_max);
  const std::string bev = cfg.get("bev_linear", "identity");
  if (bev != "identity" && bev != "seeded") throw Error(ErrorCode::Config, "bev_linear must be identity|seeded");
  c.seeded_bev_linear = bev == "seeded";
  c.seed = static_cast<std::uint64_t>(cfg.get_int("seed", static_cast<long long>(c.seed)));
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Diagnostics

void PipelineDiagnostics::write_csv(std::ostream& out) const {
  out << "key,value\n" << std::setprecision(17);
  out << "points," << points << '\n'
      << "voxels," << voxels << '\n'
      << "bev_voxels," << bev_voxels << '\n'
      << "foreground_bev_voxels," << foreground_bev_voxels << '\n'
      << "references," << references << '\n'
      << "foreground_references," << foreground_references << '\n'
      << "voxel_tokens," << voxel_tokens << '\n'
      << "point_tokens," << point_tokens << '\n'
      << "max_voxel_tokens," << max_voxel_tokens << '\n'
      << "max_point_tokens," << max_point_tokens << '\n'
      << "token_mask_rate," << token_mask_rate << '\n'
      << "knn_window_scans," << knn_window_scans << '\n'
      << "knn_queries," << knn_queries << '\n'
      << "ball_candidates," << ball_candidates << '\n'
      << "seg_loss," << seg_loss << '\n'
      << "offset_loss," << offset_loss << '\n'
      << "cls_loss," << cls_loss << '\n'
      << "cls_loss_floor," << cls_loss_floor << '\n'
      << "head_cls_loss," << head_cls_loss << '\n'
      << "reg_center_loss," << reg.center << '\n'
      << "reg_size_loss," << reg.size << '\n'
      << "reg_angle_loss," << reg.angle << '\n'
      << "feature_checksum," << feature_checksum << '\n'
      << "elapsed_ms," << elapsed_ms << '\n';
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

// Stream ids for forked generators.
enum Stream : std::uint64_t { kEmbed = 1, kBevLinear, kVoxelTokens, kPointTokens, kBlocks, kHead };

Linear seeded_linear(std::uint64_t seed, Eigen::Index in, Eigen::Index out) {
  SeededRng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Linear l;
  l.weight.resize(out, in);
  l.bias.resize(out);
  for (Eigen::Index r = 0; r < out; ++r) {
    for (Eigen::Index c = 0; c < in; ++c) l.weight(r, c) = rng.uniform(-bound, bound);
  }
  for (Eigen::Index r = 0; r < out; ++r) l.bias(r) = rng.uniform(-bound, bound);
  return l;
}

}  // namespace

PipelineResult run_pipeline(const Scene& scene, const PipelineConfig& config) {
  const auto started = std::chrono::steady_clock::now();
  config.validate();
  const SeededRng root(config.seed);
  PipelineResult result;
  auto& diag = result.diagnostics;
  diag.points = scene.cloud.size();

  // Voxel features: stand-in for the sparse backbone's middle layer.
  const VoxelGridSpec spec = config.grid_spec();
  SparseVoxelGrid raw_grid = [&] {
    try {
      return voxelize(scene.cloud, spec);
    } catch (const Error& e) {
      throw Error(e.code(), std::string("pipeline voxelization: ") + e.what());
    }
  }();
  const Linear embed = seeded_linear(root.fork(kEmbed).seed(), raw_grid.feature_dim(), config.model_dim);
  const SparseVoxelGrid grid =
      raw_grid.with_features((raw_grid.features() * embed.weight.transpose()).rowwise() + embed.bias.transpose());
  diag.voxels = grid.size();

  BevFeatureMap bev_map = densify(collapse_height(grid));
  if (config.seeded_bev_linear) {
    const Linear cell = seeded_linear(root.fork(kBevLinear).seed(), config.model_dim, config.model_dim);
    bev_map = apply_cell_linear(bev_map, cell.weight, cell.bias);
  }

  QueryInitOptions qopts;
  qopts.strategy = config.sampling;
  QueryInitTrace trace;
  // Sparse scenes can have fewer occupied BEV cells than requested references.
  const std::size_t wanted = std::min(config.references, collapse_height(grid).size());
  result.queries = init_queries_from_grid(grid, scene.boxes, bev_map, wanted, qopts, &trace);
  const auto& refs = result.queries.reference_points;
  const std::size_t m = refs.size();
  diag.bev_voxels = trace.bev.size();
  diag.references = m;

  // Tokens.
  const SeededRng voxel_rng = root.fork(kVoxelTokens);
  std::vector<TokenSet> voxel_tokens;
  voxel_tokens.reserve(m);
  for (std::size_t q = 0; q < m; ++q) {
    SeededRng rng = voxel_rng.fork(q);
    voxel_tokens.push_back(gen_voxel_tokens(refs[q], grid, config.voxel_radius, config.neighbors, rng));
  }

  const PointCloud raw_cloud = inverse_augment(scene.cloud, scene.augmentation);
  const auto to_sensor = RigidTransform::translation(Vec3(0.0, 0.0, -config.sensor_height));
  const VirtualRangeImage img = VirtualRangeImage::build(raw_cloud, to_sensor, config.range_image);
  PointTokenParams pparams;
  pparams.radius = config.point_radius;
  pparams.count = config.neighbors;
  pparams.kernel = config.kernel;
  pparams.mode = config.ball_mode;
  pparams.interp_k = config.interp_k;
  pparams.knn_window = config.knn_window;
  PointTokenStats pstats;
  const std::vector<TokenSet> point_tokens = gen_point_tokens(refs, scene.augmentation, img, scene.cloud, grid, pparams,
                                                              root.fork(kPointTokens).seed(), &pstats);

  std::vector<TokenSet> tokens;
  tokens.reserve(m);
  std::size_t total_slots = 0;
  for (std::size_t q = 0; q < m; ++q) {
    const std::size_t nv = voxel_tokens[q].valid_count();
    const std::size_t np = point_tokens[q].valid_count();
    diag.voxel_tokens += nv;
    diag.point_tokens += np;
    diag.max_voxel_tokens = std::max(diag.max_voxel_tokens, nv);
    diag.max_point_tokens = std::max(diag.max_point_tokens, np);
    tokens.push_back(TokenSet::concat(voxel_tokens[q], point_tokens[q]));
    total_slots += tokens.back().size();
  }
  diag.token_mask_rate =
      total_slots ? 1.0 - static_cast<double>(diag.voxel_tokens + diag.point_tokens) / static_cast<double>(total_slots)
                  : 0.0;
  diag.knn_window_scans = pstats.knn.window_scans;
  diag.knn_queries = pstats.points_gathered;
  diag.ball_candidates = pstats.ball.candidates_inspected;

  // Transformer.
  std::vector<AttentionWeights> blocks;
  const SeededRng block_rng = root.fork(kBlocks);
  for (int b = 0; b < config.blocks; ++b) {
    blocks.push_back(AttentionWeights::seeded(block_rng.fork(static_cast<std::uint64_t>(b)).seed(), config.model_dim,
                                              config.heads, config.ffn_dim));
  }
  result.fused = attention_forward(result.queries, tokens, blocks, config.pos_encoding);
  diag.feature_checksum = result.fused.cwiseAbs().sum();

  // Losses with oracle predictions.
  const auto seg_labels = foreground_labels(trace.bev_centers, scene.boxes);
  loss::SegBatch seg;
  seg.labels = seg_labels;
  for (int l : seg_labels) {
    seg.probs.push_back(static_cast<double>(l));
    diag.foreground_bev_voxels += static_cast<std::size_t>(l);
  }
  diag.seg_loss = loss::seg_loss(seg);

  loss::OffsetBatch offsets;
  for (std::size_t i = 0; i < m; ++i) {
    const Vec2& center = trace.bev_centers[trace.selection.indices[i]];
    if (nearest_containing_box(center, scene.boxes) < 0) continue;
    const Vec2 c[1] = {center};
    offsets.targets.push_back(oracle_offsets(c, scene.boxes, trace.lift.base_height).offsets.front());
    offsets.predicted.push_back(trace.lift.offsets[i]);
  }
  diag.offset_loss = offsets.predicted.empty() ? 0.0 : loss::offset_loss(offsets);

  loss::ClsBatch cls;
  std::vector<loss::BoxParams> reg_pred;
  std::vector<loss::BoxParams> reg_target;
  for (std::size_t i = 0; i < m; ++i) {
    double label = 0.0;
    int owner = -1;
    for (std::size_t b = 0; b < scene.boxes.size(); ++b) {
      const double c = loss::centerness_target(refs[i], scene.boxes[b]);
      if (c > label) {
        label = c;
        owner = static_cast<int>(b);
      }
    }
    cls.labels.push_back(label);
    cls.scores.push_back(label);
    if (owner >= 0) {
      const auto& box = scene.boxes[static_cast<std::size_t>(owner)];
      const loss::BoxParams target{box.center(), box.size(), box.yaw()};
      reg_target.push_back(target);
      reg_pred.push_back(target);
    }
  }
  diag.foreground_references = reg_target.size();
  diag.cls_loss = loss::cls_loss(cls);
  diag.cls_loss_floor = loss::cls_loss_floor(cls.labels);
  if (!reg_pred.empty()) diag.reg = loss::reg_loss(reg_pred, reg_target);

  const Linear head = seeded_linear(root.fork(kHead).seed(), config.model_dim, 1);
  loss::ClsBatch head_batch;
  head_batch.labels = cls.labels;
  for (std::size_t i = 0; i < m; ++i) {
    const double logit = result.fused.row(static_cast<Eigen::Index>(i)).dot(head.weight.row(0)) + head.bias(0);
    head_batch.scores.push_back(1.0 / (1.0 + std::exp(-logit)));
  }
  diag.head_cls_loss = loss::cls_loss(head_batch);

  diag.elapsed_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  return result;
}

}  // namespace pointvox
