#include "pointvox/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <set>

#include "pointvox/knn_interp.hpp"
#include "pointvox/voxelizer.hpp"

namespace pointvox {

namespace {

using Clock = std::chrono::steady_clock;

template <typename F>
double min_ms(int repeats, F&& body) {
  double best = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, repeats); ++r) {
    const auto t0 = Clock::now();
    body();
    best = std::min(best, std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
  }
  // Clock granularity floor keeps ratios finite.
  return std::max(best, 1e-6);
}

std::vector<Vec3> jittered_samples(const PointCloud& cloud, std::size_t m, SeededRng rng, double sigma) {
  std::vector<Vec3> out;
  out.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    const Vec3 base = cloud.position(static_cast<std::size_t>(rng.below(cloud.size())));
    out.push_back(base + Vec3(rng.normal(), rng.normal(), rng.normal()) * sigma);
  }
  return out;
}

}  // namespace

Scene bench_scene(std::size_t n, std::uint64_t seed) {
  constexpr int kObjects = 20;
  SceneSpec spec;
  spec.objects = kObjects;
  spec.points_per_object = static_cast<int>(n / 2 / kObjects);
  spec.background_points = static_cast<int>(n - static_cast<std::size_t>(spec.points_per_object) * kObjects);
  spec.seed = seed;
  spec.augment = false;
  return gen_scene(spec);
}

BallQueryBenchReport bench_ball_query(const std::vector<std::size_t>& sizes, const BallQueryBenchConfig& config) {
  if (!std::is_sorted(sizes.begin(), sizes.end())) throw Error(ErrorCode::InvalidArgument, "sizes must be ascending");
  if (config.queries == 0 || !(config.occupancy > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "queries and occupancy must be positive");
  }
  BallQueryBenchReport report;
  const SeededRng root(config.seed);
  for (std::size_t s = 0; s < sizes.size(); ++s) {
    const std::size_t n = sizes[s];
    if (n == 0) throw Error(ErrorCode::InvalidArgument, "benchmark size must be > 0");
    const SeededRng rng = root.fork(s);
    const Scene scene = bench_scene(n, rng.fork(0).seed());
    const std::vector<Vec3> queries = jittered_samples(scene.cloud, config.queries, rng.fork(1), 0.1);

    BallQueryRequest req;
    req.radius = config.radius;
    req.max_neighbors = config.max_neighbors;
    req.kernel = config.kernel;
    req.mode = SelectionMode::Random;
    req.seed = rng.fork(2).seed();

    RangeImageSpec spec;
    spec.rows = config.rows;
    spec.cols = static_cast<int>(
        std::ceil(static_cast<double>(scene.cloud.size()) / (static_cast<double>(spec.rows) * config.occupancy)));
    const auto to_sensor = RigidTransform::translation(Vec3(0.0, 0.0, -config.sensor_height));

    BallQueryBenchRow row;
    row.n = scene.cloud.size();
    row.m = queries.size();
    row.kernel = config.kernel;
    row.radius = config.radius;
    row.rows = spec.rows;
    row.cols = spec.cols;
    row.seed = config.seed;

    BallQueryCounters brute_counters;
    row.brute_ms = min_ms(config.repeats, [&] {
      brute_counters = {};
      (void)brute_force_ball_query(scene.cloud, queries, req, &brute_counters);
    });

    std::optional<VirtualRangeImage> img;
    row.rv_build_ms = min_ms(config.repeats, [&] { img = VirtualRangeImage::build(scene.cloud, to_sensor, spec); });
    BallQueryCounters rv_counters;
    row.rv_query_ms = min_ms(config.repeats, [&] {
      rv_counters = {};
      (void)ball_query(*img, queries, req, &rv_counters, config.workers);
    });

    row.speedup = row.brute_ms / row.rv_query_ms;
    row.speedup_with_build = row.brute_ms / (row.rv_build_ms + row.rv_query_ms);
    row.brute_inspections = brute_counters.candidates_inspected;
    row.rv_inspections = rv_counters.candidates_inspected;
    row.rv_pixels_visited = rv_counters.pixels_visited;
    row.brute_in_radius = brute_counters.kept;
    row.rv_in_radius = rv_counters.kept;
    report.rows.push_back(row);
  }
  return report;
}

void BallQueryBenchReport::write_csv(std::ostream& out) const {
  out << "n,m,kernel,radius,rows,cols,brute_ms,rv_build_ms,rv_query_ms,speedup,speedup_with_build,"
         "brute_inspections,rv_inspections,rv_inspections_per_query,rv_pixels_visited,brute_in_radius,"
         "rv_in_radius,seed\n";
  out << std::setprecision(10);
  for (const auto& r : rows) {
    out << r.n << ',' << r.m << ',' << r.kernel << ',' << r.radius << ',' << r.rows << ',' << r.cols << ','
        << r.brute_ms << ',' << r.rv_build_ms << ',' << r.rv_query_ms << ',' << r.speedup << ','
        << r.speedup_with_build << ',' << r.brute_inspections << ',' << r.rv_inspections << ','
        << r.rv_inspections_per_query() << ',' << r.rv_pixels_visited << ',' << r.brute_in_radius << ','
        << r.rv_in_radius << ',' << r.seed << '\n';
  }
}

KnnBenchMode parse_knn_bench_mode(const std::string& name) {
  if (name == "brute") return KnnBenchMode::Brute;
  if (name == "voxel") return KnnBenchMode::Voxel;
  if (name == "conquer") return KnnBenchMode::Conquer;
  if (name == "all") return KnnBenchMode::All;
  throw Error(ErrorCode::InvalidArgument, "knn mode must be brute|voxel|conquer|all, got '" + name + "'");
}

KnnBenchReport bench_knn(KnnBenchMode mode, const KnnBenchConfig& config) {
  if (config.points == 0 || config.queries == 0 || config.k == 0 || !(config.voxel_size > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "points, queries, k and voxel_size must be positive");
  }
  const SeededRng root(config.seed);
  const Scene scene = bench_scene(config.points, root.fork(0).seed());

  VoxelGridSpec spec;
  spec.origin = Vec3(-60.0, -60.0, -2.0);
  spec.voxel_size = Vec3::Constant(config.voxel_size);
  for (int a = 0; a < 3; ++a) {
    const double span = a == 2 ? 6.0 : 120.0;
    spec.extents[static_cast<std::size_t>(a)] = static_cast<int>(std::ceil(span / config.voxel_size));
  }
  const SparseVoxelGrid grid = voxelize(scene.cloud, spec);

  // Queries are cloud points, the way point tokens gather them.
  KnnRequest req;
  req.k = config.k;
  req.window = config.window;
  SeededRng pick = root.fork(1);
  for (std::size_t i = 0; i < config.queries; ++i) {
    req.queries.push_back(scene.cloud.position(static_cast<std::size_t>(pick.below(scene.cloud.size()))));
  }
  std::set<CellIndex> distinct;
  for (const auto& q : req.queries) distinct.insert(spec.cell_of_unbounded(q));

  const KnnResult reference = voxel_knn(grid, req);
  KnnBenchReport report;
  const auto run = [&](const char* name, auto&& fn) {
    KnnBenchRow row;
    row.method = name;
    row.voxels = grid.size();
    row.queries = req.queries.size();
    row.distinct_cells = distinct.size();
    row.seed = config.seed;
    KnnCounters counters;
    KnnResult result;
    row.ms = min_ms(config.repeats, [&] {
      counters = {};
      result = fn(counters);
    });
    row.window_scans = counters.window_scans;
    row.cells_probed = counters.cells_probed;
    row.candidates = counters.candidates;
    row.matches_voxel = result == reference;
    report.rows.push_back(row);
  };
  if (mode == KnnBenchMode::Brute || mode == KnnBenchMode::All) {
    run("brute", [&](KnnCounters& c) {
      c.candidates = static_cast<std::uint64_t>(grid.size()) * req.queries.size();
      return brute_knn(grid, req.queries, req.k);
    });
  }
  if (mode == KnnBenchMode::Voxel || mode == KnnBenchMode::All) {
    run("voxel", [&](KnnCounters& c) { return voxel_knn(grid, req, &c); });
  }
  if (mode == KnnBenchMode::Conquer || mode == KnnBenchMode::All) {
    run("conquer", [&](KnnCounters& c) { return conquer_fetch_knn(grid, req, &c); });
  }
  return report;
}

void KnnBenchReport::write_csv(std::ostream& out) const {
  out << "method,voxels,queries,distinct_cells,ms,window_scans,cells_probed,candidates,matches_voxel,seed\n";
  out << std::setprecision(10);
  for (const auto& r : rows) {
    out << r.method << ',' << r.voxels << ',' << r.queries << ',' << r.distinct_cells << ',' << r.ms << ','
        << r.window_scans << ',' << r.cells_probed << ',' << r.candidates << ',' << (r.matches_voxel ? 1 : 0) << ','
        << r.seed << '\n';
  }
}

}  // namespace pointvox
