#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "pointvox/range_image.hpp"
#include "pointvox/scene.hpp"

namespace pointvox {

struct BallQueryBenchConfig {
  std::size_t queries = 512;
  std::size_t max_neighbors = 32;
  double radius = 0.8;
  int kernel = 16;
  int rows = 64;
  double occupancy = 1.0;  // target mean points per pixel; sets the column count
  double sensor_height = 1.8;
  int repeats = 3;
  unsigned workers = 1;
  std::uint64_t seed = 0;
};

struct BallQueryBenchRow {
  std::size_t n = 0;
  std::size_t m = 0;
  int kernel = 0;
  double radius = 0.0;
  int rows = 0;
  int cols = 0;
  double brute_ms = 0.0;
  double rv_build_ms = 0.0;
  double rv_query_ms = 0.0;
  double speedup = 0.0;             // brute / rv query
  double speedup_with_build = 0.0;  // brute / (rv build + rv query)
  std::uint64_t brute_inspections = 0;
  std::uint64_t rv_inspections = 0;
  std::uint64_t rv_pixels_visited = 0;
  std::uint64_t brute_in_radius = 0;
  std::uint64_t rv_in_radius = 0;
  std::uint64_t seed = 0;

  double rv_inspections_per_query() const { return m ? static_cast<double>(rv_inspections) / static_cast<double>(m) : 0.0; }
};

struct BallQueryBenchReport {
  std::vector<BallQueryBenchRow> rows;
  void write_csv(std::ostream& out) const;
};

/// Synthetic scene for a benchmark size: 20 boxes carrying half the points,
/// the rest on the ground disc. Deterministic in (n, seed).
Scene bench_scene(std::size_t n, std::uint64_t seed);

/// For each n: same scene and queries for both methods; timings are the
/// minimum over repeats, method by method.
BallQueryBenchReport bench_ball_query(const std::vector<std::size_t>& sizes, const BallQueryBenchConfig& config);

enum class KnnBenchMode { Brute, Voxel, Conquer, All };

KnnBenchMode parse_knn_bench_mode(const std::string& name);

struct KnnBenchConfig {
  std::size_t points = 50000;
  std::size_t queries = 8192;
  std::size_t k = 8;
  int window = 2;
  double voxel_size = 0.8;
  int repeats = 3;
  std::uint64_t seed = 0;
};

struct KnnBenchRow {
  std::string method;
  std::size_t voxels = 0;
  std::size_t queries = 0;
  std::size_t distinct_cells = 0;
  double ms = 0.0;
  std::uint64_t window_scans = 0;
  std::uint64_t cells_probed = 0;
  std::uint64_t candidates = 0;
  bool matches_voxel = false;  // identical output to voxel_knn
  std::uint64_t seed = 0;
};

struct KnnBenchReport {
  std::vector<KnnBenchRow> rows;
  void write_csv(std::ostream& out) const;
};

KnnBenchReport bench_knn(KnnBenchMode mode, const KnnBenchConfig& config);

}  // namespace pointvox
