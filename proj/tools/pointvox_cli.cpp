// pointvox: scene generation, pipeline driver and benchmarks.

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "pointvox/bench.hpp"
#include "pointvox/io.hpp"
#include "pointvox/pipeline.hpp"

namespace fs = std::filesystem;
using namespace pointvox;

namespace {

// "-" means stdout.
template <typename Report>
void emit(const Report& report, const std::string& path) {
  if (path == "-") {
    report.write_csv(std::cout);
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write report: " + path);
  report.write_csv(out);
}

fs::path sibling(const fs::path& p, const std::string& suffix) {
  fs::path out = p;
  out.replace_extension();
  out += suffix;
  return out;
}

int gen_scene_cmd(const std::string& spec_path, const fs::path& out, std::string boxes, std::string augmentation) {
  const SceneSpec spec = spec_path.empty() ? SceneSpec{}
                                           : SceneSpec::from_config(KeyValueConfig::load(spec_path, SceneSpec::config_keys()));
  const Scene scene = gen_scene(spec);
  if (boxes.empty()) boxes = sibling(out, ".boxes.csv").string();
  if (augmentation.empty()) augmentation = sibling(out, ".aug.txt").string();
  io::write_pcb(out, scene.cloud);
  io::write_boxes_csv(boxes, scene.boxes);
  std::ofstream aug(augmentation);
  if (!aug) throw Error(ErrorCode::Io, "cannot write augmentation: " + augmentation);
  write_augmentation(aug, scene.augmentation);
  std::cout << "points " << scene.cloud.size() << ", boxes " << scene.boxes.size() << ", seed " << spec.seed << '\n';
  return 0;
}

int run_pipeline_cmd(const fs::path& scene_path, const fs::path& boxes, const std::string& config_path,
                     const std::string& report, std::string augmentation, const std::string& features) {
  Scene scene;
  scene.cloud = io::read_pcb(scene_path);
  scene.boxes = io::read_boxes_csv(boxes);
  if (augmentation.empty()) {
    const fs::path guess = sibling(scene_path, ".aug.txt");
    if (fs::exists(guess)) augmentation = guess.string();
  }
  if (!augmentation.empty()) scene.augmentation = read_augmentation(fs::path(augmentation));
  const PipelineConfig config =
      config_path.empty() ? PipelineConfig{}
                          : PipelineConfig::from_config(KeyValueConfig::load(config_path, PipelineConfig::config_keys()));
  const PipelineResult result = run_pipeline(scene, config);
  emit(result.diagnostics, report);
  if (!features.empty()) {
    std::ofstream out(features);
    if (!out) throw Error(ErrorCode::Io, "cannot write features: " + features);
    out << std::setprecision(17);
    for (Eigen::Index r = 0; r < result.fused.rows(); ++r) {
      for (Eigen::Index c = 0; c < result.fused.cols(); ++c) out << (c ? "," : "") << result.fused(r, c);
      out << '\n';
    }
  }
  if (report != "-") {
    std::cout << "references " << result.diagnostics.references << ", tokens "
              << result.diagnostics.voxel_tokens + result.diagnostics.point_tokens << ", "
              << result.diagnostics.elapsed_ms << " ms\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Point-voxel detection building blocks: scenes, pipeline, benchmarks"};
  app.require_subcommand(1);

  std::string spec_path, out_path, boxes_out, aug_out;
  auto* gen = app.add_subcommand("gen-scene", "Generate a synthetic scene");
  gen->add_option("--spec", spec_path, "Scene spec (key=value)")->check(CLI::ExistingFile);
  gen->add_option("--out", out_path, "Output point cloud (.pcb)")->required();
  gen->add_option("--boxes", boxes_out, "Output boxes CSV (default <out>.boxes.csv)");
  gen->add_option("--augmentation", aug_out, "Output augmentation log (default <out>.aug.txt)");

  std::string scene_path, boxes_in, config_path, report = "-", aug_in, features_out;
  auto* run = app.add_subcommand("run-pipeline", "Run the detection pipeline on a scene");
  run->add_option("--scene", scene_path, "Point cloud (.pcb)")->required()->check(CLI::ExistingFile);
  run->add_option("--boxes", boxes_in, "Boxes CSV")->required()->check(CLI::ExistingFile);
  run->add_option("--config", config_path, "Pipeline config (key=value)")->check(CLI::ExistingFile);
  run->add_option("--report", report, "Diagnostics CSV, - for stdout");
  run->add_option("--augmentation", aug_in, "Augmentation log (default <scene>.aug.txt if present)");
  run->add_option("--features", features_out, "Write fused features CSV");

  std::vector<std::size_t> sizes{25000, 50000, 100000, 200000};
  BallQueryBenchConfig ball;
  std::string ball_report = "-";
  auto* bq = app.add_subcommand("bench-ball-query", "Range-image vs brute-force ball query");
  bq->add_option("--sizes", sizes, "Point counts, ascending")->delimiter(',');
  bq->add_option("--seed", ball.seed, "Seed");
  bq->add_option("--queries", ball.queries, "Query count");
  bq->add_option("--neighbors", ball.max_neighbors, "Neighbors per query");
  bq->add_option("--radius", ball.radius, "Radius");
  bq->add_option("--kernel", ball.kernel, "Window side in pixels");
  bq->add_option("--rows", ball.rows, "Range image rows");
  bq->add_option("--occupancy", ball.occupancy, "Mean points per pixel (sets columns)");
  bq->add_option("--repeats", ball.repeats, "Timing repeats (minimum kept)");
  bq->add_option("--workers", ball.workers, "Worker threads for the range-image query");
  bq->add_option("--report", ball_report, "Report CSV, - for stdout");

  std::string knn_mode = "all";
  KnnBenchConfig knn;
  std::string knn_report = "-";
  auto* bk = app.add_subcommand("bench-knn", "Voxel KNN variants");
  bk->add_option("--mode", knn_mode, "brute|voxel|conquer|all");
  bk->add_option("--points", knn.points, "Scene point count");
  bk->add_option("--queries", knn.queries, "Query count");
  bk->add_option("--k", knn.k, "Neighbors");
  bk->add_option("--window", knn.window, "Window half-width in cells");
  bk->add_option("--voxel-size", knn.voxel_size, "Voxel edge");
  bk->add_option("--repeats", knn.repeats, "Timing repeats (minimum kept)");
  bk->add_option("--seed", knn.seed, "Seed");
  bk->add_option("--report", knn_report, "Report CSV, - for stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return gen_scene_cmd(spec_path, out_path, boxes_out, aug_out);
    if (*run) return run_pipeline_cmd(scene_path, boxes_in, config_path, report, aug_in, features_out);
    if (*bq) {
      emit(bench_ball_query(sizes, ball), ball_report);
      return 0;
    }
    if (*bk) {
      emit(bench_knn(parse_knn_bench_mode(knn_mode), knn), knn_report);
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
    return 2;
  }
  return 1;
}
