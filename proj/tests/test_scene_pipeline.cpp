#include <doctest.h>

#include <sstream>

#include "pointvox/bench.hpp"
#include "pointvox/pipeline.hpp"

using namespace pointvox;

namespace {

PipelineConfig small_config() {
  PipelineConfig c;
  c.references = 48;
  c.neighbors = 16;
  c.model_dim = 16;
  c.ffn_dim = 32;
  c.heads = 4;
  return c;
}

SceneSpec small_scene(std::uint64_t seed) {
  SceneSpec s;
  s.extent = 25;
  s.objects = 4;
  s.points_per_object = 200;
  s.background_points = 1500;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("gen_scene basics") {
  SceneSpec s = small_scene(1);
  s.objects = 0;
  const auto bg = gen_scene(s);
  CHECK(bg.boxes.empty());
  CHECK(bg.cloud.size() == 1500);

  const auto a = gen_scene(small_scene(4));
  const auto b = gen_scene(small_scene(4));
  CHECK(a.cloud.positions() == b.cloud.positions());
  CHECK(a.cloud.size() == 4 * 200 + 1500);
  for (std::size_t i = 0; i < a.boxes.size(); ++i) {
    for (std::size_t j = i + 1; j < a.boxes.size(); ++j) {
      const double gap = (a.boxes[i].center() - a.boxes[j].center()).head<2>().norm();
      CHECK(gap > 0.5 * (a.boxes[i].size().head<2>().norm() + a.boxes[j].size().head<2>().norm()));
    }
  }
}

TEST_CASE("surface samples sit on their box") {
  SceneSpec s;
  s.objects = 1;
  s.points_per_object = 100;
  s.background_points = 0;
  s.noise = 0;
  s.seed = 5;
  const auto scene = gen_scene(s);
  REQUIRE(scene.boxes.size() == 1);
  const auto& box = scene.boxes[0];
  const BoundingBox3D inflated(box.center(), box.size() + Vec3::Constant(2e-6), box.yaw());
  int inside = 0;
  for (const auto& p : scene.cloud.positions()) inside += point_in_box(p, inflated);
  CHECK(inside >= 95);
}

TEST_CASE("gen_scene placement failure and validation") {
  SceneSpec s;
  s.extent = 4;
  s.objects = 30;
  try {
    gen_scene(s);
    FAIL("crowded scene placed");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::PlacementFailure);
  }
  s.noise = -1;
  CHECK_THROWS_AS(gen_scene(s), Error);
}

TEST_CASE("pipeline config parsing") {
  std::stringstream in("references = 64\npos_encoding = bias\nsampling = fps\nvoxel_size = 0.2,0.2,0.3\n");
  const auto c = PipelineConfig::from_config(KeyValueConfig::parse(in, PipelineConfig::config_keys()));
  CHECK(c.references == 64);
  CHECK(c.pos_encoding == PosEncodingMode::BiasRelative);
  CHECK(c.sampling == SamplingStrategy::Fps);
  CHECK(c.voxel_size == Vec3(0.2, 0.2, 0.3));
  CHECK(c.neighbors == 128);

  std::stringstream bad("heads = 3\n");
  CHECK_THROWS_AS(PipelineConfig::from_config(KeyValueConfig::parse(bad, PipelineConfig::config_keys())), Error);
  std::stringstream unknown("learning_rate = 1\n");
  CHECK_THROWS_AS(KeyValueConfig::parse(unknown, PipelineConfig::config_keys()), Error);
}

TEST_CASE("default config matches the published settings") {
  const PipelineConfig c;
  CHECK(c.references == 512);
  CHECK(c.neighbors == 128);
  CHECK(c.voxel_radius == 8.0);
  CHECK(c.point_radius == 3.2);
  CHECK(c.model_dim == 128);
  CHECK(c.ffn_dim == 512);
  CHECK(c.heads == 4);
  CHECK(c.interp_k == 8);
  const auto g = c.grid_spec();
  CHECK(g.extents[0] == 188);
  CHECK(g.extents[2] == 5);
}

TEST_CASE("pipeline on an empty scene reports EmptyGrid") {
  Scene empty;
  try {
    run_pipeline(empty, small_config());
    FAIL("empty scene accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyGrid);
    CHECK(std::string(e.what()).find("pipeline") != std::string::npos);
  }
}

TEST_CASE("pipeline with oracle predictions has zero losses") {
  SceneSpec s = small_scene(2);
  s.objects = 1;
  const auto scene = gen_scene(s);
  const auto res = run_pipeline(scene, small_config());
  const auto& d = res.diagnostics;
  CHECK(d.seg_loss < 1e-9);
  CHECK(d.offset_loss < 1e-9);
  CHECK(d.cls_loss - d.cls_loss_floor < 1e-9);
  CHECK(d.reg.total() < 1e-9);
  CHECK(d.foreground_references > 0);
}

TEST_CASE("pipeline token counts and determinism") {
  const auto scene = gen_scene(small_scene(3));
  const auto cfg = small_config();
  const auto a = run_pipeline(scene, cfg);
  const auto b = run_pipeline(scene, cfg);
  CHECK(a.fused == b.fused);
  CHECK(a.fused.rows() == 48);
  CHECK(a.diagnostics.max_voxel_tokens <= cfg.neighbors);
  CHECK(a.diagnostics.max_point_tokens <= cfg.neighbors);
  CHECK(a.diagnostics.voxel_tokens <= cfg.neighbors * a.diagnostics.references);

  auto other = cfg;
  other.seed = 1;
  CHECK_FALSE(run_pipeline(scene, other).fused == a.fused);

  std::ostringstream csv;
  a.diagnostics.write_csv(csv);
  CHECK(csv.str().find("cls_loss_floor,") != std::string::npos);
}

TEST_CASE("ball query benchmark report") {
  BallQueryBenchConfig cfg;
  cfg.queries = 32;
  cfg.repeats = 1;
  cfg.seed = 4;
  const auto a = bench_ball_query({4000, 8000}, cfg);
  const auto b = bench_ball_query({4000, 8000}, cfg);
  REQUIRE(a.rows.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(a.rows[i].rv_inspections == b.rows[i].rv_inspections);
    CHECK(a.rows[i].brute_in_radius == b.rows[i].brute_in_radius);
    CHECK(a.rows[i].rv_in_radius <= a.rows[i].brute_in_radius);
    CHECK(a.rows[i].brute_ms > 0);
    CHECK(a.rows[i].speedup == doctest::Approx(a.rows[i].brute_ms / a.rows[i].rv_query_ms));
  }
  CHECK_THROWS_AS(bench_ball_query({8000, 4000}, cfg), Error);
  std::ostringstream out;
  a.write_csv(out);
  CHECK(out.str().rfind("n,m,kernel,radius", 0) == 0);
}

TEST_CASE("knn benchmark report") {
  KnnBenchConfig cfg;
  cfg.points = 4000;
  cfg.queries = 500;
  cfg.repeats = 1;
  const auto r = bench_knn(KnnBenchMode::All, cfg);
  REQUIRE(r.rows.size() == 3);
  CHECK(r.rows[1].matches_voxel);
  CHECK(r.rows[2].matches_voxel);
  CHECK(r.rows[2].window_scans == r.rows[2].distinct_cells);
  CHECK(r.rows[1].window_scans == 500);
  CHECK_THROWS_AS(parse_knn_bench_mode("kd"), Error);
}
