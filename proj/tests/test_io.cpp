#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "pointvox/config.hpp"
#include "pointvox/io.hpp"
#include "pointvox/weights_io.hpp"

using namespace pointvox;

TEST_CASE("PCB round trip keeps float32 values") {
  FeatureMatrix f(2, 2);
  f << 1.5, -2.25, 0.125, 8.0;
  const PointCloud pc({Vec3(1, 2, 3), Vec3(-0.5, 0.25, 100)}, f);
  std::stringstream ss;
  io::write_pcb(ss, pc);
  const auto back = io::read_pcb(ss);
  REQUIRE(back.size() == 2);
  CHECK(back.feature_dim() == 2);
  CHECK(back.position(1) == pc.position(1));
  CHECK(back.features() == f);
}

TEST_CASE("PCB rejects bad magic and truncation") {
  std::stringstream bad("XXXX");
  CHECK_THROWS_AS(io::read_pcb(bad), Error);

  std::stringstream ss;
  io::write_pcb(ss, PointCloud({Vec3(1, 2, 3)}));
  std::string blob = ss.str();
  blob.pop_back();
  std::stringstream cut(blob);
  CHECK_THROWS_AS(io::read_pcb(cut), Error);
}

TEST_CASE("point and box CSV round trip") {
  const PointCloud pc({Vec3(1, 2, 3), Vec3(4, 5, 6)});
  std::stringstream ss;
  io::write_point_csv(ss, pc);
  const auto back = io::read_point_csv(ss);
  CHECK(back.position(1) == Vec3(4, 5, 6));

  const std::vector<BoundingBox3D> boxes{{Vec3(1, 2, 0.5), Vec3(4, 2, 1), 0.3}};
  std::stringstream bs;
  io::write_boxes_csv(bs, boxes);
  const auto b2 = io::read_boxes_csv(bs);
  REQUIRE(b2.size() == 1);
  CHECK(b2[0].yaw() == doctest::Approx(0.3));
  CHECK(b2[0].size().x() == doctest::Approx(4.0));

  std::stringstream wrong("a,b,c\n1,2,3\n");
  CHECK_THROWS_AS(io::read_boxes_csv(wrong), Error);
}

TEST_CASE("key=value config") {
  std::stringstream in("# comment\nalpha = 3\n\nbeta=1.5 # trailing\nv = 1,2,3\nflag = true\n");
  const auto cfg = KeyValueConfig::parse(in, {"alpha", "beta", "v", "flag"});
  CHECK(cfg.get_int("alpha", 0) == 3);
  CHECK(cfg.get_double("beta", 0) == 1.5);
  CHECK(cfg.get_vec3("v", Vec3::Zero()) == Vec3(1, 2, 3));
  CHECK(cfg.get_bool("flag", false));
  CHECK(cfg.get_int("missing", 7) == 7);

  std::stringstream unknown("gamma = 1\n");
  CHECK_THROWS_AS(KeyValueConfig::parse(unknown, {"alpha"}), Error);
  std::stringstream dup("alpha = 1\nalpha = 2\n");
  CHECK_THROWS_AS(KeyValueConfig::parse(dup, {"alpha"}), Error);
  std::stringstream not_int("alpha = x\n");
  CHECK_THROWS_AS(KeyValueConfig::parse(not_int, {"alpha"}).get_int("alpha", 0), Error);
}

TEST_CASE("weight snapshot round trip is byte identical") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "pointvox_weights_test";
  fs::create_directories(dir);
  std::vector<AttentionWeights> blocks{AttentionWeights::seeded(1, 16, 4, 32), AttentionWeights::seeded(2, 16, 4, 32)};
  io::save_weights(dir / "a", blocks);
  const auto loaded = io::load_weights(dir / "a");
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[1].dim == 16);
  CHECK(loaded[1].heads == 4);
  io::save_weights(dir / "b", loaded);

  const auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  CHECK(slurp(dir / "a.bin") == slurp(dir / "b.bin"));
  CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
  // float32 storage: values match to single precision.
  CHECK((loaded[0].q.weight - blocks[0].q.weight).cwiseAbs().maxCoeff() < 1e-7);
  fs::remove_all(dir);
}
