#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "pointvox/range_image.hpp"

using namespace pointvox;
constexpr double kPi = std::numbers::pi;

namespace {

std::set<std::int64_t> as_set(std::span<const std::int64_t> s) { return {s.begin(), s.end()}; }

PointCloud random_cloud(SeededRng& rng, std::size_t n, double extent) {
  std::vector<Vec3> pts;
  for (std::size_t i = 0; i < n; ++i) {
    pts.emplace_back(rng.uniform(-extent, extent), rng.uniform(-extent, extent), rng.uniform(-1.5, 1.5));
  }
  return PointCloud(std::move(pts));
}

}  // namespace

TEST_CASE("augmentation inverse") {
  const PointCloud pc({Vec3(1, 0, 0), Vec3(-2, 3, 0.5)});
  AugmentationRecord empty;
  CHECK(inverse_augment(pc, empty).positions() == pc.positions());

  AugmentationRecord rot;
  rot.push(GlobalRotation{kPi / 2});
  CHECK((rot.apply(Vec3(1, 0, 0)) - Vec3(0, 1, 0)).norm() < 1e-12);
  CHECK((rot.invert(rot.apply(Vec3(1, 0, 0))) - Vec3(1, 0, 0)).norm() < 1e-12);

  AugmentationRecord chain;
  chain.push(GlobalRotation{0.3});
  chain.push(FlipAxis{1});
  chain.push(GlobalScale{1.04});
  chain.push(FlipAxis{0});
  chain.push(CopyPaste{0, 1});
  const auto back = inverse_augment(chain.apply(pc), chain);
  for (std::size_t i = 0; i < pc.size(); ++i) CHECK((back.position(i) - pc.position(i)).norm() < 1e-12);

  CHECK_THROWS_AS(chain.push(GlobalScale{0.0}), Error);
  CHECK_THROWS_AS(chain.push(FlipAxis{2}), Error);
}

TEST_CASE("augmented boxes follow their points") {
  AugmentationRecord rec;
  rec.push(GlobalRotation{0.7});
  rec.push(FlipAxis{1});
  rec.push(GlobalScale{0.96});
  rec.push(FlipAxis{0});
  const BoundingBox3D box(Vec3(5, 2, 0.8), Vec3(4, 2, 1.6), 0.2);
  const auto moved = rec.apply(box);
  for (const Vec3& local : {Vec3(1.9, 0.9, 0.7), Vec3(-1.2, 0.4, -0.5), Vec3(0, -0.99, 0)}) {
    CHECK(point_in_box(rec.apply(box.to_world(local)), moved));
  }
  CHECK(moved.size().x() == doctest::Approx(4 * 0.96));
}

TEST_CASE("augmentation text format round trip") {
  AugmentationRecord rec;
  rec.push(GlobalRotation{0.123456789012345});
  rec.push(FlipAxis{1});
  rec.push(GlobalScale{1.02});
  rec.push(CopyPaste{3, 9});
  std::stringstream ss;
  write_augmentation(ss, rec);
  const auto back = read_augmentation(ss);
  REQUIRE(back.steps().size() == 4);
  const Vec3 p(1.5, -2, 3);
  CHECK(back.apply(p) == rec.apply(p));
  std::stringstream bad("twist 1\n");
  CHECK_THROWS_AS(read_augmentation(bad), Error);
}

TEST_CASE("range image construction") {
  RangeImageSpec spec;
  const auto id = RigidTransform::identity();
  const auto empty = VirtualRangeImage::build(PointCloud(), id, spec);
  CHECK(empty.size() == 0);
  CHECK(empty.offsets().back() == 0);

  const auto one = VirtualRangeImage::build(PointCloud({Vec3(5, 1, 0.2)}), id, spec);
  int nonempty = 0;
  for (int r = 0; r < spec.rows; ++r) {
    for (int c = 0; c < spec.cols; ++c) {
      if (one.end(r, c) > one.start(r, c)) {
        ++nonempty;
        CHECK(one.end(r, c) - one.start(r, c) == 1);
      }
    }
  }
  CHECK(nonempty == 1);

  // Same direction, two ranges: one pixel holding both.
  const auto two = VirtualRangeImage::build(PointCloud({Vec3(2, 1, 0.3), Vec3(4, 2, 0.6)}), id, spec);
  const auto px = two.pixel_of(cartesian_to_spherical(Vec3(2, 1, 0.3)));
  CHECK(two.end(px.row, px.col) - two.start(px.row, px.col) == 2);

  SeededRng rng(1);
  const auto cloud = random_cloud(rng, 3000, 20);
  const auto img = VirtualRangeImage::build(cloud, RigidTransform::translation({0, 0, -1.8}), spec);
  CHECK(img.offsets().back() == cloud.size());
  CHECK(std::is_sorted(img.offsets().begin(), img.offsets().end()));
  std::vector<std::uint32_t> idx = img.original_index();
  std::sort(idx.begin(), idx.end());
  for (std::uint32_t i = 0; i < idx.size(); ++i) CHECK(idx[i] == i);
  for (std::size_t i = 0; i < img.size(); ++i) {
    CHECK(img.sorted_positions()[i] == cloud.position(img.original_index()[i]));
  }

  std::ostringstream dump;
  one.write_debug_csv(dump);
  CHECK(dump.str().rfind("row,col,start,end", 0) == 0);
}

TEST_CASE("rows run from the top inclination down") {
  RangeImageSpec spec;
  const auto img = VirtualRangeImage::build(PointCloud(), RigidTransform::identity(), spec);
  CHECK(img.row_of(spec.inclination_max - 1e-6) == 0);
  CHECK(img.row_of(spec.inclination_min + 1e-6) == spec.rows - 1);
  CHECK(img.row_of(1.5) == 0);
  CHECK(img.row_of(-1.5) == spec.rows - 1);
}

TEST_CASE("ball query hand cases") {
  RangeImageSpec spec;
  const std::vector<Vec3> pts{Vec3(10, 0.5, 0), Vec3(10, 0.79, 0), Vec3(10, 0.81, 0)};
  const PointCloud cloud(pts);
  const auto img = VirtualRangeImage::build(cloud, RigidTransform::identity(), spec);
  const std::vector<Vec3> q{Vec3(10, 0, 0)};
  BallQueryRequest req;
  req.radius = 0.8;
  req.max_neighbors = 8;
  req.kernel = 64;
  REQUIRE(window_covers_ball(img, q[0], req.radius, req.kernel));
  for (auto mode : {SelectionMode::Random, SelectionMode::Sequential}) {
    req.mode = mode;
    CHECK(as_set(ball_query(img, q, req).neighbors(0)) == std::set<std::int64_t>{0, 1});
    CHECK(as_set(brute_force_ball_query(cloud, q, req).neighbors(0)) == std::set<std::int64_t>{0, 1});
  }

  // Colocated lone point.
  const PointCloud lone({Vec3(3, 4, 0.5)});
  const auto img2 = VirtualRangeImage::build(lone, RigidTransform::identity(), spec);
  const std::vector<Vec3> q2{Vec3(3, 4, 0.5)};
  const auto res = ball_query(img2, q2, req);
  REQUIRE(res.count(0) == 1);
  CHECK(res.neighbors(0)[0] == 0);
  CHECK(res.indices[1] == -1);

  req.radius = -1;
  CHECK_THROWS_AS(ball_query(img2, q2, req), Error);
}

TEST_CASE("property: ball query agrees with brute force") {
  SeededRng rng(31);
  RangeImageSpec spec;
  spec.cols = 512;
  for (int t = 0; t < 30; ++t) {
    const auto cloud = random_cloud(rng, 2000, 8);
    const auto img = VirtualRangeImage::build(cloud, RigidTransform::translation({0, 0, -1}), spec);
    std::vector<Vec3> queries;
    for (int i = 0; i < 20; ++i) queries.push_back(cloud.position(rng.below(cloud.size())));
    BallQueryRequest req;
    req.radius = 0.8;
    req.max_neighbors = 1000;
    req.kernel = 16;
    req.seed = static_cast<std::uint64_t>(t);
    const auto rv = ball_query(img, queries, req);
    const auto bf = brute_force_ball_query(cloud, queries, req);
    for (std::size_t q = 0; q < queries.size(); ++q) {
      const auto got = as_set(rv.neighbors(q));
      const auto want = as_set(bf.neighbors(q));
      CHECK(std::includes(want.begin(), want.end(), got.begin(), got.end()));
      if (window_covers_ball(img, queries[q], req.radius, req.kernel)) CHECK(got == want);
      for (auto i : got) CHECK((cloud.position(static_cast<std::size_t>(i)) - queries[q]).norm() < req.radius);
    }
  }
}

TEST_CASE("random selection: subset, seeded, worker independent") {
  SeededRng rng(8);
  RangeImageSpec spec;
  spec.cols = 256;
  const auto cloud = random_cloud(rng, 4000, 5);
  const auto img = VirtualRangeImage::build(cloud, RigidTransform::identity(), spec);
  std::vector<Vec3> queries;
  for (int i = 0; i < 40; ++i) queries.push_back(cloud.position(rng.below(cloud.size())));
  BallQueryRequest req;
  req.radius = 1.0;
  req.max_neighbors = 4;
  req.seed = 99;
  BallQueryCounters c1, c4;
  const auto a = ball_query(img, queries, req, &c1, 1);
  const auto b = ball_query(img, queries, req, &c4, 4);
  CHECK(a.indices == b.indices);
  CHECK(c1.candidates_inspected == c4.candidates_inspected);
  CHECK(c1.queries == 40);
  req.max_neighbors = 100000;
  const auto full = brute_force_ball_query(cloud, queries, req);
  req.max_neighbors = 4;
  req.mode = SelectionMode::Sequential;
  const auto seq = ball_query(img, queries, req);
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const auto all = as_set(full.neighbors(q));
    for (auto i : a.neighbors(q)) CHECK(all.count(i));
    for (auto i : seq.neighbors(q)) CHECK(all.count(i));
    CHECK(a.count(q) <= 4);
    if (window_covers_ball(img, queries[q], req.radius, req.kernel)) CHECK(a.count(q) == std::min<std::size_t>(4, all.size()));
  }
}

TEST_CASE("property: random selection is uniform over the kept set") {
  RangeImageSpec spec;
  const PointCloud cloud({Vec3(10, 0, 0), Vec3(10, 0.1, 0), Vec3(10, -0.1, 0), Vec3(10, 0, 0.1)});
  const auto img = VirtualRangeImage::build(cloud, RigidTransform::identity(), spec);
  const std::vector<Vec3> q{Vec3(10, 0, 0)};
  BallQueryRequest req;
  req.radius = 0.5;
  req.max_neighbors = 2;
  req.kernel = 64;
  REQUIRE(window_covers_ball(img, q[0], req.radius, req.kernel));
  constexpr int kTrials = 10000;
  std::array<int, 4> hits{};
  for (int t = 0; t < kTrials; ++t) {
    req.seed = static_cast<std::uint64_t>(t);
    const auto rv = ball_query(img, q, req);
    REQUIRE(rv.count(0) == 2);
    for (auto i : rv.neighbors(0)) ++hits[static_cast<std::size_t>(i)];
  }
  for (int h : hits) CHECK(std::abs(static_cast<double>(h) / kTrials - 0.5) < 0.02);
}
