#include <doctest.h>

#include <cmath>
#include <numbers>

#include "pointvox/losses.hpp"

using namespace pointvox;

TEST_CASE("smooth l1 branches") {
  CHECK(loss::smooth_l1(0.5) == doctest::Approx(0.125));
  CHECK(loss::smooth_l1(-2.0) == doctest::Approx(1.5));
  CHECK(loss::smooth_l1(1.0) == doctest::Approx(0.5));
  CHECK(loss::smooth_l1(0.1, 0.5) == doctest::Approx(0.01));
}

TEST_CASE("segmentation loss") {
  CHECK(loss::seg_loss({{0.5}, {1}}) == doctest::Approx(std::log(2.0)));
  CHECK(loss::seg_loss({{1.0 - 1e-9}, {1}}) < 1e-8);
  const double a = loss::seg_loss({{0.3}, {1}});
  const double b = loss::seg_loss({{0.8}, {0}});
  CHECK(loss::seg_loss({{0.3, 0.8}, {1, 0}}) == doctest::Approx((a + b) / 2));
  CHECK(loss::seg_loss({{1.0, 0.0}, {1, 0}}) == 0.0);
  CHECK(std::isfinite(loss::seg_loss({{0.0}, {1}})));
  CHECK_THROWS_AS(loss::seg_loss({{}, {}}), Error);
  CHECK_THROWS_AS(loss::seg_loss({{0.5}, {2}}), Error);
  CHECK_THROWS_AS(loss::seg_loss({{0.5, 0.5}, {1}}), Error);
}

TEST_CASE("offset loss") {
  CHECK(loss::offset_loss({{Vec3(1, 2, 3)}, {Vec3(1, 2, 3)}}) == 0.0);
  CHECK(loss::offset_loss({{Vec3(0.5, 0, 0)}, {Vec3::Zero()}}) == doctest::Approx(0.125));
  CHECK(loss::offset_loss({{Vec3(2, 0, 0)}, {Vec3::Zero()}}) == doctest::Approx(1.5));
  CHECK_THROWS_AS(loss::offset_loss({{}, {}}), Error);
}

TEST_CASE("centerness targets") {
  const BoundingBox3D cube(Vec3::Zero(), Vec3::Ones(), 0.0);
  CHECK(loss::centerness_target(Vec3::Zero(), cube) == doctest::Approx(1.0));
  CHECK(loss::centerness_target(Vec3(0.5, 0.1, 0.0), cube) == 0.0);
  CHECK(loss::centerness_target(Vec3(0.0, 0.0, -0.5), cube) == 0.0);
  CHECK(loss::centerness_target(Vec3(2, 0, 0), cube) == 0.0);
  CHECK(std::abs(loss::centerness_target(Vec3(0.25, 0, 0), cube) - std::cbrt(1.0 / 3.0)) < 1e-12);
  const BoundingBox3D turned(Vec3(1, 1, 1), Vec3(2, 1, 1), std::numbers::pi / 2);
  CHECK(std::abs(loss::centerness_target(Vec3(1, 1.5, 1), turned) - std::cbrt(1.0 / 3.0)) < 1e-12);
}

TEST_CASE("classification loss") {
  CHECK(loss::cls_loss({{0.5}, {0.5}}) == doctest::Approx(std::log(2.0)));
  CHECK(loss::cls_loss({{1.0 - 1e-9}, {1.0}}) < 1e-8);
  CHECK(loss::cls_loss({{1e-9}, {0.0}}) < 1e-8);
  const std::vector<double> labels{0.2, 0.9, 0.0};
  CHECK(loss::cls_loss({labels, labels}) == doctest::Approx(loss::cls_loss_floor(labels)));
  CHECK(loss::cls_loss({{0.3, 0.8, 0.1}, labels}) > loss::cls_loss_floor(labels));
  CHECK_THROWS_AS(loss::cls_loss({{0.5}, {1.5}}), Error);
}

TEST_CASE("regression loss") {
  const loss::BoxParams t{Vec3(1, 2, 3), Vec3(4, 2, 1.5), 0.3};
  const std::vector<loss::BoxParams> target{t};
  auto r = loss::reg_loss(target, target);
  CHECK(r.total() == 0.0);

  loss::BoxParams flipped = t;
  flipped.yaw += std::numbers::pi;
  r = loss::reg_loss(std::vector<loss::BoxParams>{flipped}, target);
  CHECK(r.angle < 1e-12);

  loss::BoxParams wide = t;
  wide.size.x() *= 2;
  r = loss::reg_loss(std::vector<loss::BoxParams>{wide}, target);
  CHECK(r.size == doctest::Approx(0.5 * std::log(2.0) * std::log(2.0)));
  CHECK(r.center == 0.0);

  CHECK_THROWS_AS(loss::reg_loss(std::vector<loss::BoxParams>{}, std::vector<loss::BoxParams>{}), Error);
}

TEST_CASE("property: perfect predictions give zero loss") {
  SeededRng rng(17);
  for (int t = 0; t < 200; ++t) {
    loss::SegBatch seg;
    loss::OffsetBatch off;
    std::vector<loss::BoxParams> boxes;
    for (int i = 0; i < 20; ++i) {
      const int label = rng.uniform() < 0.5;
      seg.labels.push_back(label);
      seg.probs.push_back(label);
      const Vec3 o(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-1, 1));
      off.predicted.push_back(o);
      off.targets.push_back(o);
      boxes.push_back({o, Vec3(rng.uniform(1, 5), rng.uniform(1, 3), rng.uniform(1, 2)), rng.uniform(-3, 3)});
    }
    CHECK(loss::seg_loss(seg) < 1e-9);
    CHECK(loss::offset_loss(off) < 1e-9);
    CHECK(loss::reg_loss(boxes, boxes).total() < 1e-9);
  }
}
