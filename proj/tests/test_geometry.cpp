#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "errors.hpp"
#include "geometry.hpp"
#include "rng.hpp"

using namespace gicn;

namespace {

Aabb random_box(Rng& rng) {
  Point3 a{rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0)};
  Point3 b{a.x + rng.uniform(0.05, 1.5), a.y + rng.uniform(0.05, 1.5),
           a.z + rng.uniform(0.05, 1.5)};
  return {a, b};
}

}  // namespace

TEST_CASE("aabb_volume") {
  CHECK(aabb_volume({{0, 0, 0}, {1, 1, 1}}) == doctest::Approx(1.0));
  CHECK(aabb_volume({{0.3, 0.4, 0.5}, {0.3, 0.4, 0.5}}) == 0.0);
  CHECK(aabb_volume({{0, 0, 0}, {2, 1, 0.5}}) == doctest::Approx(1.0));
}

TEST_CASE("aabb_iou basics") {
  Aabb unit{{0, 0, 0}, {1, 1, 1}};
  CHECK(aabb_iou(unit, unit) == doctest::Approx(1.0));
  CHECK(aabb_iou(unit, {{5, 0, 0}, {6, 1, 1}}) == 0.0);
  // inter = 1, union = 15
  CHECK(aabb_iou({{0, 0, 0}, {2, 2, 2}}, {{1, 1, 1}, {3, 3, 3}}) == doctest::Approx(1.0 / 15.0));
  Aabb degenerate{{0, 0, 0}, {0, 0, 0}};
  CHECK_THROWS_AS(aabb_iou(degenerate, degenerate), NumericError);
}

TEST_CASE("aabb_giou hand values") {
  Aabb unit{{0, 0, 0}, {1, 1, 1}};
  CHECK(aabb_giou(unit, unit) == doctest::Approx(1.0));
  // touching cubes: IoU 0, enclosing volume equals union volume
  CHECK(aabb_giou(unit, {{1, 0, 0}, {2, 1, 1}}) == doctest::Approx(0.0));
  // 1/15 - 12/27
  CHECK(aabb_giou({{0, 0, 0}, {2, 2, 2}}, {{1, 1, 1}, {3, 3, 3}}) ==
        doctest::Approx(1.0 / 15.0 - 12.0 / 27.0));
}

TEST_CASE("giou <= iou with equality iff enclosing equals union") {
  Rng rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    Aabb a = random_box(rng);
    Aabb b = random_box(rng);
    double iou = aabb_iou(a, b);
    double giou = aabb_giou(a, b);
    CHECK(giou <= iou + 1e-12);
    CHECK(aabb_iou(a, b) == doctest::Approx(aabb_iou(b, a)));
    CHECK(aabb_giou(a, b) == doctest::Approx(aabb_giou(b, a)));
    double uni = aabb_volume(a) + aabb_volume(b);
    {
      // recompute union through IoU identity: inter = iou/(1+iou) * uni
      double inter = iou * uni / (1.0 + iou);
      double enc = aabb_volume(enclosing(a, b));
      bool equal_vol = std::fabs(enc - (uni - inter)) < 1e-9;
      bool equal_metric = std::fabs(giou - iou) < 1e-9;
      CHECK(equal_vol == equal_metric);
    }
  }
}

TEST_CASE("monte carlo iou agreement within 3 standard errors") {
  Rng rng(7);
  const int samples = 20000;
  for (int trial = 0; trial < 100; ++trial) {
    Aabb a = random_box(rng);
    // mix of overlapping and disjoint pairs
    Point3 shift{rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8)};
    Aabb b = random_box(rng);
    b.min_corner = b.min_corner + shift;
    b.max_corner = b.max_corner + shift;

    double iou = aabb_iou(a, b);
    Aabb c = enclosing(a, b);
    int in_inter = 0, in_union = 0;
    for (int s = 0; s < samples; ++s) {
      Point3 p{rng.uniform(c.min_corner.x, c.max_corner.x),
               rng.uniform(c.min_corner.y, c.max_corner.y),
               rng.uniform(c.min_corner.z, c.max_corner.z)};
      bool ia = a.contains(p), ib = b.contains(p);
      if (ia && ib) ++in_inter;
      if (ia || ib) ++in_union;
    }
    if (iou == 0.0) {
      CHECK(in_inter == 0);
      continue;
    }
    double pi = double(in_inter) / samples;
    double pu = double(in_union) / samples;
    REQUIRE(pu > 0);
    double est = pi / pu;
    // delta method for the ratio of indicator means with inter <= union
    double var = (est * est / samples) *
                 ((1.0 - pi) / std::max(pi, 1e-12) - (1.0 - pu) / pu);
    double se = std::sqrt(std::max(var, 0.0));
    CHECK(std::fabs(est - iou) <= 3.0 * se + 1e-9);
  }
}

TEST_CASE("canonicalized repairs inverted corners") {
  Aabb box = canonicalized({2, 0, 3}, {1, 1, 1});
  CHECK(box.valid());
  CHECK(box.min_corner.x == 1.0);
  CHECK(box.max_corner.x == 2.0);
  CHECK(box.min_corner.z == 1.0);
  CHECK(box.max_corner.z == 3.0);
}

TEST_CASE("centroid") {
  CHECK(centroid({{1, 2, 3}}) == Point3{1, 2, 3});
  Point3 mid = centroid({{0, 0, 0}, {2, 0, 0}});
  CHECK(mid == Point3{1, 0, 0});
  Point3 mean = centroid({{0, 0, 0}, {1, 0, 0}, {2, 3, 0}});
  CHECK(mean.x == doctest::Approx(1.0));
  CHECK(mean.y == doctest::Approx(1.0));
  CHECK(mean.z == doctest::Approx(0.0));
  CHECK_THROWS_AS(centroid(std::vector<Point3>{}), NumericError);
}
