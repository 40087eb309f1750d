#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dataset.hpp"
#include "errors.hpp"
#include "groundtruth.hpp"
#include "rng.hpp"

using namespace gicn;

namespace {

// one cuboid instance of the given class and extents, plus some background
Scene cuboid_scene(const std::vector<std::pair<int, Point3>>& instances, int num_classes,
                   uint64_t seed) {
  Scene s;
  s.num_classes = num_classes;
  Rng rng(seed);
  double offset = 0.0;
  for (size_t k = 0; k < instances.size(); ++k) {
    auto [cls, ext] = instances[k];
    for (int i = 0; i < 60; ++i) {
      s.cloud.positions.push_back({offset + rng.uniform(0, ext.x), rng.uniform(0, ext.y),
                                   rng.uniform(0, ext.z)});
      s.semantic_id.push_back(cls);
      s.instance_id.push_back(int(k));
    }
    // pin the exact corners so the box is exactly ext
    s.cloud.positions.push_back({offset, 0, 0});
    s.semantic_id.push_back(cls);
    s.instance_id.push_back(int(k));
    s.cloud.positions.push_back({offset + ext.x, ext.y, ext.z});
    s.semantic_id.push_back(cls);
    s.instance_id.push_back(int(k));
    offset += ext.x + 0.5;
  }
  s.recompute_extent();
  return s;
}

}  // namespace

TEST_CASE("gt_center_point basics") {
  std::vector<Point3> pts{{5, 5, 5}};
  CHECK(gt_center_point(pts, {0}) == 0);

  // symmetric pair: tie broken to the lowest index
  pts = {{0, 0, 0}, {2, 0, 0}};
  CHECK(gt_center_point(pts, {0, 1}) == 0);

  CHECK_THROWS_AS(gt_center_point(pts, {}), std::invalid_argument);
}

TEST_CASE("hollow shell center is a member point, never the centroid") {
  Rng rng(3);
  std::vector<Point3> pts;
  std::vector<int> members;
  for (int i = 0; i < 400; ++i) {
    double u = rng.uniform(-1.0, 1.0);
    double phi = rng.uniform(0.0, 2 * 3.14159265358979);
    double s = std::sqrt(1 - u * u);
    pts.push_back({s * std::cos(phi), s * std::sin(phi), u});
    members.push_back(i);
  }
  int chosen = gt_center_point(pts, members);
  Point3 c = centroid(pts, members);
  // brute-force oracle: the member minimizing distance to the centroid
  int oracle = 0;
  for (int i = 1; i < 400; ++i)
    if (distance(pts[size_t(i)], c) < distance(pts[size_t(oracle)], c)) oracle = i;
  CHECK(chosen == oracle);
  CHECK(distance(pts[size_t(chosen)], c) > 0.8);  // stays on the shell
}

TEST_CASE("gt_heatmap values and focal indicator") {
  SceneConfig cfg = SceneConfig::toy_default();
  Scene s = generate_scene(cfg, 5);
  HeatmapGt hm = gt_heatmap(s);
  auto lists = instance_point_lists(s);

  // center point of each instance attains exactly 1, exactly once
  for (const auto& members : lists) {
    int center = gt_center_point(s.cloud.positions, members);
    CHECK(hm.values[size_t(center)] == doctest::Approx(1.0));
    CHECK(hm.focal_positive[size_t(center)] == 1);
    int ones = 0;
    for (int i : members)
      if (hm.values[size_t(i)] == 1.0) ones += 1;
    CHECK(ones == 1);
  }
  for (size_t i = 0; i < s.num_points(); ++i) {
    CHECK(hm.values[i] >= 0.0);
    CHECK(hm.values[i] <= 1.0);
    if (s.instance_id[i] < 0) {
      CHECK(hm.values[i] == 0.0);
      CHECK(hm.focal_positive[i] == 0);
    } else {
      CHECK(hm.focal_positive[i] == (hm.values[i] > 0.4 ? 1 : 0));
    }
  }
}

TEST_CASE("gaussian value one sigma out") {
  GaussianSpec g;
  g.center = {0, 0, 0};
  g.sigma = {0.25, 0.3, 0.2};
  CHECK(gaussian_value(g, {0.25, 0, 0}) == doctest::Approx(std::exp(-0.5)));
  CHECK(gaussian_value(g, {0, 0, 0}) == 1.0);
}

TEST_CASE("gt_boxes are tight and contain every member") {
  SceneConfig cfg = SceneConfig::toy_default();
  Scene s = generate_scene(cfg, 9);
  auto boxes = gt_boxes(s);
  auto lists = instance_point_lists(s);
  REQUIRE(boxes.size() == lists.size());
  for (size_t k = 0; k < boxes.size(); ++k) {
    for (int i : lists[k]) CHECK(boxes[k].contains(s.cloud.positions[size_t(i)]));
    // tight: every face touches some point
    Aabb rebuilt = tight_bounds(s.cloud.positions, lists[k]);
    CHECK(rebuilt == boxes[k]);
  }
}

TEST_CASE("single point instance gives a degenerate box") {
  Scene s;
  s.num_classes = 2;
  s.cloud.positions = {{1, 2, 3}, {0, 0, 0}};
  s.semantic_id = {1, 0};
  s.instance_id = {0, -1};
  s.recompute_extent();
  auto boxes = gt_boxes(s);
  REQUIRE(boxes.size() == 1);
  CHECK(boxes[0].min_corner == boxes[0].max_corner);
  CHECK(aabb_volume(boxes[0]) == 0.0);
}

TEST_CASE("class radius of a unit cube instance is half the diagonal") {
  Scene s = cuboid_scene({{1, {1, 1, 1}}}, 2, 17);
  ClassRadiusTable t = compute_class_radii({s});
  CHECK(t.lookup(1) == doctest::Approx(std::sqrt(3.0) / 2.0));
  // fallback for unseen classes
  CHECK(t.lookup(9) == doctest::Approx(t.global_radius));
}

TEST_CASE("two identical instances give the same radius as one") {
  Scene one = cuboid_scene({{1, {0.8, 0.6, 0.4}}}, 2, 21);
  Scene two = cuboid_scene({{1, {0.8, 0.6, 0.4}}, {1, {0.8, 0.6, 0.4}}}, 2, 21);
  ClassRadiusTable ta = compute_class_radii({one});
  ClassRadiusTable tb = compute_class_radii({two});
  CHECK(ta.lookup(1) == doctest::Approx(tb.lookup(1)).epsilon(1e-12));
}

TEST_CASE("radii order follows class size, permutation invariant over scenes") {
  Scene s1 = cuboid_scene({{1, {0.3, 0.3, 0.3}}, {2, {0.6, 0.6, 0.6}}}, 4, 2);
  Scene s2 = cuboid_scene({{3, {1.0, 1.0, 1.0}}, {1, {0.3, 0.3, 0.3}}}, 4, 3);
  ClassRadiusTable fwd = compute_class_radii({s1, s2});
  ClassRadiusTable rev = compute_class_radii({s2, s1});
  CHECK(fwd.lookup(1) < fwd.lookup(2));
  CHECK(fwd.lookup(2) < fwd.lookup(3));
  for (int cls : {1, 2, 3}) CHECK(fwd.lookup(cls) == doctest::Approx(rev.lookup(cls)).epsilon(1e-12));
}

TEST_CASE("size groups: twelve classes chunk into pairs by volume") {
  // class c has extents (c/10, c/10, c/10): volumes strictly increasing
  std::vector<std::pair<int, Point3>> instances;
  for (int c = 1; c <= 12; ++c)
    instances.push_back({c, {c * 0.1, c * 0.1, c * 0.1}});
  Scene s = cuboid_scene(instances, 13, 4);
  SizeGroupTable t = compute_size_groups({s}, 6);
  REQUIRE(t.k == 6);
  // explicit sort + chunk oracle: {1,2},{3,4},...
  for (int g = 0; g < 6; ++g) {
    REQUIRE(t.groups[size_t(g)].classes.size() == 2);
    CHECK(t.groups[size_t(g)].classes[0] == 2 * g + 1);
    CHECK(t.groups[size_t(g)].classes[1] == 2 * g + 2);
  }
  // partition: every class in exactly one group
  std::vector<int> seen(13, 0);
  for (const auto& g : t.groups)
    for (int c : g.classes) seen[size_t(c)] += 1;
  for (int c = 1; c <= 12; ++c) CHECK(seen[size_t(c)] == 1);
}

TEST_CASE("size groups: k reduces to the class count") {
  Scene s = cuboid_scene({{1, {0.4, 0.4, 0.4}}, {2, {0.8, 0.8, 0.8}}}, 3, 8);
  SizeGroupTable t = compute_size_groups({s}, 6);
  CHECK(t.k == 2);
  CHECK(t.groups.size() == 2);
  CHECK(t.class_to_group.at(1) == 0);
  CHECK(t.class_to_group.at(2) == 1);
}

TEST_CASE("k equal to one pools every class") {
  Scene s = cuboid_scene({{1, {0.4, 0.4, 0.4}}, {2, {0.8, 0.8, 0.8}}}, 3, 8);
  SizeGroupTable t = compute_size_groups({s}, 1);
  REQUIRE(t.k == 1);
  CHECK(t.groups[0].classes.size() == 2);
  // instance-weighted global mean extents
  Point3 m = t.groups[0].mean_extents;
  CHECK(m.x == doctest::Approx(0.6));
}

TEST_CASE("six classes with k=6 map one class per group with class mean extents") {
  std::vector<std::pair<int, Point3>> instances;
  for (int c = 1; c <= 6; ++c) instances.push_back({c, {c * 0.1, c * 0.1, c * 0.1}});
  Scene s = cuboid_scene(instances, 7, 5);
  SizeGroupTable t = compute_size_groups({s}, 6);
  REQUIRE(t.k == 6);
  for (int g = 0; g < 6; ++g) {
    REQUIRE(t.groups[size_t(g)].classes.size() == 1);
    int cls = t.groups[size_t(g)].classes[0];
    CHECK(cls == g + 1);
    CHECK(t.groups[size_t(g)].mean_extents.x == doctest::Approx(cls * 0.1));
  }
}

TEST_CASE("stats file round trip") {
  SceneConfig cfg = SceneConfig::toy_default();
  std::vector<Scene> scenes;
  for (uint64_t seed = 0; seed < 4; ++seed) scenes.push_back(generate_scene(cfg, seed));
  StatsTables stats = compute_stats(scenes, 6);
  std::string path = "/tmp/gicn_test_stats.json";
  write_stats(stats, path);
  StatsTables back = read_stats(path);
  CHECK(back.radii.global_radius == doctest::Approx(stats.radii.global_radius).epsilon(1e-12));
  CHECK(back.radii.radius == stats.radii.radius);
  CHECK(back.groups.k == stats.groups.k);
  CHECK(back.groups.class_to_group == stats.groups.class_to_group);
  REQUIRE(back.groups.groups.size() == stats.groups.groups.size());
  for (size_t g = 0; g < back.groups.groups.size(); ++g)
    CHECK(back.groups.groups[g].classes == stats.groups.groups[g].classes);
  CHECK_THROWS_AS(read_stats("/tmp/gicn_absent_stats.json"), IoError);
}
