#pragma once

#include <map>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "geometry.hpp"

namespace gicn {

// Per-instance Gaussian: centered on the member point nearest the centroid,
// per-axis sigma of max(half extent, 1 cm) / 2.
struct GaussianSpec {
  Point3 center;
  Point3 sigma;
  int center_index = -1;  // scene point index of the chosen center
};

struct HeatmapGt {
  std::vector<double> values;        // in [0, 1]; background 0
  std::vector<char> focal_positive;  // value > sigma_gate
};

struct ClassRadiusTable {
  std::map<int, double> radius;  // class id -> mean half-diagonal, meters
  double global_radius = 0.0;    // fallback for classes without entries

  double lookup(int class_id) const;
};

struct SizeGroup {
  Point3 mean_extents;
  std::vector<int> classes;
};

// K size groups formed by sorting classes by mean box volume and chunking
// into contiguous groups as equal in class count as possible. k may come out
// smaller than requested when fewer classes carry instances.
struct SizeGroupTable {
  int k = 0;
  std::vector<SizeGroup> groups;
  std::map<int, int> class_to_group;
};

// Point index lists per instance id (0..num_instances-1).
std::vector<std::vector<int>> instance_point_lists(const Scene& scene);

// Member point minimizing distance to the instance centroid; ties broken by
// lowest point index. Throws on empty input.
int gt_center_point(const std::vector<Point3>& positions, const std::vector<int>& members);

GaussianSpec gt_gaussian(const std::vector<Point3>& positions, const std::vector<int>& members);

double gaussian_value(const GaussianSpec& g, const Point3& p);

HeatmapGt gt_heatmap(const Scene& scene, double sigma_gate = 0.4);

// Tight box per instance.
std::vector<Aabb> gt_boxes(const Scene& scene);

ClassRadiusTable compute_class_radii(const std::vector<Scene>& scenes);

SizeGroupTable compute_size_groups(const std::vector<Scene>& scenes, int k = 6);

struct StatsTables {
  ClassRadiusTable radii;
  SizeGroupTable groups;
};

StatsTables compute_stats(const std::vector<Scene>& scenes, int k = 6);
void write_stats(const StatsTables& stats, const std::string& path);
StatsTables read_stats(const std::string& path);

}  // namespace gicn
