#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "autodiff.hpp"
#include "geometry.hpp"

namespace gicn {

// Labeled point cloud. semantic_id 0 is background; instance_id -1 is
// background. extent is the tight bounds of the positions.
struct Scene {
  PointCloud cloud;
  std::vector<int> semantic_id;
  std::vector<int> instance_id;
  int num_classes = 0;  // L, including background
  Aabb extent;

  size_t num_points() const { return cloud.positions.size(); }
  int num_instances() const;
  void recompute_extent();
  void validate() const;  // throws on broken invariants
};

enum class ShapeFamily { Cuboid, Ellipsoid, HollowShell };

struct ShapeClassConfig {
  std::string name;
  ShapeFamily family = ShapeFamily::Cuboid;
  Point3 mean_extents{0.5, 0.5, 0.5};
  double jitter = 0.25;  // relative extent jitter, uniform in [-jitter, jitter]
  int min_points = 250;
  int max_points = 500;
  Rgb base_color{0.5, 0.5, 0.5};
};

struct SceneConfig {
  std::vector<ShapeClassConfig> classes;  // class ids 1..L-1, in order
  int min_instances = 2;
  int max_instances = 4;
  Point3 scene_extent{2.0, 2.0, 1.2};
  double background_density = 60.0;  // points per cubic meter
  uint64_t base_seed = 1;

  int num_classes() const { return int(classes.size()) + 1; }
  nlohmann::json to_json() const;
  static SceneConfig from_json(const nlohmann::json& j);
  // Three object classes with distinct sizes, one hollow; used by the CLI
  // when no config file is given.
  static SceneConfig toy_default();
};

// Deterministic for a fixed (config, seed). Instances are placed by
// rejection sampling so their boxes never interpenetrate; throws
// GenerationError (naming the seed) when placement fails.
Scene generate_scene(const SceneConfig& config, uint64_t seed);

struct Block {
  Point3 origin;
  double size = 1.0;
  std::vector<int> members;  // indices into the parent scene
  std::vector<int> sampled;  // fixed-size sample, filled by sample_points
  ad::Tensor features;       // N_s x 9, filled by build_features
};

// Sliding-window cubes over the scene extent. Origins form the grid
// {scene_min + k*stride} per axis with the last origin shifted so the final
// cube's far face reaches the scene max. Empty blocks are dropped; blocks
// come out in lexicographic (x, y, z) origin order.
std::vector<Block> slice_into_cubes(const Scene& scene, double cube = 1.0,
                                    double stride = 0.5);

// Exactly n indices: without replacement when the block has >= n members,
// with replacement otherwise. Deterministic per seed.
void sample_points(Block& block, int n, uint64_t seed);

// 9-D per-point features: (r, g, b, xyz normalized within the block cube,
// xyz normalized within the scene extent).
void build_features(Block& block, const Scene& scene);

// Columnar text format: header "N L", then N rows
// "x y z r g b semantic_id instance_id". Lossless round trip.
Scene read_scene(const std::string& path);
void write_scene(const Scene& scene, const std::string& path);

// ASCII PLY with per-point colors, for external viewers.
void write_scene_ply(const Scene& scene, const std::string& path);

}  // namespace gicn
