#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "geometry.hpp"
#include "groundtruth.hpp"
#include "model.hpp"

namespace gicn {

struct SelectionConfig {
  double q_threshold = 0.4;  // Q_theta
  int max_candidates = 64;   // T_theta
  enum class Mode { Greedy, Random, TopK } mode = Mode::Greedy;
  bool uniform_radius = false;  // single global radius for every class
  uint64_t random_seed = 0;     // Mode::Random draws
};

struct CenterCandidate {
  int point_index = -1;  // row into the q/classes/positions arrays
  Point3 position;
  double value = 0.0;  // heatmap value at selection time
  int semantic_class = 0;
};

// Greedy argmax selection with per-class radius suppression. Mode::Random
// and Mode::TopK implement the selection ablations.
std::vector<CenterCandidate> select_centers(const std::vector<double>& q,
                                            const std::vector<int>& classes,
                                            const std::vector<Point3>& positions,
                                            const ClassRadiusTable& radii,
                                            const SelectionConfig& cfg);

// candidate -> index into gt arrays, or -1. A candidate maps to the nearest
// ground-truth center within that instance's class radius; each ground truth
// keeps only its nearest claimant.
std::vector<int> associate_candidates_to_gt(const std::vector<CenterCandidate>& candidates,
                                            const std::vector<Point3>& gt_centers,
                                            const std::vector<double>& gt_radii);

struct BlockInstance {
  std::vector<int> points;  // sorted unique scene indices
  Aabb box;                 // world coordinates, canonicalized
  int semantic_class = 0;
  double confidence = 0.0;
};

struct SceneInstance {
  std::vector<int> points;  // sorted unique scene indices
  int semantic_class = 0;
  Aabb box;
  double confidence_sum = 0.0;
  int candidate_count = 0;

  double confidence() const {
    return candidate_count > 0 ? confidence_sum / double(candidate_count) : 0.0;
  }
};

struct SceneInstances {
  std::vector<SceneInstance> instances;
};

// Origin-ordered reduction of per-block instances: a block instance joins an
// existing scene instance of the same class when the shared-point fraction
// of its own size exceeds merge_threshold; a final ownership pass makes the
// point sets disjoint (highest confidence wins) and re-drops specks.
SceneInstances block_merge(const std::vector<std::vector<BlockInstance>>& per_block,
                           double merge_threshold = 0.5, int min_points = 10);

struct InferConfig {
  double cube = 1.0;
  double stride = 0.5;
  int sample_points = 4096;
  uint64_t sample_seed = 0;
  SelectionConfig selection;
  int min_instance_points = 10;
};

// Whole-scene pipeline: slice, sample, forward, select, boxes, masks, merge.
SceneInstances run_inference(const Scene& scene, const ModelParams& params,
                             const StatsTables& stats, const InferConfig& cfg);

// Per-block head outputs needed by extraction and training diagnostics.
struct BlockOutputs {
  std::vector<double> center_q;     // per sampled row
  std::vector<int> semantic_label;  // argmax class per sampled row
};

BlockOutputs forward_block(const Block& block, const ModelParams& params);

// One instance per candidate: mask rows above 0.5, mapped to scene indices;
// class by majority vote of non-background semantic predictions inside the
// mask; instances below min_points are dropped.
std::vector<BlockInstance> extract_block_instances(const Block& block, const Scene& scene,
                                                   const ModelParams& params,
                                                   const StatsTables& stats,
                                                   const InferConfig& cfg);

// Instance file: header "I", one row per instance:
// class confidence xmin ymin zmin xmax ymax zmax npoints idx...
void write_instances(const SceneInstances& instances, const std::string& path);
SceneInstances read_instances(const std::string& path);

// Per-instance coloring for external viewers; background points in gray.
void write_instances_ply(const Scene& scene, const SceneInstances& instances,
                         const std::string& path);

}  // namespace gicn
