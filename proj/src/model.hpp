#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "autodiff.hpp"
#include "geometry.hpp"

namespace gicn {

struct ModelConfig {
  int input_dim = 9;
  int num_classes = 4;  // L, including background
  int size_groups = 6;  // K
  int point_feat = 128;   // F
  int global_feat = 512;  // G
  int knn_k = 16;
  std::vector<int> mlp1{64, 128};          // per-point widths before the local pool
  std::vector<int> center_head{128, 64, 32};
  int semantic_hidden = 64;
  std::vector<int> size_hidden{128};
  std::vector<int> box_pre{64, 128, 256};  // shared per-point MLP inside the context
  std::vector<int> box_post{512, 128};     // after concat with the global feature
  int mask_reduce_point = 64;
  int mask_reduce_global = 64;
  std::vector<int> mask_head{64, 32};

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  // Narrow widths for CPU-scale experiments.
  static ModelConfig small(int num_classes, int size_groups);
};

struct ModelParams {
  ModelConfig config;
  std::map<std::string, ad::Tensor> tensors;

  // Hidden layers get uniform fan-in/fan-out init; every head's final layer
  // starts at zero (center/mask open at 0.5, size uniform, boxes degenerate
  // at the candidate).
  static ModelParams init(const ModelConfig& config, uint64_t seed);
};

// Parameter leaves registered on one tape.
struct TapeParams {
  std::map<std::string, ad::Var> vars;
  ad::Var at(const std::string& name) const;
};

TapeParams bind_params(ad::Tape& tape, const ModelParams& params, bool requires_grad);

struct BackboneOut {
  ad::Var per_point;  // N x F
  ad::Var global;     // 1 x G
};

// Brute-force k nearest neighbors (self included), ties by lowest index.
std::vector<std::vector<int>> knn_indices(const std::vector<Point3>& pts, int k);

BackboneOut backbone_forward(ad::Tape& tape, ad::Var feats,
                             const std::vector<std::vector<int>>& knn,
                             const TapeParams& p, const ModelConfig& cfg);

// N x 1 center probabilities, strictly inside (0, 1).
ad::Var center_head_forward(ad::Tape& tape, const BackboneOut& bb, const TapeParams& p,
                            const ModelConfig& cfg);

// N x L class logits.
ad::Var semantic_head_forward(ad::Tape& tape, const BackboneOut& bb, const TapeParams& p,
                              const ModelConfig& cfg);

// T x K size-group logits for the given candidate rows.
ad::Var size_head_forward(ad::Tape& tape, const BackboneOut& bb,
                          const std::vector<int>& candidate_rows, const TapeParams& p,
                          const ModelConfig& cfg);

// 1 x 6 box corners (min, max) = candidate position replicated + offsets.
// The context is the per-point features of `neighborhood_rows`; empty input
// falls back to the candidate's own row.
ad::Var box_head_forward(ad::Tape& tape, const BackboneOut& bb, int candidate_row,
                         const Point3& candidate_pos,
                         const std::vector<int>& neighborhood_rows, const TapeParams& p,
                         const ModelConfig& cfg);

// N x 1 mask probabilities for one candidate box (same frame as the
// positions fed to the backbone features).
ad::Var mask_head_forward(ad::Tape& tape, const BackboneOut& bb, ad::Var box,
                          const TapeParams& p, const ModelConfig& cfg);

// Rows within the axis-aligned neighborhood of the given extents around the
// center.
std::vector<int> neighborhood_rows(const std::vector<Point3>& pts, const Point3& center,
                                   const Point3& extents);

}  // namespace gicn
