#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "eval.hpp"
#include "groundtruth.hpp"
#include "inference.hpp"
#include "losses.hpp"
#include "model.hpp"
#include "optim.hpp"

namespace gicn {

struct TrainConfig {
  int epochs = 50;
  double lr = 0.002;
  int halve_every = 20;  // epochs between halvings
  int batch_blocks = 4;
  uint64_t seed = 1;
  int warmup_epochs = 5;  // ground-truth centers before heatmap selection
  // "", "no-size", "no-focal", "random-centers", "topk-centers", "uniform-radius"
  std::string ablation;
  int sample_points_per_block = 4096;
  double cube = 1.0;
  double stride = 0.5;
  int blocks_per_scene_per_epoch = 0;  // 0 = every block every epoch
  int val_every = 0;                   // 0 = final epoch only
  int checkpoint_every = 1;            // 0 = final epoch only
  int threads = 2;
  LossConfig loss;
  ModelConfig model;

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

// 0.002 halved every `halve_every` epochs.
double lr_at(int epoch, const TrainConfig& cfg);

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  LossReport mean_loss;  // averaged over processed blocks
  double val_mprec = -1.0;
  double val_mrec = -1.0;
  double val_ap50 = -1.0;
};

struct RunLog {
  std::vector<EpochLog> epochs;
  std::string to_csv() const;
};

struct TrainResult {
  ModelParams params;       // final epoch
  ModelParams best_params;  // best validation AP
  RunLog log;
  EvalSummary final_val;
};

// End-to-end loop: batched blocks, joint loss, Adam with the halving
// schedule, per-epoch checkpoints when run_dir is non-empty. Deterministic
// for fixed (scenes, stats, config).
TrainResult train(const std::vector<Scene>& train_scenes, const std::vector<Scene>& val_scenes,
                  const StatsTables& stats, const TrainConfig& cfg,
                  const std::string& run_dir = "");

// Selection settings implied by an ablation tag.
SelectionConfig selection_for_ablation(const std::string& ablation, uint64_t random_seed);

// Mean absolute error between the predicted center heatmap and the ground
// truth over the sampled rows of each block of the given scenes.
double heatmap_mae(const std::vector<Scene>& scenes, const ModelParams& params,
                   const TrainConfig& cfg);

}  // namespace gicn
