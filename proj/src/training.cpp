#include "training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "checkpoint.hpp"
#include "errors.hpp"
#include "rng.hpp"

namespace gicn {

using ad::Tape;
using ad::Tensor;
using ad::Var;

nlohmann::json TrainConfig::to_json() const {
  nlohmann::json j;
  j["epochs"] = epochs;
  j["lr"] = lr;
  j["halve_every"] = halve_every;
  j["batch_blocks"] = batch_blocks;
  j["seed"] = seed;
  j["warmup_epochs"] = warmup_epochs;
  j["ablation"] = ablation;
  j["sample_points_per_block"] = sample_points_per_block;
  j["cube"] = cube;
  j["stride"] = stride;
  j["blocks_per_scene_per_epoch"] = blocks_per_scene_per_epoch;
  j["val_every"] = val_every;
  j["checkpoint_every"] = checkpoint_every;
  j["threads"] = threads;
  j["loss"] = {{"focal_alpha", loss.focal_alpha},
               {"focal_gamma", loss.focal_gamma},
               {"sigma_gate", loss.sigma_gate},
               {"smooth_l1_beta", loss.smooth_l1_beta},
               {"w_center", loss.w_center},
               {"w_size", loss.w_size},
               {"w_bound", loss.w_bound},
               {"w_iou", loss.w_iou},
               {"w_mask", loss.w_mask},
               {"w_semantic", loss.w_semantic}};
  j["model"] = model.to_json();
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.lr = j.value("lr", c.lr);
  c.halve_every = j.value("halve_every", c.halve_every);
  c.batch_blocks = j.value("batch_blocks", c.batch_blocks);
  c.seed = j.value("seed", c.seed);
  c.warmup_epochs = j.value("warmup_epochs", c.warmup_epochs);
  c.ablation = j.value("ablation", c.ablation);
  c.sample_points_per_block = j.value("sample_points_per_block", c.sample_points_per_block);
  c.cube = j.value("cube", c.cube);
  c.stride = j.value("stride", c.stride);
  c.blocks_per_scene_per_epoch =
      j.value("blocks_per_scene_per_epoch", c.blocks_per_scene_per_epoch);
  c.val_every = j.value("val_every", c.val_every);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.threads = j.value("threads", c.threads);
  if (j.contains("loss")) {
    const auto& lj = j.at("loss");
    c.loss.focal_alpha = lj.value("focal_alpha", c.loss.focal_alpha);
    c.loss.focal_gamma = lj.value("focal_gamma", c.loss.focal_gamma);
    c.loss.sigma_gate = lj.value("sigma_gate", c.loss.sigma_gate);
    c.loss.smooth_l1_beta = lj.value("smooth_l1_beta", c.loss.smooth_l1_beta);
    c.loss.w_center = lj.value("w_center", c.loss.w_center);
    c.loss.w_size = lj.value("w_size", c.loss.w_size);
    c.loss.w_bound = lj.value("w_bound", c.loss.w_bound);
    c.loss.w_iou = lj.value("w_iou", c.loss.w_iou);
    c.loss.w_mask = lj.value("w_mask", c.loss.w_mask);
    c.loss.w_semantic = lj.value("w_semantic", c.loss.w_semantic);
  }
  if (j.contains("model")) c.model = ModelConfig::from_json(j.at("model"));
  if (c.epochs < 1 || c.lr <= 0 || c.halve_every < 1 || c.batch_blocks < 1)
    throw ParseError("train config: non-positive epochs, lr, halve_every, or batch size");
  return c;
}

double lr_at(int epoch, const TrainConfig& cfg) {
  return cfg.lr * std::pow(0.5, double(epoch / cfg.halve_every));
}

std::string RunLog::to_csv() const {
  std::ostringstream os;
  os << "epoch,lr,total,center,size,bound,iou,mask,semantic,val_mprec,val_mrec,val_ap50\n";
  char buf[512];
  for (const auto& e : epochs) {
    std::snprintf(buf, sizeof(buf),
                  "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  e.epoch, e.lr, e.mean_loss.total, e.mean_loss.center, e.mean_loss.size,
                  e.mean_loss.bound, e.mean_loss.iou, e.mean_loss.mask, e.mean_loss.semantic,
                  e.val_mprec, e.val_mrec, e.val_ap50);
    os << buf;
  }
  return os.str();
}

SelectionConfig selection_for_ablation(const std::string& ablation, uint64_t random_seed) {
  SelectionConfig sel;
  sel.random_seed = random_seed;
  if (ablation == "random-centers")
    sel.mode = SelectionConfig::Mode::Random;
  else if (ablation == "topk-centers")
    sel.mode = SelectionConfig::Mode::TopK;
  else if (ablation == "uniform-radius")
    sel.uniform_radius = true;
  return sel;
}

namespace {

// Per-instance ground truth visible inside one block.
struct BlockGtInstance {
  int scene_instance = -1;
  int semantic_class = 0;
  int group_index = 0;
  Point3 center_world;    // scene-level chosen center
  double radius = 0.0;    // class radius
  int candidate_row = -1; // sampled row nearest the instance centroid
  Tensor box_block;       // 1x6 in block-normalized coordinates
  std::vector<char> membership;  // per sampled row
};

struct TrainBlock {
  Block block;
  int scene_index = 0;
  std::vector<std::vector<int>> knn;
  std::vector<Point3> block_pts;   // block-normalized positions per row
  std::vector<Point3> world_pts;   // scene positions per row
  std::vector<int> sem_labels;     // per row
  std::vector<char> focal;         // per row
  std::vector<double> heat;        // per row, ground-truth heatmap
  std::vector<BlockGtInstance> gts;
};

struct SceneGt {
  HeatmapGt heatmap;
  std::vector<Aabb> boxes;
  std::vector<Point3> centers;
  std::vector<int> classes;
  std::vector<Point3> centroids;
};

TrainBlock prepare_block(const Scene& scene, int scene_index, const Block& block,
                         const SceneGt& gt, const StatsTables& stats) {
  TrainBlock tb;
  tb.block = block;
  tb.scene_index = scene_index;
  int n = int(block.sampled.size());
  tb.block_pts.resize(size_t(n));
  tb.world_pts.resize(size_t(n));
  tb.sem_labels.resize(size_t(n));
  tb.focal.resize(size_t(n));
  tb.heat.resize(size_t(n));
  for (int r = 0; r < n; ++r) {
    int idx = block.sampled[size_t(r)];
    tb.block_pts[size_t(r)] = {block.features.at(r, 3), block.features.at(r, 4),
                               block.features.at(r, 5)};
    tb.world_pts[size_t(r)] = scene.cloud.positions[size_t(idx)];
    tb.sem_labels[size_t(r)] = scene.semantic_id[size_t(idx)];
    tb.focal[size_t(r)] = gt.heatmap.focal_positive[size_t(idx)];
    tb.heat[size_t(r)] = gt.heatmap.values[size_t(idx)];
  }

  // instances with sampled points in this block
  std::map<int, std::vector<int>> rows_by_instance;
  for (int r = 0; r < n; ++r) {
    int inst = scene.instance_id[size_t(block.sampled[size_t(r)])];
    if (inst >= 0) rows_by_instance[inst].push_back(r);
  }
  for (const auto& [inst, rows] : rows_by_instance) {
    BlockGtInstance bg;
    bg.scene_instance = inst;
    bg.semantic_class = gt.classes[size_t(inst)];
    auto git = stats.groups.class_to_group.find(bg.semantic_class);
    bg.group_index = git != stats.groups.class_to_group.end() ? git->second : 0;
    bg.center_world = gt.centers[size_t(inst)];
    bg.radius = stats.radii.lookup(bg.semantic_class);
    // in-block stand-in for the instance center: sampled member row nearest
    // the scene-level centroid
    double best = 0.0;
    for (int r : rows) {
      double d = distance(tb.world_pts[size_t(r)], gt.centroids[size_t(inst)]);
      if (bg.candidate_row < 0 || d < best) {
        best = d;
        bg.candidate_row = r;
      }
    }
    const Aabb& box = gt.boxes[size_t(inst)];
    Tensor bb(1, 6);
    bb.at(0, 0) = (box.min_corner.x - block.origin.x) / block.size;
    bb.at(0, 1) = (box.min_corner.y - block.origin.y) / block.size;
    bb.at(0, 2) = (box.min_corner.z - block.origin.z) / block.size;
    bb.at(0, 3) = (box.max_corner.x - block.origin.x) / block.size;
    bb.at(0, 4) = (box.max_corner.y - block.origin.y) / block.size;
    bb.at(0, 5) = (box.max_corner.z - block.origin.z) / block.size;
    bg.box_block = std::move(bb);
    bg.membership.assign(size_t(n), 0);
    for (int r : rows) bg.membership[size_t(r)] = 1;
    tb.gts.push_back(std::move(bg));
  }
  return tb;
}

struct BlockResult {
  LossReport report;
  std::map<std::string, Tensor> grads;
};

BlockResult process_block(const TrainBlock& tb, const ModelParams& params,
                          const StatsTables& stats, const TrainConfig& cfg, int epoch,
                          uint64_t block_tag) {
  const ModelConfig& mc = params.config;
  Tape tape;
  TapeParams tp = bind_params(tape, params, true);
  Var feats = tape.constant(tb.block.features);
  BackboneOut bb = backbone_forward(tape, feats, tb.knn, tp, mc);
  Var q = center_head_forward(tape, bb, tp, mc);
  Var sem_logits = semantic_head_forward(tape, bb, tp, mc);

  LossConfig lc = cfg.loss;
  if (cfg.ablation == "no-focal") {
    lc.focal_alpha = 1.0;
    lc.focal_gamma = 0.0;
  }

  LossTerms terms;
  terms.center = center_focal_loss(tape, q, tb.focal, lc);
  terms.semantic = semantic_ce_loss(tape, sem_logits, tb.sem_labels, lc);

  // candidates: ground-truth centers during warm-up, heatmap selection after
  std::vector<CenterCandidate> candidates;
  std::vector<int> assignment;
  if (epoch < cfg.warmup_epochs) {
    for (size_t g = 0; g < tb.gts.size(); ++g) {
      const BlockGtInstance& bg = tb.gts[g];
      candidates.push_back({bg.candidate_row, tb.world_pts[size_t(bg.candidate_row)],
                            q.val().at(bg.candidate_row, 0), bg.semantic_class});
      assignment.push_back(int(g));
    }
  } else {
    std::vector<double> qv(size_t(q.rows()));
    for (int i = 0; i < q.rows(); ++i) qv[size_t(i)] = q.val().at(i, 0);
    std::vector<int> sem(size_t(q.rows()));
    for (int i = 0; i < q.rows(); ++i) {
      int best = 0;
      for (int c = 1; c < sem_logits.cols(); ++c)
        if (sem_logits.val().at(i, c) > sem_logits.val().at(i, best)) best = c;
      sem[size_t(i)] = best;
    }
    SelectionConfig sel =
        selection_for_ablation(cfg.ablation, Rng::mix(Rng::mix(cfg.seed, uint64_t(epoch)), block_tag));
    candidates = select_centers(qv, sem, tb.world_pts, stats.radii, sel);
    std::vector<Point3> gt_centers;
    std::vector<double> gt_radii;
    for (const auto& bg : tb.gts) {
      gt_centers.push_back(bg.center_world);
      gt_radii.push_back(bg.radius);
    }
    assignment = associate_candidates_to_gt(candidates, gt_centers, gt_radii);
  }

  std::vector<int> assigned;  // candidate indices with a ground-truth match
  for (size_t c = 0; c < assignment.size(); ++c)
    if (assignment[c] >= 0) assigned.push_back(int(c));

  if (!assigned.empty()) {
    terms.has_candidates = true;
    bool no_size = cfg.ablation == "no-size";
    std::vector<int> cand_rows;
    std::vector<int> gt_groups;
    for (int c : assigned) {
      cand_rows.push_back(candidates[size_t(c)].point_index);
      gt_groups.push_back(tb.gts[size_t(assignment[size_t(c)])].group_index);
    }
    Var size_logits;
    if (!no_size) {
      size_logits = size_head_forward(tape, bb, cand_rows, tp, mc);
      terms.size = size_ce_loss(tape, size_logits, gt_groups, lc);
    }

    Var bound_acc, iou_acc, mask_acc;
    for (size_t i = 0; i < assigned.size(); ++i) {
      int c = assigned[i];
      const BlockGtInstance& bg = tb.gts[size_t(assignment[size_t(c)])];
      int row = candidates[size_t(c)].point_index;

      Point3 ext;
      if (no_size) {  // fixed context range: unweighted mean of group sizes
        Point3 sum;
        for (const auto& g : stats.groups.groups) sum = sum + g.mean_extents;
        ext = stats.groups.groups.empty() ? Point3{0.5, 0.5, 0.5}
                                          : sum * (1.0 / double(stats.groups.groups.size()));
      } else {
        int kstar = 0;
        for (int k = 1; k < size_logits.cols(); ++k)
          if (size_logits.val().at(int(i), k) > size_logits.val().at(int(i), kstar)) kstar = k;
        ext = stats.groups.groups[size_t(std::min(kstar, int(stats.groups.groups.size()) - 1))]
                  .mean_extents;
      }
      Point3 cand_block = tb.block_pts[size_t(row)];
      auto nbr = neighborhood_rows(tb.block_pts, cand_block, ext * (1.0 / tb.block.size));
      Var box_raw = box_head_forward(tape, bb, row, cand_block, nbr, tp, mc);
      Var b = bound_loss(tape, box_raw, bg.box_block, lc);
      Var box_canon = canonicalize_boxes(tape, box_raw);
      Var g = giou_loss(tape, box_canon, bg.box_block);
      Var mask = mask_head_forward(tape, bb, box_canon, tp, mc);
      Var m = mask_focal_loss(tape, mask, bg.membership, lc);
      bound_acc = i == 0 ? b : ad::add(bound_acc, b);
      iou_acc = i == 0 ? g : ad::add(iou_acc, g);
      mask_acc = i == 0 ? m : ad::add(mask_acc, m);
    }
    double inv = 1.0 / double(assigned.size());
    terms.bound = ad::scale(bound_acc, inv);
    terms.iou = ad::scale(iou_acc, inv);
    terms.mask = ad::scale(mask_acc, inv);
    if (no_size) {
      terms.size = tape.constant(Tensor::scalar(0.0));
    }
  }

  std::vector<int> full_assignment(assignment);
  auto [total, report] = total_loss(tape, terms, full_assignment, lc);
  tape.backward(total);

  BlockResult result;
  result.report = report;
  for (const auto& [name, var] : tp.vars) result.grads.emplace(name, tape.grad(var.id));
  return result;
}

std::vector<GtInstance> scene_gt_instances(const Scene& scene) {
  return gt_instances_from_scene(scene);
}

// Everything infer needs to rebuild the pipeline from a checkpoint alone.
nlohmann::json checkpoint_meta(const ModelConfig& mc, const TrainConfig& cfg) {
  return {{"model", mc.to_json()},
          {"ablation", cfg.ablation},
          {"sample_points", cfg.sample_points_per_block},
          {"cube", cfg.cube},
          {"stride", cfg.stride}};
}

EvalSummary run_validation(const std::vector<Scene>& val_scenes, const ModelParams& params,
                           const StatsTables& stats, const TrainConfig& cfg) {
  Evaluator ev(0.5);
  for (size_t s = 0; s < val_scenes.size(); ++s) {
    InferConfig ic;
    ic.cube = cfg.cube;
    ic.stride = cfg.stride;
    ic.sample_points = cfg.sample_points_per_block;
    ic.sample_seed = Rng::mix(0x7A1ull, s);
    ic.selection = selection_for_ablation(cfg.ablation, Rng::mix(0x7A2ull, s));
    SceneInstances pred = run_inference(val_scenes[s], params, stats, ic);
    ev.add_scene(pred.instances, scene_gt_instances(val_scenes[s]));
  }
  return ev.summary();
}

}  // namespace

double heatmap_mae(const std::vector<Scene>& scenes, const ModelParams& params,
                   const TrainConfig& cfg) {
  double abs_sum = 0.0;
  size_t count = 0;
  for (size_t s = 0; s < scenes.size(); ++s) {
    const Scene& scene = scenes[s];
    HeatmapGt gt = gt_heatmap(scene, cfg.loss.sigma_gate);
    auto blocks = slice_into_cubes(scene, cfg.cube, cfg.stride);
    for (size_t b = 0; b < blocks.size(); ++b) {
      sample_points(blocks[b], cfg.sample_points_per_block, Rng::mix(Rng::mix(0x7A1ull, s), b));
      build_features(blocks[b], scene);
      BlockOutputs out = forward_block(blocks[b], params);
      for (size_t r = 0; r < blocks[b].sampled.size(); ++r) {
        abs_sum += std::fabs(out.center_q[r] - gt.values[size_t(blocks[b].sampled[r])]);
        count += 1;
      }
    }
  }
  return count > 0 ? abs_sum / double(count) : 0.0;
}

TrainResult train(const std::vector<Scene>& train_scenes, const std::vector<Scene>& val_scenes,
                  const StatsTables& stats, const TrainConfig& cfg, const std::string& run_dir) {
  if (train_scenes.empty()) throw std::invalid_argument("train: no training scenes");
  if (stats.groups.k < 1) throw std::invalid_argument("train: stats tables carry no size groups");

  ModelConfig mc = cfg.model;
  mc.size_groups = stats.groups.k;  // effective K comes from the tables
  ModelParams params = ModelParams::init(mc, cfg.seed);

  // precompute blocks, features, neighbor lists, and targets once
  std::vector<TrainBlock> all_blocks;
  std::vector<std::vector<int>> blocks_by_scene(train_scenes.size());
  for (size_t s = 0; s < train_scenes.size(); ++s) {
    const Scene& scene = train_scenes[s];
    SceneGt gt;
    gt.heatmap = gt_heatmap(scene, cfg.loss.sigma_gate);
    gt.boxes = gt_boxes(scene);
    auto lists = instance_point_lists(scene);
    for (const auto& members : lists) {
      gt.centers.push_back(scene.cloud.positions[size_t(gt_center_point(scene.cloud.positions, members))]);
      gt.classes.push_back(scene.semantic_id[size_t(members[0])]);
      gt.centroids.push_back(centroid(scene.cloud.positions, members));
    }
    auto blocks = slice_into_cubes(scene, cfg.cube, cfg.stride);
    for (size_t b = 0; b < blocks.size(); ++b) {
      sample_points(blocks[b], cfg.sample_points_per_block, Rng::mix(0x5CE2Eull + s, b));
      build_features(blocks[b], scene);
      TrainBlock tb = prepare_block(scene, int(s), blocks[b], gt, stats);
      tb.knn = knn_indices(tb.block_pts, mc.knn_k);
      blocks_by_scene[s].push_back(int(all_blocks.size()));
      all_blocks.push_back(std::move(tb));
    }
  }

  ad::AdamState adam;
  RunLog log;
  ModelParams best = params;
  double best_ap = -1.0;
  bool have_val = !val_scenes.empty();

  if (!run_dir.empty()) {
    std::filesystem::create_directories(run_dir);
    std::ofstream cfg_out(run_dir + "/config.json");
    cfg_out << cfg.to_json().dump(2) << "\n";
  }

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double lr = lr_at(epoch, cfg);
    Rng epoch_rng(Rng::mix(cfg.seed, 0xE90C4ull + uint64_t(epoch)));

    // epoch block order, optionally subsampled per scene
    std::vector<int> order;
    if (cfg.blocks_per_scene_per_epoch <= 0) {
      order.resize(all_blocks.size());
      for (size_t i = 0; i < all_blocks.size(); ++i) order[i] = int(i);
    } else {
      for (const auto& scene_blocks : blocks_by_scene) {
        int take = std::min<int>(cfg.blocks_per_scene_per_epoch, int(scene_blocks.size()));
        for (int i : epoch_rng.sample_without_replacement(int(scene_blocks.size()), take))
          order.push_back(scene_blocks[size_t(i)]);
      }
    }
    epoch_rng.shuffle(order);

    LossReport epoch_sum;
    int processed = 0;
    for (size_t start = 0; start < order.size(); start += size_t(cfg.batch_blocks)) {
      size_t end = std::min(order.size(), start + size_t(cfg.batch_blocks));
      std::vector<BlockResult> results(end - start);

      int n_threads = std::max(1, std::min(cfg.threads, int(end - start)));
      std::vector<std::thread> pool;
      std::atomic<size_t> cursor{0};
      auto worker = [&]() {
        for (;;) {
          size_t i = cursor.fetch_add(1);
          if (i >= end - start) break;
          int bi = order[start + i];
          results[i] = process_block(all_blocks[size_t(bi)], params, stats, cfg, epoch,
                                     uint64_t(bi));
        }
      };
      for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
      for (auto& t : pool) t.join();

      // average gradients in batch order
      std::map<std::string, Tensor> mean_grads;
      double inv = 1.0 / double(end - start);
      for (size_t i = 0; i < results.size(); ++i) {
        for (auto& [name, g] : results[i].grads) {
          auto [it, fresh] = mean_grads.try_emplace(name, g.rows, g.cols, 0.0);
          for (size_t k = 0; k < g.size(); ++k) it->second.data[k] += g.data[k] * inv;
        }
        const LossReport& r = results[i].report;
        epoch_sum.total += r.total;
        epoch_sum.center += r.center;
        epoch_sum.size += r.size;
        epoch_sum.bound += r.bound;
        epoch_sum.iou += r.iou;
        epoch_sum.mask += r.mask;
        epoch_sum.semantic += r.semantic;
        processed += 1;
      }
      ad::adam_step(params.tensors, mean_grads, adam, lr);
    }

    EpochLog el;
    el.epoch = epoch;
    el.lr = lr;
    if (processed > 0) {
      double inv = 1.0 / double(processed);
      el.mean_loss.total = epoch_sum.total * inv;
      el.mean_loss.center = epoch_sum.center * inv;
      el.mean_loss.size = epoch_sum.size * inv;
      el.mean_loss.bound = epoch_sum.bound * inv;
      el.mean_loss.iou = epoch_sum.iou * inv;
      el.mean_loss.mask = epoch_sum.mask * inv;
      el.mean_loss.semantic = epoch_sum.semantic * inv;
    }

    bool last = epoch == cfg.epochs - 1;
    bool do_val = have_val && (last || (cfg.val_every > 0 && (epoch + 1) % cfg.val_every == 0));
    if (do_val) {
      EvalSummary val = run_validation(val_scenes, params, stats, cfg);
      el.val_mprec = val.mprec;
      el.val_mrec = val.mrec;
      el.val_ap50 = val.map50;
      if (val.map50 > best_ap) {
        best_ap = val.map50;
        best = params;
      }
      if (last) {
        log.epochs.push_back(el);
        TrainResult result{std::move(params), std::move(best), std::move(log), val};
        if (!run_dir.empty()) {
          save_checkpoint(run_dir + "/epoch_" + std::to_string(epoch) + ".ckpt",
                          result.params.tensors, checkpoint_meta(mc, cfg));
          save_checkpoint(run_dir + "/best.ckpt", result.best_params.tensors,
                          checkpoint_meta(mc, cfg));
          std::ofstream log_out(run_dir + "/run_log.csv");
          log_out << result.log.to_csv();
        }
        return result;
      }
    }
    log.epochs.push_back(el);
    if (!run_dir.empty() && cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0)
      save_checkpoint(run_dir + "/epoch_" + std::to_string(epoch) + ".ckpt", params.tensors,
                      checkpoint_meta(mc, cfg));
  }

  // epochs == 0 is rejected by from_json; reaching here means no validation
  TrainResult result{params, best_ap >= 0 ? best : params, log, EvalSummary{}};
  if (!run_dir.empty()) {
    save_checkpoint(run_dir + "/best.ckpt", result.best_params.tensors,
                    checkpoint_meta(mc, cfg));
    std::ofstream log_out(run_dir + "/run_log.csv");
    log_out << result.log.to_csv();
  }
  return result;
}

}  // namespace gicn
