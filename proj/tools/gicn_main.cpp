// Command-line front end for the GICN pipeline. Talks to the core only
// through the C API in gicn.h.
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gicn.h"

namespace fs = std::filesystem;

namespace {

int fail(gicn_status status) {
  std::fprintf(stderr, "error: %s (status %d)\n", gicn_last_error(), int(status));
  return 1;
}

std::string read_config_text(const std::string& path) {
  if (path.empty()) return "{}";
  std::ifstream in(path);
  if (!in) {
    std::fprintf(stderr, "error: cannot open config '%s'\n", path.c_str());
    std::exit(1);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> collect(const std::string& path, const std::string& suffix) {
  std::vector<std::string> out;
  if (fs::is_directory(path)) {
    for (const auto& entry : fs::directory_iterator(path)) {
      std::string p = entry.path().string();
      if (p.size() > suffix.size() && p.substr(p.size() - suffix.size()) == suffix)
        out.push_back(p);
    }
    std::sort(out.begin(), out.end());
  } else {
    out.push_back(path);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GICN point-cloud instance segmentation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", gicn_version());

  std::string default_run_dir = "runs/default";
  if (const char* env = std::getenv("GICN_RUN_DIR")) default_run_dir = env;

  // synth
  auto* synth = app.add_subcommand("synth", "Generate synthetic labeled scenes");
  std::string synth_config, synth_out;
  int synth_count = 1;
  uint64_t synth_seed = 1;
  synth->add_option("--config", synth_config, "Scene config JSON file (omit for the toy default)");
  synth->add_option("--out-dir", synth_out, "Output directory")->required();
  synth->add_option("--count", synth_count, "Number of scenes");
  synth->add_option("--seed", synth_seed, "Base seed (scene i uses seed + i)");

  // stats
  auto* stats_cmd = app.add_subcommand("stats", "Compute class radii and size groups");
  std::string stats_scenes, stats_out;
  int stats_k = 6;
  stats_cmd->add_option("--scenes", stats_scenes, "Scene file or directory")->required();
  stats_cmd->add_option("--out", stats_out, "Output stats JSON")->required();
  stats_cmd->add_option("--k", stats_k, "Number of size groups");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train the model");
  std::string train_scenes, train_val, train_stats, train_config, train_run_dir;
  train_cmd->add_option("--scenes", train_scenes, "Training scene directory")->required();
  train_cmd->add_option("--val", train_val, "Validation scene directory");
  train_cmd->add_option("--stats", train_stats, "Stats JSON from `stats`")->required();
  train_cmd->add_option("--config", train_config, "Run config JSON");
  train_cmd->add_option("--run-dir", train_run_dir, "Run directory (default $GICN_RUN_DIR)");

  // ablate: train with a variant switch
  auto* ablate_cmd = app.add_subcommand("ablate", "Train an ablation variant");
  std::string ab_variant, ab_scenes, ab_val, ab_stats, ab_config, ab_run_dir;
  ablate_cmd
      ->add_option("--variant", ab_variant,
                   "one of no-size, no-focal, random-centers, topk-centers, uniform-radius")
      ->required()
      ->check(CLI::IsMember({"no-size", "no-focal", "random-centers", "topk-centers",
                             "uniform-radius"}));
  ablate_cmd->add_option("--scenes", ab_scenes, "Training scene directory")->required();
  ablate_cmd->add_option("--val", ab_val, "Validation scene directory");
  ablate_cmd->add_option("--stats", ab_stats, "Stats JSON")->required();
  ablate_cmd->add_option("--config", ab_config, "Run config JSON");
  ablate_cmd->add_option("--run-dir", ab_run_dir, "Run directory");

  // infer
  auto* infer_cmd = app.add_subcommand("infer", "Whole-scene instance segmentation");
  std::string infer_scene, infer_ckpt, infer_stats, infer_out, infer_ply;
  infer_cmd->add_option("--scene", infer_scene, "Scene file")->required();
  infer_cmd->add_option("--checkpoint", infer_ckpt, "Checkpoint file")->required();
  infer_cmd->add_option("--stats", infer_stats, "Stats JSON")->required();
  infer_cmd->add_option("--out", infer_out, "Output instance file")->required();
  infer_cmd->add_option("--ply", infer_ply, "Optional PLY export of the instance coloring");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Score predictions against ground truth");
  std::string eval_pred, eval_gt, eval_out;
  eval_cmd->add_option("--pred", eval_pred, "Instance file or directory")->required();
  eval_cmd->add_option("--gt", eval_gt, "Scene file or directory")->required();
  eval_cmd->add_option("--out", eval_out, "Output CSV");

  // export-heatmap
  auto* heat_cmd = app.add_subcommand("export-heatmap", "Per-point GT and predicted heatmap CSV");
  std::string heat_scene, heat_ckpt, heat_out;
  heat_cmd->add_option("--scene", heat_scene, "Scene file")->required();
  heat_cmd->add_option("--checkpoint", heat_ckpt, "Checkpoint file")->required();
  heat_cmd->add_option("--out", heat_out, "Output CSV")->required();

  CLI11_PARSE(app, argc, argv);

  if (synth->parsed()) {
    gicn_status s = gicn_synth_run(read_config_text(synth_config).c_str(), synth_out.c_str(),
                                   synth_count, synth_seed);
    if (s != GICN_OK) return fail(s);
    std::printf("wrote %d scene(s) to %s\n", synth_count, synth_out.c_str());
    return 0;
  }

  if (stats_cmd->parsed()) {
    std::vector<std::string> files = collect(stats_scenes, ".scn.txt");
    std::vector<const char*> ptrs;
    for (const auto& f : files) ptrs.push_back(f.c_str());
    gicn_stats* stats = nullptr;
    gicn_status s = gicn_stats_compute(ptrs.data(), ptrs.size(), stats_k, &stats);
    if (s != GICN_OK) return fail(s);
    s = gicn_stats_write(stats, stats_out.c_str());
    gicn_stats_free(stats);
    if (s != GICN_OK) return fail(s);
    std::printf("wrote stats for %zu scene(s) to %s\n", files.size(), stats_out.c_str());
    return 0;
  }

  if (train_cmd->parsed() || ablate_cmd->parsed()) {
    bool ablate = ablate_cmd->parsed();
    const std::string& scenes = ablate ? ab_scenes : train_scenes;
    const std::string& val = ablate ? ab_val : train_val;
    const std::string& stats = ablate ? ab_stats : train_stats;
    const std::string& config = ablate ? ab_config : train_config;
    std::string run_dir = ablate ? ab_run_dir : train_run_dir;
    if (run_dir.empty()) run_dir = default_run_dir;
    std::string overrides;
    if (ablate) overrides = std::string("{\"ablation\":\"") + ab_variant + "\"}";
    gicn_status s = gicn_train_run(scenes.c_str(), val.empty() ? nullptr : val.c_str(),
                                   stats.c_str(), config.empty() ? nullptr : config.c_str(),
                                   ablate ? overrides.c_str() : nullptr, run_dir.c_str());
    if (s != GICN_OK) return fail(s);
    std::printf("run complete: %s\n", run_dir.c_str());
    return 0;
  }

  if (infer_cmd->parsed()) {
    gicn_status s = gicn_infer_run(infer_scene.c_str(), infer_ckpt.c_str(), infer_stats.c_str(),
                                   infer_out.c_str(),
                                   infer_ply.empty() ? nullptr : infer_ply.c_str());
    if (s != GICN_OK) return fail(s);
    std::printf("wrote instances to %s\n", infer_out.c_str());
    return 0;
  }

  if (eval_cmd->parsed()) {
    std::vector<std::string> preds = collect(eval_pred, ".inst.txt");
    std::vector<std::string> gts;
    if (fs::is_directory(eval_gt)) {
      // pair by stem: foo.inst.txt <-> foo.scn.txt
      for (const auto& p : preds) {
        std::string stem = fs::path(p).filename().string();
        stem = stem.substr(0, stem.size() - std::string(".inst.txt").size());
        fs::path gt = fs::path(eval_gt) / (stem + ".scn.txt");
        if (!fs::exists(gt)) {
          std::fprintf(stderr, "error: no ground-truth scene for '%s'\n", p.c_str());
          return 1;
        }
        gts.push_back(gt.string());
      }
    } else {
      gts.push_back(eval_gt);
    }
    if (preds.size() != gts.size() || preds.empty()) {
      std::fprintf(stderr, "error: prediction/ground-truth counts differ\n");
      return 1;
    }
    std::vector<const char*> pred_ptrs, gt_ptrs;
    for (const auto& p : preds) pred_ptrs.push_back(p.c_str());
    for (const auto& g : gts) gt_ptrs.push_back(g.c_str());
    gicn_eval_summary summary{};
    gicn_status s = gicn_eval_run(pred_ptrs.data(), gt_ptrs.data(), pred_ptrs.size(),
                                  eval_out.empty() ? nullptr : eval_out.c_str(), &summary);
    if (s != GICN_OK) return fail(s);
    std::printf("mPrec %.4f  mRec %.4f  AP@50 %.4f\n", summary.mprec, summary.mrec,
                summary.map50);
    return 0;
  }

  if (heat_cmd->parsed()) {
    gicn_status s = gicn_export_heatmap(heat_scene.c_str(), heat_ckpt.c_str(), heat_out.c_str());
    if (s != GICN_OK) return fail(s);
    std::printf("wrote heatmap CSV to %s\n", heat_out.c_str());
    return 0;
  }

  return 0;
}
