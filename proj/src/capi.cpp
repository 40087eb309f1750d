#include "gicn.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "checkpoint.hpp"
#include "dataset.hpp"
#include "errors.hpp"
#include "eval.hpp"
#include "groundtruth.hpp"
#include "inference.hpp"
#include "model.hpp"
#include "rng.hpp"
#include "training.hpp"

namespace fs = std::filesystem;

struct gicn_scene {
  gicn::Scene scene;
};

struct gicn_stats {
  gicn::StatsTables stats;
};

namespace {

thread_local std::string g_last_error;

template <class Fn>
gicn_status wrap(Fn&& fn) {
  try {
    fn();
    return GICN_OK;
  } catch (const gicn::ParseError& e) {
    g_last_error = e.what();
    return GICN_ERROR_PARSE;
  } catch (const gicn::IoError& e) {
    g_last_error = e.what();
    return GICN_ERROR_IO;
  } catch (const gicn::NumericError& e) {
    g_last_error = e.what();
    return GICN_ERROR_NUMERIC;
  } catch (const gicn::GenerationError& e) {
    g_last_error = e.what();
    return GICN_ERROR_GENERATION;
  } catch (const std::invalid_argument& e) {
    g_last_error = e.what();
    return GICN_ERROR_INVALID_ARGUMENT;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return GICN_ERROR_UNKNOWN;
  }
}

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

gicn::SceneConfig parse_scene_config(const char* config_json) {
  require(config_json != nullptr, "config_json is null");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(config_json);
  } catch (const nlohmann::json::exception& e) {
    throw gicn::ParseError(std::string("scene config: ") + e.what());
  }
  return gicn::SceneConfig::from_json(j);
}

std::vector<std::string> scene_files_in(const std::string& dir) {
  if (!fs::is_directory(dir)) throw gicn::IoError("not a directory: '" + dir + "'");
  std::vector<std::string> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::string p = entry.path().string();
    if (p.size() > 8 && p.substr(p.size() - 8) == ".scn.txt") out.push_back(p);
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw gicn::IoError("no *.scn.txt files in '" + dir + "'");
  return out;
}

std::vector<gicn::Scene> load_scenes(const std::string& dir) {
  std::vector<gicn::Scene> scenes;
  for (const std::string& p : scene_files_in(dir)) scenes.push_back(gicn::read_scene(p));
  return scenes;
}

gicn::ModelParams params_from_checkpoint(const gicn::Checkpoint& ck) {
  gicn::ModelParams params;
  if (ck.meta.contains("model"))
    params.config = gicn::ModelConfig::from_json(ck.meta.at("model"));
  else
    params.config = gicn::ModelConfig::from_json(ck.meta);
  params.tensors = ck.params;
  return params;
}

gicn::InferConfig infer_config_from_meta(const nlohmann::json& meta, uint64_t sample_seed) {
  gicn::InferConfig ic;
  ic.cube = meta.value("cube", 1.0);
  ic.stride = meta.value("stride", 0.5);
  ic.sample_points = meta.value("sample_points", 4096);
  ic.sample_seed = sample_seed;
  ic.selection = gicn::selection_for_ablation(meta.value("ablation", std::string()),
                                              gicn::Rng::mix(0x1FE2ull, sample_seed));
  return ic;
}

}  // namespace

extern "C" {

const char* gicn_version(void) { return "0.1.0"; }

const char* gicn_last_error(void) { return g_last_error.c_str(); }

gicn_status gicn_scene_generate(const char* config_json, uint64_t seed, gicn_scene** out) {
  return wrap([&] {
    require(out != nullptr, "out is null");
    gicn::SceneConfig cfg = parse_scene_config(config_json);
    *out = new gicn_scene{gicn::generate_scene(cfg, seed)};
  });
}

gicn_status gicn_scene_read(const char* path, gicn_scene** out) {
  return wrap([&] {
    require(path != nullptr && out != nullptr, "path or out is null");
    *out = new gicn_scene{gicn::read_scene(path)};
  });
}

gicn_status gicn_scene_write(const gicn_scene* scene, const char* path) {
  return wrap([&] {
    require(scene != nullptr && path != nullptr, "scene or path is null");
    gicn::write_scene(scene->scene, path);
  });
}

gicn_status gicn_scene_export_ply(const gicn_scene* scene, const char* path) {
  return wrap([&] {
    require(scene != nullptr && path != nullptr, "scene or path is null");
    gicn::write_scene_ply(scene->scene, path);
  });
}

size_t gicn_scene_num_points(const gicn_scene* scene) {
  return scene ? scene->scene.num_points() : 0;
}

int gicn_scene_num_classes(const gicn_scene* scene) {
  return scene ? scene->scene.num_classes : 0;
}

int gicn_scene_num_instances(const gicn_scene* scene) {
  return scene ? scene->scene.num_instances() : 0;
}

void gicn_scene_free(gicn_scene* scene) { delete scene; }

gicn_status gicn_synth_run(const char* config_json, const char* out_dir, int count,
                           uint64_t base_seed) {
  return wrap([&] {
    require(out_dir != nullptr, "out_dir is null");
    require(count >= 1, "count must be >= 1");
    gicn::SceneConfig cfg = parse_scene_config(config_json);
    fs::create_directories(out_dir);
    for (int i = 0; i < count; ++i) {
      gicn::Scene scene = gicn::generate_scene(cfg, base_seed + uint64_t(i));
      char name[64];
      std::snprintf(name, sizeof(name), "scene_%04d.scn.txt", i);
      gicn::write_scene(scene, (fs::path(out_dir) / name).string());
    }
  });
}

gicn_status gicn_stats_compute(const char* const* scene_paths, size_t n_paths, int k_groups,
                               gicn_stats** out) {
  return wrap([&] {
    require(scene_paths != nullptr && out != nullptr, "scene_paths or out is null");
    require(n_paths >= 1, "need at least one scene");
    std::vector<gicn::Scene> scenes;
    for (size_t i = 0; i < n_paths; ++i) scenes.push_back(gicn::read_scene(scene_paths[i]));
    *out = new gicn_stats{gicn::compute_stats(scenes, k_groups)};
  });
}

gicn_status gicn_stats_write(const gicn_stats* stats, const char* path) {
  return wrap([&] {
    require(stats != nullptr && path != nullptr, "stats or path is null");
    gicn::write_stats(stats->stats, path);
  });
}

gicn_status gicn_stats_read(const char* path, gicn_stats** out) {
  return wrap([&] {
    require(path != nullptr && out != nullptr, "path or out is null");
    *out = new gicn_stats{gicn::read_stats(path)};
  });
}

double gicn_stats_class_radius(const gicn_stats* stats, int class_id) {
  return stats ? stats->stats.radii.lookup(class_id) : 0.0;
}

int gicn_stats_group_count(const gicn_stats* stats) {
  return stats ? stats->stats.groups.k : 0;
}

void gicn_stats_free(gicn_stats* stats) { delete stats; }

gicn_status gicn_train_run(const char* scenes_dir, const char* val_dir, const char* stats_path,
                           const char* config_path, const char* overrides_json,
                           const char* run_dir) {
  return wrap([&] {
    require(scenes_dir != nullptr && stats_path != nullptr && run_dir != nullptr,
            "scenes_dir, stats_path, or run_dir is null");
    nlohmann::json cfg_json = nlohmann::json::object();
    if (config_path != nullptr) {
      std::ifstream in(config_path);
      if (!in) throw gicn::IoError(std::string("cannot open config '") + config_path + "'");
      try {
        in >> cfg_json;
      } catch (const nlohmann::json::exception& e) {
        throw gicn::ParseError(std::string("train config: ") + e.what());
      }
    }
    if (overrides_json != nullptr) {
      try {
        cfg_json.merge_patch(nlohmann::json::parse(overrides_json));
      } catch (const nlohmann::json::exception& e) {
        throw gicn::ParseError(std::string("train overrides: ") + e.what());
      }
    }
    gicn::TrainConfig cfg = gicn::TrainConfig::from_json(cfg_json);
    std::vector<gicn::Scene> train_scenes = load_scenes(scenes_dir);
    std::vector<gicn::Scene> val_scenes;
    if (val_dir != nullptr) val_scenes = load_scenes(val_dir);
    gicn::StatsTables stats = gicn::read_stats(stats_path);
    gicn::train(train_scenes, val_scenes, stats, cfg, run_dir);
  });
}

gicn_status gicn_infer_run(const char* scene_path, const char* checkpoint_path,
                           const char* stats_path, const char* out_instances_path,
                           const char* out_ply_path) {
  return wrap([&] {
    require(scene_path != nullptr && checkpoint_path != nullptr && stats_path != nullptr &&
                out_instances_path != nullptr,
            "scene_path, checkpoint_path, stats_path, or out_instances_path is null");
    gicn::Scene scene = gicn::read_scene(scene_path);
    gicn::Checkpoint ck = gicn::load_checkpoint(checkpoint_path);
    gicn::ModelParams params = params_from_checkpoint(ck);
    gicn::StatsTables stats = gicn::read_stats(stats_path);
    gicn::InferConfig ic = infer_config_from_meta(ck.meta, 0);
    gicn::SceneInstances instances = gicn::run_inference(scene, params, stats, ic);
    gicn::write_instances(instances, out_instances_path);
    if (out_ply_path != nullptr) gicn::write_instances_ply(scene, instances, out_ply_path);
  });
}

gicn_status gicn_eval_run(const char* const* pred_paths, const char* const* gt_scene_paths,
                          size_t n_scenes, const char* out_csv, gicn_eval_summary* out) {
  return wrap([&] {
    require(pred_paths != nullptr && gt_scene_paths != nullptr, "path arrays are null");
    require(n_scenes >= 1, "need at least one scene");
    gicn::Evaluator ev(0.5);
    for (size_t s = 0; s < n_scenes; ++s) {
      gicn::SceneInstances pred = gicn::read_instances(pred_paths[s]);
      gicn::Scene scene = gicn::read_scene(gt_scene_paths[s]);
      ev.add_scene(pred.instances, gicn::gt_instances_from_scene(scene));
    }
    gicn::EvalSummary summary = ev.summary();
    if (out_csv != nullptr) gicn::write_eval_csv(summary, out_csv);
    if (out != nullptr) {
      out->mprec = summary.mprec;
      out->mrec = summary.mrec;
      out->map50 = summary.map50;
    }
    std::fputs(gicn::format_eval_table(summary).c_str(), stdout);
  });
}

gicn_status gicn_export_heatmap(const char* scene_path, const char* checkpoint_path,
                                const char* out_csv) {
  return wrap([&] {
    require(scene_path != nullptr && checkpoint_path != nullptr && out_csv != nullptr,
            "scene_path, checkpoint_path, or out_csv is null");
    gicn::Scene scene = gicn::read_scene(scene_path);
    gicn::Checkpoint ck = gicn::load_checkpoint(checkpoint_path);
    gicn::ModelParams params = params_from_checkpoint(ck);
    gicn::HeatmapGt gt = gicn::gt_heatmap(scene);

    // predicted value per point: max over its sampled occurrences so block
    // borders do not wash out the peaks
    std::vector<double> pred(scene.num_points(), 0.0);
    gicn::InferConfig ic = infer_config_from_meta(ck.meta, 0);
    auto blocks = gicn::slice_into_cubes(scene, ic.cube, ic.stride);
    for (size_t b = 0; b < blocks.size(); ++b) {
      gicn::sample_points(blocks[b], ic.sample_points, gicn::Rng::mix(ic.sample_seed, b));
      gicn::build_features(blocks[b], scene);
      gicn::BlockOutputs outputs = gicn::forward_block(blocks[b], params);
      for (size_t r = 0; r < blocks[b].sampled.size(); ++r) {
        size_t idx = size_t(blocks[b].sampled[r]);
        pred[idx] = std::max(pred[idx], outputs.center_q[r]);
      }
    }

    std::ofstream csv(out_csv);
    if (!csv) throw gicn::IoError(std::string("cannot open '") + out_csv + "' for writing");
    csv << "x,y,z,gt,pred\n";
    char buf[160];
    for (size_t i = 0; i < scene.num_points(); ++i) {
      const gicn::Point3& p = scene.cloud.positions[i];
      std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%.6f,%.6f\n", p.x, p.y, p.z,
                    gt.values[i], pred[i]);
      csv << buf;
    }
    if (!csv) throw gicn::IoError(std::string("write failed for '") + out_csv + "'");
  });
}

}  // extern "C"
