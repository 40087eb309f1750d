/* C interface to the GICN point-cloud instance segmentation library.
 *
 * All functions return gicn_status; on failure, gicn_last_error() holds a
 * thread-local message describing what went wrong. Objects returned through
 * out-parameters are owned by the caller and released with the matching
 * _free function.
 */
#ifndef GICN_H
#define GICN_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gicn_status {
  GICN_OK = 0,
  GICN_ERROR_INVALID_ARGUMENT = 1,
  GICN_ERROR_IO = 2,
  GICN_ERROR_PARSE = 3,
  GICN_ERROR_NUMERIC = 4,
  GICN_ERROR_GENERATION = 5,
  GICN_ERROR_UNKNOWN = 6
} gicn_status;

const char* gicn_version(void);

/* Message from the most recent failing call on this thread. */
const char* gicn_last_error(void);

/* ---- scenes ---- */

typedef struct gicn_scene gicn_scene;

/* config_json: scene-generator configuration as JSON text; "{}" selects the
 * built-in three-class toy configuration. */
gicn_status gicn_scene_generate(const char* config_json, uint64_t seed, gicn_scene** out);
gicn_status gicn_scene_read(const char* path, gicn_scene** out);
gicn_status gicn_scene_write(const gicn_scene* scene, const char* path);
gicn_status gicn_scene_export_ply(const gicn_scene* scene, const char* path);
size_t gicn_scene_num_points(const gicn_scene* scene);
int gicn_scene_num_classes(const gicn_scene* scene);
int gicn_scene_num_instances(const gicn_scene* scene);
void gicn_scene_free(gicn_scene* scene);

/* Writes `count` scenes named scene_0000.scn.txt ... under out_dir. */
gicn_status gicn_synth_run(const char* config_json, const char* out_dir, int count,
                           uint64_t base_seed);

/* ---- statistics tables (class radii + size groups) ---- */

typedef struct gicn_stats gicn_stats;

gicn_status gicn_stats_compute(const char* const* scene_paths, size_t n_paths, int k_groups,
                               gicn_stats** out);
gicn_status gicn_stats_write(const gicn_stats* stats, const char* path);
gicn_status gicn_stats_read(const char* path, gicn_stats** out);
double gicn_stats_class_radius(const gicn_stats* stats, int class_id);
int gicn_stats_group_count(const gicn_stats* stats);
void gicn_stats_free(gicn_stats* stats);

/* ---- pipeline entry points ---- */

/* scenes_dir / val_dir hold *.scn.txt files; config_path holds the run
 * configuration JSON (optional, NULL for defaults); overrides_json (optional)
 * is merged over the configuration, e.g. "{\"ablation\":\"no-focal\"}".
 * Writes checkpoints, run_log.csv and config.json under run_dir. */
gicn_status gicn_train_run(const char* scenes_dir, const char* val_dir, const char* stats_path,
                           const char* config_path, const char* overrides_json,
                           const char* run_dir);

/* Whole-scene inference: slice, sample, forward, select, masks, merge.
 * out_ply_path may be NULL. */
gicn_status gicn_infer_run(const char* scene_path, const char* checkpoint_path,
                           const char* stats_path, const char* out_instances_path,
                           const char* out_ply_path);

typedef struct gicn_eval_summary {
  double mprec;
  double mrec;
  double map50;
} gicn_eval_summary;

/* pred_paths[i] pairs with gt_scene_paths[i]; out_csv may be NULL. */
gicn_status gicn_eval_run(const char* const* pred_paths, const char* const* gt_scene_paths,
                          size_t n_scenes, const char* out_csv, gicn_eval_summary* out);

/* Per-point CSV: x,y,z,gt,predicted center heatmap value. */
gicn_status gicn_export_heatmap(const char* scene_path, const char* checkpoint_path,
                                const char* out_csv);

#ifdef __cplusplus
}
#endif

#endif /* GICN_H */
