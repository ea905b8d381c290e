/*
 * Copyright 2026 The scfilter Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/*
 * C interface of the scene-coordinate filter. Every call returns an
 * scf_status; on failure scf_last_error() describes the most recent error
 * on the calling thread. Handles are opaque and owned by the caller, who
 * releases them with the matching *_free function (NULL is accepted).
 */
#ifndef SCF_SCF_H_
#define SCF_SCF_H_

#include <stddef.h>
#include <stdint.h>

#if defined(SCF_BUILDING_LIBRARY)
#define SCF_API __attribute__((visibility("default")))
#else
#define SCF_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum scf_status {
  SCF_OK = 0,
  SCF_ERR_INVALID_ARGUMENT = 1,
  SCF_ERR_CONFIG = 2,
  SCF_ERR_IO = 3,
  SCF_ERR_SHAPE_MISMATCH = 4,
  SCF_ERR_EMPTY_VIEW = 5,
  SCF_ERR_EMPTY_MAP = 6,
  SCF_ERR_NON_FINITE = 7,
  SCF_ERR_BAD_STRIDE = 8,
  SCF_ERR_BAD_PROBABILITY = 9,
  SCF_ERR_DEGENERATE = 10,
  SCF_ERR_TOO_FEW_CORRESPONDENCES = 11,
  SCF_ERR_NO_CONSENSUS = 12,
  SCF_ERR_DIVERGED = 13,
  SCF_ERR_EMPTY_INPUT = 14,
  SCF_ERR_UNKNOWN_SUITE = 15,
  SCF_ERR_BEHIND_CAMERA = 16,
  SCF_ERR_INTERNAL = 99
} scf_status;

typedef struct scf_config scf_config;
typedef struct scf_report scf_report;
typedef struct scf_suite scf_suite;
typedef struct scf_map scf_map;

SCF_API const char* scf_version(void);
SCF_API const char* scf_status_name(scf_status status);
/* Message of the last failed call on this thread; "" if none. */
SCF_API const char* scf_last_error(void);
/* Releases strings returned through char** out-parameters. */
SCF_API void scf_string_free(char* s);

/* --- configuration ------------------------------------------------------ */

SCF_API scf_status scf_config_default(scf_config** out);
/* TOML, or JSON when the path ends in .json. */
SCF_API scf_status scf_config_load(const char* path, scf_config** out);
SCF_API scf_status scf_config_parse(const char* toml_text, scf_config** out);
/* key is "section.field" (or a top-level field); value uses TOML syntax,
 * bare words are taken as strings. The result is validated. */
SCF_API scf_status scf_config_set(scf_config* cfg, const char* key, const char* value);
SCF_API scf_status scf_config_to_json(const scf_config* cfg, char** json_out);
SCF_API void scf_config_free(scf_config* cfg);

/* --- sequences and runs ------------------------------------------------- */

/* Renders the configured sequence into dir (images, labels, manifest). */
SCF_API scf_status scf_simulate(const scf_config* cfg, const char* dir, size_t* frames_written);

typedef struct scf_run_options {
  const char* out_dir;  /* NULL: keep everything in memory */
  int dump_diagnostics; /* per-frame NIS CSVs */
  int dump_flow;        /* flow/frame_NNNN.ppm */
  int save_maps;        /* posteriors/frame_NNNN.kfsc */
} scf_run_options;

SCF_API scf_status scf_run(const scf_config* cfg, const scf_run_options* options,
                           scf_report** out);

typedef struct scf_run_metrics {
  size_t frames;
  size_t failed_frames;
  double median_translation_m;
  double median_rotation_deg;
  double accuracy_5cm_5deg;
  double mean_coord_error_m;
  double mean_measurement_error_m;
  double rejection_rate;
  double nis_exceed_rate;
  double flow_accuracy;
  double wall_seconds;
} scf_run_metrics;

typedef struct scf_frame_info {
  int index;
  double timestamp;
  int blurred;
  int trimmed_restart;
  int pose_ok;
  double translation_error_m; /* inf when the pose failed */
  double rotation_error_deg;
  double coord_error_mean_m;
  size_t fused;
  size_t rejected;
  size_t nis_exceeded;
  double loss_full;
} scf_frame_info;

SCF_API scf_status scf_report_metrics(const scf_report* report, scf_run_metrics* out);
SCF_API scf_status scf_report_frame(const scf_report* report, size_t i, scf_frame_info* out);
SCF_API scf_status scf_report_write_csv(const scf_report* report, const char* path);
/* Posterior maps of the run filtered by sqrt(variance) <= lambda_m. */
SCF_API scf_status scf_report_export_ply(const scf_report* report, double lambda_m,
                                         const char* path, size_t* points);
SCF_API void scf_report_free(scf_report* report);

/* --- experiment suites --------------------------------------------------- */

/* name: motion_blur, tracking_loss, fusion_ablation or calibration. With
 * out_dir set, comparison.csv, suite_summary.csv and cdf.csv are written. */
SCF_API scf_status scf_suite_run(const char* name, const scf_config* base, uint64_t seed,
                                 const char* out_dir, scf_suite** out);
SCF_API size_t scf_suite_metric_count(const scf_suite* suite);
SCF_API scf_status scf_suite_metric_at(const scf_suite* suite, size_t i, const char** key,
                                       double* value);
SCF_API scf_status scf_suite_metric(const scf_suite* suite, const char* key, double* value);
SCF_API scf_status scf_suite_write(const scf_suite* suite, const char* dir);
SCF_API void scf_suite_free(scf_suite* suite);

/* --- coordinate maps ------------------------------------------------------ */

SCF_API scf_status scf_map_create(int rows, int cols, scf_map** out);
SCF_API scf_status scf_map_load(const char* path, scf_map** out);
SCF_API scf_status scf_map_save(const scf_map* map, const char* path);
SCF_API scf_status scf_map_dims(const scf_map* map, int* rows, int* cols);
/* xyz in meters; variance in m^2. */
SCF_API scf_status scf_map_set(scf_map* map, int row, int col, const double xyz[3],
                               double variance);
SCF_API scf_status scf_map_get(const scf_map* map, int row, int col, double xyz[3],
                               double* variance, int* valid);
SCF_API void scf_map_free(scf_map* map);

/* Per-pixel fusion; nis_alpha <= 0 disables the gate. */
SCF_API scf_status scf_kalman_update(const scf_map* prior, const scf_map* measurement,
                                     double nis_alpha, scf_map** posterior, size_t* rejected);
/* Writes every map's cells with sqrt(variance) <= lambda_m to one PLY. */
SCF_API scf_status scf_export_ply(const char* const* map_paths, size_t count, double lambda_m,
                                  const char* path, size_t* points);

SCF_API scf_status scf_chi2_quantile(double dof, double p, double* out);

#ifdef __cplusplus
}
#endif

#endif /* SCF_SCF_H_ */
