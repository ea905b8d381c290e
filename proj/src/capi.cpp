// Copyright 2026 The scfilter Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "scf/scf.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <fstream>
#include <new>
#include <optional>
#include <string>
#include <vector>

#include "scf/config.hpp"
#include "scf/error.hpp"
#include "scf/filtering.hpp"
#include "scf/map_io.hpp"
#include "scf/pipeline.hpp"
#include "scf/suites.hpp"

struct scf_config {
  scf::PipelineConfig cfg;
};

struct scf_report {
  scf::RunReport report;
};

struct scf_suite {
  scf::SuiteReport suite;
};

struct scf_map {
  scf::CoordStateMap map;
};

namespace {

thread_local std::string g_last_error;

scf_status status_of(scf::ErrorCode code) {
  using scf::ErrorCode;
  switch (code) {
    case ErrorCode::kInvalidArgument: return SCF_ERR_INVALID_ARGUMENT;
    case ErrorCode::kConfig: return SCF_ERR_CONFIG;
    case ErrorCode::kIo: return SCF_ERR_IO;
    case ErrorCode::kShapeMismatch: return SCF_ERR_SHAPE_MISMATCH;
    case ErrorCode::kEmptyView: return SCF_ERR_EMPTY_VIEW;
    case ErrorCode::kEmptyMap: return SCF_ERR_EMPTY_MAP;
    case ErrorCode::kNonFinite: return SCF_ERR_NON_FINITE;
    case ErrorCode::kBadStride: return SCF_ERR_BAD_STRIDE;
    case ErrorCode::kBadProbability: return SCF_ERR_BAD_PROBABILITY;
    case ErrorCode::kDegenerateConfiguration: return SCF_ERR_DEGENERATE;
    case ErrorCode::kTooFewCorrespondences: return SCF_ERR_TOO_FEW_CORRESPONDENCES;
    case ErrorCode::kNoConsensus: return SCF_ERR_NO_CONSENSUS;
    case ErrorCode::kDiverged: return SCF_ERR_DIVERGED;
    case ErrorCode::kEmptyInput: return SCF_ERR_EMPTY_INPUT;
    case ErrorCode::kUnknownSuite: return SCF_ERR_UNKNOWN_SUITE;
    case ErrorCode::kBehindCamera: return SCF_ERR_BEHIND_CAMERA;
  }
  return SCF_ERR_INTERNAL;
}

scf_status set_error(scf_status s, const std::string& what) {
  g_last_error = what;
  return s;
}

// Runs fn, translating exceptions into status codes.
template <typename F>
scf_status guarded(F&& fn) {
  try {
    g_last_error.clear();
    fn();
    return SCF_OK;
  } catch (const scf::Error& e) {
    return set_error(status_of(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(SCF_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(SCF_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(SCF_ERR_INTERNAL, "unknown exception");
  }
}

void require(bool ok, const char* what) {
  if (!ok) scf::fail(scf::ErrorCode::kInvalidArgument, what);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::size_t map_index(const scf::CoordStateMap& m, int row, int col) {
  require(m.valid.in_bounds(row, col), "cell out of bounds");
  return m.valid.index(row, col);
}

}  // namespace

extern "C" {

const char* scf_version(void) { return "0.1.0"; }

const char* scf_status_name(scf_status status) {
  switch (status) {
    case SCF_OK: return "ok";
    case SCF_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case SCF_ERR_CONFIG: return "config";
    case SCF_ERR_IO: return "io";
    case SCF_ERR_SHAPE_MISMATCH: return "shape_mismatch";
    case SCF_ERR_EMPTY_VIEW: return "empty_view";
    case SCF_ERR_EMPTY_MAP: return "empty_map";
    case SCF_ERR_NON_FINITE: return "non_finite";
    case SCF_ERR_BAD_STRIDE: return "bad_stride";
    case SCF_ERR_BAD_PROBABILITY: return "bad_probability";
    case SCF_ERR_DEGENERATE: return "degenerate_configuration";
    case SCF_ERR_TOO_FEW_CORRESPONDENCES: return "too_few_correspondences";
    case SCF_ERR_NO_CONSENSUS: return "no_consensus";
    case SCF_ERR_DIVERGED: return "diverged";
    case SCF_ERR_EMPTY_INPUT: return "empty_input";
    case SCF_ERR_UNKNOWN_SUITE: return "unknown_suite";
    case SCF_ERR_BEHIND_CAMERA: return "behind_camera";
    case SCF_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* scf_last_error(void) { return g_last_error.c_str(); }

void scf_string_free(char* s) { std::free(s); }

scf_status scf_config_default(scf_config** out) {
  return guarded([&] {
    require(out != nullptr, "out is null");
    *out = new scf_config{};
  });
}

scf_status scf_config_load(const char* path, scf_config** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "path and out are required");
    *out = nullptr;
    auto* c = new scf_config{scf::load_config(path)};
    *out = c;
  });
}

scf_status scf_config_parse(const char* toml_text, scf_config** out) {
  return guarded([&] {
    require(toml_text != nullptr && out != nullptr, "text and out are required");
    *out = nullptr;
    auto* c = new scf_config{scf::config_from_string(toml_text)};
    *out = c;
  });
}

scf_status scf_config_set(scf_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg != nullptr && key != nullptr && value != nullptr, "cfg, key and value are required");
    scf::PipelineConfig next = cfg->cfg;
    scf::set_config_value(next, key, value);
    next.validate();
    cfg->cfg = std::move(next);
  });
}

scf_status scf_config_to_json(const scf_config* cfg, char** json_out) {
  return guarded([&] {
    require(cfg != nullptr && json_out != nullptr, "cfg and json_out are required");
    *json_out = dup_string(scf::config_to_json(cfg->cfg).dump(2));
  });
}

void scf_config_free(scf_config* cfg) { delete cfg; }

scf_status scf_simulate(const scf_config* cfg, const char* dir, size_t* frames_written) {
  return guarded([&] {
    require(cfg != nullptr && dir != nullptr, "cfg and dir are required");
    const std::size_t n = scf::simulate_sequence(cfg->cfg, dir);
    if (frames_written) *frames_written = n;
  });
}

scf_status scf_run(const scf_config* cfg, const scf_run_options* options, scf_report** out) {
  return guarded([&] {
    require(cfg != nullptr && out != nullptr, "cfg and out are required");
    *out = nullptr;
    scf::PipelineConfig c = cfg->cfg;
    scf::RunOptions opts;
    if (options) {
      if (options->out_dir) c.output_dir = options->out_dir;
      opts.dump_diagnostics = options->dump_diagnostics != 0;
      opts.dump_flow = options->dump_flow != 0;
      opts.save_maps = options->save_maps != 0;
    }
    auto* r = new scf_report{scf::run_sequence(c, opts)};
    *out = r;
  });
}

scf_status scf_report_metrics(const scf_report* report, scf_run_metrics* out) {
  return guarded([&] {
    require(report != nullptr && out != nullptr, "report and out are required");
    const scf::RunReport& r = report->report;
    scf_run_metrics m{};
    m.frames = r.frames.size();
    for (const auto& f : r.frames) m.failed_frames += !f.pose_ok;
    m.median_translation_m = r.metrics.median_translation_m;
    m.median_rotation_deg = r.metrics.median_rotation_deg;
    m.accuracy_5cm_5deg = r.metrics.accuracy_5cm_5deg;
    m.mean_coord_error_m = r.mean_coord_error;
    m.mean_measurement_error_m = r.mean_measurement_error;
    m.rejection_rate = r.rejection_rate();
    m.nis_exceed_rate = r.nis_exceed_rate();
    m.flow_accuracy = r.flow_accuracy();
    m.wall_seconds = r.wall_seconds;
    *out = m;
  });
}

scf_status scf_report_frame(const scf_report* report, size_t i, scf_frame_info* out) {
  return guarded([&] {
    require(report != nullptr && out != nullptr, "report and out are required");
    require(i < report->report.frames.size(), "frame index out of range");
    const scf::FrameRecord& f = report->report.frames[i];
    scf_frame_info info{};
    info.index = f.index;
    info.timestamp = f.timestamp;
    info.blurred = f.blurred;
    info.trimmed_restart = f.trimmed_restart;
    info.pose_ok = f.pose_ok;
    info.translation_error_m = f.error.translation_m;
    info.rotation_error_deg = f.error.rotation_deg;
    info.coord_error_mean_m = f.coord.mean;
    info.fused = f.fused;
    info.rejected = f.rejected;
    info.nis_exceeded = f.nis_exceeded;
    info.loss_full = f.loss_full;
    *out = info;
  });
}

scf_status scf_report_write_csv(const scf_report* report, const char* path) {
  return guarded([&] {
    require(report != nullptr && path != nullptr, "report and path are required");
    std::ofstream os(path);
    if (!os) scf::fail(scf::ErrorCode::kIo, std::string("cannot write ") + path);
    scf::write_report_csv(os, report->report);
    if (!os) scf::fail(scf::ErrorCode::kIo, std::string("write failed for ") + path);
  });
}

scf_status scf_report_export_ply(const scf_report* report, double lambda_m, const char* path,
                                 size_t* points) {
  return guarded([&] {
    require(report != nullptr && path != nullptr, "report and path are required");
    const std::size_t n = scf::export_point_cloud(report->report.posteriors, lambda_m, path);
    if (points) *points = n;
  });
}

void scf_report_free(scf_report* report) { delete report; }

scf_status scf_suite_run(const char* name, const scf_config* base, uint64_t seed,
                         const char* out_dir, scf_suite** out) {
  return guarded([&] {
    require(name != nullptr && base != nullptr && out != nullptr, "name, base and out are required");
    *out = nullptr;
    scf::PipelineConfig c = base->cfg;
    c.output_dir = out_dir ? out_dir : "";
    auto* s = new scf_suite{scf::run_experiment_suite(name, c, seed)};
    *out = s;
  });
}

size_t scf_suite_metric_count(const scf_suite* suite) {
  return suite ? suite->suite.summary.size() : 0;
}

scf_status scf_suite_metric_at(const scf_suite* suite, size_t i, const char** key, double* value) {
  return guarded([&] {
    require(suite != nullptr, "suite is null");
    require(i < suite->suite.summary.size(), "metric index out of range");
    if (key) *key = suite->suite.summary[i].first.c_str();
    if (value) *value = suite->suite.summary[i].second;
  });
}

scf_status scf_suite_metric(const scf_suite* suite, const char* key, double* value) {
  return guarded([&] {
    require(suite != nullptr && key != nullptr && value != nullptr, "suite, key and value are required");
    *value = suite->suite.value(key);
  });
}

scf_status scf_suite_write(const scf_suite* suite, const char* dir) {
  return guarded([&] {
    require(suite != nullptr && dir != nullptr, "suite and dir are required");
    scf::write_suite_outputs(dir, suite->suite);
  });
}

void scf_suite_free(scf_suite* suite) { delete suite; }

scf_status scf_map_create(int rows, int cols, scf_map** out) {
  return guarded([&] {
    require(out != nullptr, "out is null");
    require(rows > 0 && cols > 0, "rows and cols must be positive");
    *out = new scf_map{scf::CoordStateMap(rows, cols)};
  });
}

scf_status scf_map_load(const char* path, scf_map** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "path and out are required");
    *out = nullptr;
    auto* m = new scf_map{scf::load_kfsc(path)};
    *out = m;
  });
}

scf_status scf_map_save(const scf_map* map, const char* path) {
  return guarded([&] {
    require(map != nullptr && path != nullptr, "map and path are required");
    scf::save_kfsc(path, map->map);
  });
}

scf_status scf_map_dims(const scf_map* map, int* rows, int* cols) {
  return guarded([&] {
    require(map != nullptr, "map is null");
    if (rows) *rows = map->map.rows();
    if (cols) *cols = map->map.cols();
  });
}

scf_status scf_map_set(scf_map* map, int row, int col, const double xyz[3], double variance) {
  return guarded([&] {
    require(map != nullptr && xyz != nullptr, "map and xyz are required");
    require(std::isfinite(xyz[0]) && std::isfinite(xyz[1]) && std::isfinite(xyz[2]),
            "coordinates must be finite");
    require(variance > 0.0 && std::isfinite(variance), "variance must be positive and finite");
    map->map.set(map_index(map->map, row, col), Eigen::Vector3d(xyz[0], xyz[1], xyz[2]), variance);
  });
}

scf_status scf_map_get(const scf_map* map, int row, int col, double xyz[3], double* variance,
                       int* valid) {
  return guarded([&] {
    require(map != nullptr, "map is null");
    const std::size_t i = map_index(map->map, row, col);
    const bool ok = map->map.is_valid(i);
    if (valid) *valid = ok;
    if (xyz) {
      for (int k = 0; k < 3; ++k) xyz[k] = ok ? map->map.coords[i][k] : 0.0;
    }
    if (variance) *variance = ok ? map->map.variance(i) : 0.0;
  });
}

void scf_map_free(scf_map* map) { delete map; }

scf_status scf_kalman_update(const scf_map* prior, const scf_map* measurement, double nis_alpha,
                             scf_map** posterior, size_t* rejected) {
  return guarded([&] {
    require(prior != nullptr && measurement != nullptr && posterior != nullptr,
            "prior, measurement and posterior are required");
    *posterior = nullptr;
    std::optional<double> alpha;
    if (nis_alpha > 0.0) alpha = nis_alpha;
    scf::KalmanResult kr = scf::kalman_update(prior->map, measurement->map, alpha);
    if (rejected) *rejected = kr.diagnostics.rejected_count();
    *posterior = new scf_map{std::move(kr.posterior)};
  });
}

scf_status scf_export_ply(const char* const* map_paths, size_t count, double lambda_m,
                          const char* path, size_t* points) {
  return guarded([&] {
    require(path != nullptr && (count == 0 || map_paths != nullptr), "paths are required");
    std::vector<scf::CoordStateMap> maps;
    for (size_t i = 0; i < count; ++i) {
      require(map_paths[i] != nullptr, "null map path");
      maps.push_back(scf::load_kfsc(map_paths[i]));
    }
    const std::size_t n = scf::export_point_cloud(maps, lambda_m, path);
    if (points) *points = n;
  });
}

scf_status scf_chi2_quantile(double dof, double p, double* out) {
  return guarded([&] {
    require(out != nullptr, "out is null");
    *out = scf::chi2_quantile(dof, p);
  });
}

}  // extern "C"
