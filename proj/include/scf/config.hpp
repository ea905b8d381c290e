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

#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "scf/geometry.hpp"
#include "scf/losses.hpp"
#include "scf/measurement.hpp"
#include "scf/pose_solver.hpp"
#include "scf/process.hpp"
#include "scf/simulator.hpp"

namespace scf {

enum class FusionMode { kKalman, kTPooler, kSWeight, kMeasurementOnly };
enum class FlowSource { kEstimated, kGroundTruth };

const char* to_string(FusionMode m);
FusionMode parse_fusion_mode(const std::string& s);  // throws kConfig

struct SceneSpec {
  std::string kind = "room";  // room | plane
  std::uint64_t seed = 7;
  double plane_z = 2.0;
  double plane_x_min = -4.0;
  double plane_x_max = 4.0;
  double plane_half_height = 2.0;
  int occluders = 0;
};

struct TrajectorySpec {
  std::string kind = "sweep";  // sweep | static | translation
  int frames = 100;
  double fps = 30.0;
  double amplitude = 1.0;
  Eigen::Vector3d step = Eigen::Vector3d::Zero();  // translation kind, m per frame
};

struct FlowSpec {
  double temperature = 0.05;
  int search_stride = 1;  // full-resolution pixels per cost-volume offset
  FlowSource source = FlowSource::kEstimated;
  bool context = true;  // context descriptors; false matches raw patch descriptors
  ContextDescriptor descriptor;
};

struct BaselineSpec {
  int history = 3;  // previous measurements aggregated by tpooler / sweight
  double sim_temp = 1e-3;
};

struct PipelineConfig {
  SceneSpec scene;
  TrajectorySpec trajectory;
  CameraIntrinsics camera;
  DegradationConfig degradation;
  int stride = 8;
  int window_size = 25;  // search steps, odd
  FlowSpec flow;
  MeasurementOracleConfig measurement;
  ProcessNoiseConfig process;
  LossWeights loss;
  RansacConfig ransac;
  std::optional<double> nis_alpha = 0.05;  // nullopt disables gating
  FusionMode fusion_mode = FusionMode::kKalman;
  BaselineSpec baseline;
  std::uint64_t seed = 1;
  std::string output_dir;
  std::string sequence;  // manifest path; empty means simulate from scene/trajectory

  // Throws kConfig.
  void validate() const;
};

// Reads a TOML subset (tables, dotted table headers, scalar and flat array
// values, # comments) into JSON. Throws kConfig with the line number.
nlohmann::json parse_toml(const std::string& text);

// Overlays a JSON document onto cfg. Unknown keys throw kConfig.
void apply_config(PipelineConfig& cfg, const nlohmann::json& doc);
// Single-key override, "section.key" with a TOML-style value string; a value
// that does not parse is taken as a bare string.
void set_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value);

// .json files are parsed as JSON, anything else as TOML. Throws kConfig, kIo.
PipelineConfig load_config(const std::string& path);
PipelineConfig config_from_string(const std::string& text);

nlohmann::json config_to_json(const PipelineConfig& cfg);

}  // namespace scf
