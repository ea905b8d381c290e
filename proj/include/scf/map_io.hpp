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

#include <iosfwd>
#include <string>
#include <vector>

#include "scf/state_map.hpp"

namespace scf {

// KFSC coordinate-map format, little-endian:
//   "KFSC" u32 H u32 W | H*W f32 xyz triples | H*W f32 log-variance | H*W u8 valid
void write_kfsc(std::ostream& os, const CoordStateMap& map);
CoordStateMap read_kfsc(std::istream& is);
void save_kfsc(const std::string& path, const CoordStateMap& map);
CoordStateMap load_kfsc(const std::string& path);

// Two-channel flow file in the same style:
//   "KFFL" u32 H u32 W u32 stride | H*W f32 (dx, dy) pairs | H*W u8 valid
void write_flow(std::ostream& os, const FlowField& flow);
FlowField read_flow(std::istream& is);
void save_flow(const std::string& path, const FlowField& flow);
FlowField load_flow(const std::string& path);

// 16-bit binary PGM (P5, maxval 65535); intensities clamped to [0, 1].
void save_pgm16(const std::string& path, const Image& image);
Image load_pgm(const std::string& path);

// False-color flow visualization (hue = direction, value = magnitude / max_px).
void save_flow_ppm(const std::string& path, const FlowField& flow, double max_px);

struct PlyPoint {
  Eigen::Vector3d position;
  std::uint8_t gray;
};
void save_ply(const std::string& path, const std::vector<PlyPoint>& points);

// Valid pixels of one map, gray level ranked by variance (lowest variance brightest).
std::vector<PlyPoint> map_points(const CoordStateMap& map);

}  // namespace scf
