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

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "scf/state_map.hpp"

namespace scf {

// h x w x c descriptors, each L2-normalized where defined. Descriptor (r, c)
// covers the patch x patch block with top-left pixel (r * stride, c * stride).
struct FeatureMap {
  int rows = 0;
  int cols = 0;
  int channels = 0;
  int stride = 1;
  int patch = 1;
  int smooth_radius = 0;               // 0 for plain patch descriptors
  std::vector<float> data;             // rows * cols * channels
  std::vector<std::uint8_t> defined;   // rows * cols

  const float* at(int r, int c) const { return data.data() + (static_cast<std::size_t>(r) * cols + c) * channels; }
  bool is_defined(int r, int c) const { return defined[static_cast<std::size_t>(r) * cols + c] != 0; }
};

// Pre-normalization energy below which a cell has no descriptor.
inline constexpr double kMinDescriptorEnergy = 1e-8;

// Descriptor per stride x stride cell: mean-removed patch intensities
// followed by the patch means of the horizontal and vertical Sobel responses.
// Throws kBadStride unless both image dimensions are multiples of stride.
FeatureMap extract_features(const Image& image, int stride);

// Same descriptor for every patch x patch block whose top-left pixel lies on
// a step-pixel lattice, for matching at finer than cell resolution. Throws
// kBadStride.
FeatureMap extract_dense_features(const Image& image, int patch, int step);

// Coarse descriptor for matching across blur: the image is low-passed by
// two passes of a (2 * smooth_radius + 1) box per axis, then sampled on a
// grid x grid lattice with the given spacing centered on each cell's block,
// plus the Sobel responses of the low-passed image pooled over the lattice
// footprint. Samples past the border are clamped.
struct ContextDescriptor {
  int smooth_radius = 8;
  int grid = 8;
  int spacing = 4;

  void validate() const;
};

// Context descriptors for cell-sized blocks (cell x cell) whose top-left
// pixel lies on a step-pixel lattice. step == cell gives one per cell.
// Throws kBadStride unless both image dimensions are multiples of cell.
FeatureMap extract_context_features(const Image& image, int cell, int step,
                                    const ContextDescriptor& desc);

// Offset o = (dx, dy) in search steps compares the current cell p with the
// previous frame's block displaced by -o, so o is the motion from t-1 to t.
// The search step is the previous map's stride, which must divide the
// current one; equal strides give a cell-to-cell volume.
struct CostVolume {
  int rows = 0;
  int cols = 0;
  int radius = 0;  // window_size = 2 * radius + 1
  int stride = 1;       // full-resolution pixels per offset step
  int cell_stride = 1;  // full-resolution pixels per cell
  std::vector<double> costs;          // rows * cols * window^2, row-major (dy, dx)
  std::vector<std::uint8_t> masked;   // same layout

  int window() const { return 2 * radius + 1; }
  std::size_t cell_base(int r, int c) const {
    return (static_cast<std::size_t>(r) * cols + c) * window() * window();
  }
  std::size_t slot(int dy, int dx) const {
    return static_cast<std::size_t>(dy + radius) * window() + (dx + radius);
  }
};

// L1 distance between normalized descriptors. Throws kShapeMismatch, or
// kInvalidArgument for an even window (counted in search steps).
CostVolume build_cost_volume(const FeatureMap& prev, const FeatureMap& cur, int window_size);

// Expectation of the offsets under softmax(-cost / temperature), scaled to
// full-resolution pixels. Cells with every offset masked are invalid.
FlowField flow_from_volume(const CostVolume& vol, double temperature);

// Samples prev at p - flow(p) (bilinear on coordinates and on variance).
// Invalid where the source leaves the grid, the flow is invalid, or a
// contributing neighbor is invalid. Throws kShapeMismatch.
CoordStateMap warp_state(const CoordStateMap& prev_posterior, const FlowField& flow);

struct ProcessNoiseConfig {
  double base_w2 = 1e-4;            // m^2
  double flow_gain = 1e-6;          // m^2 per px^2 of flow magnitude
  double occlusion_penalty = 1e-2;  // m^2 when the forward-backward check fails
  double fb_threshold = 4.0;        // px

  void validate() const;
};

// Bilinear flow sample at fractional cell location; nullopt when a needed
// neighbor is invalid or out of bounds.
std::optional<Eigen::Vector2d> sample_flow(const FlowField& flow, double row, double col);

// |flow(p) + fb_flow(p - flow(p))|; nullopt when it cannot be evaluated.
std::optional<double> forward_backward_residual(const FlowField& flow, const FlowField& fb_flow,
                                                std::size_t index);

// Prior mean = warped mean; prior variance r^2 = warped variance + w^2 with
// w^2 = base + gain |flow|^2 (+ occlusion penalty when the forward-backward
// check fails). Without fb_flow the check is skipped.
CoordStateMap assemble_prior(const CoordStateMap& warped, const FlowField& flow,
                             const ProcessNoiseConfig& cfg,
                             const std::optional<FlowField>& fb_flow);

// Debug emitter: one PGM per listed cell showing its window of costs.
void save_cost_slices(const std::string& dir, const CostVolume& vol,
                      const std::vector<std::pair<int, int>>& cells);

}  // namespace scf
