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
#include <set>
#include <utility>
#include <vector>

#include "scf/geometry.hpp"
#include "scf/state_map.hpp"

namespace scf {

// World-frame parallelogram origin + a*edge_u + b*edge_v, a, b in [0, 1],
// textured with seeded value noise over its metric surface coordinates.
struct TexturedPlane {
  Eigen::Vector3d origin;
  Eigen::Vector3d edge_u;
  Eigen::Vector3d edge_v;
  std::uint64_t texture_seed = 1;
  double texture_cell_m = 0.3;  // lattice spacing of the coarsest noise octave
};

// A quad translating at constant velocity: origin(t) = plane.origin + velocity * t.
struct DynamicQuad {
  TexturedPlane plane;
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
};

struct SceneModel {
  std::vector<TexturedPlane> planes;
  std::vector<DynamicQuad> dynamic_objects;

  void validate() const;
};

struct Trajectory {
  std::vector<Pose> poses;
  std::vector<double> timestamps;

  // Checks ordering and per-step motion limits (radians / meters per second).
  void validate(double max_angular_velocity = 3.0, double max_linear_velocity = 3.0) const;
};

enum class Degradation { kBlurred, kTrimmedRestart };

struct DegradationConfig {
  int blur_kernel_px = 0;  // 0 or 1 disables blurring
  int blur_every_n = 10;
  std::optional<std::pair<int, int>> trim_range;  // inclusive frame indices
  int occluder_count = 0;
  double image_noise_sigma = 0.0;
  std::optional<Eigen::Vector2d> blur_direction;  // default: mean image motion

  void validate() const;
};

// Full-resolution image and labels plus the cell-resolution labels at the
// state-map stride. Cell (i, j) is sampled at pixel ((j+0.5)s, (i+0.5)s).
struct FrameBundle {
  int index = 0;
  double timestamp = 0.0;
  Image image;
  CoordStateMap gt_coords;  // H x W, zero log-variance
  FlowField gt_flow;        // H x W, stride 1, frame t-1 -> t
  Grid<int> surface;        // hit surface id, -1 for no hit
  CoordStateMap cell_coords;
  FlowField cell_flow;
  Grid<int> cell_surface;
  Pose gt_pose;
  std::set<Degradation> tags;

  bool has_tag(Degradation d) const { return tags.count(d) != 0; }
};

struct PreviousView {
  Pose pose;
  double timestamp = 0.0;
};

// Minimum fraction of pixels that must hit a surface.
inline constexpr double kMinCoverage = 0.2;

// Ray-casts every pixel and every cell center against the scene; nearest hit
// wins. Flow is computed against `previous` (or the same view when absent).
// Throws kEmptyView when coverage is below kMinCoverage.
FrameBundle render_frame(const SceneModel& scene, const Pose& pose, const CameraIntrinsics& k,
                         double t, int stride = 8,
                         const std::optional<PreviousView>& previous = std::nullopt);

// Line-kernel blur of kernel_px taps along direction, periodic boundary,
// weights summing to one. Labels untouched; adds the kBlurred tag.
FrameBundle apply_motion_blur(const FrameBundle& frame, int kernel_px,
                              const Eigen::Vector2d& direction);

// Mean image-space motion of the frame; +x when the frame is static.
Eigen::Vector2d dominant_motion_direction(const FrameBundle& frame);

// Renders, trims, degrades. Deterministic under seed; per-frame streams are
// derived from (seed, frame index). Errors carry the frame index.
std::vector<FrameBundle> generate_sequence(const SceneModel& scene, const Trajectory& traj,
                                           const CameraIntrinsics& k,
                                           const DegradationConfig& degradation,
                                           std::uint64_t seed, int stride = 8);

// Frame-by-frame form of generate_sequence; yields the same frames.
class SequenceGenerator {
 public:
  SequenceGenerator(const SceneModel& scene, const Trajectory& traj, const CameraIntrinsics& k,
                    const DegradationConfig& degradation, std::uint64_t seed, int stride = 8);
  // nullopt after the last frame.
  std::optional<FrameBundle> next();

 private:
  SceneModel world_;
  Trajectory traj_;
  CameraIntrinsics k_;
  DegradationConfig degradation_;
  std::uint64_t seed_;
  int stride_;
  std::size_t cursor_ = 0;
  int emitted_ = 0;
  bool after_trim_ = false;
  std::optional<PreviousView> prev_;
};

// Intensity in [0, 1] of the procedural texture at surface coordinates (meters).
double texture_intensity(const TexturedPlane& plane, double s_m, double t_m);

// --- stock scenes and trajectories ---------------------------------------

// Desk-scale room: floor, ceiling, three walls and two boxes in front of the back wall.
SceneModel make_room_scene(std::uint64_t seed);
// One fronto-parallel plane at depth z spanning x in [x_min, x_max].
SceneModel make_plane_scene(std::uint64_t seed, double z, double x_min, double x_max,
                            double half_height);
// Adds `count` translating occluder quads between the camera and the back wall.
void add_occluders(SceneModel* scene, int count, std::uint64_t seed);

// Smooth hand-held sweep through the room, `frames` poses at `fps`.
Trajectory make_sweep_trajectory(int frames, double fps, double amplitude_scale = 1.0);
Trajectory make_static_trajectory(int frames, double fps, const Pose& pose = Pose::identity());
// Constant per-frame translation of the camera center (world frame).
Trajectory make_translation_trajectory(int frames, double fps, const Eigen::Vector3d& step,
                                       const Pose& start = Pose::identity());

}  // namespace scf
