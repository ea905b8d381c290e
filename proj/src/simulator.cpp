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

#include "scf/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "scf/error.hpp"
#include "scf/rng.hpp"

namespace scf {

namespace {

struct Hit {
  int surface = -1;
  double range = std::numeric_limits<double>::infinity();
  double a = 0.0, b = 0.0;  // parallelogram coordinates in [0, 1]
  Eigen::Vector3d point;
};

// Precomputed intersection data for one surface at one instant.
struct Surface {
  const TexturedPlane* plane;
  Eigen::Vector3d origin;
  Eigen::Vector3d normal;
  Eigen::Vector3d dual_u;  // local . dual_u = a
  Eigen::Vector3d dual_v;
};

std::vector<Surface> surfaces_at(const SceneModel& scene, double t) {
  std::vector<Surface> out;
  out.reserve(scene.planes.size() + scene.dynamic_objects.size());
  auto add = [&](const TexturedPlane& p, const Eigen::Vector3d& origin) {
    Surface s;
    s.plane = &p;
    s.origin = origin;
    s.normal = p.edge_u.cross(p.edge_v);
    const Eigen::Vector3d vu = p.edge_v.cross(s.normal);
    const Eigen::Vector3d uv = s.normal.cross(p.edge_u);
    s.dual_u = vu / p.edge_u.dot(vu);
    s.dual_v = uv / p.edge_v.dot(uv);
    out.push_back(s);
  };
  for (const auto& p : scene.planes) add(p, p.origin);
  for (const auto& d : scene.dynamic_objects) add(d.plane, d.plane.origin + d.velocity * t);
  return out;
}

Hit cast_ray(const std::vector<Surface>& surfaces, const Eigen::Vector3d& center,
             const Eigen::Vector3d& dir) {
  Hit best;
  for (std::size_t i = 0; i < surfaces.size(); ++i) {
    const Surface& s = surfaces[i];
    const double denom = s.normal.dot(dir);
    if (std::abs(denom) < 1e-12) continue;
    const double range = s.normal.dot(s.origin - center) / denom;
    if (!(range > 1e-9) || range >= best.range) continue;
    const Eigen::Vector3d point = center + range * dir;
    const Eigen::Vector3d local = point - s.origin;
    const double a = local.dot(s.dual_u);
    const double b = local.dot(s.dual_v);
    if (a < 0.0 || a > 1.0 || b < 0.0 || b > 1.0) continue;
    best.surface = static_cast<int>(i);
    best.range = range;
    best.a = a;
    best.b = b;
    best.point = point;
  }
  return best;
}

struct View {
  Pose pose;
  Eigen::Matrix3d cam_to_world;
  Eigen::Vector3d center;
  std::vector<Surface> surfaces;
};

View make_view(const SceneModel& scene, const Pose& pose, double t) {
  View v;
  v.pose = pose;
  v.cam_to_world = pose.rotation_matrix().transpose();
  v.center = pose.camera_center();
  v.surfaces = surfaces_at(scene, t);
  return v;
}

Hit cast_pixel(const View& view, const CameraIntrinsics& k, const Eigen::Vector2d& px) {
  const Eigen::Vector3d ray((px.x() - k.cx) / k.fx, (px.y() - k.cy) / k.fy, 1.0);
  return cast_ray(view.surfaces, view.center, view.cam_to_world * ray);
}

bool same_pose(const Pose& a, const Pose& b) {
  return a.rotation.coeffs() == b.rotation.coeffs() && a.translation == b.translation;
}

// Flow of a hit from the previous view; false when not visible there.
bool hit_flow(const Hit& hit, const Eigen::Vector2d& px, const View& cur, const View& prev,
              const CameraIntrinsics& k, bool dynamic, Eigen::Vector2d* flow) {
  const TexturedPlane& plane = *cur.surfaces[hit.surface].plane;
  const Eigen::Vector3d prev_point =
      prev.surfaces[hit.surface].origin + hit.a * plane.edge_u + hit.b * plane.edge_v;
  if (!dynamic && same_pose(cur.pose, prev.pose)) {
    *flow = Eigen::Vector2d::Zero();
    return true;
  }
  const auto q = try_project(prev_point, prev.pose, k);
  if (!q) return false;
  if (q->pixel.x() < 0.0 || q->pixel.y() < 0.0 || q->pixel.x() >= k.width ||
      q->pixel.y() >= k.height) {
    return false;
  }
  const Hit back = cast_pixel(prev, k, q->pixel);
  if (back.surface != hit.surface) return false;
  if ((back.point - prev_point).norm() > 1e-6 * std::max(1.0, back.range)) return false;
  *flow = px - q->pixel;
  return true;
}

double lattice_value(std::uint64_t seed, std::int64_t ix, std::int64_t iy) {
  const std::uint64_t h =
      hash_combine(hash_combine(seed, static_cast<std::uint64_t>(ix)), static_cast<std::uint64_t>(iy));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double value_noise(std::uint64_t seed, double x, double y) {
  const double fx = std::floor(x), fy = std::floor(y);
  const auto ix = static_cast<std::int64_t>(fx);
  const auto iy = static_cast<std::int64_t>(fy);
  auto smooth = [](double u) { return u * u * (3.0 - 2.0 * u); };
  const double sx = smooth(x - fx), sy = smooth(y - fy);
  const double v00 = lattice_value(seed, ix, iy), v10 = lattice_value(seed, ix + 1, iy);
  const double v01 = lattice_value(seed, ix, iy + 1), v11 = lattice_value(seed, ix + 1, iy + 1);
  const double top = v00 + sx * (v10 - v00);
  const double bot = v01 + sx * (v11 - v01);
  return top + sy * (bot - top);
}

void render_into(const View& cur, const View& prev, const CameraIntrinsics& k, int stride,
                 std::size_t static_count, CoordStateMap* coords, FlowField* flow,
                 Grid<int>* surface, Image* image) {
  const int rows = coords->rows();
  const int cols = coords->cols();
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const std::size_t i = coords->coords.index(r, c);
      const Eigen::Vector2d px((c + 0.5) * stride, (r + 0.5) * stride);
      const Hit hit = cast_pixel(cur, k, px);
      (*surface)[i] = hit.surface;
      if (hit.surface < 0) {
        if (image) (*image)[i] = 0.0f;
        continue;
      }
      coords->set_log(i, hit.point, 0.0);
      const TexturedPlane& plane = *cur.surfaces[hit.surface].plane;
      if (image) {
        (*image)[i] = static_cast<float>(texture_intensity(plane, hit.a * plane.edge_u.norm(),
                                                           hit.b * plane.edge_v.norm()));
      }
      const bool dynamic = static_cast<std::size_t>(hit.surface) >= static_count;
      Eigen::Vector2d f;
      if (hit_flow(hit, px, cur, prev, k, dynamic, &f)) {
        flow->offsets[i] = f;
        flow->valid[i] = 1;
      }
    }
  }
}

}  // namespace

void SceneModel::validate() const {
  auto check = [](const TexturedPlane& p) {
    if (!p.origin.allFinite() || !p.edge_u.allFinite() || !p.edge_v.allFinite()) {
      fail(ErrorCode::kInvalidArgument, "scene plane has non-finite geometry");
    }
    if (!(p.edge_u.cross(p.edge_v).norm() > 1e-12)) {
      fail(ErrorCode::kInvalidArgument, "scene plane has zero area");
    }
    if (!(p.texture_cell_m > 0.0)) fail(ErrorCode::kInvalidArgument, "texture cell must be positive");
  };
  if (planes.empty() && dynamic_objects.empty()) fail(ErrorCode::kInvalidArgument, "empty scene");
  for (const auto& p : planes) check(p);
  for (const auto& d : dynamic_objects) {
    check(d.plane);
    if (!d.velocity.allFinite()) fail(ErrorCode::kInvalidArgument, "non-finite object velocity");
  }
}

void Trajectory::validate(double max_angular_velocity, double max_linear_velocity) const {
  if (poses.empty()) fail(ErrorCode::kInvalidArgument, "trajectory is empty");
  if (poses.size() != timestamps.size()) {
    fail(ErrorCode::kInvalidArgument, "trajectory poses and timestamps differ in length");
  }
  for (std::size_t i = 1; i < poses.size(); ++i) {
    const double dt = timestamps[i] - timestamps[i - 1];
    if (!(dt > 0.0)) fail(ErrorCode::kInvalidArgument, "timestamps must strictly increase");
    const double ang = rotation_difference_deg(poses[i], poses[i - 1]) * M_PI / 180.0;
    const double lin = (poses[i].camera_center() - poses[i - 1].camera_center()).norm();
    if (ang / dt > max_angular_velocity || lin / dt > max_linear_velocity) {
      fail(ErrorCode::kInvalidArgument, "trajectory step " + std::to_string(i) + " too fast");
    }
  }
}

void DegradationConfig::validate() const {
  if (blur_kernel_px < 0) fail(ErrorCode::kInvalidArgument, "blur_kernel_px must be >= 0");
  if (blur_every_n < 1) fail(ErrorCode::kInvalidArgument, "blur_every_n must be >= 1");
  if (occluder_count < 0) fail(ErrorCode::kInvalidArgument, "occluder_count must be >= 0");
  if (image_noise_sigma < 0.0) fail(ErrorCode::kInvalidArgument, "image noise must be >= 0");
  if (trim_range && trim_range->first > trim_range->second) {
    fail(ErrorCode::kInvalidArgument, "trim range is reversed");
  }
}

double texture_intensity(const TexturedPlane& plane, double s_m, double t_m) {
  double acc = 0.0;
  double weight = 0.55;
  double cell = plane.texture_cell_m;
  double total = 0.0;
  for (int octave = 0; octave < 3; ++octave) {
    acc += weight * value_noise(plane.texture_seed + 977 * octave, s_m / cell, t_m / cell);
    total += weight;
    weight *= 0.55;
    cell *= 0.5;
  }
  return 0.1 + 0.8 * (acc / total);
}

FrameBundle render_frame(const SceneModel& scene, const Pose& pose, const CameraIntrinsics& k,
                         double t, int stride, const std::optional<PreviousView>& previous) {
  k.validate();
  scene.validate();
  if (stride < 1 || k.width % stride != 0 || k.height % stride != 0) {
    fail(ErrorCode::kBadStride, "image size must be divisible by the stride");
  }
  const PreviousView pv = previous.value_or(PreviousView{pose, t});
  const View cur = make_view(scene, pose, t);
  const View prev = make_view(scene, pv.pose, pv.timestamp);

  FrameBundle f;
  f.timestamp = t;
  f.gt_pose = pose;
  f.image = Image(k.height, k.width);
  f.gt_coords = CoordStateMap(k.height, k.width);
  f.gt_flow = FlowField(k.height, k.width, 1);
  f.surface = Grid<int>(k.height, k.width, -1);
  render_into(cur, prev, k, 1, scene.planes.size(), &f.gt_coords, &f.gt_flow, &f.surface,
              &f.image);

  const double coverage = static_cast<double>(f.gt_coords.valid_count()) / f.gt_coords.size();
  if (coverage < kMinCoverage) {
    fail(ErrorCode::kEmptyView, "only " + std::to_string(coverage * 100.0) + "% of pixels hit");
  }

  const int h = k.height / stride, w = k.width / stride;
  f.cell_coords = CoordStateMap(h, w);
  f.cell_flow = FlowField(h, w, stride);
  f.cell_surface = Grid<int>(h, w, -1);
  render_into(cur, prev, k, stride, scene.planes.size(), &f.cell_coords, &f.cell_flow,
              &f.cell_surface, nullptr);
  return f;
}

FrameBundle apply_motion_blur(const FrameBundle& frame, int kernel_px,
                              const Eigen::Vector2d& direction) {
  if (kernel_px < 1) fail(ErrorCode::kInvalidArgument, "blur kernel must be >= 1 px");
  FrameBundle out = frame;
  out.tags.insert(Degradation::kBlurred);
  if (kernel_px == 1) return out;
  const Eigen::Vector2d dir =
      direction.norm() > 1e-12 ? Eigen::Vector2d(direction.normalized()) : Eigen::Vector2d(1.0, 0.0);
  const Image& src = frame.image;
  const int rows = src.rows(), cols = src.cols();
  auto wrap = [](int v, int n) { return ((v % n) + n) % n; };
  std::vector<Eigen::Vector2d> taps(kernel_px);
  for (int i = 0; i < kernel_px; ++i) taps[i] = (i - 0.5 * (kernel_px - 1)) * dir;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (const auto& o : taps) {
        const double x = c + o.x(), y = r + o.y();
        const double fx0 = std::floor(x), fy0 = std::floor(y);
        const double ax = x - fx0, ay = y - fy0;
        const int x0 = wrap(static_cast<int>(fx0), cols), x1 = wrap(static_cast<int>(fx0) + 1, cols);
        const int y0 = wrap(static_cast<int>(fy0), rows), y1 = wrap(static_cast<int>(fy0) + 1, rows);
        const double top = src(y0, x0) + ax * (src(y0, x1) - src(y0, x0));
        const double bot = src(y1, x0) + ax * (src(y1, x1) - src(y1, x0));
        acc += top + ay * (bot - top);
      }
      out.image(r, c) = static_cast<float>(acc / kernel_px);
    }
  }
  return out;
}

Eigen::Vector2d dominant_motion_direction(const FrameBundle& frame) {
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  for (std::size_t i = 0; i < frame.gt_flow.size(); ++i) {
    if (frame.gt_flow.is_valid(i)) sum += frame.gt_flow.offsets[i];
  }
  if (sum.norm() < 1e-9) return {1.0, 0.0};
  return sum.normalized();
}

SequenceGenerator::SequenceGenerator(const SceneModel& scene, const Trajectory& traj,
                                     const CameraIntrinsics& k, const DegradationConfig& degradation,
                                     std::uint64_t seed, int stride)
    : world_(scene), traj_(traj), k_(k), degradation_(degradation), seed_(seed), stride_(stride) {
  traj_.validate();
  degradation_.validate();
  if (degradation_.occluder_count > 0) add_occluders(&world_, degradation_.occluder_count, seed_);
}

std::optional<FrameBundle> SequenceGenerator::next() {
  while (cursor_ < traj_.poses.size()) {
    const std::size_t i = cursor_++;
    const int fi = static_cast<int>(i);
    if (degradation_.trim_range && fi >= degradation_.trim_range->first &&
        fi <= degradation_.trim_range->second) {
      after_trim_ = emitted_ > 0;
      continue;
    }
    FrameBundle f;
    try {
      f = render_frame(world_, traj_.poses[i], k_, traj_.timestamps[i], stride_, prev_);
    } catch (const Error& e) {
      throw Error(e.code(), "frame " + std::to_string(i) + ": " + e.what());
    }
    f.index = emitted_;
    if (after_trim_) {
      f.tags.insert(Degradation::kTrimmedRestart);
      after_trim_ = false;
    }
    if (degradation_.image_noise_sigma > 0.0) {
      const std::uint64_t frame_key = hash_combine(seed_, 0x1000 + i);
      for (std::size_t p = 0; p < f.image.size(); ++p) {
        CounterRng rng(frame_key, p);
        const double v = f.image[p] + degradation_.image_noise_sigma * rng.normal();
        f.image[p] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
    if (degradation_.blur_kernel_px >= 1 && (f.index + 1) % degradation_.blur_every_n == 0) {
      const Eigen::Vector2d dir = degradation_.blur_direction.value_or(dominant_motion_direction(f));
      f = apply_motion_blur(f, degradation_.blur_kernel_px, dir);
    }
    prev_ = PreviousView{traj_.poses[i], traj_.timestamps[i]};
    ++emitted_;
    return f;
  }
  return std::nullopt;
}

std::vector<FrameBundle> generate_sequence(const SceneModel& scene, const Trajectory& traj,
                                           const CameraIntrinsics& k,
                                           const DegradationConfig& degradation,
                                           std::uint64_t seed, int stride) {
  SequenceGenerator gen(scene, traj, k, degradation, seed, stride);
  std::vector<FrameBundle> out;
  while (auto f = gen.next()) out.push_back(std::move(*f));
  return out;
}

namespace {

TexturedPlane plane(const Eigen::Vector3d& o, const Eigen::Vector3d& u, const Eigen::Vector3d& v,
                    std::uint64_t seed, std::uint64_t id) {
  TexturedPlane p;
  p.origin = o;
  p.edge_u = u;
  p.edge_v = v;
  p.texture_seed = hash_combine(seed, id);
  return p;
}

// Axis-aligned box faces visible from -z (front, top, both sides).
void add_box(SceneModel* s, const Eigen::Vector3d& lo, const Eigen::Vector3d& hi,
             std::uint64_t seed, std::uint64_t id) {
  const Eigen::Vector3d d = hi - lo;
  s->planes.push_back(plane(lo, {d.x(), 0, 0}, {0, d.y(), 0}, seed, id));
  s->planes.push_back(plane(lo, {d.x(), 0, 0}, {0, 0, d.z()}, seed, id + 1));
  s->planes.push_back(plane(lo, {0, 0, d.z()}, {0, d.y(), 0}, seed, id + 2));
  s->planes.push_back(plane({hi.x(), lo.y(), lo.z()}, {0, 0, d.z()}, {0, d.y(), 0}, seed, id + 3));
}

Pose pose_from_center(const Eigen::Matrix3d& cam_to_world, const Eigen::Vector3d& center) {
  const Eigen::Matrix3d r = cam_to_world.transpose();
  return Pose::from(r, -r * center);
}

}  // namespace

SceneModel make_room_scene(std::uint64_t seed) {
  SceneModel s;
  s.planes.push_back(plane({-3.0, -2.0, 3.0}, {6.0, 0, 0}, {0, 3.5, 0}, seed, 1));    // back wall
  s.planes.push_back(plane({-3.0, 1.2, -1.0}, {6.0, 0, 0}, {0, 0, 4.0}, seed, 2));    // floor
  s.planes.push_back(plane({-3.0, -1.6, -1.0}, {6.0, 0, 0}, {0, 0, 4.0}, seed, 3));   // ceiling
  s.planes.push_back(plane({-2.2, -2.0, -1.0}, {0, 0, 4.0}, {0, 3.5, 0}, seed, 4));   // left
  s.planes.push_back(plane({2.2, -2.0, -1.0}, {0, 0, 4.0}, {0, 3.5, 0}, seed, 5));    // right
  add_box(&s, {-1.0, 0.3, 2.2}, {-0.2, 1.2, 3.0}, seed, 10);
  add_box(&s, {0.5, -0.9, 2.5}, {1.4, 0.1, 3.0}, seed, 20);
  return s;
}

SceneModel make_plane_scene(std::uint64_t seed, double z, double x_min, double x_max,
                            double half_height) {
  SceneModel s;
  s.planes.push_back(plane({x_min, -half_height, z}, {x_max - x_min, 0, 0},
                           {0, 2.0 * half_height, 0}, seed, 1));
  return s;
}

void add_occluders(SceneModel* scene, int count, std::uint64_t seed) {
  CounterRng rng(seed, 0x0cc1);
  for (int i = 0; i < count; ++i) {
    const double x = -1.2 + 2.4 * rng.uniform();
    const double y = -0.8 + 1.2 * rng.uniform();
    const double z = 1.2 + 0.6 * rng.uniform();
    const double size = 0.25 + 0.2 * rng.uniform();
    DynamicQuad q;
    q.plane = plane({x, y, z}, {size, 0, 0}, {0, size, 0}, seed, 100 + i);
    q.velocity = {(rng.uniform() - 0.5) * 0.6, (rng.uniform() - 0.5) * 0.3, 0.0};
    scene->dynamic_objects.push_back(q);
  }
}

Trajectory make_sweep_trajectory(int frames, double fps, double amplitude_scale) {
  Trajectory t;
  for (int i = 0; i < frames; ++i) {
    const double a = amplitude_scale;
    const Eigen::Vector3d center(0.6 * a * std::sin(0.083 * i), 0.15 * a * std::sin(0.05 * i + 0.4),
                                 0.2 * a * std::sin(0.037 * i));
    const double yaw = a * 8.0 * M_PI / 180.0 * std::sin(0.06 * i + 0.3);
    const double pitch = a * 4.0 * M_PI / 180.0 * std::sin(0.045 * i);
    const Eigen::Matrix3d cam_to_world =
        (Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitY()) *
         Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitX()))
            .toRotationMatrix();
    t.poses.push_back(pose_from_center(cam_to_world, center));
    t.timestamps.push_back(i / fps);
  }
  return t;
}

Trajectory make_static_trajectory(int frames, double fps, const Pose& pose) {
  Trajectory t;
  for (int i = 0; i < frames; ++i) {
    t.poses.push_back(pose);
    t.timestamps.push_back(i / fps);
  }
  return t;
}

Trajectory make_translation_trajectory(int frames, double fps, const Eigen::Vector3d& step,
                                       const Pose& start) {
  Trajectory t;
  const Eigen::Matrix3d cam_to_world = start.rotation_matrix().transpose();
  const Eigen::Vector3d c0 = start.camera_center();
  for (int i = 0; i < frames; ++i) {
    t.poses.push_back(pose_from_center(cam_to_world, c0 + i * step));
    t.timestamps.push_back(i / fps);
  }
  return t;
}

}  // namespace scf
