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

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace scf {

// Rigid world-to-camera transform: x_cam = R * x_world + t.
struct Pose {
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static Pose identity() { return {}; }
  // Normalizes q.
  static Pose from(const Eigen::Quaterniond& q, const Eigen::Vector3d& t);
  static Pose from(const Eigen::Matrix3d& r, const Eigen::Vector3d& t);

  Eigen::Matrix3d rotation_matrix() const { return rotation.toRotationMatrix(); }
  // Camera center in world coordinates, -R^T t.
  Eigen::Vector3d camera_center() const;
};

// compose(a, b) maps x to a(b(x)).
Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& p);

Eigen::Vector3d transform_to_camera(const Eigen::Vector3d& point, const Pose& pose);

// Rotation angle of R_a * R_b^T, in degrees.
double rotation_difference_deg(const Pose& a, const Pose& b);

// Applies exp(omega) on the left of the rotation and adds delta_t.
Pose retract(const Pose& p, const Eigen::Vector3d& omega, const Eigen::Vector3d& delta_t);

struct CameraIntrinsics {
  double fx = 250.0;
  double fy = 250.0;
  double cx = 160.0;
  double cy = 120.0;
  int width = 320;
  int height = 240;

  // Throws kInvalidArgument when the invariants do not hold.
  void validate() const;
  // Unit-norm ray direction in the camera frame through a continuous pixel.
  Eigen::Vector3d bearing(const Eigen::Vector2d& pixel) const;
};

struct Projection {
  Eigen::Vector2d pixel;
  double depth;
};

inline constexpr double kMinDepth = 1e-9;

// Projects a world point; nullopt when the camera-frame depth is <= kMinDepth.
std::optional<Projection> try_project(const Eigen::Vector3d& point, const Pose& pose,
                                      const CameraIntrinsics& k);
// Throws kBehindCamera.
Projection project(const Eigen::Vector3d& point, const Pose& pose, const CameraIntrinsics& k);

}  // namespace scf
