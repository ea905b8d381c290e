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

#include "scf/geometry.hpp"

#include <cmath>
#include <string>

#include "scf/error.hpp"

namespace scf {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kBehindCamera: return "BehindCamera";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kEmptyView: return "EmptyView";
    case ErrorCode::kEmptyMap: return "EmptyMap";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kBadStride: return "BadStride";
    case ErrorCode::kBadProbability: return "BadProbability";
    case ErrorCode::kDegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::kTooFewCorrespondences: return "TooFewCorrespondences";
    case ErrorCode::kNoConsensus: return "NoConsensus";
    case ErrorCode::kDiverged: return "Diverged";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kUnknownSuite: return "UnknownSuite";
    case ErrorCode::kConfig: return "ConfigError";
    case ErrorCode::kIo: return "IoError";
  }
  return "Unknown";
}

Pose Pose::from(const Eigen::Quaterniond& q, const Eigen::Vector3d& t) {
  Pose p;
  p.rotation = q.normalized();
  p.translation = t;
  return p;
}

Pose Pose::from(const Eigen::Matrix3d& r, const Eigen::Vector3d& t) {
  return from(Eigen::Quaterniond(r), t);
}

Eigen::Vector3d Pose::camera_center() const {
  return -(rotation.conjugate() * translation);
}

Pose compose(const Pose& a, const Pose& b) {
  Pose out;
  out.rotation = (a.rotation * b.rotation).normalized();
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

Pose inverse(const Pose& p) {
  Pose out;
  out.rotation = p.rotation.conjugate().normalized();
  out.translation = -(out.rotation * p.translation);
  return out;
}

Eigen::Vector3d transform_to_camera(const Eigen::Vector3d& point, const Pose& pose) {
  return pose.rotation * point + pose.translation;
}

double rotation_difference_deg(const Pose& a, const Pose& b) {
  const Eigen::Quaterniond d = a.rotation * b.rotation.conjugate();
  const double angle = 2.0 * std::atan2(d.vec().norm(), std::abs(d.w()));
  return angle * 180.0 / M_PI;
}

Pose retract(const Pose& p, const Eigen::Vector3d& omega, const Eigen::Vector3d& delta_t) {
  const double angle = omega.norm();
  Eigen::Quaterniond dq = Eigen::Quaterniond::Identity();
  if (angle > 0.0) dq = Eigen::Quaterniond(Eigen::AngleAxisd(angle, omega / angle));
  Pose out;
  out.rotation = (dq * p.rotation).normalized();
  out.translation = p.translation + delta_t;
  return out;
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) fail(ErrorCode::kInvalidArgument, "focal lengths must be positive");
  if (width <= 0 || height <= 0) fail(ErrorCode::kInvalidArgument, "image size must be positive");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    fail(ErrorCode::kInvalidArgument, "principal point outside the image");
  }
}

Eigen::Vector3d CameraIntrinsics::bearing(const Eigen::Vector2d& pixel) const {
  return Eigen::Vector3d((pixel.x() - cx) / fx, (pixel.y() - cy) / fy, 1.0).normalized();
}

std::optional<Projection> try_project(const Eigen::Vector3d& point, const Pose& pose,
                                      const CameraIntrinsics& k) {
  const Eigen::Vector3d pc = transform_to_camera(point, pose);
  if (!(pc.z() > kMinDepth)) return std::nullopt;
  return Projection{{k.fx * pc.x() / pc.z() + k.cx, k.fy * pc.y() / pc.z() + k.cy}, pc.z()};
}

Projection project(const Eigen::Vector3d& point, const Pose& pose, const CameraIntrinsics& k) {
  auto p = try_project(point, pose, k);
  if (!p) fail(ErrorCode::kBehindCamera, "point has non-positive camera depth");
  return *p;
}

}  // namespace scf
