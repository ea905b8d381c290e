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

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "scf/simulator.hpp"

namespace scf {

// On-disk sequence: DIR/manifest.json plus per-frame files
//   frame_NNNN.pgm        16-bit image
//   coords_NNNN.kfsc      full-resolution ground-truth coordinates
//   cells_NNNN.kfsc       cell-resolution ground-truth coordinates
//   flow_NNNN.kffl        full-resolution ground-truth flow
//   cellflow_NNNN.kffl    cell-resolution ground-truth flow
// The manifest lists these paths (relative to DIR), the pose as
// [qw, qx, qy, qz, tx, ty, tz], the timestamp, the tags, the intrinsics and
// the stride.
class SequenceWriter {
 public:
  SequenceWriter(std::string dir, const CameraIntrinsics& k, int stride);
  void add(const FrameBundle& frame);
  // Writes manifest.json. Throws kIo.
  void finish();

 private:
  std::string dir_;
  CameraIntrinsics k_;
  int stride_;
  nlohmann::json frames_ = nlohmann::json::array();
  int count_ = 0;
};

class SequenceReader {
 public:
  // Reads DIR/manifest.json (or the given manifest file). Throws kIo, kConfig.
  explicit SequenceReader(const std::string& path);
  const CameraIntrinsics& camera() const { return k_; }
  int stride() const { return stride_; }
  std::size_t size() const { return entries_.size(); }
  std::optional<FrameBundle> next();

 private:
  struct Entry;
  std::string dir_;
  CameraIntrinsics k_;
  int stride_ = 8;
  std::vector<std::shared_ptr<Entry>> entries_;
  std::size_t cursor_ = 0;
};

}  // namespace scf
