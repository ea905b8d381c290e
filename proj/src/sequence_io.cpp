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

#include "scf/sequence_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "scf/error.hpp"
#include "scf/map_io.hpp"

namespace scf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string numbered(const char* stem, int i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%04d.%s", stem, i, ext);
  return buf;
}

const char* tag_name(Degradation d) {
  return d == Degradation::kBlurred ? "blurred" : "trimmed_restart";
}

}  // namespace

struct SequenceReader::Entry {
  int index = 0;
  double timestamp = 0.0;
  std::string image, coords, cells, flow, cell_flow;
  Pose pose;
  std::set<Degradation> tags;
};

SequenceWriter::SequenceWriter(std::string dir, const CameraIntrinsics& k, int stride)
    : dir_(std::move(dir)), k_(k), stride_(stride) {
  k_.validate();
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create " + dir_ + ": " + ec.message());
}

void SequenceWriter::add(const FrameBundle& f) {
  const int i = count_++;
  json e;
  e["index"] = f.index;
  e["timestamp"] = f.timestamp;
  e["image"] = numbered("frame", i, "pgm");
  e["coords"] = numbered("coords", i, "kfsc");
  e["cells"] = numbered("cells", i, "kfsc");
  e["flow"] = numbered("flow", i, "kffl");
  e["cell_flow"] = numbered("cellflow", i, "kffl");
  const auto& q = f.gt_pose.rotation;
  const auto& t = f.gt_pose.translation;
  e["pose"] = {q.w(), q.x(), q.y(), q.z(), t.x(), t.y(), t.z()};
  e["tags"] = json::array();
  for (auto d : f.tags) e["tags"].push_back(tag_name(d));

  const fs::path d(dir_);
  save_pgm16((d / e["image"].get<std::string>()).string(), f.image);
  save_kfsc((d / e["coords"].get<std::string>()).string(), f.gt_coords);
  save_kfsc((d / e["cells"].get<std::string>()).string(), f.cell_coords);
  save_flow((d / e["flow"].get<std::string>()).string(), f.gt_flow);
  save_flow((d / e["cell_flow"].get<std::string>()).string(), f.cell_flow);
  frames_.push_back(std::move(e));
}

void SequenceWriter::finish() {
  json m;
  m["camera"] = {{"fx", k_.fx}, {"fy", k_.fy}, {"cx", k_.cx}, {"cy", k_.cy},
                 {"width", k_.width}, {"height", k_.height}};
  m["stride"] = stride_;
  m["frames"] = frames_;
  const std::string path = (fs::path(dir_) / "manifest.json").string();
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path);
  out << m.dump(1) << "\n";
  if (!out) fail(ErrorCode::kIo, "write failed for " + path);
}

SequenceReader::SequenceReader(const std::string& path) {
  fs::path manifest(path);
  if (fs::is_directory(manifest)) manifest /= "manifest.json";
  dir_ = manifest.parent_path().string();
  std::ifstream in(manifest);
  if (!in) fail(ErrorCode::kIo, "cannot open " + manifest.string());
  try {
    const json m = json::parse(in);
    const json& c = m.at("camera");
    k_.fx = c.at("fx").get<double>();
    k_.fy = c.at("fy").get<double>();
    k_.cx = c.at("cx").get<double>();
    k_.cy = c.at("cy").get<double>();
    k_.width = c.at("width").get<int>();
    k_.height = c.at("height").get<int>();
    stride_ = m.at("stride").get<int>();
    for (const json& f : m.at("frames")) {
      auto e = std::make_shared<Entry>();
      e->index = f.at("index").get<int>();
      e->timestamp = f.at("timestamp").get<double>();
      e->image = f.at("image").get<std::string>();
      e->coords = f.at("coords").get<std::string>();
      e->cells = f.at("cells").get<std::string>();
      e->flow = f.at("flow").get<std::string>();
      e->cell_flow = f.at("cell_flow").get<std::string>();
      const auto p = f.at("pose").get<std::vector<double>>();
      if (p.size() != 7) fail(ErrorCode::kConfig, "pose needs 7 numbers");
      e->pose = Pose::from(Eigen::Quaterniond(p[0], p[1], p[2], p[3]), {p[4], p[5], p[6]});
      for (const auto& t : f.at("tags")) {
        const auto s = t.get<std::string>();
        if (s == "blurred") e->tags.insert(Degradation::kBlurred);
        else if (s == "trimmed_restart") e->tags.insert(Degradation::kTrimmedRestart);
        else fail(ErrorCode::kConfig, "unknown tag '" + s + "'");
      }
      entries_.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, manifest.string() + ": " + e.what());
  }
  k_.validate();
}

std::optional<FrameBundle> SequenceReader::next() {
  if (cursor_ >= entries_.size()) return std::nullopt;
  const Entry& e = *entries_[cursor_++];
  const fs::path d(dir_);
  FrameBundle f;
  f.index = e.index;
  f.timestamp = e.timestamp;
  f.image = load_pgm((d / e.image).string());
  f.gt_coords = load_kfsc((d / e.coords).string());
  f.cell_coords = load_kfsc((d / e.cells).string());
  f.gt_flow = load_flow((d / e.flow).string());
  f.cell_flow = load_flow((d / e.cell_flow).string());
  f.gt_pose = e.pose;
  f.tags = e.tags;
  return f;
}

}  // namespace scf
