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

#include "scf/config.hpp"

#include <cctype>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

#include "scf/error.hpp"

namespace scf {

using nlohmann::json;

const char* to_string(FusionMode m) {
  switch (m) {
    case FusionMode::kKalman: return "kalman";
    case FusionMode::kTPooler: return "tpooler";
    case FusionMode::kSWeight: return "sweight";
    case FusionMode::kMeasurementOnly: return "measurement_only";
  }
  return "?";
}

FusionMode parse_fusion_mode(const std::string& s) {
  if (s == "kalman") return FusionMode::kKalman;
  if (s == "tpooler") return FusionMode::kTPooler;
  if (s == "sweight") return FusionMode::kSWeight;
  if (s == "measurement_only") return FusionMode::kMeasurementOnly;
  fail(ErrorCode::kConfig, "unknown fusion_mode '" + s + "'");
}

// --- TOML subset --------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string strip_comment(const std::string& line) {
  bool in_str = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_str = !in_str;
    if (line[i] == '#' && !in_str) return line.substr(0, i);
  }
  return line;
}

std::vector<std::string> split_dotted(const std::string& key, int line_no) {
  std::vector<std::string> parts;
  std::stringstream ss(key);
  std::string part;
  while (std::getline(ss, part, '.')) {
    part = trim(part);
    if (part.empty()) fail(ErrorCode::kConfig, "line " + std::to_string(line_no) + ": empty key");
    for (char c : part)
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'))
        fail(ErrorCode::kConfig, "line " + std::to_string(line_no) + ": bad key '" + key + "'");
    parts.push_back(part);
  }
  if (parts.empty()) fail(ErrorCode::kConfig, "line " + std::to_string(line_no) + ": empty key");
  return parts;
}

json parse_scalar(const std::string& raw, int line_no) {
  const std::string v = trim(raw);
  auto bad = [&]() -> json {
    fail(ErrorCode::kConfig, "line " + std::to_string(line_no) + ": cannot parse value '" + v + "'");
  };
  if (v.empty()) return bad();
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"') return bad();
    std::string out;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
      if (v[i] == '\\' && i + 2 < v.size()) {
        const char n = v[++i];
        out += n == 'n' ? '\n' : n == 't' ? '\t' : n;
      } else {
        out += v[i];
      }
    }
    return out;
  }
  if (v == "true") return true;
  if (v == "false") return false;
  std::string num;
  for (char c : v)
    if (c != '_') num += c;
  if (num == "inf" || num == "+inf") return std::numeric_limits<double>::infinity();
  const bool integral = num.find_first_of(".eE") == std::string::npos;
  try {
    std::size_t used = 0;
    if (integral) {
      const long long x = std::stoll(num, &used);
      if (used == num.size()) return x;
    } else {
      const double x = std::stod(num, &used);
      if (used == num.size()) return x;
    }
  } catch (const std::exception&) {
  }
  return bad();
}

json parse_value(const std::string& raw, int line_no) {
  const std::string v = trim(raw);
  if (!v.empty() && v.front() == '[') {
    if (v.back() != ']')
      fail(ErrorCode::kConfig, "line " + std::to_string(line_no) + ": unterminated array");
    json arr = json::array();
    const std::string body = trim(v.substr(1, v.size() - 2));
    if (body.empty()) return arr;
    std::string item;
    bool in_str = false;
    for (char c : body) {
      if (c == '"') in_str = !in_str;
      if (c == ',' && !in_str) {
        arr.push_back(parse_scalar(item, line_no));
        item.clear();
      } else {
        item += c;
      }
    }
    if (!trim(item).empty()) arr.push_back(parse_scalar(item, line_no));
    return arr;
  }
  return parse_scalar(v, line_no);
}

json* descend(json& root, const std::vector<std::string>& path, int line_no) {
  json* node = &root;
  for (const auto& p : path) {
    json& child = (*node)[p];
    if (child.is_null()) child = json::object();
    if (!child.is_object())
      fail(ErrorCode::kConfig, "line " + std::to_string(line_no) + ": '" + p + "' is not a table");
    node = &child;
  }
  return node;
}

}  // namespace

json parse_toml(const std::string& text) {
  json root = json::object();
  json* table = &root;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string s = trim(strip_comment(line));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']' || s.size() < 3)
        fail(ErrorCode::kConfig, "line " + std::to_string(line_no) + ": bad table header");
      table = descend(root, split_dotted(s.substr(1, s.size() - 2), line_no), line_no);
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::kConfig, "line " + std::to_string(line_no) + ": expected key = value");
    auto path = split_dotted(s.substr(0, eq), line_no);
    const std::string leaf = path.back();
    path.pop_back();
    json* target = descend(*table, path, line_no);
    if (target->contains(leaf))
      fail(ErrorCode::kConfig, "line " + std::to_string(line_no) + ": duplicate key '" + leaf + "'");
    (*target)[leaf] = parse_value(s.substr(eq + 1), line_no);
  }
  return root;
}

// --- typed overlay --------------------------------------------------------------

namespace {

// Consumes the keys of one JSON table, rejecting anything not claimed.
class Section {
 public:
  Section(const json& node, std::string name) : node_(node), name_(std::move(name)) {
    if (!node_.is_object()) fail(ErrorCode::kConfig, "'" + name_ + "' must be a table");
  }

  template <typename T>
  void get(const char* key, T& out) {
    claimed_.insert(key);
    if (!node_.contains(key)) return;
    try {
      const json& v = node_.at(key);
      if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw std::runtime_error("expected a number");
        out = v.get<double>();
      } else if constexpr (std::is_same_v<T, int> || std::is_same_v<T, std::uint64_t>) {
        if (!v.is_number_integer()) throw std::runtime_error("expected an integer");
        if constexpr (std::is_same_v<T, std::uint64_t>) {
          if (v.get<long long>() < 0) throw std::runtime_error("expected a non-negative integer");
        }
        out = v.get<T>();
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw std::runtime_error("expected true or false");
        out = v.get<bool>();
      } else {
        if (!v.is_string()) throw std::runtime_error("expected a string");
        out = v.get<std::string>();
      }
    } catch (const std::exception& e) {
      fail(ErrorCode::kConfig, name_ + "." + key + ": " + e.what());
    }
  }

  void get_vec3(const char* key, Eigen::Vector3d& out) {
    claimed_.insert(key);
    if (!node_.contains(key)) return;
    const json& v = node_.at(key);
    if (!v.is_array() || v.size() != 3)
      fail(ErrorCode::kConfig, name_ + "." + key + ": expected 3 numbers");
    for (int i = 0; i < 3; ++i) {
      if (!v[i].is_number()) fail(ErrorCode::kConfig, name_ + "." + key + ": expected 3 numbers");
      out[i] = v[i].get<double>();
    }
  }

  const json* sub(const char* key) {
    claimed_.insert(key);
    return node_.contains(key) ? &node_.at(key) : nullptr;
  }

  void finish() const {
    for (auto it = node_.begin(); it != node_.end(); ++it)
      if (!claimed_.count(it.key()))
        fail(ErrorCode::kConfig, "unknown key '" + (name_.empty() ? "" : name_ + ".") + it.key() + "'");
  }

 private:
  const json& node_;
  std::string name_;
  std::set<std::string> claimed_;
};

}  // namespace

void apply_config(PipelineConfig& cfg, const json& doc) {
  Section root(doc, "");
  root.get("stride", cfg.stride);
  root.get("window_size", cfg.window_size);
  root.get("seed", cfg.seed);
  root.get("output_dir", cfg.output_dir);
  root.get("sequence", cfg.sequence);
  std::string mode = to_string(cfg.fusion_mode);
  root.get("fusion_mode", mode);
  cfg.fusion_mode = parse_fusion_mode(mode);

  // nis_alpha = <probability>, or false / "off" to disable gating.
  if (const json* a = root.sub("nis_alpha")) {
    if (a->is_number()) cfg.nis_alpha = a->get<double>();
    else if ((a->is_boolean() && !a->get<bool>()) || (a->is_string() && a->get<std::string>() == "off"))
      cfg.nis_alpha.reset();
    else
      fail(ErrorCode::kConfig, "nis_alpha: expected a probability, false or \"off\"");
  }

  if (const json* n = root.sub("scene")) {
    Section s(*n, "scene");
    s.get("kind", cfg.scene.kind);
    s.get("seed", cfg.scene.seed);
    s.get("plane_z", cfg.scene.plane_z);
    s.get("plane_x_min", cfg.scene.plane_x_min);
    s.get("plane_x_max", cfg.scene.plane_x_max);
    s.get("plane_half_height", cfg.scene.plane_half_height);
    s.get("occluders", cfg.scene.occluders);
    s.finish();
  }
  if (const json* n = root.sub("trajectory")) {
    Section s(*n, "trajectory");
    s.get("kind", cfg.trajectory.kind);
    s.get("frames", cfg.trajectory.frames);
    s.get("fps", cfg.trajectory.fps);
    s.get("amplitude", cfg.trajectory.amplitude);
    s.get_vec3("step", cfg.trajectory.step);
    s.finish();
  }
  if (const json* n = root.sub("camera")) {
    Section s(*n, "camera");
    s.get("fx", cfg.camera.fx);
    s.get("fy", cfg.camera.fy);
    s.get("cx", cfg.camera.cx);
    s.get("cy", cfg.camera.cy);
    s.get("width", cfg.camera.width);
    s.get("height", cfg.camera.height);
    s.finish();
  }
  if (const json* n = root.sub("degradation")) {
    Section s(*n, "degradation");
    auto& d = cfg.degradation;
    s.get("blur_kernel_px", d.blur_kernel_px);
    s.get("blur_every_n", d.blur_every_n);
    s.get("image_noise_sigma", d.image_noise_sigma);
    int trim_start = d.trim_range ? d.trim_range->first : -1;
    int trim_end = d.trim_range ? d.trim_range->second : -1;
    s.get("trim_start", trim_start);
    s.get("trim_end", trim_end);
    if (trim_start >= 0 || trim_end >= 0) d.trim_range = std::make_pair(trim_start, trim_end);
    else d.trim_range.reset();
    s.finish();
  }
  if (const json* n = root.sub("flow")) {
    Section s(*n, "flow");
    s.get("temperature", cfg.flow.temperature);
    s.get("search_stride", cfg.flow.search_stride);
    s.get("context", cfg.flow.context);
    s.get("smooth_radius", cfg.flow.descriptor.smooth_radius);
    s.get("grid", cfg.flow.descriptor.grid);
    s.get("spacing", cfg.flow.descriptor.spacing);
    std::string src = cfg.flow.source == FlowSource::kEstimated ? "estimated" : "ground_truth";
    s.get("source", src);
    if (src == "estimated") cfg.flow.source = FlowSource::kEstimated;
    else if (src == "ground_truth") cfg.flow.source = FlowSource::kGroundTruth;
    else fail(ErrorCode::kConfig, "flow.source: expected estimated or ground_truth");
    s.finish();
  }
  if (const json* n = root.sub("measurement")) {
    Section s(*n, "measurement");
    auto& m = cfg.measurement;
    s.get("inlier_sigma", m.inlier_sigma);
    s.get("outlier_ratio", m.outlier_ratio);
    s.get("outlier_spread", m.outlier_spread);
    s.get("boundary_sigma_boost", m.boundary_sigma_boost);
    s.get("boundary_threshold_m", m.boundary_threshold_m);
    std::string rep = m.reported_sigma_mode == SigmaReport::kHonest ? "honest" : "misreported";
    s.get("reported_sigma_mode", rep);
    if (rep == "honest") m.reported_sigma_mode = SigmaReport::kHonest;
    else if (rep == "misreported") m.reported_sigma_mode = SigmaReport::kMisreported;
    else fail(ErrorCode::kConfig, "measurement.reported_sigma_mode: expected honest or misreported");
    s.get("misreport_factor", m.misreport_factor);
    s.get("blurred_sigma_boost", m.blurred_sigma_boost);
    s.get("blurred_outlier_ratio", m.blurred_outlier_ratio);
    s.finish();
  }
  if (const json* n = root.sub("process")) {
    Section s(*n, "process");
    s.get("base_w2", cfg.process.base_w2);
    s.get("flow_gain", cfg.process.flow_gain);
    s.get("occlusion_penalty", cfg.process.occlusion_penalty);
    s.get("fb_threshold", cfg.process.fb_threshold);
    s.finish();
  }
  if (const json* n = root.sub("loss")) {
    Section s(*n, "loss");
    s.get("tau1", cfg.loss.tau1);
    s.get("tau2", cfg.loss.tau2);
    s.get("tau3", cfg.loss.tau3);
    s.finish();
  }
  if (const json* n = root.sub("ransac")) {
    Section s(*n, "ransac");
    s.get("max_iterations", cfg.ransac.max_iterations);
    s.get("inlier_threshold_px", cfg.ransac.inlier_threshold_px);
    s.get("confidence", cfg.ransac.confidence);
    s.get("min_inliers", cfg.ransac.min_inliers);
    s.get("lambda_m", cfg.ransac.lambda_m);
    s.finish();
  }
  if (const json* n = root.sub("baseline")) {
    Section s(*n, "baseline");
    s.get("history", cfg.baseline.history);
    s.get("sim_temp", cfg.baseline.sim_temp);
    s.finish();
  }
  root.finish();
}

void set_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value) {
  json parsed;
  try {
    parsed = parse_toml(key + " = " + value);
  } catch (const Error&) {
    // Bare words on the command line are strings.
    parsed = parse_toml(key + " = " + json(value).dump());
  }
  apply_config(cfg, parsed);
}

void PipelineConfig::validate() const {
  try {
    camera.validate();
    degradation.validate();
    measurement.validate();
    process.validate();
    loss.validate();
    ransac.validate();
  } catch (const Error& e) {
    fail(ErrorCode::kConfig, e.what());
  }
  if (scene.kind != "room" && scene.kind != "plane")
    fail(ErrorCode::kConfig, "scene.kind: expected room or plane");
  if (scene.occluders < 0) fail(ErrorCode::kConfig, "scene.occluders must be >= 0");
  if (trajectory.kind != "sweep" && trajectory.kind != "static" && trajectory.kind != "translation")
    fail(ErrorCode::kConfig, "trajectory.kind: expected sweep, static or translation");
  if (trajectory.frames < 1) fail(ErrorCode::kConfig, "trajectory.frames must be >= 1");
  if (!(trajectory.fps > 0.0)) fail(ErrorCode::kConfig, "trajectory.fps must be > 0");
  if (stride < 1 || camera.width % stride != 0 || camera.height % stride != 0)
    fail(ErrorCode::kConfig, "stride must divide the image size");
  if (window_size < 1 || window_size % 2 == 0) fail(ErrorCode::kConfig, "window_size must be odd");
  if (flow.search_stride < 1 || stride % flow.search_stride != 0)
    fail(ErrorCode::kConfig, "flow.search_stride must divide stride");
  if (!(flow.temperature > 0.0)) fail(ErrorCode::kConfig, "flow.temperature must be > 0");
  flow.descriptor.validate();
  if (nis_alpha && !(*nis_alpha > 0.0 && *nis_alpha < 1.0))
    fail(ErrorCode::kConfig, "nis_alpha must lie in (0, 1)");
  if (baseline.history < 1) fail(ErrorCode::kConfig, "baseline.history must be >= 1");
  if (!(baseline.sim_temp > 0.0)) fail(ErrorCode::kConfig, "baseline.sim_temp must be > 0");
}

PipelineConfig config_from_string(const std::string& text) {
  PipelineConfig cfg;
  apply_config(cfg, parse_toml(text));
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  PipelineConfig cfg;
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
    json doc;
    try {
      doc = json::parse(ss.str());
    } catch (const json::exception& e) {
      fail(ErrorCode::kConfig, path + ": " + e.what());
    }
    apply_config(cfg, doc);
  } else {
    apply_config(cfg, parse_toml(ss.str()));
  }
  cfg.validate();
  return cfg;
}

json config_to_json(const PipelineConfig& cfg) {
  json j;
  j["stride"] = cfg.stride;
  j["window_size"] = cfg.window_size;
  j["seed"] = cfg.seed;
  j["fusion_mode"] = to_string(cfg.fusion_mode);
  j["nis_alpha"] = cfg.nis_alpha ? json(*cfg.nis_alpha) : json(false);
  if (!cfg.output_dir.empty()) j["output_dir"] = cfg.output_dir;
  if (!cfg.sequence.empty()) j["sequence"] = cfg.sequence;
  j["scene"] = {{"kind", cfg.scene.kind}, {"seed", cfg.scene.seed}, {"plane_z", cfg.scene.plane_z},
                {"plane_x_min", cfg.scene.plane_x_min}, {"plane_x_max", cfg.scene.plane_x_max},
                {"plane_half_height", cfg.scene.plane_half_height},
                {"occluders", cfg.scene.occluders}};
  j["trajectory"] = {{"kind", cfg.trajectory.kind}, {"frames", cfg.trajectory.frames},
                     {"fps", cfg.trajectory.fps}, {"amplitude", cfg.trajectory.amplitude},
                     {"step", {cfg.trajectory.step.x(), cfg.trajectory.step.y(), cfg.trajectory.step.z()}}};
  j["camera"] = {{"fx", cfg.camera.fx}, {"fy", cfg.camera.fy}, {"cx", cfg.camera.cx},
                 {"cy", cfg.camera.cy}, {"width", cfg.camera.width}, {"height", cfg.camera.height}};
  const auto& d = cfg.degradation;
  j["degradation"] = {{"blur_kernel_px", d.blur_kernel_px}, {"blur_every_n", d.blur_every_n},
                      {"image_noise_sigma", d.image_noise_sigma},
                      {"trim_start", d.trim_range ? d.trim_range->first : -1},
                      {"trim_end", d.trim_range ? d.trim_range->second : -1}};
  j["flow"] = {{"temperature", cfg.flow.temperature},
               {"search_stride", cfg.flow.search_stride},
               {"context", cfg.flow.context},
               {"smooth_radius", cfg.flow.descriptor.smooth_radius},
               {"grid", cfg.flow.descriptor.grid},
               {"spacing", cfg.flow.descriptor.spacing},
               {"source", cfg.flow.source == FlowSource::kEstimated ? "estimated" : "ground_truth"}};
  const auto& m = cfg.measurement;
  j["measurement"] = {{"inlier_sigma", m.inlier_sigma}, {"outlier_ratio", m.outlier_ratio},
                      {"outlier_spread", m.outlier_spread},
                      {"boundary_sigma_boost", m.boundary_sigma_boost},
                      {"boundary_threshold_m", m.boundary_threshold_m},
                      {"reported_sigma_mode",
                       m.reported_sigma_mode == SigmaReport::kHonest ? "honest" : "misreported"},
                      {"misreport_factor", m.misreport_factor},
                      {"blurred_sigma_boost", m.blurred_sigma_boost},
                      {"blurred_outlier_ratio", m.blurred_outlier_ratio}};
  j["process"] = {{"base_w2", cfg.process.base_w2}, {"flow_gain", cfg.process.flow_gain},
                  {"occlusion_penalty", cfg.process.occlusion_penalty},
                  {"fb_threshold", cfg.process.fb_threshold}};
  j["loss"] = {{"tau1", cfg.loss.tau1}, {"tau2", cfg.loss.tau2}, {"tau3", cfg.loss.tau3}};
  j["ransac"] = {{"max_iterations", cfg.ransac.max_iterations},
                 {"inlier_threshold_px", cfg.ransac.inlier_threshold_px},
                 {"confidence", cfg.ransac.confidence}, {"min_inliers", cfg.ransac.min_inliers},
                 {"lambda_m", cfg.ransac.lambda_m}};
  j["baseline"] = {{"history", cfg.baseline.history}, {"sim_temp", cfg.baseline.sim_temp}};
  return j;
}

}  // namespace scf
