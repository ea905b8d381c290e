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

#include "scf/process.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include <Eigen/Core>

#include "scf/error.hpp"

namespace scf {

namespace {

float pixel_clamped(const Image& img, int r, int c) {
  r = std::clamp(r, 0, img.rows() - 1);
  c = std::clamp(c, 0, img.cols() - 1);
  return img(r, c);
}

}  // namespace

namespace {

// Per-pixel Sobel responses with clamped borders.
void sobel(const Image& image, std::vector<double>* gx, std::vector<double>* gy) {
  gx->assign(image.size(), 0.0);
  gy->assign(image.size(), 0.0);
  for (int py = 0; py < image.rows(); ++py) {
    for (int px = 0; px < image.cols(); ++px) {
      auto p = [&](int dy, int dx) { return static_cast<double>(pixel_clamped(image, py + dy, px + dx)); };
      const std::size_t i = image.index(py, px);
      (*gx)[i] = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
      (*gy)[i] = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
    }
  }
}

// Summed-area table with a zero first row and column.
class BoxSum {
 public:
  BoxSum(const std::vector<double>& v, int rows, int cols)
      : cols_(cols + 1), sat_(static_cast<std::size_t>(rows + 1) * (cols + 1), 0.0) {
    for (int r = 0; r < rows; ++r) {
      double row = 0.0;
      for (int c = 0; c < cols; ++c) {
        row += v[static_cast<std::size_t>(r) * cols + c];
        at(r + 1, c + 1) = at(r, c + 1) + row;
      }
    }
  }
  double sum(int y0, int x0, int size) const { return sum(y0, x0, size, size); }
  double sum(int y0, int x0, int h, int w) const {
    return at(y0 + h, x0 + w) - at(y0, x0 + w) - at(y0 + h, x0) + at(y0, x0);
  }

 private:
  double& at(int r, int c) { return sat_[static_cast<std::size_t>(r) * cols_ + c]; }
  double at(int r, int c) const { return sat_[static_cast<std::size_t>(r) * cols_ + c]; }
  int cols_;
  std::vector<double> sat_;
};

FeatureMap describe(const Image& image, int patch, int step, int rows, int cols) {
  FeatureMap f;
  f.rows = rows;
  f.cols = cols;
  f.stride = step;
  f.patch = patch;
  f.channels = patch * patch + 2;
  f.data.assign(static_cast<std::size_t>(f.rows) * f.cols * f.channels, 0.0f);
  f.defined.assign(static_cast<std::size_t>(f.rows) * f.cols, 0);
  std::vector<double> sx, sy;
  sobel(image, &sx, &sy);
  const BoxSum gx_sum(sx, image.rows(), image.cols());
  const BoxSum gy_sum(sy, image.rows(), image.cols());
  std::vector<double> pixels(image.values().begin(), image.values().end());
  const BoxSum i_sum(pixels, image.rows(), image.cols());

  std::vector<double> d(f.channels);
  const double inv_n = 1.0 / (patch * patch);
  for (int r = 0; r < f.rows; ++r) {
    for (int c = 0; c < f.cols; ++c) {
      const int y0 = r * step, x0 = c * step;
      const double mean = i_sum.sum(y0, x0, patch) * inv_n;
      for (int y = 0; y < patch; ++y) {
        const float* row = &image(y0 + y, x0);
        for (int x = 0; x < patch; ++x) d[y * patch + x] = row[x] - mean;
      }
      d[patch * patch] = gx_sum.sum(y0, x0, patch) * inv_n;
      d[patch * patch + 1] = gy_sum.sum(y0, x0, patch) * inv_n;
      double energy = 0.0;
      for (int k = 0; k < f.channels; ++k) energy += d[k] * d[k];
      if (energy < kMinDescriptorEnergy) continue;
      const double inv = 1.0 / std::sqrt(energy);
      float* dst = f.data.data() + (static_cast<std::size_t>(r) * f.cols + c) * f.channels;
      for (int k = 0; k < f.channels; ++k) dst[k] = static_cast<float>(d[k] * inv);
      f.defined[static_cast<std::size_t>(r) * f.cols + c] = 1;
    }
  }
  return f;
}

// Running-sum box filter of radius r along one axis, clamped borders.
Image box_pass(const Image& in, int r, bool along_rows) {
  Image out(in.rows(), in.cols());
  const int n = along_rows ? in.cols() : in.rows();
  const int lines = along_rows ? in.rows() : in.cols();
  const double inv = 1.0 / (2 * r + 1);
  for (int l = 0; l < lines; ++l) {
    auto get = [&](int k) {
      k = std::clamp(k, 0, n - 1);
      return static_cast<double>(along_rows ? in(l, k) : in(k, l));
    };
    double acc = 0.0;
    for (int k = -r; k <= r; ++k) acc += get(k);
    for (int k = 0; k < n; ++k) {
      (along_rows ? out(l, k) : out(k, l)) = static_cast<float>(acc * inv);
      acc += get(k + r + 1) - get(k - r);
    }
  }
  return out;
}

Image low_pass(Image image, int r) {
  for (int pass = 0; pass < 2 && r > 0; ++pass) image = box_pass(box_pass(image, r, true), r, false);
  return image;
}

double l1_distance(const float* a, const float* b, int n) {
  return (Eigen::Map<const Eigen::VectorXf>(a, n) - Eigen::Map<const Eigen::VectorXf>(b, n))
      .cwiseAbs()
      .sum();
}

}  // namespace

FeatureMap extract_features(const Image& image, int stride) {
  if (stride < 1 || image.rows() % stride != 0 || image.cols() % stride != 0 || image.size() == 0) {
    fail(ErrorCode::kBadStride, "image " + std::to_string(image.cols()) + "x" +
                                    std::to_string(image.rows()) + " is not divisible by stride " +
                                    std::to_string(stride));
  }
  return describe(image, stride, stride, image.rows() / stride, image.cols() / stride);
}

FeatureMap extract_dense_features(const Image& image, int patch, int step) {
  if (patch < 1 || step < 1 || image.rows() < patch || image.cols() < patch) {
    fail(ErrorCode::kBadStride, "patch " + std::to_string(patch) + " / step " +
                                    std::to_string(step) + " do not fit the image");
  }
  return describe(image, patch, step, (image.rows() - patch) / step + 1,
                  (image.cols() - patch) / step + 1);
}

void ContextDescriptor::validate() const {
  if (smooth_radius < 0 || grid < 1 || spacing < 1) {
    fail(ErrorCode::kConfig, "context descriptor needs smooth_radius >= 0, grid >= 1, spacing >= 1");
  }
}

FeatureMap extract_context_features(const Image& image, int cell, int step,
                                    const ContextDescriptor& desc) {
  desc.validate();
  if (cell < 1 || step < 1 || image.size() == 0 || image.rows() % cell != 0 ||
      image.cols() % cell != 0) {
    fail(ErrorCode::kBadStride, "image " + std::to_string(image.cols()) + "x" +
                                    std::to_string(image.rows()) + " is not divisible by cell " +
                                    std::to_string(cell));
  }
  const Image smooth = low_pass(image, desc.smooth_radius);
  FeatureMap f;
  f.rows = (image.rows() - cell) / step + 1;
  f.cols = (image.cols() - cell) / step + 1;
  f.stride = step;
  f.patch = cell;
  f.smooth_radius = desc.smooth_radius;
  const int g = desc.grid;
  f.channels = g * g + 2;
  f.data.assign(static_cast<std::size_t>(f.rows) * f.cols * f.channels, 0.0f);
  f.defined.assign(static_cast<std::size_t>(f.rows) * f.cols, 0);
  std::vector<double> sx, sy;
  sobel(smooth, &sx, &sy);
  const BoxSum gx_sum(sx, image.rows(), image.cols());
  const BoxSum gy_sum(sy, image.rows(), image.cols());

  const int half = (g - 1) * desc.spacing / 2;
  std::vector<double> d(f.channels);
  for (int r = 0; r < f.rows; ++r) {
    for (int c = 0; c < f.cols; ++c) {
      const int y0 = r * step + cell / 2 - half, x0 = c * step + cell / 2 - half;
      double mean = 0.0;
      for (int i = 0; i < g; ++i) {
        for (int j = 0; j < g; ++j) {
          d[i * g + j] = pixel_clamped(smooth, y0 + i * desc.spacing, x0 + j * desc.spacing);
          mean += d[i * g + j];
        }
      }
      mean /= g * g;
      for (int k = 0; k < g * g; ++k) d[k] -= mean;
      const int span = (g - 1) * desc.spacing + 1;
      const int by0 = std::max(y0, 0), bx0 = std::max(x0, 0);
      const int by1 = std::min(y0 + span, image.rows()), bx1 = std::min(x0 + span, image.cols());
      const double inv_area = 1.0 / ((by1 - by0) * (bx1 - bx0));
      d[g * g] = gx_sum.sum(by0, bx0, by1 - by0, bx1 - bx0) * inv_area;
      d[g * g + 1] = gy_sum.sum(by0, bx0, by1 - by0, bx1 - bx0) * inv_area;
      double energy = 0.0;
      for (int k = 0; k < f.channels; ++k) energy += d[k] * d[k];
      if (energy < kMinDescriptorEnergy) continue;
      const double inv = 1.0 / std::sqrt(energy);
      float* dst = f.data.data() + (static_cast<std::size_t>(r) * f.cols + c) * f.channels;
      for (int k = 0; k < f.channels; ++k) dst[k] = static_cast<float>(d[k] * inv);
      f.defined[static_cast<std::size_t>(r) * f.cols + c] = 1;
    }
  }
  return f;
}

CostVolume build_cost_volume(const FeatureMap& prev, const FeatureMap& cur, int window_size) {
  if (prev.channels != cur.channels || prev.patch != cur.patch ||
      prev.smooth_radius != cur.smooth_radius || prev.stride < 1 ||
      cur.stride % prev.stride != 0) {
    fail(ErrorCode::kShapeMismatch, "feature maps differ in descriptor or stride");
  }
  if (prev.stride == cur.stride && (prev.rows != cur.rows || prev.cols != cur.cols)) {
    fail(ErrorCode::kShapeMismatch, "feature maps differ in shape");
  }
  if (window_size < 1 || window_size % 2 == 0) {
    fail(ErrorCode::kInvalidArgument, "window size must be odd and positive");
  }
  CostVolume vol;
  vol.rows = cur.rows;
  vol.cols = cur.cols;
  vol.radius = window_size / 2;
  vol.stride = prev.stride;
  vol.cell_stride = cur.stride;
  const int ratio = cur.stride / prev.stride;
  const std::size_t n = static_cast<std::size_t>(vol.rows) * vol.cols * window_size * window_size;
  vol.costs.assign(n, 0.0);
  vol.masked.assign(n, 1);
  const int ch = cur.channels;
  for (int r = 0; r < vol.rows; ++r) {
    for (int c = 0; c < vol.cols; ++c) {
      if (!cur.is_defined(r, c)) continue;
      const float* a = cur.at(r, c);
      const std::size_t base = vol.cell_base(r, c);
      for (int dy = -vol.radius; dy <= vol.radius; ++dy) {
        const int pr = r * ratio - dy;
        if (pr < 0 || pr >= prev.rows) continue;
        for (int dx = -vol.radius; dx <= vol.radius; ++dx) {
          const int pc = c * ratio - dx;
          if (pc < 0 || pc >= prev.cols || !prev.is_defined(pr, pc)) continue;
          const double cost = l1_distance(a, prev.at(pr, pc), ch);
          const std::size_t s = base + vol.slot(dy, dx);
          vol.costs[s] = cost;
          vol.masked[s] = 0;
        }
      }
    }
  }
  return vol;
}

FlowField flow_from_volume(const CostVolume& vol, double temperature) {
  if (!(temperature > 0.0)) fail(ErrorCode::kInvalidArgument, "temperature must be positive");
  FlowField flow(vol.rows, vol.cols, vol.cell_stride);
  for (int r = 0; r < vol.rows; ++r) {
    for (int c = 0; c < vol.cols; ++c) {
      const std::size_t base = vol.cell_base(r, c);
      double best = std::numeric_limits<double>::infinity();
      for (int s = 0; s < vol.window() * vol.window(); ++s) {
        if (!vol.masked[base + s]) best = std::min(best, vol.costs[base + s]);
      }
      if (!std::isfinite(best)) continue;
      // Confidences -cost/T shifted by their maximum -best/T.
      double z = 0.0, ex = 0.0, ey = 0.0;
      for (int dy = -vol.radius; dy <= vol.radius; ++dy) {
        for (int dx = -vol.radius; dx <= vol.radius; ++dx) {
          const std::size_t s = base + vol.slot(dy, dx);
          if (vol.masked[s]) continue;
          // exp(-60) is below double resolution relative to the best offset's weight 1.
          const double arg = (vol.costs[s] - best) / temperature;
          if (arg > 60.0) continue;
          const double w = std::exp(-arg);
          z += w;
          ex += w * dx;
          ey += w * dy;
        }
      }
      const std::size_t i = flow.valid.index(r, c);
      flow.offsets[i] = Eigen::Vector2d(ex / z, ey / z) * vol.stride;
      flow.valid[i] = 1;
    }
  }
  return flow;
}

CoordStateMap warp_state(const CoordStateMap& prev, const FlowField& flow) {
  if (!prev.valid.same_shape(flow.valid)) {
    fail(ErrorCode::kShapeMismatch, "flow and state map differ in shape");
  }
  CoordStateMap out(prev.rows(), prev.cols());
  const double inv_stride = 1.0 / flow.stride;
  for (int r = 0; r < prev.rows(); ++r) {
    for (int c = 0; c < prev.cols(); ++c) {
      const std::size_t i = out.valid.index(r, c);
      if (!flow.is_valid(i)) continue;
      BilinearSite s;
      if (!bilinear_site(r - flow.offsets[i].y() * inv_stride, c - flow.offsets[i].x() * inv_stride,
                         prev.rows(), prev.cols(), &s)) {
        continue;
      }
      const int r1 = s.fr > 0.0 ? s.r0 + 1 : s.r0;
      const int c1 = s.fc > 0.0 ? s.c0 + 1 : s.c0;
      const std::size_t i00 = prev.valid.index(s.r0, s.c0), i01 = prev.valid.index(s.r0, c1);
      const std::size_t i10 = prev.valid.index(r1, s.c0), i11 = prev.valid.index(r1, c1);
      if (!prev.is_valid(i00) || !prev.is_valid(i01) || !prev.is_valid(i10) || !prev.is_valid(i11)) {
        continue;
      }
      // Nested lerps keep equal inputs exact.
      auto lerp3 = [](const Eigen::Vector3d& a, const Eigen::Vector3d& b, double t) -> Eigen::Vector3d {
        return a + t * (b - a);
      };
      auto lerp = [](double a, double b, double t) { return a + t * (b - a); };
      const Eigen::Vector3d top = lerp3(prev.coords[i00], prev.coords[i01], s.fc);
      const Eigen::Vector3d bot = lerp3(prev.coords[i10], prev.coords[i11], s.fc);
      const double vtop = lerp(prev.variance(i00), prev.variance(i01), s.fc);
      const double vbot = lerp(prev.variance(i10), prev.variance(i11), s.fc);
      const double var = lerp(vtop, vbot, s.fr);
      if (i00 == i01 && i00 == i10 && i00 == i11) {
        out.set_log(i, prev.coords[i00], prev.log_variance[i00]);
      } else {
        out.set(i, lerp3(top, bot, s.fr), var);
      }
    }
  }
  return out;
}

void ProcessNoiseConfig::validate() const {
  if (!(base_w2 >= 0.0 && flow_gain >= 0.0 && occlusion_penalty >= 0.0 && fb_threshold >= 0.0)) {
    fail(ErrorCode::kConfig, "process noise fields must be nonnegative");
  }
}

std::optional<Eigen::Vector2d> sample_flow(const FlowField& flow, double row, double col) {
  BilinearSite s;
  if (!bilinear_site(row, col, flow.rows(), flow.cols(), &s)) return std::nullopt;
  const int r1 = s.fr > 0.0 ? s.r0 + 1 : s.r0;
  const int c1 = s.fc > 0.0 ? s.c0 + 1 : s.c0;
  const std::size_t i00 = flow.valid.index(s.r0, s.c0), i01 = flow.valid.index(s.r0, c1);
  const std::size_t i10 = flow.valid.index(r1, s.c0), i11 = flow.valid.index(r1, c1);
  if (!flow.is_valid(i00) || !flow.is_valid(i01) || !flow.is_valid(i10) || !flow.is_valid(i11)) {
    return std::nullopt;
  }
  const Eigen::Vector2d top = flow.offsets[i00] + s.fc * (flow.offsets[i01] - flow.offsets[i00]);
  const Eigen::Vector2d bot = flow.offsets[i10] + s.fc * (flow.offsets[i11] - flow.offsets[i10]);
  return Eigen::Vector2d(top + s.fr * (bot - top));
}

std::optional<double> forward_backward_residual(const FlowField& flow, const FlowField& fb_flow,
                                                std::size_t index) {
  if (!flow.is_valid(index)) return std::nullopt;
  const int r = static_cast<int>(index / flow.cols());
  const int c = static_cast<int>(index % flow.cols());
  const Eigen::Vector2d f = flow.offsets[index];
  const auto back = sample_flow(fb_flow, r - f.y() / flow.stride, c - f.x() / flow.stride);
  if (!back) return std::nullopt;
  return (f + *back).norm();
}

CoordStateMap assemble_prior(const CoordStateMap& warped, const FlowField& flow,
                             const ProcessNoiseConfig& cfg,
                             const std::optional<FlowField>& fb_flow) {
  cfg.validate();
  if (!warped.valid.same_shape(flow.valid) ||
      (fb_flow && !fb_flow->valid.same_shape(flow.valid))) {
    fail(ErrorCode::kShapeMismatch, "prior inputs differ in shape");
  }
  CoordStateMap prior(warped.rows(), warped.cols());
  for (std::size_t i = 0; i < warped.size(); ++i) {
    if (!warped.is_valid(i)) continue;
    double w2 = cfg.base_w2;
    if (flow.is_valid(i)) w2 += cfg.flow_gain * flow.offsets[i].squaredNorm();
    if (fb_flow) {
      const auto res = forward_backward_residual(flow, *fb_flow, i);
      if (!res || *res > cfg.fb_threshold) w2 += cfg.occlusion_penalty;
    }
    if (w2 == 0.0) {
      prior.set_log(i, warped.coords[i], warped.log_variance[i]);
    } else {
      prior.set(i, warped.coords[i], warped.variance(i) + w2);
    }
  }
  return prior;
}

void save_cost_slices(const std::string& dir, const CostVolume& vol,
                      const std::vector<std::pair<int, int>>& cells) {
  std::filesystem::create_directories(dir);
  const int w = vol.window();
  for (const auto& [r, c] : cells) {
    if (r < 0 || c < 0 || r >= vol.rows || c >= vol.cols) continue;
    const std::size_t base = vol.cell_base(r, c);
    double hi = 0.0;
    for (int s = 0; s < w * w; ++s) {
      if (!vol.masked[base + s]) hi = std::max(hi, vol.costs[base + s]);
    }
    const std::string path = dir + "/cost_r" + std::to_string(r) + "_c" + std::to_string(c) + ".pgm";
    std::ofstream os(path, std::ios::binary);
    if (!os) fail(ErrorCode::kIo, "cannot open " + path);
    os << "P5\n" << w << " " << w << "\n255\n";
    for (int s = 0; s < w * w; ++s) {
      const double v = vol.masked[base + s] || hi <= 0.0 ? 0.0 : vol.costs[base + s] / hi;
      os.put(static_cast<char>(std::lround(255.0 * v)));
    }
  }
}

}  // namespace scf
