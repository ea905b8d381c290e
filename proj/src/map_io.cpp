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

#include "scf/map_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "scf/error.hpp"

namespace scf {

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  const std::array<char, 4> b = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                                 static_cast<char>((v >> 16) & 0xff),
                                 static_cast<char>((v >> 24) & 0xff)};
  os.write(b.data(), 4);
}

void put_f32(std::ostream& os, double v) {
  const float f = static_cast<float>(v);
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32(os, bits);
}

std::uint32_t get_u32(std::istream& is) {
  std::array<unsigned char, 4> b{};
  is.read(reinterpret_cast<char*>(b.data()), 4);
  if (!is) fail(ErrorCode::kIo, "truncated binary map");
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

double get_f32(std::istream& is) {
  const std::uint32_t bits = get_u32(is);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

void expect_magic(std::istream& is, const char* magic) {
  char m[4];
  is.read(m, 4);
  if (!is || std::memcmp(m, magic, 4) != 0) {
    fail(ErrorCode::kIo, std::string("bad magic, expected ") + magic);
  }
}

std::uint32_t checked_dim(std::istream& is) {
  const std::uint32_t v = get_u32(is);
  if (v == 0 || v > (1u << 16)) fail(ErrorCode::kIo, "implausible map dimension");
  return v;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorCode::kIo, "cannot open " + path + " for writing");
  return os;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::kIo, "cannot open " + path);
  return is;
}

}  // namespace

void write_kfsc(std::ostream& os, const CoordStateMap& map) {
  os.write("KFSC", 4);
  put_u32(os, static_cast<std::uint32_t>(map.rows()));
  put_u32(os, static_cast<std::uint32_t>(map.cols()));
  for (std::size_t i = 0; i < map.size(); ++i) {
    for (int k = 0; k < 3; ++k) put_f32(os, map.coords[i][k]);
  }
  for (std::size_t i = 0; i < map.size(); ++i) put_f32(os, map.log_variance[i]);
  for (std::size_t i = 0; i < map.size(); ++i) os.put(map.valid[i] ? 1 : 0);
  if (!os) fail(ErrorCode::kIo, "failed writing coordinate map");
}

CoordStateMap read_kfsc(std::istream& is) {
  expect_magic(is, "KFSC");
  const int rows = static_cast<int>(checked_dim(is));
  const int cols = static_cast<int>(checked_dim(is));
  CoordStateMap map(rows, cols);
  for (std::size_t i = 0; i < map.size(); ++i) {
    for (int k = 0; k < 3; ++k) map.coords[i][k] = get_f32(is);
  }
  for (std::size_t i = 0; i < map.size(); ++i) map.log_variance[i] = get_f32(is);
  for (std::size_t i = 0; i < map.size(); ++i) {
    const int c = is.get();
    if (c == std::char_traits<char>::eof()) fail(ErrorCode::kIo, "truncated validity plane");
    map.valid[i] = c != 0;
  }
  return map;
}

void save_kfsc(const std::string& path, const CoordStateMap& map) {
  auto os = open_out(path);
  write_kfsc(os, map);
}

CoordStateMap load_kfsc(const std::string& path) {
  auto is = open_in(path);
  return read_kfsc(is);
}

void write_flow(std::ostream& os, const FlowField& flow) {
  os.write("KFFL", 4);
  put_u32(os, static_cast<std::uint32_t>(flow.rows()));
  put_u32(os, static_cast<std::uint32_t>(flow.cols()));
  put_u32(os, static_cast<std::uint32_t>(flow.stride));
  for (std::size_t i = 0; i < flow.size(); ++i) {
    put_f32(os, flow.offsets[i].x());
    put_f32(os, flow.offsets[i].y());
  }
  for (std::size_t i = 0; i < flow.size(); ++i) os.put(flow.valid[i] ? 1 : 0);
  if (!os) fail(ErrorCode::kIo, "failed writing flow field");
}

FlowField read_flow(std::istream& is) {
  expect_magic(is, "KFFL");
  const int rows = static_cast<int>(checked_dim(is));
  const int cols = static_cast<int>(checked_dim(is));
  const int stride = static_cast<int>(checked_dim(is));
  FlowField flow(rows, cols, stride);
  for (std::size_t i = 0; i < flow.size(); ++i) {
    const double dx = get_f32(is);
    const double dy = get_f32(is);
    flow.offsets[i] = {dx, dy};
  }
  for (std::size_t i = 0; i < flow.size(); ++i) {
    const int c = is.get();
    if (c == std::char_traits<char>::eof()) fail(ErrorCode::kIo, "truncated validity plane");
    flow.valid[i] = c != 0;
  }
  return flow;
}

void save_flow(const std::string& path, const FlowField& flow) {
  auto os = open_out(path);
  write_flow(os, flow);
}

FlowField load_flow(const std::string& path) {
  auto is = open_in(path);
  return read_flow(is);
}

void save_pgm16(const std::string& path, const Image& image) {
  auto os = open_out(path);
  os << "P5\n" << image.cols() << " " << image.rows() << "\n65535\n";
  for (float v : image.values()) {
    const double c = std::clamp(static_cast<double>(v), 0.0, 1.0);
    const auto q = static_cast<std::uint16_t>(std::lround(c * 65535.0));
    os.put(static_cast<char>(q >> 8));
    os.put(static_cast<char>(q & 0xff));
  }
  if (!os) fail(ErrorCode::kIo, "failed writing " + path);
}

Image load_pgm(const std::string& path) {
  auto is = open_in(path);
  std::string magic;
  is >> magic;
  if (magic != "P5") fail(ErrorCode::kIo, path + " is not a binary PGM");
  auto next_int = [&]() {
    is >> std::ws;
    while (is.peek() == '#') {
      std::string line;
      std::getline(is, line);
      is >> std::ws;
    }
    int v = 0;
    is >> v;
    return v;
  };
  const int cols = next_int();
  const int rows = next_int();
  const int maxval = next_int();
  is.get();
  if (!is || cols <= 0 || rows <= 0 || maxval <= 0 || maxval > 65535) {
    fail(ErrorCode::kIo, "bad PGM header in " + path);
  }
  Image img(rows, cols);
  const bool wide = maxval > 255;
  for (std::size_t i = 0; i < img.size(); ++i) {
    int v = is.get();
    if (wide) v = (v << 8) | is.get();
    if (!is) fail(ErrorCode::kIo, "truncated PGM " + path);
    img[i] = static_cast<float>(static_cast<double>(v) / maxval);
  }
  return img;
}

void save_flow_ppm(const std::string& path, const FlowField& flow, double max_px) {
  auto os = open_out(path);
  os << "P6\n" << flow.cols() << " " << flow.rows() << "\n255\n";
  for (std::size_t i = 0; i < flow.size(); ++i) {
    std::array<double, 3> rgb = {0.0, 0.0, 0.0};
    if (flow.is_valid(i)) {
      const Eigen::Vector2d f = flow.offsets[i];
      const double hue = (std::atan2(f.y(), f.x()) + M_PI) / (2.0 * M_PI) * 6.0;
      const double val = std::min(1.0, f.norm() / std::max(max_px, 1e-9));
      const int sector = static_cast<int>(hue) % 6;
      const double frac = hue - std::floor(hue);
      const double q = 1.0 - frac;
      switch (sector) {
        case 0: rgb = {1, frac, 0}; break;
        case 1: rgb = {q, 1, 0}; break;
        case 2: rgb = {0, 1, frac}; break;
        case 3: rgb = {0, q, 1}; break;
        case 4: rgb = {frac, 0, 1}; break;
        default: rgb = {1, 0, q}; break;
      }
      for (auto& c : rgb) c *= val;
    }
    for (double c : rgb) os.put(static_cast<char>(std::lround(c * 255.0)));
  }
}

void save_ply(const std::string& path, const std::vector<PlyPoint>& points) {
  std::ofstream os(path);
  if (!os) fail(ErrorCode::kIo, "cannot open " + path + " for writing");
  os << "ply\nformat ascii 1.0\n"
     << "element vertex " << points.size() << "\n"
     << "property float x\nproperty float y\nproperty float z\n"
     << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
     << "end_header\n";
  char line[128];
  for (const auto& p : points) {
    std::snprintf(line, sizeof(line), "%.6f %.6f %.6f %d %d %d\n", p.position.x(),
                  p.position.y(), p.position.z(), p.gray, p.gray, p.gray);
    os << line;
  }
  if (!os) fail(ErrorCode::kIo, "failed writing " + path);
}

std::vector<PlyPoint> map_points(const CoordStateMap& map) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (map.is_valid(i)) idx.push_back(i);
  }
  std::vector<std::size_t> order(idx.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return map.log_variance[idx[a]] < map.log_variance[idx[b]];
  });
  std::vector<PlyPoint> out(idx.size());
  const double denom = idx.size() > 1 ? static_cast<double>(idx.size() - 1) : 1.0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const std::size_t k = order[rank];
    out[k].position = map.coords[idx[k]];
    out[k].gray = static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - rank / denom)));
  }
  return out;
}

}  // namespace scf
