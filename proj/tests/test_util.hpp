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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>

#include <gtest/gtest.h>

#include "scf/error.hpp"
#include "scf/geometry.hpp"
#include "scf/rng.hpp"

namespace scf::testing {

inline Eigen::Quaterniond random_rotation(CounterRng& rng) {
  Eigen::Vector4d v(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  v.normalize();
  return Eigen::Quaterniond(v[0], v[1], v[2], v[3]);
}

inline Pose random_pose(CounterRng& rng, double translation_scale = 1.0) {
  return Pose::from(random_rotation(rng), translation_scale * rng.normal3());
}

// |a - b| / max(|a|, |b|, floor).
inline double rel_err(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline double central_difference(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Fresh empty directory under the system temp dir.
inline std::string scratch_dir(const std::string& name) {
  namespace fs = std::filesystem;
  const fs::path p = fs::temp_directory_path() / ("scf_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

}  // namespace scf::testing

#define EXPECT_SCF_ERROR(stmt, expected_code)                                 \
  do {                                                                        \
    try {                                                                     \
      stmt;                                                                   \
      ADD_FAILURE() << "expected " << ::scf::to_string(expected_code);        \
    } catch (const ::scf::Error& e) {                                         \
      EXPECT_EQ(e.code(), expected_code) << e.what();                         \
    }                                                                         \
  } while (0)
