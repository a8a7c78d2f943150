// Copyright 2026 The streamkv Authors.
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

#include "streamkv/common.hpp"
#include "streamkv/trace.hpp"

namespace streamkv::harness {

/// Ground-truth geometric relevance of two camera poses, in [0, 1]:
///   exp(-|pa - pb|^2 / (2 sigma_p^2)) * max(0, cos(angle between axes))^kappa
/// Directions are expected to be unit length.
inline double oracle_relevance(const Vec3& pos_a, const Vec3& dir_a, const Vec3& pos_b,
                               const Vec3& dir_b, const OracleParams& p) {
  if (pos_a == pos_b && dir_a == dir_b) return 1.0;
  double dist_sq = 0.0;
  double cos_angle = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double d = pos_a[i] - pos_b[i];
    dist_sq += d * d;
    cos_angle += dir_a[i] * dir_b[i];
  }
  cos_angle = std::min(1.0, cos_angle);
  const double spatial = std::exp(-dist_sq / (2.0 * p.sigma_p * p.sigma_p));
  const double angular = std::pow(std::max(0.0, cos_angle), p.kappa);
  return spatial * angular;
}

inline double oracle_relevance(const TraceFrame& a, const TraceFrame& b, const OracleParams& p) {
  return oracle_relevance(a.position, a.direction, b.position, b.direction, p);
}

}  // namespace streamkv::harness
