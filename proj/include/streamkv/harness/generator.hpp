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
//
// Synthetic camera streams whose descriptors are geometrically meaningful.
//
// A pose is embedded as the outer product of two smooth feature maps:
// Gaussian bumps at a grid of scene positions, and von Mises-like bumps at
// evenly spaced horizontal view directions. The unit-normalized embedding is
// mapped into the H*d_h descriptor space by a fixed, seeded random
// orthonormal projection, so inner products between descriptors equal inner
// products between embeddings (up to the added isotropic noise). Nearby
// poses looking the same way therefore score high under RawDot.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "streamkv/common.hpp"
#include "streamkv/harness/trace_io.hpp"
#include "streamkv/spatial_memory.hpp"
#include "streamkv/trace.hpp"

namespace streamkv::harness {

enum class TrajectoryKind { kLoop, kBackAndForth, kRandomWalk, kRoomRevisit };

inline std::string_view to_string(TrajectoryKind k) noexcept {
  switch (k) {
    case TrajectoryKind::kLoop: return "loop";
    case TrajectoryKind::kBackAndForth: return "backforth";
    case TrajectoryKind::kRandomWalk: return "randomwalk";
    case TrajectoryKind::kRoomRevisit: return "roomrevisit";
  }
  return "loop";
}

inline std::optional<TrajectoryKind> parse_trajectory_kind(std::string_view s) noexcept {
  for (auto k : {TrajectoryKind::kLoop, TrajectoryKind::kBackAndForth,
                 TrajectoryKind::kRandomWalk, TrajectoryKind::kRoomRevisit})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

struct TrajectoryConfig {
  TrajectoryKind kind = TrajectoryKind::kLoop;
  std::size_t frame_count = 500;
  Vec3 scene_extent{4.0, 1.5, 4.0};
  double noise_sigma = 0.01;
  std::uint64_t seed = 0;
  std::size_t heads = 8;
  std::size_t head_dim = 32;
  std::size_t special_count = 5;
  std::size_t layers = 24;
  std::size_t payload_bytes_per_layer = 64;
  OracleParams oracle;

  void validate() const {
    if (frame_count < 1) throw std::invalid_argument("trajectory: frame_count must be >= 1");
    for (double e : scene_extent)
      if (!(e > 0.0)) throw std::invalid_argument("trajectory: scene extent must be positive");
    if (!(noise_sigma >= 0.0)) throw std::invalid_argument("trajectory: noise_sigma must be >= 0");
    if (heads == 0 || head_dim == 0 || layers == 0)
      throw std::invalid_argument("trajectory: heads, head_dim and layers must be >= 1");
    if (!(oracle.sigma_p > 0.0) || !(oracle.kappa >= 0.0))
      throw std::invalid_argument("trajectory: invalid oracle parameters");
  }
};

namespace detail {

inline Vec3 heading(double yaw) { return {std::cos(yaw), 0.0, std::sin(yaw)}; }

inline double clamp_reflect(double x, double half, double& velocity) {
  if (x > half) {
    velocity = -std::abs(velocity);
    return 2 * half - x;
  }
  if (x < -half) {
    velocity = std::abs(velocity);
    return -2 * half - x;
  }
  return x;
}

inline std::vector<PoseMeta> loop_poses(const TrajectoryConfig& cfg, std::mt19937_64& rng) {
  constexpr double kLaps = 3.0;
  const double radius = 0.4 * std::min(cfg.scene_extent[0], cfg.scene_extent[2]);
  std::normal_distribution<double> jitter(0.0, 0.01 * radius);
  std::vector<PoseMeta> out;
  const double n = static_cast<double>(cfg.frame_count);
  for (std::size_t t = 0; t < cfg.frame_count; ++t) {
    const double theta = 2.0 * std::numbers::pi * kLaps * static_cast<double>(t) / n;
    PoseMeta p;
    p.frame_id = t;
    p.position = {radius * std::cos(theta) + jitter(rng), 0.1 * std::sin(3 * theta),
                  radius * std::sin(theta) + jitter(rng)};
    p.direction = {-std::cos(theta), 0.0, -std::sin(theta)};
    out.push_back(p);
  }
  return out;
}

inline std::vector<PoseMeta> back_and_forth_poses(const TrajectoryConfig& cfg,
                                                  std::mt19937_64& rng) {
  constexpr double kPasses = 4.0;
  const double half = 0.4 * cfg.scene_extent[0];
  std::normal_distribution<double> jitter(0.0, 0.01 * half);
  std::vector<PoseMeta> out;
  const double n = static_cast<double>(cfg.frame_count);
  for (std::size_t t = 0; t < cfg.frame_count; ++t) {
    const double phase = kPasses * static_cast<double>(t) / n;  // passes completed
    const double frac = phase - std::floor(phase);
    const bool forward = static_cast<long>(std::floor(phase)) % 2 == 0;
    const double x = forward ? -half + 2 * half * frac : half - 2 * half * frac;
    PoseMeta p;
    p.frame_id = t;
    p.position = {x, jitter(rng), jitter(rng)};
    p.direction = heading(std::numbers::pi / 2 + 0.2 * std::sin(2 * std::numbers::pi * frac));
    out.push_back(p);
  }
  return out;
}

inline std::vector<PoseMeta> random_walk_poses(const TrajectoryConfig& cfg,
                                               std::mt19937_64& rng) {
  std::normal_distribution<double> accel(0.0, 0.004);
  std::normal_distribution<double> turn(0.0, 0.05);
  Vec3 pos{0.0, 0.0, 0.0};
  Vec3 vel{0.0, 0.0, 0.0};
  double yaw = 0.0;
  std::vector<PoseMeta> out;
  for (std::size_t t = 0; t < cfg.frame_count; ++t) {
    for (int a = 0; a < 3; ++a) {
      const double scale = a == 1 ? 0.25 : 1.0;
      vel[a] = std::clamp(vel[a] + scale * accel(rng), -0.05, 0.05);
      pos[a] = clamp_reflect(pos[a] + vel[a], 0.45 * cfg.scene_extent[a], vel[a]);
    }
    yaw += turn(rng);
    out.push_back({t, pos, heading(yaw)});
  }
  return out;
}

/// Cycles through a handful of rooms in random order, dwelling in each with
/// a slow look-around, and travelling between them.
inline std::vector<PoseMeta> room_revisit_poses(const TrajectoryConfig& cfg,
                                                std::mt19937_64& rng) {
  constexpr int kRooms = 5;
  std::uniform_real_distribution<double> unit(-0.4, 0.4);
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  std::uniform_int_distribution<int> dwell_len(20, 40);
  std::uniform_int_distribution<int> transit_len(8, 16);
  std::uniform_int_distribution<int> room_pick(0, kRooms - 1);
  std::normal_distribution<double> jitter(0.0, 0.02);

  struct Room {
    Vec3 center;
    double yaw;
  };
  std::vector<Room> rooms;
  for (int r = 0; r < kRooms; ++r)
    rooms.push_back({{unit(rng) * cfg.scene_extent[0], 0.2 * unit(rng) * cfg.scene_extent[1],
                      unit(rng) * cfg.scene_extent[2]},
                     angle(rng)});

  std::vector<PoseMeta> out;
  int current = 0;
  Vec3 pos = rooms[0].center;
  double yaw = rooms[0].yaw;
  while (out.size() < cfg.frame_count) {
    const int dwell = dwell_len(rng);
    for (int i = 0; i < dwell && out.size() < cfg.frame_count; ++i) {
      const double sweep = 0.4 * std::sin(2 * std::numbers::pi * i / dwell);
      yaw = rooms[current].yaw + sweep;
      Vec3 p = rooms[current].center;
      for (auto& c : p) c += jitter(rng);
      pos = p;
      out.push_back({out.size(), pos, heading(yaw)});
    }
    int next = room_pick(rng);
    if (next == current) next = (next + 1) % kRooms;
    const int transit = transit_len(rng);
    const Vec3 from = pos;
    const Vec3 to = rooms[next].center;
    const double travel_yaw = std::atan2(to[2] - from[2], to[0] - from[0]);
    for (int i = 1; i <= transit && out.size() < cfg.frame_count; ++i) {
      const double a = static_cast<double>(i) / (transit + 1);
      Vec3 p{};
      for (int c = 0; c < 3; ++c) p[c] = from[c] + a * (to[c] - from[c]);
      out.push_back({out.size(), p, heading(travel_yaw)});
    }
    current = next;
  }
  return out;
}

}  // namespace detail

inline std::vector<PoseMeta> generate_poses(const TrajectoryConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(derive_seed(cfg.seed, SeedDomain::kTrajectory));
  switch (cfg.kind) {
    case TrajectoryKind::kLoop: return detail::loop_poses(cfg, rng);
    case TrajectoryKind::kBackAndForth: return detail::back_and_forth_poses(cfg, rng);
    case TrajectoryKind::kRandomWalk: return detail::random_walk_poses(cfg, rng);
    case TrajectoryKind::kRoomRevisit: return detail::room_revisit_poses(cfg, rng);
  }
  throw std::invalid_argument("unknown trajectory kind");
}

/// Fixed pose -> descriptor map for one trace configuration.
class PoseEmbedding {
 public:
  explicit PoseEmbedding(const TrajectoryConfig& cfg)
      : heads_(cfg.heads), head_dim_(cfg.head_dim) {
    const std::size_t out_dim = cfg.heads * cfg.head_dim;
    dir_bins_ = std::min<std::size_t>(8, out_dim);
    width_ = cfg.oracle.sigma_p / std::numbers::sqrt2;
    dir_kappa_ = std::max(1.0, 2.0 * cfg.oracle.kappa);

    // Densest position grid (spacing >= width) that still fits the output
    // dimension alongside the direction bins.
    const std::size_t cell_budget = std::max<std::size_t>(1, out_dim / dir_bins_);
    double spacing = width_;
    for (;;) {
      std::size_t cells = 1;
      for (int a = 0; a < 3; ++a) {
        counts_[a] = static_cast<std::size_t>(std::lround(cfg.scene_extent[a] / spacing)) + 1;
        cells *= counts_[a];
      }
      if (cells <= cell_budget) break;
      spacing *= 1.05;
    }
    for (int a = 0; a < 3; ++a) {
      origin_[a] = counts_[a] > 1 ? -0.5 * cfg.scene_extent[a] : 0.0;
      step_[a] = counts_[a] > 1 ? cfg.scene_extent[a] / static_cast<double>(counts_[a] - 1) : 0.0;
    }
    feature_dim_ = counts_[0] * counts_[1] * counts_[2] * dir_bins_;

    std::mt19937_64 rng(derive_seed(cfg.seed, SeedDomain::kProjection));
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd gauss(out_dim, feature_dim_);
    for (Eigen::Index c = 0; c < gauss.cols(); ++c)
      for (Eigen::Index r = 0; r < gauss.rows(); ++r) gauss(r, c) = normal(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(gauss);
    basis_ = qr.householderQ() * Eigen::MatrixXd::Identity(out_dim, feature_dim_);
  }

  std::size_t feature_dim() const noexcept { return feature_dim_; }

  /// Noise-free descriptor, scaled so that RawDot of a pose with itself is 1.
  HeadMatrix embed(const Vec3& position, const Vec3& direction) const {
    Eigen::VectorXd spatial(counts_[0] * counts_[1] * counts_[2]);
    Eigen::Index idx = 0;
    for (std::size_t i = 0; i < counts_[0]; ++i) {
      for (std::size_t j = 0; j < counts_[1]; ++j) {
        for (std::size_t k = 0; k < counts_[2]; ++k) {
          const Vec3 c{origin_[0] + step_[0] * i, origin_[1] + step_[1] * j,
                       origin_[2] + step_[2] * k};
          double d2 = 0.0;
          for (int a = 0; a < 3; ++a) d2 += (position[a] - c[a]) * (position[a] - c[a]);
          spatial(idx++) = std::exp(-d2 / (2 * width_ * width_));
        }
      }
    }
    Eigen::VectorXd angular(dir_bins_);
    for (std::size_t b = 0; b < dir_bins_; ++b) {
      const double az = 2 * std::numbers::pi * b / dir_bins_;
      const double cosine = direction[0] * std::cos(az) + direction[2] * std::sin(az);
      angular(b) = std::exp(dir_kappa_ * (cosine - 1.0));
    }
    Eigen::VectorXd feature(feature_dim_);
    for (Eigen::Index s = 0; s < spatial.size(); ++s)
      feature.segment(s * angular.size(), angular.size()) = spatial(s) * angular;
    const double norm = feature.norm();
    if (norm > 0.0) feature *= std::sqrt(static_cast<double>(heads_)) / norm;

    const Eigen::VectorXd projected = basis_ * feature;
    return HeadMatrix(heads_, head_dim_,
                      std::vector<double>(projected.data(), projected.data() + projected.size()));
  }

 private:
  std::size_t heads_;
  std::size_t head_dim_;
  std::size_t dir_bins_ = 8;
  double width_ = 1.0;
  double dir_kappa_ = 4.0;
  std::array<std::size_t, 3> counts_{};
  Vec3 origin_{};
  Vec3 step_{};
  std::size_t feature_dim_ = 0;
  Eigen::MatrixXd basis_;
};

/// Builds a trace from an explicit pose sequence. Poses are renumbered
/// 0..n-1 in order and their directions normalized.
inline Trace trace_from_poses(std::vector<PoseMeta> poses, const TrajectoryConfig& cfg,
                              std::string_view kind_label = {}) {
  cfg.validate();
  const PoseEmbedding embedding(cfg);
  Trace trace;
  auto& hd = trace.header;
  hd.heads = cfg.heads;
  hd.head_dim = cfg.head_dim;
  hd.special_count = cfg.special_count;
  hd.layers = cfg.layers;
  hd.payload_bytes = cfg.payload_bytes_per_layer;
  hd.frame_count = poses.size();
  hd.kind = kind_label.empty() ? std::string(to_string(cfg.kind)) : std::string(kind_label);
  hd.seed = cfg.seed;
  hd.noise_sigma = cfg.noise_sigma;
  hd.oracle = cfg.oracle;

  trace.frames.reserve(poses.size());
  for (std::size_t t = 0; t < poses.size(); ++t) {
    poses[t].frame_id = t;
    const PoseMeta pose = normalize_pose(poses[t]);
    TraceFrame f;
    f.frame_id = t;
    f.position = pose.position;
    f.direction = pose.direction;
    f.q_bar = embedding.embed(pose.position, pose.direction);
    f.k_bar = f.q_bar;
    if (cfg.noise_sigma > 0.0) {
      std::mt19937_64 rng(derive_seed(cfg.seed, SeedDomain::kDescriptorNoise, t));
      std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
      for (double& v : f.q_bar.flat()) v += noise(rng);
      for (double& v : f.k_bar.flat()) v += noise(rng);
    }
    f.payload_sizes.assign(cfg.layers, cfg.payload_bytes_per_layer);
    trace.frames.push_back(std::move(f));
  }
  hd.trace_hash = compute_trace_hash(trace);
  return trace;
}

/// Pose sequence whose final frame revisits one spot for the `visits`-th
/// time. Between visits the camera looks around distant corners of the
/// scene. Visit `dominant` dwells `dominant_len` frames exactly on the spot;
/// every other visit passes `visit_len` frames slightly to the side, so its
/// peak relevance is lower. Single-peak top-K collapses onto the dominant
/// visit while each visit forms its own above-threshold segment.
struct RevisitConfig {
  std::size_t visits = 8;
  std::size_t dominant = 2;
  std::size_t dominant_len = 60;
  std::size_t visit_len = 8;
  std::size_t excursion_len = 30;
  double jitter = 0.01;
  std::uint64_t seed = 7;
};

inline std::vector<PoseMeta> revisit_poses(const RevisitConfig& rc) {
  std::mt19937_64 rng(derive_seed(rc.seed, SeedDomain::kTrajectory));
  std::normal_distribution<double> jitter(0.0, rc.jitter);
  std::vector<PoseMeta> out;
  auto add = [&](Vec3 p, const Vec3& d) {
    for (auto& c : p) c += jitter(rng);
    out.push_back({out.size(), p, d});
  };
  const Vec3 spot{0.0, 0.0, 0.0};
  const Vec3 forward{0.0, 0.0, 1.0};
  const std::array<Vec3, 4> corners{{{1.8, 0, 1.8}, {-1.8, 0, 1.8}, {1.8, 0, -1.8}, {-1.8, 0, -1.8}}};
  const std::array<Vec3, 4> looks{{{1, 0, 0}, {-1, 0, 0}, {0, 0, -1}, {1, 0, -1}}};
  auto excursion = [&](std::size_t v) {
    for (std::size_t e = 0; e < rc.excursion_len; ++e) {
      const std::size_t c = (v + e / 10) % corners.size();
      add(corners[c], looks[c]);
    }
  };

  add(corners[0], looks[0]);
  for (std::size_t v = 0; v + 1 < rc.visits; ++v) {
    excursion(v);
    if (v == rc.dominant) {
      for (std::size_t i = 0; i < rc.dominant_len; ++i) add(spot, forward);
    } else {
      const double offset = 0.25 + 0.05 * static_cast<double>(v);
      for (std::size_t i = 0; i < rc.visit_len; ++i) add({offset, 0.0, 0.0}, forward);
    }
  }
  // the last revisit before the query, then the query itself
  excursion(rc.visits - 1);
  const double offset = 0.25 + 0.05 * static_cast<double>(rc.visits - 1);
  for (std::size_t i = 0; i < rc.visit_len; ++i) add({offset, 0.0, 0.0}, forward);
  excursion(rc.visits);
  add(spot, forward);
  return out;
}

inline Trace generate_trace(const TrajectoryConfig& cfg) {
  return trace_from_poses(generate_poses(cfg), cfg);
}

}  // namespace streamkv::harness
