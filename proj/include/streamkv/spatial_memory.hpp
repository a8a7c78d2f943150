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
// Pose-indexed regions over the cached frames and periodic thinning of
// over-populated regions.
//
// Every frame lands in one of K^3 x D regions keyed by its camera position
// (a K x K x K grid over the grow-only bounding box of all positions seen so
// far) and the azimuth of its optical axis. The key is computed once, at
// insertion, and never recomputed.
#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "streamkv/common.hpp"
#include "streamkv/selection.hpp"

namespace streamkv {

struct PoseMeta {
  FrameId frame_id = 0;
  Vec3 position{};
  Vec3 direction{0.0, 0.0, 1.0};

  friend bool operator==(const PoseMeta&, const PoseMeta&) = default;
};

/// Returns `pose` with a unit-length direction. Rejects non-finite input and
/// zero direction vectors.
inline PoseMeta normalize_pose(PoseMeta pose) {
  double sq = 0.0;
  for (int a = 0; a < 3; ++a) {
    if (!std::isfinite(pose.position[a]) || !std::isfinite(pose.direction[a]))
      throw std::invalid_argument("pose: non-finite component");
    sq += pose.direction[a] * pose.direction[a];
  }
  if (sq == 0.0) throw std::invalid_argument("pose: zero direction vector");
  const double norm = std::sqrt(sq);
  for (auto& c : pose.direction) c /= norm;
  return pose;
}

struct BoundingBox {
  Vec3 b_min{};
  Vec3 b_max{};

  bool contains(const Vec3& p) const noexcept {
    for (int a = 0; a < 3; ++a)
      if (p[a] < b_min[a] || p[a] > b_max[a]) return false;
    return true;
  }
  bool contains(const BoundingBox& o) const noexcept {
    return contains(o.b_min) && contains(o.b_max);
  }
  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Grow-only update. An empty box becomes the degenerate box at `p`.
inline BoundingBox update_bbox(const std::optional<BoundingBox>& box, const Vec3& p) {
  for (double c : p)
    if (!std::isfinite(c)) throw std::invalid_argument("update_bbox: non-finite position");
  if (!box) return {p, p};
  BoundingBox out = *box;
  for (int a = 0; a < 3; ++a) {
    out.b_min[a] = std::min(out.b_min[a], p[a]);
    out.b_max[a] = std::max(out.b_max[a], p[a]);
  }
  return out;
}

struct RegionKey {
  int ix = 0;
  int iy = 0;
  int iz = 0;
  int d_bin = 0;

  friend auto operator<=>(const RegionKey&, const RegionKey&) = default;
};

inline std::string to_string(const RegionKey& k) {
  return std::to_string(k.ix) + "," + std::to_string(k.iy) + "," + std::to_string(k.iz) +
         "," + std::to_string(k.d_bin);
}

struct MemoryConfig {
  int grid_k = 3;
  int dir_bins = 4;
  std::size_t interval = 200;
  double beta = 0.5;
  bool enabled = true;

  void validate() const {
    if (grid_k < 1) throw std::invalid_argument("memory: grid_k must be >= 1");
    if (dir_bins < 1) throw std::invalid_argument("memory: dir_bins must be >= 1");
    if (interval < 1) throw std::invalid_argument("memory: interval must be >= 1");
    if (!(beta >= 0.0 && beta < 1.0)) throw std::invalid_argument("memory: beta must be in [0, 1)");
  }
};

/// Grid cell from the position (cell size = box diagonal / K, indices clamped
/// to [0, K-1]) and azimuth bin from atan2(d_z, d_x), y being up.
inline RegionKey assign_region(const PoseMeta& pose, const BoundingBox& box,
                               const MemoryConfig& cfg) {
  double diag_sq = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double e = box.b_max[a] - box.b_min[a];
    diag_sq += e * e;
  }
  const double cell = std::sqrt(diag_sq) / cfg.grid_k;

  auto axis_index = [&](int a) {
    if (cell <= 0.0) return 0;
    const double raw = std::floor((pose.position[a] - box.b_min[a]) / cell);
    return static_cast<int>(std::clamp(raw, 0.0, static_cast<double>(cfg.grid_k - 1)));
  };

  constexpr double kPi = std::numbers::pi;
  const double azimuth = std::atan2(pose.direction[2], pose.direction[0]);
  const double bin = std::floor((azimuth + kPi) / (2.0 * kPi / cfg.dir_bins));
  const int d_bin =
      static_cast<int>(std::clamp(bin, 0.0, static_cast<double>(cfg.dir_bins - 1)));
  return {axis_index(0), axis_index(1), axis_index(2), d_bin};
}

/// True on every `interval`-th processed frame.
inline bool should_compress(std::size_t frames_processed, const MemoryConfig& cfg) {
  return cfg.enabled && frames_processed > 0 && frames_processed % cfg.interval == 0;
}

struct ThinnedRegion {
  RegionKey key;
  std::size_t before = 0;
  std::size_t after = 0;
};

struct CompressionReport {
  FrameId trigger_frame = 0;
  double mean_occupancy = 0.0;
  std::size_t occupied_regions = 0;
  std::vector<ThinnedRegion> thinned_regions;
  std::vector<FrameId> tombstoned_ids;  // ascending
};

struct RegionAssignment {
  FrameId frame_id = 0;
  RegionKey key;
};

/// Number of frames kept when a region of `before` frames is thinned.
inline std::size_t retained_count(std::size_t before, double beta) {
  return static_cast<std::size_t>(std::floor((1.0 - beta) * static_cast<double>(before)));
}

/// Plans one compression event over the live frames. The anchor is never
/// counted and never tombstoned. Regions holding strictly more than the mean
/// occupancy keep floor((1 - beta) * |R|) frames, evenly spaced in frame-id
/// order; the rest of those regions are tombstoned.
inline CompressionReport compress(std::span<const RegionAssignment> live_frames,
                                  std::optional<FrameId> anchor_id, const MemoryConfig& cfg,
                                  FrameId trigger_frame = 0) {
  CompressionReport report;
  report.trigger_frame = trigger_frame;

  std::map<RegionKey, std::vector<FrameId>> regions;
  for (const auto& f : live_frames) {
    if (anchor_id && f.frame_id == *anchor_id) continue;
    regions[f.key].push_back(f.frame_id);
  }
  if (regions.empty()) return report;

  std::size_t total = 0;
  for (auto& [key, ids] : regions) {
    std::sort(ids.begin(), ids.end());
    total += ids.size();
  }
  const std::size_t occupied = regions.size();
  report.occupied_regions = occupied;
  report.mean_occupancy = static_cast<double>(total) / static_cast<double>(occupied);

  for (const auto& [key, ids] : regions) {
    // |R| > total / P, compared exactly in integers
    if (ids.size() * occupied <= total) continue;
    const std::size_t keep = retained_count(ids.size(), cfg.beta);
    std::vector<bool> kept(ids.size(), false);
    for (auto p : uniform_positions(ids.size(), keep)) kept[p] = true;
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (!kept[i]) report.tombstoned_ids.push_back(ids[i]);
    report.thinned_regions.push_back({key, ids.size(), keep});
  }
  std::sort(report.tombstoned_ids.begin(), report.tombstoned_ids.end());
  return report;
}

/// Stream-side region bookkeeping: the grow-only box plus the frozen key of
/// every frame ever recorded.
class SpatialMemory {
 public:
  explicit SpatialMemory(MemoryConfig cfg) : cfg_(cfg) { cfg_.validate(); }

  const MemoryConfig& config() const noexcept { return cfg_; }
  const std::optional<BoundingBox>& bbox() const noexcept { return box_; }

  /// Grows the box to contain the pose, then assigns and freezes its region.
  RegionKey record(const PoseMeta& pose) {
    if (keys_.count(pose.frame_id))
      throw std::invalid_argument("spatial memory: frame recorded twice");
    box_ = update_bbox(box_, pose.position);
    const RegionKey key = assign_region(pose, *box_, cfg_);
    keys_.emplace(pose.frame_id, key);
    return key;
  }

  std::optional<RegionKey> region_of(FrameId id) const {
    auto it = keys_.find(id);
    if (it == keys_.end()) return std::nullopt;
    return it->second;
  }

  std::vector<RegionAssignment> assignments(std::span<const FrameId> ids) const {
    std::vector<RegionAssignment> out;
    out.reserve(ids.size());
    for (auto id : ids) {
      auto it = keys_.find(id);
      if (it == keys_.end())
        throw InvariantViolation("spatial memory: no region recorded for frame " +
                                 std::to_string(id));
      out.push_back({id, it->second});
    }
    return out;
  }

  /// Live-frame count per region, ordered by key.
  std::map<RegionKey, std::size_t> occupancy(std::span<const FrameId> live_ids) const {
    std::map<RegionKey, std::size_t> hist;
    for (const auto& a : assignments(live_ids)) ++hist[a.key];
    return hist;
  }

 private:
  MemoryConfig cfg_;
  std::optional<BoundingBox> box_;
  std::unordered_map<FrameId, RegionKey> keys_;
};

/// CSV export of a region histogram: ix,iy,iz,d_bin,count.
inline std::string occupancy_csv(const std::map<RegionKey, std::size_t>& hist) {
  std::string out = "ix,iy,iz,d_bin,count\n";
  for (const auto& [key, count] : hist) out += to_string(key) + "," + std::to_string(count) + "\n";
  return out;
}

}  // namespace streamkv
