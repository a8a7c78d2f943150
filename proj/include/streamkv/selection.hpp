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
// History frame selection under a fixed frame budget.
//
// The first live frame is always kept as the anchor (the coordinate
// reference). The other budget - 1 slots are filled by one of six policies:
// segment sampling, or one of the comparison baselines (top-K, random,
// uniform, sliding window, score-proportional sampling).
//
// Segment sampling runs in four steps over the non-anchor history:
//   1. adaptive threshold tau = mean + w_thre * stddev, then maximal runs of
//      frames scoring strictly above tau, merged when fewer than delta frames
//      separate them;
//   2. per-segment quotas proportional to the segment's peak score, clamped
//      to [1, segment length];
//   3. inside each segment, the peak plus evenly spaced other members;
//   4. truncate to the best-scoring samples, or top up with the
//      best-scoring unselected frames, so exactly budget - 1 are chosen.
//
// Every score tie breaks toward the more recent frame.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "streamkv/common.hpp"
#include "streamkv/relevance.hpp"

namespace streamkv {

struct SelectionConfig {
  std::size_t budget = 48;  // anchor included
  double w_thre = 0.3;
  std::size_t merge_gap = 3;
  std::uint64_t seed = 0;
};

/// A run of history positions [start, end] (inclusive). Positions index the
/// candidate score list, not frame ids.
struct Segment {
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t peak_index = 0;
  double peak_score = 0.0;

  std::size_t length() const noexcept { return end - start + 1; }
  bool contains(std::size_t i) const noexcept { return i >= start && i <= end; }
  friend bool operator==(const Segment&, const Segment&) = default;
};

enum class Strategy { kSegment, kTopK, kRandom, kUniform, kSlidingWindow, kProbabilistic };

inline constexpr std::array<Strategy, 6> kAllStrategies = {
    Strategy::kSegment, Strategy::kTopK,          Strategy::kRandom,
    Strategy::kUniform, Strategy::kSlidingWindow, Strategy::kProbabilistic};

inline std::string_view to_string(Strategy s) noexcept {
  switch (s) {
    case Strategy::kSegment: return "segment";
    case Strategy::kTopK: return "topk";
    case Strategy::kRandom: return "random";
    case Strategy::kUniform: return "uniform";
    case Strategy::kSlidingWindow: return "window";
    case Strategy::kProbabilistic: return "prob";
  }
  return "segment";
}

inline std::optional<Strategy> parse_strategy(std::string_view s) noexcept {
  for (auto st : kAllStrategies)
    if (to_string(st) == s) return st;
  return std::nullopt;
}

/// A detected segment expressed in frame ids, for logs and metrics.
struct SegmentSpan {
  FrameId start_id = 0;
  FrameId end_id = 0;
  FrameId peak_id = 0;
  double peak_score = 0.0;

  friend bool operator==(const SegmentSpan&, const SegmentSpan&) = default;
};

struct SelectionResult {
  std::optional<FrameId> anchor_id;
  std::vector<FrameId> selected_ids;  // ascending, anchor excluded
  Strategy strategy = Strategy::kSegment;
  std::size_t segments_detected = 0;

  // Segment analysis of the non-anchor history. Computed for every strategy
  // so coverage can be compared across policies.
  std::optional<double> tau;
  std::vector<SegmentSpan> segments;
  // Only populated by segment sampling when the pipeline actually ran.
  std::vector<std::size_t> quotas;
  std::vector<FrameId> pre_truncation_ids;
  bool short_circuit = false;

  std::size_t context_size() const noexcept {
    return selected_ids.size() + (anchor_id ? 1 : 0);
  }
};

// ---------------------------------------------------------------------------
// Building blocks
// ---------------------------------------------------------------------------

/// mean + w_thre * population stddev.
inline double adaptive_threshold(std::span<const double> scores, double w_thre) {
  if (scores.empty()) throw std::invalid_argument("adaptive_threshold: empty score list");
  const double n = static_cast<double>(scores.size());
  double sum = 0.0;
  for (double s : scores) sum += s;
  const double mean = sum / n;
  double sq = 0.0;
  for (double s : scores) sq += (s - mean) * (s - mean);
  return mean + w_thre * std::sqrt(sq / n);
}

inline std::vector<Segment> identify_segments(std::span<const double> scores, double tau,
                                              std::size_t delta) {
  std::vector<Segment> runs;
  for (std::size_t i = 0; i < scores.size();) {
    if (!(scores[i] > tau)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < scores.size() && scores[j + 1] > tau) ++j;
    runs.push_back({i, j, 0, 0.0});
    i = j + 1;
  }

  std::vector<Segment> merged;
  for (const auto& r : runs) {
    // frames strictly between the previous end and this start
    if (!merged.empty() && r.start - merged.back().end - 1 < delta)
      merged.back().end = r.end;
    else
      merged.push_back(r);
  }
  for (auto& seg : merged) {
    seg.peak_index = seg.start;
    seg.peak_score = scores[seg.start];
    for (std::size_t i = seg.start + 1; i <= seg.end; ++i) {
      if (scores[i] >= seg.peak_score) {
        seg.peak_index = i;
        seg.peak_score = scores[i];
      }
    }
  }
  return merged;
}

/// floor(n_sel * peak_k / sum(peaks)) clamped to [1, |S_k|]. When the peak
/// sum is not positive every segment gets floor(n_sel / M) before clamping.
/// Raw quotas within 1e-9 (relative) of an integer snap to it, so exact
/// proportional shares are not lost to rounding in the division.
inline std::vector<std::size_t> allocate_quotas(std::span<const Segment> segments,
                                                std::size_t n_sel) {
  if (n_sel == 0) throw std::invalid_argument("allocate_quotas: n_sel must be >= 1");
  if (segments.empty()) throw std::invalid_argument("allocate_quotas: no segments");
  double peak_sum = 0.0;
  for (const auto& s : segments) peak_sum += s.peak_score;

  std::vector<std::size_t> quotas;
  quotas.reserve(segments.size());
  for (const auto& s : segments) {
    long long raw = 0;
    if (peak_sum > 0.0) {
      const double share = static_cast<double>(n_sel) * s.peak_score / peak_sum;
      const double nearest = std::round(share);
      raw = std::abs(share - nearest) <= 1e-9 * std::max(1.0, std::abs(share))
                ? static_cast<long long>(nearest)
                : static_cast<long long>(std::floor(share));
    } else {
      raw = static_cast<long long>(n_sel / segments.size());
    }
    const long long hi = static_cast<long long>(s.length());
    quotas.push_back(static_cast<std::size_t>(std::clamp(raw, 1LL, hi)));
  }
  return quotas;
}

/// Deterministic evenly spaced pick of `n` positions out of `count`:
/// round(j * (count - 1) / (n - 1)) for j = 0..n-1, a collision advancing to
/// the next unused position. n == 1 picks position 0.
inline std::vector<std::size_t> uniform_positions(std::size_t count, std::size_t n) {
  if (n > count) throw std::invalid_argument("uniform_positions: n exceeds count");
  std::vector<std::size_t> out;
  if (n == 0) return out;
  out.reserve(n);
  if (n == 1) {
    out.push_back(0);
    return out;
  }
  const std::size_t span = count - 1;
  const std::size_t steps = n - 1;
  for (std::size_t j = 0; j < n; ++j) {
    // integer round-half-up of j * span / steps
    std::size_t pos = (2 * j * span + steps) / (2 * steps);
    if (!out.empty() && pos <= out.back()) pos = out.back() + 1;
    out.push_back(pos);
  }
  return out;
}

/// Peak plus n_k - 1 evenly spaced non-peak members, ascending.
inline std::vector<std::size_t> sample_within_segment(const Segment& seg, std::size_t n_k) {
  if (n_k < 1 || n_k > seg.length())
    throw std::invalid_argument("sample_within_segment: quota outside [1, |segment|]");
  std::vector<std::size_t> others;
  others.reserve(seg.length() - 1);
  for (std::size_t i = seg.start; i <= seg.end; ++i)
    if (i != seg.peak_index) others.push_back(i);

  std::vector<std::size_t> out{seg.peak_index};
  for (auto p : uniform_positions(others.size(), n_k - 1)) out.push_back(others[p]);
  std::sort(out.begin(), out.end());
  return out;
}

namespace detail {

/// Orders positions by descending score, later position first on ties.
inline void sort_by_score(std::vector<std::size_t>& idx, std::span<const double> scores) {
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a > b;
  });
}

}  // namespace detail

/// Reconciles the segment samples with the exact budget `n_sel`. The live
/// history is every position of `scores`. Returns ascending positions.
inline std::vector<std::size_t> adjust_budget(std::span<const std::size_t> f_seg,
                                              std::span<const double> scores,
                                              std::size_t n_sel) {
  std::vector<std::size_t> chosen(f_seg.begin(), f_seg.end());
  for (auto i : chosen)
    if (i >= scores.size()) throw std::invalid_argument("adjust_budget: sample outside history");

  if (chosen.size() > n_sel) {
    detail::sort_by_score(chosen, scores);
    chosen.resize(n_sel);
  } else if (chosen.size() < n_sel) {
    std::vector<bool> taken(scores.size(), false);
    for (auto i : chosen) taken[i] = true;
    std::vector<std::size_t> rest;
    rest.reserve(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i)
      if (!taken[i]) rest.push_back(i);
    detail::sort_by_score(rest, scores);
    const std::size_t fill = std::min(n_sel - chosen.size(), rest.size());
    chosen.insert(chosen.end(), rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(fill));
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

// ---------------------------------------------------------------------------
// Policies
// ---------------------------------------------------------------------------

namespace detail {

struct CandidateView {
  std::vector<FrameId> ids;
  std::vector<double> scores;
};

/// Splits off the anchor and runs the segment analysis shared by all
/// strategies. Returns the non-anchor candidates.
inline CandidateView prepare(const RelevanceProfile& profile, const SelectionConfig& cfg,
                             Strategy strategy, SelectionResult& out) {
  if (cfg.budget < 1) throw std::invalid_argument("selection: budget must be >= 1");
  out = SelectionResult{};
  out.strategy = strategy;
  CandidateView view;
  if (profile.scores.empty()) return view;

  out.anchor_id = profile.scores.front().frame_id;
  view.ids.reserve(profile.scores.size() - 1);
  view.scores.reserve(profile.scores.size() - 1);
  for (std::size_t i = 1; i < profile.scores.size(); ++i) {
    view.ids.push_back(profile.scores[i].frame_id);
    view.scores.push_back(profile.scores[i].score);
  }
  if (view.ids.empty()) return view;

  out.tau = adaptive_threshold(view.scores, cfg.w_thre);
  for (const auto& seg : identify_segments(view.scores, *out.tau, cfg.merge_gap))
    out.segments.push_back(
        {view.ids[seg.start], view.ids[seg.end], view.ids[seg.peak_index], seg.peak_score});
  out.segments_detected = out.segments.size();
  return view;
}

inline std::vector<FrameId> to_ids(const CandidateView& v, std::span<const std::size_t> pos) {
  std::vector<FrameId> ids;
  ids.reserve(pos.size());
  for (auto p : pos) ids.push_back(v.ids[p]);
  std::sort(ids.begin(), ids.end());
  return ids;
}

inline std::vector<std::size_t> top_positions(std::span<const double> scores, std::size_t n) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  sort_by_score(idx, scores);
  idx.resize(std::min(n, idx.size()));
  return idx;
}

}  // namespace detail

inline SelectionResult segment_sampling(const RelevanceProfile& profile,
                                        const SelectionConfig& cfg) {
  SelectionResult out;
  const auto view = detail::prepare(profile, cfg, Strategy::kSegment, out);
  const std::size_t n_sel = cfg.budget - 1;
  if (view.ids.size() <= n_sel) {
    out.selected_ids = view.ids;
    out.short_circuit = true;
    return out;
  }
  if (n_sel == 0) return out;

  const auto segments = identify_segments(view.scores, *out.tau, cfg.merge_gap);
  std::vector<std::size_t> f_seg;
  if (!segments.empty()) {
    out.quotas = allocate_quotas(segments, n_sel);
    for (std::size_t k = 0; k < segments.size(); ++k) {
      const auto picks = sample_within_segment(segments[k], out.quotas[k]);
      f_seg.insert(f_seg.end(), picks.begin(), picks.end());
    }
  }
  out.pre_truncation_ids = detail::to_ids(view, f_seg);
  out.selected_ids = detail::to_ids(view, adjust_budget(f_seg, view.scores, n_sel));
  return out;
}

/// Comparison policies. Random and probabilistic draws are seeded from
/// (cfg.seed, query frame id) so each query gets its own reproducible stream.
inline SelectionResult baseline_select(Strategy strategy, const RelevanceProfile& profile,
                                       const SelectionConfig& cfg) {
  if (strategy == Strategy::kSegment) return segment_sampling(profile, cfg);

  SelectionResult out;
  const auto view = detail::prepare(profile, cfg, strategy, out);
  const std::size_t n_sel = cfg.budget - 1;
  const std::size_t n = view.ids.size();
  if (n <= n_sel) {
    out.selected_ids = view.ids;
    out.short_circuit = true;
    return out;
  }

  std::vector<std::size_t> picks;
  switch (strategy) {
    case Strategy::kTopK:
      picks = detail::top_positions(view.scores, n_sel);
      break;
    case Strategy::kUniform:
      picks = uniform_positions(n, n_sel);
      break;
    case Strategy::kSlidingWindow:
      for (std::size_t i = n - n_sel; i < n; ++i) picks.push_back(i);
      break;
    case Strategy::kRandom: {
      std::mt19937_64 rng(
          derive_seed(cfg.seed, SeedDomain::kBaselineSampling, profile.query_frame_id));
      std::vector<std::size_t> pool(n);
      std::iota(pool.begin(), pool.end(), std::size_t{0});
      for (std::size_t i = 0; i < n_sel; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(pool[i], pool[pick(rng)]);
      }
      picks.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_sel));
      break;
    }
    case Strategy::kProbabilistic: {
      constexpr double kEpsilon = 1e-6;
      std::mt19937_64 rng(
          derive_seed(cfg.seed, SeedDomain::kBaselineSampling, profile.query_frame_id));
      const double lo = *std::min_element(view.scores.begin(), view.scores.end());
      std::vector<double> weight(n);
      for (std::size_t i = 0; i < n; ++i) weight[i] = view.scores[i] - lo + kEpsilon;
      for (std::size_t draw = 0; draw < n_sel; ++draw) {
        double total = 0.0;
        for (double w : weight) total += w;
        std::uniform_real_distribution<double> u(0.0, total);
        const double target = u(rng);
        double acc = 0.0;
        std::size_t chosen = n;
        std::size_t last_positive = n;
        for (std::size_t i = 0; i < n; ++i) {
          if (weight[i] <= 0.0) continue;
          last_positive = i;
          acc += weight[i];
          if (target < acc) {
            chosen = i;
            break;
          }
        }
        if (chosen == n) chosen = last_positive;
        picks.push_back(chosen);
        weight[chosen] = 0.0;
      }
      break;
    }
    case Strategy::kSegment:
      break;
  }
  out.selected_ids = detail::to_ids(view, picks);
  return out;
}

inline SelectionResult select(Strategy strategy, const RelevanceProfile& profile,
                              const SelectionConfig& cfg) {
  return baseline_select(strategy, profile, cfg);
}

}  // namespace streamkv
