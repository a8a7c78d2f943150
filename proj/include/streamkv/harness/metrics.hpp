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
// Run metrics. Everything here is a pure function of a run log and the trace
// it was produced from, so summaries can be recomputed from files alone.
//
// Metrics CSV columns (frozen, see tests/golden/metrics_header.csv):
//   policy              strategy tag of the run
//   scoring             dot | cosine | negl2
//   frames              frames processed
//   coverage_frames     frames with at least one detected segment
//   mean_coverage       mean over those frames of (segments hit / segments)
//   min_coverage        worst such frame (1 when there are none)
//   recall_frames       frames whose non-anchor history exceeded budget - 1
//   recall_at_n         mean overlap of the selection with the oracle's
//                       top budget - 1 frames, over recall_frames
//   mean_context        mean attended frames per query (anchor included)
//   max_context         largest attended set
//   peak_live           most live frames at any point
//   final_live          live frames after the last frame
//   peak_bytes          largest live payload total
//   final_bytes         live payload bytes after the last frame
//   compression_events  number of compression events
//   tombstoned_total    frames tombstoned over the run
#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "streamkv/common.hpp"
#include "streamkv/harness/oracle.hpp"
#include "streamkv/harness/run_log.hpp"
#include "streamkv/trace.hpp"

namespace streamkv::harness {

struct MetricsSummary {
  std::string policy;
  std::string scoring;
  std::size_t frames = 0;
  std::size_t coverage_frames = 0;
  double mean_coverage = 1.0;
  double min_coverage = 1.0;
  std::size_t recall_frames = 0;
  double recall_at_n = 1.0;
  double mean_context = 0.0;
  std::size_t max_context = 0;
  std::size_t peak_live = 0;
  std::size_t final_live = 0;
  std::size_t peak_bytes = 0;
  std::size_t final_bytes = 0;
  std::size_t compression_events = 0;
  std::size_t tombstoned_total = 0;
};

/// Fraction of the frame's detected segments that contain a selected frame.
/// Empty when no segment was detected.
inline std::optional<double> segment_coverage(const LoggedFrame& f) {
  if (f.segments.empty()) return std::nullopt;
  std::size_t hit = 0;
  for (const auto& s : f.segments) {
    const bool covered = std::any_of(f.selected.begin(), f.selected.end(), [&](FrameId id) {
      return id >= s.start_id && id <= s.end_id;
    });
    if (covered) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(f.segments.size());
}

inline MetricsSummary compute_metrics(const RunLog& log, const Trace& trace) {
  if (log.header.trace_hash != trace.header.trace_hash)
    throw MalformedInput("run log was produced from a different trace (hash " +
                         log.header.trace_hash + " vs " + trace.header.trace_hash + ")");
  if (log.frames.size() != trace.frames.size())
    throw MalformedInput("run log covers " + std::to_string(log.frames.size()) +
                         " frames, trace has " + std::to_string(trace.frames.size()));

  const auto& cfg = log.header.config;
  MetricsSummary m;
  m.policy = std::string(to_string(cfg.strategy));
  m.scoring = std::string(to_string(cfg.scoring));
  m.frames = log.frames.size();
  m.compression_events = log.compressions.size();
  for (const auto& c : log.compressions) m.tombstoned_total += c.tombstoned_ids.size();

  std::unordered_map<FrameId, std::size_t> index;
  for (std::size_t i = 0; i < trace.frames.size(); ++i) index[trace.frames[i].frame_id] = i;

  const std::size_t n_sel = cfg.selection.budget - 1;
  std::vector<FrameId> live;  // ascending
  std::size_t next_compression = 0;
  double coverage_sum = 0.0;
  double recall_sum = 0.0;
  double context_sum = 0.0;

  for (std::size_t t = 0; t < log.frames.size(); ++t) {
    const LoggedFrame& f = log.frames[t];
    if (f.query_id != trace.frames[t].frame_id)
      throw MalformedInput("run log frame order differs from the trace");

    if (auto cov = segment_coverage(f)) {
      ++m.coverage_frames;
      coverage_sum += *cov;
      m.min_coverage = std::min(m.min_coverage, *cov);
    }

    const std::size_t context = f.selected.size() + (f.anchor_id ? 1 : 0);
    context_sum += static_cast<double>(context);
    m.max_context = std::max(m.max_context, context);

    // oracle recall against the live non-anchor history at this query
    std::vector<FrameId> candidates;
    for (auto id : live)
      if (!f.anchor_id || id != *f.anchor_id) candidates.push_back(id);
    if (n_sel > 0 && candidates.size() > n_sel) {
      const TraceFrame& query = trace.frames[t];
      std::vector<std::pair<double, FrameId>> ranked;
      ranked.reserve(candidates.size());
      for (auto id : candidates)
        ranked.emplace_back(oracle_relevance(query, trace.frames[index.at(id)], trace.header.oracle),
                            id);
      std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second > b.second;
      });
      std::vector<FrameId> best;
      for (std::size_t i = 0; i < n_sel; ++i) best.push_back(ranked[i].second);
      std::sort(best.begin(), best.end());
      std::size_t overlap = 0;
      for (auto id : f.selected)
        if (std::binary_search(best.begin(), best.end(), id)) ++overlap;
      recall_sum += static_cast<double>(overlap) / static_cast<double>(n_sel);
      ++m.recall_frames;
    }

    live.push_back(f.query_id);
    m.peak_live = std::max(m.peak_live, f.live_after_insert);
    m.peak_bytes = std::max(m.peak_bytes, f.bytes_after_insert);
    while (next_compression < log.compressions.size() &&
           log.compressions[next_compression].trigger_frame == f.query_id) {
      const auto& gone = log.compressions[next_compression++].tombstoned_ids;
      std::erase_if(live, [&](FrameId id) {
        return std::find(gone.begin(), gone.end(), id) != gone.end();
      });
    }
    if (live.size() != f.live_after)
      throw MalformedInput("run log live count at frame " + std::to_string(f.query_id) +
                           " is inconsistent with its compression records");
  }

  if (m.coverage_frames > 0) m.mean_coverage = coverage_sum / static_cast<double>(m.coverage_frames);
  if (m.recall_frames > 0) m.recall_at_n = recall_sum / static_cast<double>(m.recall_frames);
  if (m.frames > 0) m.mean_context = context_sum / static_cast<double>(m.frames);
  if (!log.frames.empty()) {
    m.final_live = log.frames.back().live_after;
    m.final_bytes = log.frames.back().bytes_after;
  }
  return m;
}

inline constexpr std::string_view kMetricsCsvHeader =
    "policy,scoring,frames,coverage_frames,mean_coverage,min_coverage,recall_frames,"
    "recall_at_n,mean_context,max_context,peak_live,final_live,peak_bytes,final_bytes,"
    "compression_events,tombstoned_total";

inline std::string metrics_csv_row(const MetricsSummary& m) {
  auto u = [](std::size_t v) { return std::to_string(v); };
  return m.policy + "," + m.scoring + "," + u(m.frames) + "," + u(m.coverage_frames) + "," +
         format_double(m.mean_coverage) + "," + format_double(m.min_coverage) + "," +
         u(m.recall_frames) + "," + format_double(m.recall_at_n) + "," +
         format_double(m.mean_context) + "," + u(m.max_context) + "," + u(m.peak_live) + "," +
         u(m.final_live) + "," + u(m.peak_bytes) + "," + u(m.final_bytes) + "," +
         u(m.compression_events) + "," + u(m.tombstoned_total);
}

inline std::string metrics_csv(std::span<const MetricsSummary> rows) {
  std::string out = std::string(kMetricsCsvHeader) + "\n";
  for (const auto& r : rows) out += metrics_csv_row(r) + "\n";
  return out;
}

/// Per-frame memory timeline: one row per processed frame.
inline std::string timeline_csv(const RunLog& log) {
  std::string out = "frame_id,history_live,context,live_after_insert,live_after,bytes_after,tombstoned\n";
  std::size_t next_compression = 0;
  for (const auto& f : log.frames) {
    std::size_t gone = 0;
    while (next_compression < log.compressions.size() &&
           log.compressions[next_compression].trigger_frame == f.query_id)
      gone += log.compressions[next_compression++].tombstoned_ids.size();
    out += std::to_string(f.query_id) + "," + std::to_string(f.history_live) + "," +
           std::to_string(f.selected.size() + (f.anchor_id ? 1 : 0)) + "," +
           std::to_string(f.live_after_insert) + "," + std::to_string(f.live_after) + "," +
           std::to_string(f.bytes_after) + "," + std::to_string(gone) + "\n";
  }
  return out;
}

/// One metrics row per run. All runs must come from `trace`.
inline std::string compare_runs(std::span<const RunLog> runs, const Trace& trace) {
  std::vector<MetricsSummary> rows;
  rows.reserve(runs.size());
  for (const auto& r : runs) {
    if (r.header.trace_hash != trace.header.trace_hash)
      throw MalformedInput("compare: run log trace hash " + r.header.trace_hash +
                           " does not match trace " + trace.header.trace_hash);
    rows.push_back(compute_metrics(r, trace));
  }
  return metrics_csv(rows);
}

}  // namespace streamkv::harness
