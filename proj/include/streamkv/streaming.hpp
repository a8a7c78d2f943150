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
// Per-frame streaming pipeline.
//
// For each incoming frame, in order:
//   1. pool the layer-0 query/key descriptors;
//   2. score the query against every live history key;
//   3. select the context (anchor + up to budget - 1 frames);
//   4. gather that same id set at every layer;
//   5. insert the frame's own payloads, key descriptor and pose;
//   6. grow the pose box and freeze the frame's region key;
//   7. on every interval-th frame, thin over-populated regions.
//
// Selection for frame t sees only frames < t, and a compression triggered at
// frame t is visible from frame t + 1 on.
#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "streamkv/common.hpp"
#include "streamkv/kv_store.hpp"
#include "streamkv/relevance.hpp"
#include "streamkv/selection.hpp"
#include "streamkv/spatial_memory.hpp"
#include "streamkv/trace.hpp"

namespace streamkv {

struct StreamConfig {
  SelectionConfig selection;
  MemoryConfig memory;
  Scoring scoring = Scoring::kRawDot;
  Strategy strategy = Strategy::kSegment;
  std::size_t layers = 24;
};

struct RelevanceSummary {
  std::size_t history_live = 0;
  std::optional<double> tau;
  std::size_t segments = 0;
  std::optional<double> min_score;
  std::optional<double> max_score;
};

struct FrameLog {
  FrameId frame_id = 0;
  SelectionResult selection;
  RelevanceSummary relevance;
  RegionKey region;
  std::optional<CompressionReport> compression;
  std::size_t live_after_insert = 0;
  std::size_t bytes_after_insert = 0;
  std::size_t live_after = 0;
  std::size_t bytes_after = 0;
  std::uint64_t replay_checksum = 0;
};

struct StreamReport {
  StreamConfig config;
  std::vector<FrameLog> frames;
  std::vector<std::size_t> live_timeline;
  std::vector<std::size_t> bytes_timeline;
  std::size_t peak_live = 0;
  CacheStats final_stats;
};

/// Order-canonical checksum of an attended context at one layer: the
/// (id, payload) pairs are sorted by id before hashing, and the layer index
/// and query payload are mixed in.
inline std::uint64_t attention_replay(
    std::span<const std::pair<FrameId, std::span<const std::uint8_t>>> selected,
    std::span<const std::uint8_t> query, std::size_t layer) {
  std::vector<std::pair<FrameId, std::span<const std::uint8_t>>> ordered(selected.begin(),
                                                                         selected.end());
  std::sort(ordered.begin(), ordered.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  Fnv1a h;
  h.update_u64(layer);
  h.update_u64(ordered.size());
  for (const auto& [id, bytes] : ordered) {
    h.update_u64(id);
    h.update_u64(bytes.size());
    h.update(bytes);
  }
  h.update_u64(query.size());
  h.update(query);
  return detail::splitmix64(h.digest());
}

class StreamEngine {
 public:
  StreamEngine(StreamConfig cfg, std::size_t heads, std::size_t head_dim)
      : cfg_(cfg), heads_(heads), head_dim_(head_dim), store_(cfg.layers), memory_(cfg.memory) {
    if (cfg_.selection.budget < 1) throw std::invalid_argument("stream: budget must be >= 1");
  }

  const StreamConfig& config() const noexcept { return cfg_; }
  const KvStore& store() const noexcept { return store_; }
  const SpatialMemory& memory() const noexcept { return memory_; }
  std::size_t frames_processed() const noexcept { return processed_; }

  FrameLog process_frame(const TokenBlock& block, const PoseMeta& pose,
                         std::vector<Payload> payloads) {
    if (block.special_count >= block.tokens)
      throw MalformedInput("frame " + std::to_string(block.frame_id) + ": no patch tokens");
    FrameDescriptor desc;
    try {
      desc = pool_descriptor(block);
    } catch (const std::invalid_argument& e) {
      throw MalformedInput("frame " + std::to_string(block.frame_id) + ": " + e.what());
    }
    return process_frame(desc, pose, std::move(payloads));
  }

  FrameLog process_frame(const FrameDescriptor& desc, const PoseMeta& raw_pose,
                         std::vector<Payload> payloads) {
    const FrameId id = desc.frame_id;
    if (processed_ > 0 && id <= last_id_)
      throw MalformedInput("frame " + std::to_string(id) + " arrived after frame " +
                           std::to_string(last_id_));
    if (raw_pose.frame_id != id)
      throw MalformedInput("frame " + std::to_string(id) + ": pose belongs to another frame");
    const auto shape_ok = [&](const HeadMatrix& m) {
      return m.heads() == heads_ && m.dim() == head_dim_ && m.all_finite();
    };
    if (!shape_ok(desc.q_bar) || !shape_ok(desc.k_bar))
      throw MalformedInput("frame " + std::to_string(id) +
                           ": descriptor shape differs from the stream header");
    if (payloads.size() != cfg_.layers)
      throw MalformedInput("frame " + std::to_string(id) + ": expected " +
                           std::to_string(cfg_.layers) + " layer payloads");
    PoseMeta pose;
    try {
      pose = normalize_pose(raw_pose);
    } catch (const std::invalid_argument& e) {
      throw MalformedInput("frame " + std::to_string(id) + ": " + e.what());
    }

    FrameLog log;
    log.frame_id = id;

    // (2) relevance over live history, (3) selection
    auto [hist_ids, hist_keys] = store_.live_keys();
    const RelevanceProfile prof = profile(id, desc.q_bar, hist_ids, hist_keys, cfg_.scoring);
    log.selection = select(cfg_.strategy, prof, cfg_.selection);
    log.relevance.history_live = prof.scores.size();
    log.relevance.tau = log.selection.tau;
    log.relevance.segments = log.selection.segments_detected;
    for (const auto& s : prof.scores) {
      if (!log.relevance.min_score || s.score < *log.relevance.min_score)
        log.relevance.min_score = s.score;
      if (!log.relevance.max_score || s.score > *log.relevance.max_score)
        log.relevance.max_score = s.score;
    }
    check_selection(log.selection, prof);

    // (4) the layer-0 selection is reused at every layer
    std::vector<FrameId> context = log.selection.selected_ids;
    if (log.selection.anchor_id) context.insert(context.begin(), *log.selection.anchor_id);
    Fnv1a combined;
    for (std::size_t layer = 0; layer < cfg_.layers; ++layer) {
      const auto gathered = store_.gather(context, layer);
      if (gathered.size() != context.size())
        throw InvariantViolation("stream: gather size differs across layers");
      std::vector<std::pair<FrameId, std::span<const std::uint8_t>>> pairs;
      pairs.reserve(context.size());
      for (std::size_t i = 0; i < context.size(); ++i) pairs.emplace_back(context[i], gathered[i]);
      combined.update_u64(attention_replay(pairs, payloads[layer], layer));
    }
    log.replay_checksum = combined.digest();

    // (5) insert, (6) region
    store_.insert(KvEntry{id, std::move(payloads), EntryState::kLive, desc.k_bar, pose});
    log.region = memory_.record(pose);
    last_id_ = id;
    ++processed_;
    log.live_after_insert = store_.stats().live_count;
    log.bytes_after_insert = store_.stats().payload_bytes;

    // (7) periodic compression
    if (should_compress(processed_, cfg_.memory)) {
      const auto live = store_.live_ids();
      auto report = compress(memory_.assignments(live), store_.anchor_id(), cfg_.memory, id);
      store_.tombstone(report.tombstoned_ids);
      log.compression = std::move(report);
    }

    const CacheStats st = store_.stats();
    log.live_after = st.live_count;
    log.bytes_after = st.payload_bytes;
    return log;
  }

 private:
  void check_selection(const SelectionResult& sel, const RelevanceProfile& prof) const {
    const std::size_t expected = std::min(cfg_.selection.budget, prof.scores.size());
    if (sel.context_size() != expected)
      throw InvariantViolation("stream: selection of " + std::to_string(sel.context_size()) +
                               " frames, expected " + std::to_string(expected));
    if (sel.anchor_id && std::find(sel.selected_ids.begin(), sel.selected_ids.end(),
                                   *sel.anchor_id) != sel.selected_ids.end())
      throw InvariantViolation("stream: anchor selected twice");
  }

  StreamConfig cfg_;
  std::size_t heads_;
  std::size_t head_dim_;
  KvStore store_;
  SpatialMemory memory_;
  std::size_t processed_ = 0;
  FrameId last_id_ = 0;
};

/// Replays every frame of `trace` through a fresh engine.
inline StreamReport run_stream(const Trace& trace, const StreamConfig& cfg) {
  if (trace.header.layers != cfg.layers)
    throw MalformedInput("trace declares " + std::to_string(trace.header.layers) +
                         " layers, config has " + std::to_string(cfg.layers));
  StreamEngine engine(cfg, trace.header.heads, trace.header.head_dim);
  StreamReport report;
  report.config = cfg;
  report.frames.reserve(trace.frames.size());
  for (const auto& f : trace.frames) {
    if (f.payload_sizes.size() != cfg.layers)
      throw MalformedInput("frame " + std::to_string(f.frame_id) + ": payload size count " +
                           std::to_string(f.payload_sizes.size()) + " != layers");
    std::vector<Payload> payloads;
    payloads.reserve(cfg.layers);
    for (std::size_t l = 0; l < cfg.layers; ++l)
      payloads.push_back(synthesize_payload(f.frame_id, l, f.payload_sizes[l]));
    FrameLog log = engine.process_frame(FrameDescriptor{f.frame_id, f.q_bar, f.k_bar},
                                        PoseMeta{f.frame_id, f.position, f.direction},
                                        std::move(payloads));
    report.peak_live = std::max(report.peak_live, log.live_after_insert);
    report.live_timeline.push_back(log.live_after);
    report.bytes_timeline.push_back(log.bytes_after);
    report.frames.push_back(std::move(log));
  }
  report.final_stats = engine.store().stats();
  return report;
}

}  // namespace streamkv
