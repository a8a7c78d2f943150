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
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "streamkv/common.hpp"
#include "streamkv/relevance.hpp"
#include "streamkv/spatial_memory.hpp"

namespace streamkv {

using Payload = std::vector<std::uint8_t>;

enum class EntryState { kLive, kTombstoned };

struct KvEntry {
  FrameId frame_id = 0;
  std::vector<Payload> layers;
  EntryState state = EntryState::kLive;
  HeadMatrix key_descriptor;
  PoseMeta pose;

  bool live() const noexcept { return state == EntryState::kLive; }
};

struct CacheStats {
  std::size_t live_count = 0;
  std::size_t tombstoned_count = 0;
  std::size_t payload_bytes = 0;
  std::size_t peak_payload_bytes = 0;

  friend bool operator==(const CacheStats&, const CacheStats&) = default;
};

/// Append-only per-frame KV cache. Ids arrive strictly increasing and are
/// never reused. Tombstoning drops the payloads but keeps descriptor and
/// pose, so every id ever inserted stays addressable.
///
/// The first inserted frame is the anchor and cannot be tombstoned.
class KvStore {
 public:
  explicit KvStore(std::size_t layers) : layers_(layers) {
    if (layers_ == 0) throw std::invalid_argument("kv store: layer count must be >= 1");
  }

  std::size_t layers() const noexcept { return layers_; }
  std::optional<FrameId> anchor_id() const noexcept {
    if (entries_.empty()) return std::nullopt;
    return entries_.front().frame_id;
  }

  void insert(KvEntry entry) {
    if (!entries_.empty() && entry.frame_id <= entries_.back().frame_id)
      throw std::invalid_argument("kv store: frame id " + std::to_string(entry.frame_id) +
                                  " is not newer than " +
                                  std::to_string(entries_.back().frame_id));
    if (!entry.live()) throw std::invalid_argument("kv store: inserted entry must be live");
    if (entry.layers.size() != layers_)
      throw std::invalid_argument("kv store: expected " + std::to_string(layers_) +
                                  " layer payloads, got " + std::to_string(entry.layers.size()));
    for (const auto& p : entry.layers) stats_.payload_bytes += p.size();
    stats_.peak_payload_bytes = std::max(stats_.peak_payload_bytes, stats_.payload_bytes);
    ++stats_.live_count;
    entries_.push_back(std::move(entry));
  }

  /// Layer-`layer` payloads of `ids`, in ascending id order.
  std::vector<std::span<const std::uint8_t>> gather(std::span<const FrameId> ids,
                                                    std::size_t layer) const {
    if (layer >= layers_) throw std::out_of_range("kv store: layer out of range");
    std::vector<FrameId> sorted(ids.begin(), ids.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::span<const std::uint8_t>> out;
    out.reserve(sorted.size());
    for (auto id : sorted) {
      const KvEntry& e = checked(id);
      if (!e.live())
        throw InvariantViolation("kv store: gather of tombstoned frame " + std::to_string(id));
      out.emplace_back(e.layers[layer]);
    }
    return out;
  }

  /// Drops the payloads of `ids`. All-or-nothing: any unknown, already
  /// tombstoned or anchor id rejects the whole call.
  std::size_t tombstone(std::span<const FrameId> ids) {
    const auto anchor = anchor_id();
    std::vector<KvEntry*> targets;
    targets.reserve(ids.size());
    for (auto id : ids) {
      if (anchor && id == *anchor)
        throw std::invalid_argument("kv store: the anchor frame cannot be tombstoned");
      KvEntry& e = checked(id);
      if (!e.live())
        throw std::invalid_argument("kv store: frame " + std::to_string(id) +
                                    " is already tombstoned");
      if (std::find(targets.begin(), targets.end(), &e) != targets.end())
        throw std::invalid_argument("kv store: duplicate id in tombstone set");
      targets.push_back(&e);
    }
    std::size_t freed = 0;
    for (KvEntry* e : targets) {
      for (auto& p : e->layers) {
        freed += p.size();
        Payload().swap(p);
      }
      e->state = EntryState::kTombstoned;
    }
    stats_.payload_bytes -= freed;
    stats_.live_count -= targets.size();
    stats_.tombstoned_count += targets.size();
    return freed;
  }

  std::vector<FrameId> live_ids() const {
    std::vector<FrameId> out;
    out.reserve(stats_.live_count);
    for (const auto& e : entries_)
      if (e.live()) out.push_back(e.frame_id);
    return out;
  }

  /// Ids and cached key descriptors of the live frames, ascending.
  std::pair<std::vector<FrameId>, std::vector<const HeadMatrix*>> live_keys() const {
    std::pair<std::vector<FrameId>, std::vector<const HeadMatrix*>> out;
    out.first.reserve(stats_.live_count);
    out.second.reserve(stats_.live_count);
    for (const auto& e : entries_) {
      if (!e.live()) continue;
      out.first.push_back(e.frame_id);
      out.second.push_back(&e.key_descriptor);
    }
    return out;
  }

  /// Metadata access; valid for tombstoned ids too.
  const KvEntry& entry(FrameId id) const { return checked(id); }
  bool contains(FrameId id) const noexcept { return find(id) != nullptr; }
  std::size_t total_inserted() const noexcept { return entries_.size(); }

  CacheStats stats() const noexcept { return stats_; }

 private:
  const KvEntry* find(FrameId id) const noexcept {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), id,
                               [](const KvEntry& e, FrameId v) { return e.frame_id < v; });
    if (it == entries_.end() || it->frame_id != id) return nullptr;
    return &*it;
  }
  const KvEntry& checked(FrameId id) const {
    const KvEntry* e = find(id);
    if (!e) throw std::out_of_range("kv store: unknown frame " + std::to_string(id));
    return *e;
  }
  KvEntry& checked(FrameId id) {
    return const_cast<KvEntry&>(std::as_const(*this).checked(id));
  }

  std::size_t layers_;
  std::vector<KvEntry> entries_;
  CacheStats stats_;
};

}  // namespace streamkv
