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
// Frame-level descriptors and query/key relevance scoring.
#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "streamkv/common.hpp"

namespace streamkv {

/// Dense heads x dim matrix, row-major. One row per attention head.
class HeadMatrix {
 public:
  HeadMatrix() = default;
  HeadMatrix(std::size_t heads, std::size_t dim)
      : heads_(heads), dim_(dim), data_(heads * dim, 0.0) {}
  HeadMatrix(std::size_t heads, std::size_t dim, std::vector<double> data)
      : heads_(heads), dim_(dim), data_(std::move(data)) {
    if (data_.size() != heads_ * dim_)
      throw std::invalid_argument("HeadMatrix: data size does not match heads*dim");
  }

  std::size_t heads() const noexcept { return heads_; }
  std::size_t dim() const noexcept { return dim_; }

  std::span<const double> row(std::size_t h) const noexcept {
    return {data_.data() + h * dim_, dim_};
  }
  std::span<double> row(std::size_t h) noexcept { return {data_.data() + h * dim_, dim_}; }
  double& at(std::size_t h, std::size_t d) noexcept { return data_[h * dim_ + d]; }
  double at(std::size_t h, std::size_t d) const noexcept { return data_[h * dim_ + d]; }

  std::span<const double> flat() const noexcept { return data_; }
  std::span<double> flat() noexcept { return data_; }

  bool same_shape(const HeadMatrix& o) const noexcept {
    return heads_ == o.heads_ && dim_ == o.dim_;
  }
  bool all_finite() const noexcept {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const HeadMatrix&, const HeadMatrix&) = default;

 private:
  std::size_t heads_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

/// Per-frame query and key projections at the first global attention layer:
/// H heads x P tokens x d_h, with the first `special_count` tokens being
/// camera/register tokens rather than image patches.
struct TokenBlock {
  FrameId frame_id = 0;
  std::size_t heads = 0;
  std::size_t tokens = 0;
  std::size_t head_dim = 0;
  std::size_t special_count = 0;
  std::vector<double> queries;  // [heads][tokens][head_dim]
  std::vector<double> keys;     // same layout

  double query(std::size_t h, std::size_t j, std::size_t d) const noexcept {
    return queries[(h * tokens + j) * head_dim + d];
  }
  double key(std::size_t h, std::size_t j, std::size_t d) const noexcept {
    return keys[(h * tokens + j) * head_dim + d];
  }
};

struct FrameDescriptor {
  FrameId frame_id = 0;
  HeadMatrix q_bar;
  HeadMatrix k_bar;
};

enum class Scoring { kRawDot, kCosine, kNegL2 };

inline std::string_view to_string(Scoring s) noexcept {
  switch (s) {
    case Scoring::kRawDot: return "dot";
    case Scoring::kCosine: return "cosine";
    case Scoring::kNegL2: return "negl2";
  }
  return "dot";
}

inline std::optional<Scoring> parse_scoring(std::string_view s) noexcept {
  if (s == "dot") return Scoring::kRawDot;
  if (s == "cosine") return Scoring::kCosine;
  if (s == "negl2") return Scoring::kNegL2;
  return std::nullopt;
}

struct ScoredFrame {
  FrameId frame_id = 0;
  double score = 0.0;

  friend bool operator==(const ScoredFrame&, const ScoredFrame&) = default;
};

struct RelevanceProfile {
  FrameId query_frame_id = 0;
  std::vector<ScoredFrame> scores;
  Scoring scoring = Scoring::kRawDot;
};

/// Mean-pools the patch tokens (indices s..P-1, zero-based) of each head into
/// frame-level query and key descriptors. Special tokens are never read.
inline FrameDescriptor pool_descriptor(const TokenBlock& block) {
  if (block.heads == 0 || block.head_dim == 0)
    throw std::invalid_argument("pool_descriptor: heads and head_dim must be >= 1");
  if (block.tokens <= block.special_count)
    throw std::invalid_argument("pool_descriptor: block has no patch tokens (P <= s)");
  const std::size_t expected = block.heads * block.tokens * block.head_dim;
  if (block.queries.size() != expected || block.keys.size() != expected)
    throw std::invalid_argument("pool_descriptor: tensor size does not match H*P*d_h");

  FrameDescriptor out{block.frame_id, HeadMatrix(block.heads, block.head_dim),
                      HeadMatrix(block.heads, block.head_dim)};
  const double patches = static_cast<double>(block.tokens - block.special_count);
  for (std::size_t h = 0; h < block.heads; ++h) {
    for (std::size_t j = block.special_count; j < block.tokens; ++j) {
      for (std::size_t d = 0; d < block.head_dim; ++d) {
        out.q_bar.at(h, d) += block.query(h, j, d);
        out.k_bar.at(h, d) += block.key(h, j, d);
      }
    }
    for (std::size_t d = 0; d < block.head_dim; ++d) {
      out.q_bar.at(h, d) /= patches;
      out.k_bar.at(h, d) /= patches;
    }
  }
  if (!out.q_bar.all_finite() || !out.k_bar.all_finite())
    throw std::invalid_argument("pool_descriptor: non-finite token values");
  return out;
}

/// Relevance between a query descriptor and a cached key descriptor.
///
/// RawDot is the head-averaged inner product. Cosine normalizes the
/// head-summed inner product by the head-summed norms, and is 0 when either
/// side has zero norm. NegL2 is the negated RMS-over-heads distance.
/// All sums run heads outer, dimensions inner.
inline double score(const HeadMatrix& q, const HeadMatrix& k, Scoring f) {
  if (!q.same_shape(k)) throw std::invalid_argument("score: descriptor shapes differ");
  if (q.heads() == 0) throw std::invalid_argument("score: empty descriptor");
  const std::size_t heads = q.heads();
  const std::size_t dim = q.dim();

  switch (f) {
    case Scoring::kRawDot: {
      double sum = 0.0;
      for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t d = 0; d < dim; ++d) sum += q.at(h, d) * k.at(h, d);
      return sum / static_cast<double>(heads);
    }
    case Scoring::kCosine: {
      double dot = 0.0, qq = 0.0, kk = 0.0;
      for (std::size_t h = 0; h < heads; ++h) {
        for (std::size_t d = 0; d < dim; ++d) {
          dot += q.at(h, d) * k.at(h, d);
          qq += q.at(h, d) * q.at(h, d);
          kk += k.at(h, d) * k.at(h, d);
        }
      }
      if (qq == 0.0 || kk == 0.0) return 0.0;
      return dot / (std::sqrt(qq) * std::sqrt(kk));
    }
    case Scoring::kNegL2: {
      double sum = 0.0;
      for (std::size_t h = 0; h < heads; ++h) {
        for (std::size_t d = 0; d < dim; ++d) {
          const double diff = q.at(h, d) - k.at(h, d);
          sum += diff * diff;
        }
      }
      return -std::sqrt(sum / static_cast<double>(heads));
    }
  }
  throw std::invalid_argument("score: unknown scoring function");
}

/// Scores `query` against every history frame. `history` must be sorted by
/// strictly increasing id, all older than the query, and hold live frames only.
inline RelevanceProfile profile(FrameId query_id, const HeadMatrix& query_q_bar,
                                std::span<const FrameId> history_ids,
                                std::span<const HeadMatrix* const> history_keys,
                                Scoring f) {
  if (history_ids.size() != history_keys.size())
    throw std::invalid_argument("profile: id and key counts differ");
  RelevanceProfile out{query_id, {}, f};
  out.scores.reserve(history_ids.size());
  for (std::size_t i = 0; i < history_ids.size(); ++i) {
    if (i > 0 && history_ids[i] <= history_ids[i - 1])
      throw std::invalid_argument("profile: history ids must be strictly increasing");
    if (history_ids[i] >= query_id)
      throw std::invalid_argument("profile: history frame is not older than the query");
    const double s = score(query_q_bar, *history_keys[i], f);
    if (!std::isfinite(s)) throw std::invalid_argument("profile: non-finite score");
    out.scores.push_back({history_ids[i], s});
  }
  return out;
}

inline RelevanceProfile profile(const FrameDescriptor& query,
                                std::span<const FrameDescriptor> history, Scoring f) {
  std::vector<FrameId> ids;
  std::vector<const HeadMatrix*> keys;
  ids.reserve(history.size());
  keys.reserve(history.size());
  for (const auto& d : history) {
    ids.push_back(d.frame_id);
    keys.push_back(&d.k_bar);
  }
  return profile(query.frame_id, query.q_bar, ids, keys, f);
}

}  // namespace streamkv
