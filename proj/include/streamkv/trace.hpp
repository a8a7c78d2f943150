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
// In-memory form of a recorded stream: per-frame pose, pooled descriptors
// and payload sizes. File I/O lives in harness/trace_io.hpp.
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "streamkv/common.hpp"
#include "streamkv/relevance.hpp"

namespace streamkv {

/// Parameters of the geometric ground-truth relevance carried by a trace.
struct OracleParams {
  double sigma_p = 1.0;  // position falloff, scene units
  double kappa = 2.0;    // exponent on the direction cosine

  friend bool operator==(const OracleParams&, const OracleParams&) = default;
};

struct TraceHeader {
  int version = 1;
  std::size_t heads = 0;
  std::size_t head_dim = 0;
  std::size_t special_count = 0;
  std::size_t layers = 0;
  std::size_t payload_bytes = 0;  // per layer
  std::size_t frame_count = 0;
  std::string trace_hash;
  std::string kind;
  std::uint64_t seed = 0;
  double noise_sigma = 0.0;
  OracleParams oracle;

  friend bool operator==(const TraceHeader&, const TraceHeader&) = default;
};

struct TraceFrame {
  FrameId frame_id = 0;
  Vec3 position{};
  Vec3 direction{};
  HeadMatrix q_bar;
  HeadMatrix k_bar;
  std::vector<std::size_t> payload_sizes;  // one per layer

  friend bool operator==(const TraceFrame&, const TraceFrame&) = default;
};

struct Trace {
  TraceHeader header;
  std::vector<TraceFrame> frames;

  friend bool operator==(const Trace&, const Trace&) = default;
};

/// Deterministic stand-in bytes for a frame's layer payload.
inline std::vector<std::uint8_t> synthesize_payload(FrameId frame, std::size_t layer,
                                                    std::size_t size) {
  std::vector<std::uint8_t> out(size);
  std::uint64_t state = derive_seed(frame, SeedDomain::kPayload, layer);
  for (std::size_t i = 0; i < size; ++i) {
    if (i % 8 == 0) state = detail::splitmix64(state);
    out[i] = static_cast<std::uint8_t>(state >> (8 * (i % 8)));
  }
  return out;
}

}  // namespace streamkv
