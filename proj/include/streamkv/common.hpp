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

#include <array>
#include <charconv>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>

namespace streamkv {

using FrameId = std::uint64_t;
using Vec3 = std::array<double, 3>;

/// Input that cannot be parsed or violates a stream-level contract
/// (trace header mismatch, out-of-order frame, bad shapes).
class MalformedInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Internal consistency check failed. Always a bug in the caller or in this
/// library, never a property of the input data.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

namespace detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Random streams used across the project. Each gets its own sub-seed so the
/// trajectory, projection, noise and baseline draws never share state.
enum class SeedDomain : std::uint64_t {
  kTrajectory = 1,
  kProjection = 2,
  kDescriptorNoise = 3,
  kBaselineSampling = 4,
  kPayload = 5,
};

/// Counter-based seed splitting: (root, domain, counter) -> independent seed.
inline constexpr std::uint64_t derive_seed(std::uint64_t root, SeedDomain domain,
                                           std::uint64_t counter = 0) noexcept {
  std::uint64_t h = detail::splitmix64(root);
  h = detail::splitmix64(h ^ static_cast<std::uint64_t>(domain));
  return detail::splitmix64(h ^ counter);
}

/// 64-bit FNV-1a. Used for trace hashes and replay checksums.
class Fnv1a {
 public:
  void update(std::span<const std::uint8_t> bytes) noexcept {
    for (auto b : bytes) {
      state_ ^= b;
      state_ *= 0x100000001b3ULL;
    }
  }
  void update(std::string_view s) noexcept {
    update(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
  }
  void update_u64(std::uint64_t v) noexcept {
    std::array<std::uint8_t, 8> b{};
    for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
    update(b);
  }
  std::uint64_t digest() const noexcept { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::string to_hex(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[v & 0xf];
    v >>= 4;
  }
  return out;
}

/// Shortest round-trip decimal representation of a double.
inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) throw InvariantViolation("format_double: to_chars failed");
  return std::string(buf.data(), ptr);
}

}  // namespace streamkv
