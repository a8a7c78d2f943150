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
// Brute-force reference implementations and random input generators used by
// the unit and acceptance suites. These deliberately take a different route
// from the library code (union-find over above-threshold frames, repeated
// argmax instead of sorting, long double shares) so that agreement means
// something.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <random>
#include <vector>

#include "streamkv/relevance.hpp"
#include "streamkv/selection.hpp"

namespace streamkv::testing {

struct RefSegment {
  std::size_t start, end, peak;
  double peak_score;
  bool operator==(const RefSegment&) const = default;
};

/// Segments by connecting above-threshold frames whose gap is below delta
/// (adjacent frames always connect), then taking each component's hull.
inline std::vector<RefSegment> ref_segments(const std::vector<double>& s, double tau,
                                            std::size_t delta) {
  std::vector<std::size_t> above;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s[i] > tau) above.push_back(i);
  std::vector<std::size_t> parent(above.size());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x];
    return x;
  };
  for (std::size_t a = 0; a + 1 < above.size(); ++a) {
    const std::size_t between = above[a + 1] - above[a] - 1;
    if (between == 0 || between < delta) parent[find(a + 1)] = find(a);
  }
  std::vector<RefSegment> out;
  for (std::size_t a = 0; a < above.size(); ++a) {
    if (find(a) != a) continue;
    std::size_t lo = above[a], hi = above[a];
    for (std::size_t b = 0; b < above.size(); ++b)
      if (find(b) == a) hi = std::max(hi, above[b]), lo = std::min(lo, above[b]);
    RefSegment seg{lo, hi, lo, s[lo]};
    for (std::size_t i = lo; i <= hi; ++i)
      if (s[i] > seg.peak_score || (s[i] == seg.peak_score && i > seg.peak))
        seg.peak = i, seg.peak_score = s[i];
    out.push_back(seg);
  }
  std::sort(out.begin(), out.end(), [](auto& x, auto& y) { return x.start < y.start; });
  return out;
}

inline std::vector<std::size_t> ref_quotas(const std::vector<RefSegment>& segs,
                                           std::size_t n_sel) {
  long double total = 0;
  for (const auto& g : segs) total += g.peak_score;
  std::vector<std::size_t> q;
  for (const auto& g : segs) {
    long long raw;
    if (total > 0) {
      const long double share = static_cast<long double>(n_sel) * g.peak_score / total;
      const long double near = std::round(share);
      raw = std::fabs(share - near) <= 1e-9L * std::max<long double>(1, std::fabs(share))
                ? static_cast<long long>(near)
                : static_cast<long long>(std::floor(share));
    } else {
      raw = static_cast<long long>(n_sel / segs.size());
    }
    const long long len = static_cast<long long>(g.end - g.start + 1);
    q.push_back(static_cast<std::size_t>(raw < 1 ? 1 : (raw > len ? len : raw)));
  }
  return q;
}

/// Index of the best remaining candidate: highest score, latest on ties.
inline std::size_t ref_argmax(const std::vector<std::size_t>& cand, const std::vector<double>& s) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < cand.size(); ++i) {
    const auto a = cand[i], b = cand[best];
    if (s[a] > s[b] || (s[a] == s[b] && a > b)) best = i;
  }
  return best;
}

inline std::vector<std::size_t> ref_adjust(std::vector<std::size_t> f_seg,
                                           const std::vector<double>& s, std::size_t n_sel) {
  std::vector<std::size_t> out;
  if (f_seg.size() >= n_sel) {
    while (out.size() < n_sel) {
      const auto i = ref_argmax(f_seg, s);
      out.push_back(f_seg[i]);
      f_seg.erase(f_seg.begin() + static_cast<std::ptrdiff_t>(i));
    }
  } else {
    out = f_seg;
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (std::find(f_seg.begin(), f_seg.end(), i) == f_seg.end()) rest.push_back(i);
    while (out.size() < n_sel && !rest.empty()) {
      const auto i = ref_argmax(rest, s);
      out.push_back(rest[i]);
      rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(i));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Random score profile of length 1..max_len drawn from one of several
/// shapes: continuous noise, smooth bumps, heavily quantized (many ties),
/// constant, and all-negative.
inline std::vector<double> random_scores(std::mt19937_64& rng, std::size_t max_len) {
  const std::size_t n = std::uniform_int_distribution<std::size_t>(1, max_len)(rng);
  std::vector<double> s(n);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  switch (std::uniform_int_distribution<int>(0, 4)(rng)) {
    case 0:
      for (auto& x : s) x = u(rng);
      break;
    case 1: {
      const int bumps = std::uniform_int_distribution<int>(1, 8)(rng);
      std::vector<double> c(bumps), h(bumps);
      for (int b = 0; b < bumps; ++b) c[b] = (u(rng) + 1) / 2 * n, h[b] = (u(rng) + 1.5);
      for (std::size_t i = 0; i < n; ++i) {
        s[i] = 0.05 * u(rng);
        for (int b = 0; b < bumps; ++b) s[i] += h[b] * std::exp(-std::pow((i - c[b]) / 2.0, 2));
      }
      break;
    }
    case 2:
      for (auto& x : s) x = std::uniform_int_distribution<int>(0, 4)(rng) * 0.25;
      break;
    case 3:
      std::fill(s.begin(), s.end(), u(rng));
      break;
    default:
      for (auto& x : s) x = -std::fabs(u(rng)) - 0.01;
      break;
  }
  return s;
}

inline HeadMatrix random_matrix(std::mt19937_64& rng, std::size_t heads, std::size_t dim,
                                double sigma = 1.0) {
  std::normal_distribution<double> g(0.0, sigma);
  HeadMatrix m(heads, dim);
  for (auto& v : m.flat()) v = g(rng);
  return m;
}

}  // namespace streamkv::testing
