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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include "streamkv/harness/generator.hpp"
#include "streamkv/harness/metrics.hpp"
#include "streamkv/harness/oracle.hpp"
#include "streamkv/harness/run_log.hpp"
#include "streamkv/harness/trace_io.hpp"
#include "streamkv/streaming.hpp"

namespace streamkv {
namespace {

using namespace harness;

TrajectoryConfig small_cfg(TrajectoryKind kind, std::size_t frames, std::uint64_t seed = 1) {
  TrajectoryConfig c;
  c.kind = kind;
  c.frame_count = frames;
  c.seed = seed;
  c.heads = 2;
  c.head_dim = 16;
  c.layers = 3;
  c.payload_bytes_per_layer = 16;
  return c;
}

StreamConfig stream_cfg(const Trace& t, Strategy s = Strategy::kSegment) {
  StreamConfig c;
  c.layers = t.header.layers;
  c.strategy = s;
  return c;
}

std::string text_of(const RunLog& log) { return serialize_run_log(log); }

// --- streaming pipeline -----------------------------------------------------------

TEST(Stream, FirstFramesAndUnderBudgetRegime) {
  const auto trace = generate_trace(small_cfg(TrajectoryKind::kLoop, 60));
  const auto rep = run_stream(trace, stream_cfg(trace));
  ASSERT_EQ(rep.frames.size(), 60u);
  EXPECT_FALSE(rep.frames[0].selection.anchor_id);
  EXPECT_EQ(rep.frames[0].selection.context_size(), 0u);
  EXPECT_EQ(rep.frames[0].live_after, 1u);
  for (std::size_t t = 1; t <= 48; ++t) {
    EXPECT_EQ(rep.frames[t].selection.context_size(), t);
    EXPECT_TRUE(rep.frames[t].selection.short_circuit);
  }
  EXPECT_EQ(rep.frames[59].selection.context_size(), 48u);
}

TEST(Stream, ShortStreamHasNoCompression) {
  const auto trace = generate_trace(small_cfg(TrajectoryKind::kLoop, 10));
  const auto rep = run_stream(trace, stream_cfg(trace));
  EXPECT_EQ(rep.frames.size(), 10u);
  for (const auto& f : rep.frames) EXPECT_FALSE(f.compression);
}

TEST(Stream, CompressionFiresOnTheIntervalAndTakesEffectNextFrame) {
  const auto trace = generate_trace(small_cfg(TrajectoryKind::kRoomRevisit, 450));
  const auto rep = run_stream(trace, stream_cfg(trace));
  for (std::size_t t = 0; t < rep.frames.size(); ++t)
    EXPECT_EQ(rep.frames[t].compression.has_value(), t == 199 || t == 399) << t;
  const auto& f = rep.frames[199];
  EXPECT_LT(f.live_after, f.live_after_insert);
  EXPECT_EQ(rep.frames[200].relevance.history_live, f.live_after);
  const auto& c = *f.compression;
  std::size_t removed = 0;
  for (const auto& r : c.thinned_regions) {
    EXPECT_EQ(r.after, retained_count(r.before, 0.5));
    removed += r.before - r.after;
  }
  EXPECT_EQ(removed, c.tombstoned_ids.size());
}

TEST(Stream, RevisitHeavyStreamStaysBelowItsLength) {
  TrajectoryConfig cfg = small_cfg(TrajectoryKind::kRoomRevisit, 500);
  const auto trace = generate_trace(cfg);
  const auto rep = run_stream(trace, stream_cfg(trace));
  EXPECT_LT(rep.final_stats.live_count, 500u);
  EXPECT_LT(rep.peak_live, 500u);
}

TEST(Stream, SelectedFramesAreAlwaysLiveAndBudgetIsExact) {
  const auto trace = generate_trace(small_cfg(TrajectoryKind::kRandomWalk, 700, 4));
  for (auto st : kAllStrategies) {
    auto cfg = stream_cfg(trace, st);
    cfg.memory.interval = 50;
    const auto rep = run_stream(trace, cfg);
    std::set<FrameId> live;
    for (const auto& f : rep.frames) {
      ASSERT_EQ(f.selection.context_size(), std::min<std::size_t>(48, live.size()));
      for (auto id : f.selection.selected_ids) ASSERT_TRUE(live.contains(id));
      if (f.selection.anchor_id) {
        ASSERT_EQ(*f.selection.anchor_id, 0u);
      }
      live.insert(f.frame_id);
      if (f.compression)
        for (auto id : f.compression->tombstoned_ids) live.erase(id);
      ASSERT_EQ(live.size(), f.live_after);
    }
  }
}

TEST(Stream, CompressionLowersPeakMemory) {
  const auto trace = generate_trace(small_cfg(TrajectoryKind::kRoomRevisit, 1000, 3));
  auto on = stream_cfg(trace);
  auto off = on;
  off.memory.enabled = false;
  const auto a = run_stream(trace, on), b = run_stream(trace, off);
  EXPECT_LT(a.final_stats.peak_payload_bytes, b.final_stats.peak_payload_bytes);
  EXPECT_EQ(b.peak_live, 1000u);
}

TEST(Stream, PeakMemoryGrowsSublinearlyWithStreamLength) {
  auto cfg = small_cfg(TrajectoryKind::kRoomRevisit, 2000, 5);
  const auto long_trace = generate_trace(cfg);
  cfg.frame_count = 200;
  const auto short_trace = generate_trace(cfg);
  const auto sc = stream_cfg(long_trace);
  const double ratio =
      static_cast<double>(run_stream(long_trace, sc).final_stats.peak_payload_bytes) /
      static_cast<double>(run_stream(short_trace, sc).final_stats.peak_payload_bytes);
  EXPECT_LT(ratio, 10.0);  // uncompressed peak grows exactly 10x
}

TEST(Stream, DeterministicReplay) {
  const auto trace = generate_trace(small_cfg(TrajectoryKind::kBackAndForth, 300));
  for (auto st : {Strategy::kSegment, Strategy::kRandom, Strategy::kProbabilistic}) {
    auto cfg = stream_cfg(trace, st);
    cfg.selection.seed = 99;
    const auto a = to_run_log(run_stream(trace, cfg), trace.header.trace_hash);
    const auto b = to_run_log(run_stream(trace, cfg), trace.header.trace_hash);
    EXPECT_EQ(text_of(a), text_of(b));
  }
}

TEST(Stream, TokenBlockPathMatchesDescriptorPath) {
  StreamConfig cfg;
  cfg.layers = 1;
  StreamEngine a(cfg, 1, 2), b(cfg, 1, 2);
  for (FrameId id = 0; id < 5; ++id) {
    TokenBlock blk{id, 1, 3, 2, 1, {}, {}};
    const double v = static_cast<double>(id);
    blk.queries = {9, 9, v, 1, v + 2, 1};
    blk.keys = {7, 7, 1, v, 1, v + 2};
    const PoseMeta pose{id, {v, 0, 0}, {1, 0, 0}};
    const auto la = a.process_frame(blk, pose, {Payload(4, 1)});
    const auto lb = b.process_frame(pool_descriptor(blk), pose, {Payload(4, 1)});
    EXPECT_EQ(la.selection.selected_ids, lb.selection.selected_ids);
    EXPECT_EQ(la.replay_checksum, lb.replay_checksum);
  }
}

TEST(Stream, MalformedFramesAreRejected) {
  StreamConfig cfg;
  cfg.layers = 2;
  StreamEngine e(cfg, 1, 2);
  const HeadMatrix m(1, 2, {1, 0});
  const PoseMeta pose{3, {0, 0, 0}, {1, 0, 0}};
  e.process_frame(FrameDescriptor{3, m, m}, pose, {Payload(1), Payload(1)});
  // out of order
  EXPECT_THROW(e.process_frame(FrameDescriptor{3, m, m}, pose, {Payload(1), Payload(1)}),
               MalformedInput);
  // wrong shape
  const HeadMatrix wide(1, 3);
  EXPECT_THROW(e.process_frame(FrameDescriptor{4, wide, wide}, {4, {}, {1, 0, 0}},
                               {Payload(1), Payload(1)}),
               MalformedInput);
  // wrong payload count
  EXPECT_THROW(e.process_frame(FrameDescriptor{4, m, m}, {4, {}, {1, 0, 0}}, {Payload(1)}),
               MalformedInput);
  // zero direction
  EXPECT_THROW(e.process_frame(FrameDescriptor{4, m, m}, {4, {}, {0, 0, 0}},
                               {Payload(1), Payload(1)}),
               MalformedInput);
  EXPECT_EQ(e.frames_processed(), 1u);

  const auto trace = generate_trace(small_cfg(TrajectoryKind::kLoop, 5));
  StreamConfig wrong;
  wrong.layers = trace.header.layers + 1;
  EXPECT_THROW(run_stream(trace, wrong), MalformedInput);
}

// --- replay checksum -----------------------------------------------------------------

TEST(Checksum, DeterministicAndOrderCanonical) {
  const Payload a(8, 1), b(8, 2), q(4, 9);
  std::vector<std::pair<FrameId, std::span<const std::uint8_t>>> x{{1, a}, {5, b}};
  std::vector<std::pair<FrameId, std::span<const std::uint8_t>>> y{{5, b}, {1, a}};
  EXPECT_EQ(attention_replay(x, q, 0), attention_replay(x, q, 0));
  EXPECT_EQ(attention_replay(x, q, 0), attention_replay(y, q, 0));
  EXPECT_NE(attention_replay(x, q, 0), attention_replay(x, q, 1));
}

TEST(Checksum, DistinctIdSetsDoNotCollide) {
  std::mt19937_64 rng(31);
  std::vector<Payload> store;
  for (FrameId i = 0; i < 200; ++i) store.push_back(synthesize_payload(i, 0, 16));
  const Payload q = synthesize_payload(999, 0, 16);
  auto pick = [&] {
    std::set<FrameId> ids;
    const std::size_t n = 1 + rng() % 20;
    while (ids.size() < n) ids.insert(rng() % store.size());
    return ids;
  };
  auto sum = [&](const std::set<FrameId>& ids) {
    std::vector<std::pair<FrameId, std::span<const std::uint8_t>>> v;
    for (auto id : ids) v.emplace_back(id, store[id]);
    return attention_replay(v, q, 0);
  };
  int compared = 0;
  while (compared < 1000) {
    const auto s1 = pick(), s2 = pick();
    if (s1 == s2) continue;
    ASSERT_NE(sum(s1), sum(s2));
    ++compared;
  }
}

// --- oracle and generator ------------------------------------------------------------

TEST(Oracle, SymmetricBoundedAndSelfIdentical) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0, 2);
  const OracleParams p;
  for (int t = 0; t < 10000; ++t) {
    Vec3 pa{n(rng), n(rng), n(rng)}, pb{n(rng), n(rng), n(rng)};
    Vec3 da{n(rng), n(rng), n(rng)}, db{n(rng), n(rng), n(rng)};
    const double ab = oracle_relevance(pa, da, pb, db, p);
    ASSERT_EQ(ab, oracle_relevance(pb, db, pa, da, p));
    ASSERT_GE(ab, 0.0);
    ASSERT_LE(ab, 1.0);
    ASSERT_EQ(oracle_relevance(pa, da, pa, da, p), 1.0);
  }
}

TEST(Oracle, MonotoneInDistanceAndAngle) {
  const OracleParams p;
  const Vec3 o{0, 0, 0}, d{1, 0, 0};
  double prev = 1.0;
  for (int i = 1; i <= 50; ++i) {
    const double v = oracle_relevance(o, d, {0.1 * i, 0, 0}, d, p);
    ASSERT_LE(v, prev);
    prev = v;
  }
  prev = 1.0;
  for (int i = 1; i <= 50; ++i) {
    const double a = 0.06 * i;
    const double v = oracle_relevance(o, d, o, {std::cos(a), 0, std::sin(a)}, p);
    ASSERT_LE(v, prev);
    prev = v;
  }
}

TEST(Generator, DeterministicBytes) {
  const auto cfg = small_cfg(TrajectoryKind::kRandomWalk, 120, 42);
  EXPECT_EQ(serialize_trace(generate_trace(cfg)), serialize_trace(generate_trace(cfg)));
  auto other = cfg;
  other.seed = 43;
  EXPECT_NE(generate_trace(cfg).header.trace_hash, generate_trace(other).header.trace_hash);
}

TEST(Generator, NoiselessIdenticalPosesGiveIdenticalDescriptors) {
  auto cfg = small_cfg(TrajectoryKind::kLoop, 1);
  cfg.noise_sigma = 0.0;
  const std::vector<PoseMeta> poses{{0, {1, 0, 1}, {0, 0, 1}}, {1, {1, 0, 1}, {0, 0, 2}}};
  const auto t = trace_from_poses(poses, cfg);
  EXPECT_EQ(t.frames[0].q_bar, t.frames[1].q_bar);
  EXPECT_EQ(t.frames[0].k_bar, t.frames[1].k_bar);
}

TEST(Generator, RejectsBadConfigs) {
  auto cfg = small_cfg(TrajectoryKind::kLoop, 10);
  cfg.scene_extent = {4, 0, 4};
  EXPECT_THROW(generate_trace(cfg), std::invalid_argument);
  cfg = small_cfg(TrajectoryKind::kLoop, 0);
  EXPECT_THROW(generate_trace(cfg), std::invalid_argument);
}

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = (i + j) / 2.0;
    i = j + 1;
  }
  return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double num = 0, da = 0, db = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    da += (ra[i] - ma) * (ra[i] - ma);
    db += (rb[i] - mb) * (rb[i] - mb);
  }
  return num / std::sqrt(da * db);
}

TEST(Generator, LoopRelevanceTracksOracle) {
  TrajectoryConfig cfg;  // full-size descriptors
  cfg.kind = TrajectoryKind::kLoop;
  cfg.frame_count = 500;
  const auto t = generate_trace(cfg);
  std::vector<double> dot, oracle;
  for (std::size_t i = 0; i < t.frames.size(); ++i)
    for (std::size_t j = 0; j < i; ++j) {
      dot.push_back(score(t.frames[i].q_bar, t.frames[j].k_bar, Scoring::kRawDot));
      oracle.push_back(oracle_relevance(t.frames[i], t.frames[j], t.header.oracle));
    }
  EXPECT_GT(spearman(dot, oracle), 0.8);
}

// --- trace and run-log files ----------------------------------------------------------

TEST(TraceIo, RoundTrip) {
  for (auto kind : {TrajectoryKind::kLoop, TrajectoryKind::kBackAndForth,
                    TrajectoryKind::kRandomWalk, TrajectoryKind::kRoomRevisit}) {
    const auto t = generate_trace(small_cfg(kind, 80));
    const auto text = serialize_trace(t);
    const auto back = parse_trace(text);
    EXPECT_EQ(back, t);
    EXPECT_EQ(serialize_trace(back), text);
  }
}

std::string replace_line(const std::string& text, std::size_t line, const std::string& with) {
  std::istringstream in(text);
  std::string out, l;
  for (std::size_t n = 1; std::getline(in, l); ++n) out += (n == line ? with : l) + "\n";
  return out;
}

void expect_malformed(const std::string& text, const std::string& needle) {
  try {
    parse_trace(text);
    ADD_FAILURE() << "accepted: " << needle;
  } catch (const MalformedInput& e) {
    EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
  }
}

TEST(TraceIo, ErrorsNameTheLine) {
  const auto t = generate_trace(small_cfg(TrajectoryKind::kLoop, 5));
  const auto text = serialize_trace(t);
  expect_malformed(replace_line(text, 3, "{not json"), "line 3");

  auto bad = t;
  bad.frames[2].q_bar = HeadMatrix(1, 1);
  expect_malformed(replace_line(text, 4, frame_line(bad.frames[2])), "line 4");

  bad = t;
  bad.frames[1].position[0] += 1.0;  // hash no longer matches
  expect_malformed(replace_line(text, 3, frame_line(bad.frames[1])), "hash");

  bad = t;
  bad.header.frame_count = 9;
  expect_malformed(replace_line(text, 1, header_line(bad.header)), "frame");

  bad = t;
  bad.frames[3].frame_id = 1;
  expect_malformed(replace_line(text, 5, frame_line(bad.frames[3])), "line 5");
  EXPECT_THROW(load_trace("/nonexistent/trace.jsonl"), MalformedInput);
}

TEST(RunLogIo, RoundTripAndMetricsPurity) {
  const auto trace = generate_trace(small_cfg(TrajectoryKind::kRoomRevisit, 450, 2));
  auto cfg = stream_cfg(trace);
  const auto log = to_run_log(run_stream(trace, cfg), trace.header.trace_hash);
  const auto text = text_of(log);
  const auto back = parse_run_log(text);
  EXPECT_EQ(text_of(back), text);
  const auto m1 = compute_metrics(log, trace), m2 = compute_metrics(back, trace);
  EXPECT_EQ(metrics_csv_row(m1), metrics_csv_row(m2));
  EXPECT_EQ(m1.compression_events, 2u);
  EXPECT_LE(m1.max_context, 48u);
  EXPECT_GE(m1.mean_coverage, 0.0);
  EXPECT_LE(m1.mean_coverage, 1.0);
  EXPECT_GE(m1.recall_at_n, 0.0);
  EXPECT_LE(m1.recall_at_n, 1.0);
}

TEST(RunLogIo, RejectsCorruptLogs) {
  EXPECT_THROW(parse_run_log(""), MalformedInput);
  EXPECT_THROW(parse_run_log("{\"type\":\"selection\"}\n"), MalformedInput);
  const auto trace = generate_trace(small_cfg(TrajectoryKind::kLoop, 5));
  const auto log = to_run_log(run_stream(trace, stream_cfg(trace)), trace.header.trace_hash);
  try {
    parse_run_log(replace_line(text_of(log), 3, "[1,2"));
    ADD_FAILURE();
  } catch (const MalformedInput& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
  auto other = trace;
  other.header.trace_hash = "0000000000000000";
  EXPECT_THROW(compute_metrics(log, other), MalformedInput);
}

// --- metrics and comparison -------------------------------------------------------------

TEST(Metrics, TwoPeakTraceSeparatesSegmentFromTopK) {
  RevisitConfig rc;
  rc.visits = 2;
  rc.dominant = 0;
  auto cfg = small_cfg(TrajectoryKind::kLoop, 1);
  cfg.heads = 8;
  cfg.head_dim = 32;
  const auto trace = trace_from_poses(revisit_poses(rc), cfg, "twopeak");
  auto sc = stream_cfg(trace);
  sc.memory.enabled = false;
  const auto seg = to_run_log(run_stream(trace, sc), trace.header.trace_hash);
  sc.strategy = Strategy::kTopK;
  const auto top = to_run_log(run_stream(trace, sc), trace.header.trace_hash);
  for (const auto& f : seg.frames) {
    const auto c = segment_coverage(f);
    if (c && f.segments.size() <= 47) {
      ASSERT_EQ(*c, 1.0) << f.query_id;
    }
  }
  const auto last = segment_coverage(top.frames.back());
  ASSERT_TRUE(last);
  EXPECT_LT(*last, 1.0);
  EXPECT_EQ(*segment_coverage(seg.frames.back()), 1.0);
}

TEST(Metrics, CompareTabulatesEveryPolicy) {
  const auto trace = trace_from_poses(revisit_poses({}), small_cfg(TrajectoryKind::kLoop, 1),
                                      "multipeak");
  std::vector<RunLog> logs;
  for (auto st : kAllStrategies) {
    auto sc = stream_cfg(trace, st);
    logs.push_back(to_run_log(run_stream(trace, sc), trace.header.trace_hash));
  }
  const auto csv = compare_runs(logs, trace);
  std::istringstream in(csv);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  ASSERT_EQ(lines.size(), 7u);
  EXPECT_EQ(lines[0], kMetricsCsvHeader);
  for (std::size_t i = 0; i < kAllStrategies.size(); ++i)
    EXPECT_EQ(lines[i + 1].substr(0, lines[i + 1].find(',')), to_string(kAllStrategies[i]));

  const auto seg = compute_metrics(logs[0], trace), top = compute_metrics(logs[1], trace);
  EXPECT_GT(seg.mean_coverage, top.mean_coverage);

  const std::vector<RunLog> twice{logs[0], logs[0]};
  const auto c2 = compare_runs(twice, trace);
  std::istringstream in2(c2);
  std::string h, r1, r2;
  std::getline(in2, h);
  std::getline(in2, r1);
  std::getline(in2, r2);
  EXPECT_EQ(r1, r2);

  auto foreign = logs[0];
  foreign.header.trace_hash = "ffffffffffffffff";
  const std::vector<RunLog> mixed{logs[0], foreign};
  EXPECT_THROW(compare_runs(mixed, trace), MalformedInput);
}

std::string golden(const std::string& name) {
  std::ifstream in(std::string(STREAMKV_GOLDEN_DIR) + "/" + name);
  std::string line;
  std::getline(in, line);
  return line;
}

TEST(Golden, CsvHeadersAreFrozen) {
  EXPECT_EQ(golden("metrics_header.csv"), kMetricsCsvHeader);
  RunLog empty;
  const auto tl = timeline_csv(empty);
  EXPECT_EQ(golden("timeline_header.csv") + "\n", tl);
  EXPECT_EQ(golden("occupancy_header.csv") + "\n", occupancy_csv({}));
}

}  // namespace
}  // namespace streamkv
