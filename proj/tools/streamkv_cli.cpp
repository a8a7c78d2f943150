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
// streamkv: generate synthetic traces, replay them under a selection policy,
// and tabulate the results.
//
// Exit codes: 0 success, 1 usage error, 2 malformed input or I/O failure,
// 3 internal invariant violation.

#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "streamkv/harness/generator.hpp"
#include "streamkv/harness/metrics.hpp"
#include "streamkv/harness/run_log.hpp"
#include "streamkv/harness/trace_io.hpp"
#include "streamkv/streaming.hpp"

namespace {

using namespace streamkv;
using namespace streamkv::harness;

constexpr int kUsage = 1;
constexpr int kMalformed = 2;
constexpr int kInvariant = 3;

void write_file(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

struct GenOptions {
  std::string kind = "loop";
  std::size_t frames = 500;
  std::vector<double> extent{4.0, 1.5, 4.0};
  TrajectoryConfig cfg;
  std::string out;
};

struct ReplayOptions {
  std::string trace;
  std::size_t budget = 48;
  double w_thre = 0.3;
  std::size_t merge_gap = 3;
  std::size_t interval = 200;
  double beta = 0.5;
  int grid_k = 3;
  int dir_bins = 4;
  std::string scoring = "dot";
  std::string strategy = "segment";
  std::uint64_t seed = 0;
  std::string out;
  std::string metrics;
  std::string timeline;
  std::string occupancy;
};

StreamConfig stream_config(const ReplayOptions& o, std::size_t layers) {
  StreamConfig cfg;
  const auto strategy = parse_strategy(o.strategy);
  const auto scoring = parse_scoring(o.scoring);
  if (!strategy) throw std::invalid_argument("unknown --strategy " + o.strategy);
  if (!scoring) throw std::invalid_argument("unknown --scoring " + o.scoring);
  if (o.budget < 1) throw std::invalid_argument("--budget must be >= 1");
  cfg.strategy = *strategy;
  cfg.scoring = *scoring;
  cfg.selection = {o.budget, o.w_thre, o.merge_gap, o.seed};
  cfg.memory.grid_k = o.grid_k;
  cfg.memory.dir_bins = o.dir_bins;
  cfg.memory.beta = o.beta;
  // an interval of 0 turns compression off
  cfg.memory.enabled = o.interval > 0;
  cfg.memory.interval = o.interval > 0 ? o.interval : 1;
  cfg.memory.validate();
  cfg.layers = layers;
  return cfg;
}

int run_gen(const GenOptions& o) {
  auto kind = parse_trajectory_kind(o.kind);
  if (!kind) throw std::invalid_argument("unknown --kind " + o.kind);
  if (o.extent.size() != 3) throw std::invalid_argument("--extent takes three values");
  TrajectoryConfig cfg = o.cfg;
  cfg.kind = *kind;
  cfg.frame_count = o.frames;
  cfg.scene_extent = {o.extent[0], o.extent[1], o.extent[2]};
  write_file(o.out, serialize_trace(generate_trace(cfg)));
  return 0;
}

int run_replay(const ReplayOptions& o) {
  const Trace trace = load_trace(o.trace);
  const StreamConfig cfg = stream_config(o, trace.header.layers);
  const StreamReport report = run_stream(trace, cfg);
  const RunLog log = to_run_log(report, trace.header.trace_hash);
  write_file(o.out, serialize_run_log(log));
  const MetricsSummary m = compute_metrics(log, trace);
  if (!o.metrics.empty()) write_file(o.metrics, metrics_csv(std::span(&m, 1)));
  if (!o.timeline.empty()) write_file(o.timeline, timeline_csv(log));
  if (!o.occupancy.empty()) {
    // rebuild the region map from the logged keys of the frames still live
    std::map<RegionKey, std::size_t> hist;
    std::set<FrameId> gone;
    for (const auto& c : log.compressions) gone.insert(c.tombstoned_ids.begin(), c.tombstoned_ids.end());
    for (const auto& f : log.frames)
      if (!gone.contains(f.query_id)) ++hist[f.region];
    write_file(o.occupancy, occupancy_csv(hist));
  }
  return 0;
}

int run_compare(const std::string& trace_path, const std::vector<std::string>& runs,
                const std::string& out) {
  const Trace trace = load_trace(trace_path);
  std::vector<RunLog> logs;
  for (const auto& r : runs) logs.push_back(load_run_log(r));
  write_file(out, compare_runs(logs, trace));
  return 0;
}

int run_stats(const std::string& trace_path, const std::string& run_path, const std::string& out) {
  const Trace trace = load_trace(trace_path);
  if (run_path.empty()) {
    std::string s = "trace_hash,kind,frames,H,d_h,s,L,payload_bytes\n";
    const auto& h = trace.header;
    s += h.trace_hash + "," + h.kind + "," + std::to_string(h.frame_count) + "," +
         std::to_string(h.heads) + "," + std::to_string(h.head_dim) + "," +
         std::to_string(h.special_count) + "," + std::to_string(h.layers) + "," +
         std::to_string(h.payload_bytes) + "\n";
    write_file(out, s);
    return 0;
  }
  const RunLog log = load_run_log(run_path);
  const MetricsSummary m = compute_metrics(log, trace);
  write_file(out, metrics_csv(std::span(&m, 1)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"streamkv: bounded-memory streaming KV retrieval harness"};
  app.require_subcommand(1);

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic trace");
  gen_cmd->add_option("--kind", gen.kind, "loop | backforth | randomwalk | roomrevisit")
      ->capture_default_str();
  gen_cmd->add_option("--frames", gen.frames, "Frame count")->capture_default_str();
  gen_cmd->add_option("--seed", gen.cfg.seed, "Root seed")->capture_default_str();
  gen_cmd->add_option("--noise", gen.cfg.noise_sigma, "Descriptor noise sigma")
      ->capture_default_str();
  gen_cmd->add_option("--extent", gen.extent, "Scene extent x y z")->expected(3);
  gen_cmd->add_option("--heads", gen.cfg.heads, "Attention heads H")->capture_default_str();
  gen_cmd->add_option("--head-dim", gen.cfg.head_dim, "Head dimension d_h")
      ->capture_default_str();
  gen_cmd->add_option("--special", gen.cfg.special_count, "Special tokens per frame")
      ->capture_default_str();
  gen_cmd->add_option("--layers", gen.cfg.layers, "Aggregator layers L")->capture_default_str();
  gen_cmd->add_option("--payload-bytes", gen.cfg.payload_bytes_per_layer,
                      "Payload bytes per frame per layer")
      ->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output trace path (default stdout)");

  ReplayOptions rep;
  auto* rep_cmd = app.add_subcommand("replay", "Replay a trace under one policy");
  rep_cmd->add_option("--trace", rep.trace, "Trace file")->required();
  rep_cmd->add_option("--budget", rep.budget, "Frame budget N (anchor included)")
      ->capture_default_str();
  rep_cmd->add_option("--w-thre", rep.w_thre, "Segment threshold coefficient")
      ->capture_default_str();
  rep_cmd->add_option("--merge-gap", rep.merge_gap, "Segment merge gap")->capture_default_str();
  rep_cmd->add_option("--compress-interval", rep.interval,
                      "Frames between compression events (0 disables)")
      ->capture_default_str();
  rep_cmd->add_option("--deletion-ratio", rep.beta, "Deletion ratio beta")->capture_default_str();
  rep_cmd->add_option("--grid-k", rep.grid_k, "Spatial grid resolution K")->capture_default_str();
  rep_cmd->add_option("--dir-bins", rep.dir_bins, "Azimuth bins D")->capture_default_str();
  rep_cmd->add_option("--scoring", rep.scoring, "dot | cosine | negl2")->capture_default_str();
  rep_cmd->add_option("--strategy", rep.strategy, "segment | topk | random | uniform | window | prob")
      ->capture_default_str();
  rep_cmd->add_option("--seed", rep.seed, "Seed for the sampling baselines")
      ->capture_default_str();
  rep_cmd->add_option("--out", rep.out, "Run log path (default stdout)");
  rep_cmd->add_option("--metrics", rep.metrics, "Metrics CSV path");
  rep_cmd->add_option("--timeline", rep.timeline, "Per-frame memory timeline CSV path");
  rep_cmd->add_option("--occupancy", rep.occupancy, "Final region occupancy CSV path");

  std::string cmp_trace, cmp_out;
  std::vector<std::string> cmp_runs;
  auto* cmp_cmd = app.add_subcommand("compare", "Tabulate several runs of one trace");
  cmp_cmd->add_option("--trace", cmp_trace, "Trace the runs were produced from")->required();
  cmp_cmd->add_option("runs", cmp_runs, "Run logs")->required();
  cmp_cmd->add_option("--out", cmp_out, "Comparison CSV path (default stdout)");

  std::string st_trace, st_run, st_out;
  auto* stats_cmd = app.add_subcommand("stats", "Trace summary, or metrics recomputed from a run log");
  stats_cmd->add_option("--trace", st_trace, "Trace file")->required();
  stats_cmd->add_option("--run", st_run, "Run log");
  stats_cmd->add_option("--out", st_out, "Output CSV path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*gen_cmd) return run_gen(gen);
    if (*rep_cmd) return run_replay(rep);
    if (*cmp_cmd) return run_compare(cmp_trace, cmp_runs, cmp_out);
    if (*stats_cmd) return run_stats(st_trace, st_run, st_out);
  } catch (const MalformedInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kMalformed;
  } catch (const InvariantViolation& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInvariant;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::logic_error& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInvariant;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kMalformed;
  }
  return kUsage;
}
