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
// Run logs (JSON Lines). The first line describes the run; then, per frame,
// one "selection" record, followed by a "compression" record whenever that
// frame triggered one.
//
//   {"type":"run","version":1,"trace_hash","strategy","scoring","budget",
//    "w_thre","merge_gap","seed","compress","interval","beta","grid_k",
//    "dir_bins","layers"}
//   {"type":"selection","query_id","strategy","anchor_id"|null,"selected":[ids],
//    "tau"|null,"M","segments":[[start_id,end_id,peak_id,peak_score]...],
//    "quotas":[...],"pre_truncation":[ids],"history_live","min_score"|null,
//    "max_score"|null,"region":[ix,iy,iz,d_bin],"live_after_insert",
//    "bytes_after_insert","live_after","bytes_after","checksum"}
//   {"type":"compression","trigger_frame","mean_occupancy","occupied_regions",
//    "thinned":[{"region":[ix,iy,iz,d_bin],"before","after"}...],
//    "tombstoned":[ids]}
#pragma once

#include <cstddef>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "streamkv/common.hpp"
#include "streamkv/streaming.hpp"

namespace streamkv::harness {

struct RunHeader {
  std::string trace_hash;
  StreamConfig config;
};

struct LoggedFrame {
  FrameId query_id = 0;
  std::optional<FrameId> anchor_id;
  std::vector<FrameId> selected;
  std::optional<double> tau;
  std::vector<SegmentSpan> segments;
  std::vector<std::size_t> quotas;
  std::vector<FrameId> pre_truncation;
  std::size_t history_live = 0;
  std::optional<double> min_score;
  std::optional<double> max_score;
  RegionKey region;
  std::size_t live_after_insert = 0;
  std::size_t bytes_after_insert = 0;
  std::size_t live_after = 0;
  std::size_t bytes_after = 0;
  std::string checksum;
};

struct RunLog {
  RunHeader header;
  std::vector<LoggedFrame> frames;
  std::vector<CompressionReport> compressions;
};

namespace detail {

using ordered_json = nlohmann::ordered_json;

template <class T>
ordered_json opt(const std::optional<T>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

template <class T>
std::optional<T> read_opt(const ordered_json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

inline ordered_json region_json(const RegionKey& k) {
  return ordered_json::array({k.ix, k.iy, k.iz, k.d_bin});
}

inline RegionKey read_region(const ordered_json& j) {
  if (!j.is_array() || j.size() != 4) throw MalformedInput("region must be [ix,iy,iz,d_bin]");
  return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
}

}  // namespace detail

inline RunLog to_run_log(const StreamReport& report, const std::string& trace_hash) {
  RunLog log;
  log.header = {trace_hash, report.config};
  for (const auto& f : report.frames) {
    LoggedFrame lf;
    lf.query_id = f.frame_id;
    lf.anchor_id = f.selection.anchor_id;
    lf.selected = f.selection.selected_ids;
    lf.tau = f.selection.tau;
    lf.segments = f.selection.segments;
    lf.quotas = f.selection.quotas;
    lf.pre_truncation = f.selection.pre_truncation_ids;
    lf.history_live = f.relevance.history_live;
    lf.min_score = f.relevance.min_score;
    lf.max_score = f.relevance.max_score;
    lf.region = f.region;
    lf.live_after_insert = f.live_after_insert;
    lf.bytes_after_insert = f.bytes_after_insert;
    lf.live_after = f.live_after;
    lf.bytes_after = f.bytes_after;
    lf.checksum = to_hex(f.replay_checksum);
    log.frames.push_back(std::move(lf));
    if (f.compression) log.compressions.push_back(*f.compression);
  }
  return log;
}

inline std::string selection_line(const LoggedFrame& f, Strategy strategy) {
  detail::ordered_json j;
  j["type"] = "selection";
  j["query_id"] = f.query_id;
  j["strategy"] = to_string(strategy);
  j["anchor_id"] = detail::opt(f.anchor_id);
  j["selected"] = f.selected;
  j["tau"] = detail::opt(f.tau);
  j["M"] = f.segments.size();
  auto segs = detail::ordered_json::array();
  for (const auto& s : f.segments)
    segs.push_back(detail::ordered_json::array({s.start_id, s.end_id, s.peak_id, s.peak_score}));
  j["segments"] = std::move(segs);
  j["quotas"] = f.quotas;
  j["pre_truncation"] = f.pre_truncation;
  j["history_live"] = f.history_live;
  j["min_score"] = detail::opt(f.min_score);
  j["max_score"] = detail::opt(f.max_score);
  j["region"] = detail::region_json(f.region);
  j["live_after_insert"] = f.live_after_insert;
  j["bytes_after_insert"] = f.bytes_after_insert;
  j["live_after"] = f.live_after;
  j["bytes_after"] = f.bytes_after;
  j["checksum"] = f.checksum;
  return j.dump();
}

inline std::string compression_line(const CompressionReport& c) {
  detail::ordered_json j;
  j["type"] = "compression";
  j["trigger_frame"] = c.trigger_frame;
  j["mean_occupancy"] = c.mean_occupancy;
  j["occupied_regions"] = c.occupied_regions;
  auto thinned = detail::ordered_json::array();
  for (const auto& t : c.thinned_regions)
    thinned.push_back(
        {{"region", detail::region_json(t.key)}, {"before", t.before}, {"after", t.after}});
  j["thinned"] = std::move(thinned);
  j["tombstoned"] = c.tombstoned_ids;
  return j.dump();
}

inline std::string run_header_line(const RunHeader& h) {
  const auto& c = h.config;
  detail::ordered_json j;
  j["type"] = "run";
  j["version"] = 1;
  j["trace_hash"] = h.trace_hash;
  j["strategy"] = to_string(c.strategy);
  j["scoring"] = to_string(c.scoring);
  j["budget"] = c.selection.budget;
  j["w_thre"] = c.selection.w_thre;
  j["merge_gap"] = c.selection.merge_gap;
  j["seed"] = c.selection.seed;
  j["compress"] = c.memory.enabled;
  j["interval"] = c.memory.interval;
  j["beta"] = c.memory.beta;
  j["grid_k"] = c.memory.grid_k;
  j["dir_bins"] = c.memory.dir_bins;
  j["layers"] = c.layers;
  return j.dump();
}

inline std::string serialize_run_log(const RunLog& log) {
  std::string out = run_header_line(log.header) + "\n";
  std::size_t next_compression = 0;
  for (const auto& f : log.frames) {
    out += selection_line(f, log.header.config.strategy) + "\n";
    while (next_compression < log.compressions.size() &&
           log.compressions[next_compression].trigger_frame == f.query_id) {
      out += compression_line(log.compressions[next_compression++]) + "\n";
    }
  }
  return out;
}

inline RunLog read_run_log(std::istream& in) {
  RunLog log;
  std::string text;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.empty()) continue;
    try {
      const auto j = detail::ordered_json::parse(text);
      const auto type = j.at("type").get<std::string>();
      if (!have_header) {
        if (type != "run") throw MalformedInput("first record must be the run header");
        auto& c = log.header.config;
        log.header.trace_hash = j.at("trace_hash").get<std::string>();
        const auto strategy = parse_strategy(j.at("strategy").get<std::string>());
        const auto scoring = parse_scoring(j.at("scoring").get<std::string>());
        if (!strategy || !scoring) throw MalformedInput("unknown strategy or scoring");
        c.strategy = *strategy;
        c.scoring = *scoring;
        c.selection.budget = j.at("budget").get<std::size_t>();
        c.selection.w_thre = j.at("w_thre").get<double>();
        c.selection.merge_gap = j.at("merge_gap").get<std::size_t>();
        c.selection.seed = j.at("seed").get<std::uint64_t>();
        c.memory.enabled = j.at("compress").get<bool>();
        c.memory.interval = j.at("interval").get<std::size_t>();
        c.memory.beta = j.at("beta").get<double>();
        c.memory.grid_k = j.at("grid_k").get<int>();
        c.memory.dir_bins = j.at("dir_bins").get<int>();
        c.layers = j.at("layers").get<std::size_t>();
        have_header = true;
      } else if (type == "selection") {
        LoggedFrame f;
        f.query_id = j.at("query_id").get<FrameId>();
        f.anchor_id = detail::read_opt<FrameId>(j, "anchor_id");
        f.selected = j.at("selected").get<std::vector<FrameId>>();
        f.tau = detail::read_opt<double>(j, "tau");
        for (const auto& s : j.at("segments"))
          f.segments.push_back({s.at(0).get<FrameId>(), s.at(1).get<FrameId>(),
                                s.at(2).get<FrameId>(), s.at(3).get<double>()});
        if (j.at("M").get<std::size_t>() != f.segments.size())
          throw MalformedInput("M does not match the segment list");
        f.quotas = j.at("quotas").get<std::vector<std::size_t>>();
        f.pre_truncation = j.at("pre_truncation").get<std::vector<FrameId>>();
        f.history_live = j.at("history_live").get<std::size_t>();
        f.min_score = detail::read_opt<double>(j, "min_score");
        f.max_score = detail::read_opt<double>(j, "max_score");
        f.region = detail::read_region(j.at("region"));
        f.live_after_insert = j.at("live_after_insert").get<std::size_t>();
        f.bytes_after_insert = j.at("bytes_after_insert").get<std::size_t>();
        f.live_after = j.at("live_after").get<std::size_t>();
        f.bytes_after = j.at("bytes_after").get<std::size_t>();
        f.checksum = j.at("checksum").get<std::string>();
        log.frames.push_back(std::move(f));
      } else if (type == "compression") {
        CompressionReport c;
        c.trigger_frame = j.at("trigger_frame").get<FrameId>();
        c.mean_occupancy = j.at("mean_occupancy").get<double>();
        c.occupied_regions = j.at("occupied_regions").get<std::size_t>();
        for (const auto& t : j.at("thinned"))
          c.thinned_regions.push_back({detail::read_region(t.at("region")),
                                       t.at("before").get<std::size_t>(),
                                       t.at("after").get<std::size_t>()});
        c.tombstoned_ids = j.at("tombstoned").get<std::vector<FrameId>>();
        log.compressions.push_back(std::move(c));
      } else {
        throw MalformedInput("unknown record type '" + type + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw MalformedInput("run log line " + std::to_string(line_no) + ": " + e.what());
    } catch (const MalformedInput& e) {
      throw MalformedInput("run log line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) throw MalformedInput("run log: missing run header");
  return log;
}

inline RunLog parse_run_log(const std::string& text) {
  std::istringstream in(text);
  return read_run_log(in);
}

inline RunLog load_run_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MalformedInput("cannot open run log: " + path);
  return read_run_log(in);
}

}  // namespace streamkv::harness
