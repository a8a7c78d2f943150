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
// Line-delimited JSON trace files.
//
// Line 1 is the header object:
//   {"version","H","d_h","s","L","payload_bytes","frame_count","trace_hash",
//    "kind","seed","noise_sigma","oracle":{"sigma_p","kappa"}}
// Every following line is one frame:
//   {"frame_id","position":[x,y,z],"direction":[x,y,z],
//    "q_bar":[H*d_h, row-major],"k_bar":[...],"payload_sizes":[L]}
// trace_hash is the FNV-1a 64 hex digest of the frame lines (each with its
// trailing newline), so it identifies the frame content independent of the
// header.
#pragma once

#include <cstddef>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "streamkv/common.hpp"
#include "streamkv/trace.hpp"

namespace streamkv::harness {

using ordered_json = nlohmann::ordered_json;

inline std::string frame_line(const TraceFrame& f) {
  ordered_json j;
  j["frame_id"] = f.frame_id;
  j["position"] = f.position;
  j["direction"] = f.direction;
  j["q_bar"] = std::vector<double>(f.q_bar.flat().begin(), f.q_bar.flat().end());
  j["k_bar"] = std::vector<double>(f.k_bar.flat().begin(), f.k_bar.flat().end());
  j["payload_sizes"] = f.payload_sizes;
  return j.dump();
}

inline std::string compute_trace_hash(const Trace& trace) {
  Fnv1a h;
  for (const auto& f : trace.frames) {
    h.update(frame_line(f));
    h.update("\n");
  }
  return to_hex(h.digest());
}

inline std::string header_line(const TraceHeader& hd) {
  ordered_json j;
  j["version"] = hd.version;
  j["H"] = hd.heads;
  j["d_h"] = hd.head_dim;
  j["s"] = hd.special_count;
  j["L"] = hd.layers;
  j["payload_bytes"] = hd.payload_bytes;
  j["frame_count"] = hd.frame_count;
  j["trace_hash"] = hd.trace_hash;
  j["kind"] = hd.kind;
  j["seed"] = hd.seed;
  j["noise_sigma"] = hd.noise_sigma;
  j["oracle"] = {{"sigma_p", hd.oracle.sigma_p}, {"kappa", hd.oracle.kappa}};
  return j.dump();
}

inline void write_trace(std::ostream& out, const Trace& trace) {
  out << header_line(trace.header) << '\n';
  for (const auto& f : trace.frames) out << frame_line(f) << '\n';
}

inline std::string serialize_trace(const Trace& trace) {
  std::ostringstream os;
  write_trace(os, trace);
  return os.str();
}

namespace detail {

inline MalformedInput bad_line(std::size_t line, const std::string& what) {
  return MalformedInput("trace line " + std::to_string(line) + ": " + what);
}

inline Vec3 read_vec3(const ordered_json& j, const char* key, std::size_t line) {
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 3) throw bad_line(line, std::string(key) + " must be [x,y,z]");
  Vec3 out{};
  for (std::size_t i = 0; i < 3; ++i) out[i] = v.at(i).get<double>();
  return out;
}

}  // namespace detail

inline Trace read_trace(std::istream& in) {
  Trace trace;
  std::string text;
  std::size_t line_no = 0;
  bool have_header = false;
  Fnv1a hash;

  while (std::getline(in, text)) {
    ++line_no;
    if (text.empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw detail::bad_line(line_no, std::string("invalid JSON: ") + e.what());
    }
    try {
      if (!have_header) {
        auto& hd = trace.header;
        hd.version = j.at("version").get<int>();
        if (hd.version != 1) throw detail::bad_line(line_no, "unsupported trace version");
        hd.heads = j.at("H").get<std::size_t>();
        hd.head_dim = j.at("d_h").get<std::size_t>();
        hd.special_count = j.at("s").get<std::size_t>();
        hd.layers = j.at("L").get<std::size_t>();
        hd.payload_bytes = j.at("payload_bytes").get<std::size_t>();
        hd.frame_count = j.at("frame_count").get<std::size_t>();
        hd.trace_hash = j.at("trace_hash").get<std::string>();
        hd.kind = j.value("kind", std::string{});
        hd.seed = j.value("seed", std::uint64_t{0});
        hd.noise_sigma = j.value("noise_sigma", 0.0);
        if (j.contains("oracle")) {
          hd.oracle.sigma_p = j["oracle"].at("sigma_p").get<double>();
          hd.oracle.kappa = j["oracle"].at("kappa").get<double>();
        }
        if (hd.heads == 0 || hd.head_dim == 0 || hd.layers == 0)
          throw detail::bad_line(line_no, "H, d_h and L must be >= 1");
        have_header = true;
        continue;
      }

      const auto& hd = trace.header;
      TraceFrame f;
      f.frame_id = j.at("frame_id").get<FrameId>();
      if (!trace.frames.empty() && f.frame_id <= trace.frames.back().frame_id)
        throw detail::bad_line(line_no, "frame ids must be strictly increasing");
      f.position = detail::read_vec3(j, "position", line_no);
      f.direction = detail::read_vec3(j, "direction", line_no);
      if (f.direction == Vec3{0.0, 0.0, 0.0})
        throw detail::bad_line(line_no, "zero direction vector");
      auto q = j.at("q_bar").get<std::vector<double>>();
      auto k = j.at("k_bar").get<std::vector<double>>();
      if (q.size() != hd.heads * hd.head_dim || k.size() != hd.heads * hd.head_dim)
        throw detail::bad_line(line_no, "descriptor length does not match H*d_h");
      f.q_bar = HeadMatrix(hd.heads, hd.head_dim, std::move(q));
      f.k_bar = HeadMatrix(hd.heads, hd.head_dim, std::move(k));
      if (!f.q_bar.all_finite() || !f.k_bar.all_finite())
        throw detail::bad_line(line_no, "non-finite descriptor value");
      f.payload_sizes = j.at("payload_sizes").get<std::vector<std::size_t>>();
      if (f.payload_sizes.size() != hd.layers)
        throw detail::bad_line(line_no, "payload_sizes length does not match L");
      hash.update(text);
      hash.update("\n");
      trace.frames.push_back(std::move(f));
    } catch (const nlohmann::json::exception& e) {
      throw detail::bad_line(line_no, e.what());
    }
  }
  if (!have_header) throw MalformedInput("trace: missing header line");
  if (trace.frames.size() != trace.header.frame_count)
    throw MalformedInput("trace: header declares " + std::to_string(trace.header.frame_count) +
                         " frames, found " + std::to_string(trace.frames.size()));
  if (to_hex(hash.digest()) != trace.header.trace_hash)
    throw MalformedInput("trace: trace_hash does not match frame content");
  return trace;
}

inline Trace parse_trace(const std::string& text) {
  std::istringstream in(text);
  return read_trace(in);
}

inline Trace load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MalformedInput("cannot open trace file: " + path);
  return read_trace(in);
}

inline void save_trace(const std::string& path, const Trace& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trace file: " + path);
  write_trace(out, trace);
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace streamkv::harness
