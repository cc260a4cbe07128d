// Copyright 2026 The mukv Authors. All Rights Reserved.
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

#ifndef MUKV_CONFIG_HPP_
#define MUKV_CONFIG_HPP_

// Engine configuration. Every field has a default; a JSON file only needs to
// name the keys it changes. Triples are ordered patch, frame, segment.
//
//   {
//     "geometry":  {"layers": 2, "heads": 2, "head_dim": 8,
//                   "patches_per_frame": 196, "frames_per_segment": 4,
//                   "super_patches": 4},
//     "fps": 0.5,
//     "coverage":  {"frame": "all", "patch": "all"},
//     "retention": {"alpha": [0.5, 0.7, 0.8], "rho": [0.1, 0.1, 0.8],
//                   "indicator": "dual", "keep_high_frequency": true},
//     "retrieval": {"k": [20, 32, 12], "lambda": [0.3, 0.3, 0.0],
//                   "global_n": 5, "mode": "semi", "hier_top_segments": 5},
//     "store_path": "mukv.store",
//     "seed": 0,
//     "byte_budget": 0
//   }

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "mukv/dcp.hpp"
#include "mukv/granularity.hpp"
#include "mukv/retrieval.hpp"
#include "mukv/store.hpp"

namespace mukv {

struct EngineConfig {
  ModelGeometry geometry;
  double fps = 0.5;
  Coverage frame_coverage = Coverage::kAllFrames;
  Coverage patch_coverage = Coverage::kAllFrames;
  RetentionPolicy retention;
  RetrievalConfig retrieval;
  std::string store_path = "mukv.store";
  std::uint64_t seed = 0;
  std::uint64_t byte_budget = 0;

  StoreSettings store_settings() const {
    StoreSettings s;
    s.geometry = geometry;
    s.fps = fps;
    s.frame_coverage = frame_coverage;
    s.patch_coverage = patch_coverage;
    s.policy = retention;
    s.policy.seed = seed;
    return s;
  }

  GranularityPlan plan() const { return build_plan(geometry, frame_coverage, patch_coverage); }

  void validate() const {
    geometry.validate();
    if (!(fps > 0.0)) fail(ErrorKind::kInvalidConfig, "fps must be positive");
    retention.validate();
    retrieval.validate();
  }
};

namespace config_detail {

using nlohmann::json;

inline void reject_unknown(const json& obj, std::string_view where, std::initializer_list<std::string_view> keys) {
  if (!obj.is_object()) fail(ErrorKind::kInvalidConfig, std::string(where) + " must be an object");
  const std::set<std::string_view> allowed(keys);
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.contains(key)) fail(ErrorKind::kInvalidConfig, "unknown key \"" + key + "\" in " + std::string(where));
  }
}

template <class T>
PerGranularity<T> read_triple(const json& v, std::string_view name) {
  if (!v.is_array() || v.size() != 3) {
    fail(ErrorKind::kInvalidConfig, std::string(name) + " must be a [patch, frame, segment] triple");
  }
  return {v[0].get<T>(), v[1].get<T>(), v[2].get<T>()};
}

template <class T>
json write_triple(const PerGranularity<T>& t) {
  return json::array({t[0], t[1], t[2]});
}

}  // namespace config_detail

/// Overlays the keys present in `j` onto `cfg`.
inline void apply_json(EngineConfig& cfg, const nlohmann::json& j) {
  using namespace config_detail;
  try {
    reject_unknown(j, "config", {"geometry", "fps", "coverage", "retention", "retrieval", "store_path", "seed", "byte_budget"});
    if (j.contains("geometry")) {
      const auto& g = j["geometry"];
      reject_unknown(g, "geometry", {"layers", "heads", "head_dim", "patches_per_frame", "frames_per_segment", "super_patches"});
      if (g.contains("layers")) cfg.geometry.num_layers = g["layers"].get<std::uint32_t>();
      if (g.contains("heads")) cfg.geometry.num_heads = g["heads"].get<std::uint32_t>();
      if (g.contains("head_dim")) cfg.geometry.head_dim = g["head_dim"].get<std::uint32_t>();
      if (g.contains("patches_per_frame")) cfg.geometry.patches_per_frame = g["patches_per_frame"].get<std::uint32_t>();
      if (g.contains("frames_per_segment")) cfg.geometry.frames_per_segment = g["frames_per_segment"].get<std::uint32_t>();
      if (g.contains("super_patches")) cfg.geometry.super_patches = g["super_patches"].get<std::uint32_t>();
    }
    if (j.contains("fps")) cfg.fps = j["fps"].get<double>();
    if (j.contains("coverage")) {
      const auto& c = j["coverage"];
      reject_unknown(c, "coverage", {"frame", "patch"});
      for (const char* key : {"frame", "patch"}) {
        if (!c.contains(key)) continue;
        auto v = parse_coverage(c[key].get<std::string>());
        if (!v) fail(ErrorKind::kInvalidConfig, std::string("coverage.") + key + " must be \"middle\" or \"all\"");
        (std::string_view(key) == "frame" ? cfg.frame_coverage : cfg.patch_coverage) = *v;
      }
    }
    if (j.contains("retention")) {
      const auto& r = j["retention"];
      reject_unknown(r, "retention", {"alpha", "rho", "indicator", "keep_high_frequency"});
      if (r.contains("alpha")) cfg.retention.alpha = read_triple<double>(r["alpha"], "retention.alpha");
      if (r.contains("rho")) cfg.retention.rho = read_triple<double>(r["rho"], "retention.rho");
      if (r.contains("indicator")) {
        auto m = parse_indicator_mode(r["indicator"].get<std::string>());
        if (!m) fail(ErrorKind::kInvalidConfig, "retention.indicator must be dual, attention, frequency or random");
        cfg.retention.mode = *m;
      }
      if (r.contains("keep_high_frequency")) cfg.retention.keep_high_frequency = r["keep_high_frequency"].get<bool>();
    }
    if (j.contains("retrieval")) {
      const auto& r = j["retrieval"];
      reject_unknown(r, "retrieval", {"k", "lambda", "global_n", "mode", "hier_top_segments"});
      if (r.contains("k")) cfg.retrieval.k = read_triple<std::uint32_t>(r["k"], "retrieval.k");
      if (r.contains("lambda")) cfg.retrieval.lambda = read_triple<double>(r["lambda"], "retrieval.lambda");
      if (r.contains("global_n")) cfg.retrieval.global_n = r["global_n"].get<std::uint32_t>();
      if (r.contains("hier_top_segments")) cfg.retrieval.hier_top_segments = r["hier_top_segments"].get<std::uint32_t>();
      if (r.contains("mode")) {
        auto m = parse_retrieval_mode(r["mode"].get<std::string>());
        if (!m) fail(ErrorKind::kInvalidConfig, "retrieval.mode must be parallel, hierarchical or semi");
        cfg.retrieval.mode = *m;
      }
    }
    if (j.contains("store_path")) cfg.store_path = j["store_path"].get<std::string>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("byte_budget")) cfg.byte_budget = j["byte_budget"].get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kInvalidConfig, e.what());
  }
}

inline nlohmann::json to_json(const EngineConfig& cfg) {
  using namespace config_detail;
  const auto& g = cfg.geometry;
  return {
      {"geometry",
       {{"layers", g.num_layers},
        {"heads", g.num_heads},
        {"head_dim", g.head_dim},
        {"patches_per_frame", g.patches_per_frame},
        {"frames_per_segment", g.frames_per_segment},
        {"super_patches", g.super_patches}}},
      {"fps", cfg.fps},
      {"coverage", {{"frame", to_string(cfg.frame_coverage)}, {"patch", to_string(cfg.patch_coverage)}}},
      {"retention",
       {{"alpha", write_triple(cfg.retention.alpha)},
        {"rho", write_triple(cfg.retention.rho)},
        {"indicator", to_string(cfg.retention.mode)},
        {"keep_high_frequency", cfg.retention.keep_high_frequency}}},
      {"retrieval",
       {{"k", write_triple(cfg.retrieval.k)},
        {"lambda", write_triple(cfg.retrieval.lambda)},
        {"global_n", cfg.retrieval.global_n},
        {"mode", to_string(cfg.retrieval.mode)},
        {"hier_top_segments", cfg.retrieval.hier_top_segments}}},
      {"store_path", cfg.store_path},
      {"seed", cfg.seed},
      {"byte_budget", cfg.byte_budget},
  };
}

inline EngineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kInvalidConfig, path.string() + ": " + e.what());
  }
  EngineConfig cfg;
  apply_json(cfg, j);
  return cfg;
}

}  // namespace mukv

#endif  // MUKV_CONFIG_HPP_
