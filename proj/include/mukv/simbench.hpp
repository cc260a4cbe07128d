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

#ifndef MUKV_SIMBENCH_HPP_
#define MUKV_SIMBENCH_HPP_

// Synthetic streams with planted relevance, and a sweep harness that reports
// token accounting, recall and timings.
//
// Geometry of a generated stream (basis e0..e{C-1}, C >= 6):
//   question            e0
//   relevant blocks     0.8 e0 + 0.6 e2
//   distractor blocks   0.85 e0 + 0.527 e1   (close to the question, far from
//                                             the relevant segments)
//   background blocks   background_scale * random unit vector in e3..e{C-2}
// Last-layer keys are the block direction plus a per-token oscillation along
// e{C-1}: one cycle per block for static segments, alternating sign (the
// Nyquist bin) at three times the amplitude for dynamic ones, plus N(0, noise)
// per entry. Other layers and all values are random.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mukv/config.hpp"
#include "mukv/engine.hpp"
#include "mukv/granularity.hpp"
#include "mukv/record.hpp"
#include "mukv/retrieval.hpp"
#include "mukv/store.hpp"

namespace mukv {

enum class FrequencyProfile : std::uint8_t { kStatic, kDynamic };

struct SyntheticScenario {
  std::uint64_t seed = 1;
  std::uint64_t segments = 75;
  ModelGeometry geometry;
  double fps = 0.5;
  Coverage frame_coverage = Coverage::kAllFrames;
  Coverage patch_coverage = Coverage::kAllFrames;
  std::set<std::uint64_t> relevant_segments = {37};
  std::uint32_t distractors = 0;
  Granularity distractor_granularity = Granularity::kPatch;
  double noise = 0.0;
  std::set<std::uint64_t> dynamic_segments;
  AttentionPayload::Kind attention = AttentionPayload::Kind::kAggregated;
  double background_scale = 0.3;
  double static_amplitude = 0.05;
  std::uint32_t question_tokens = 4;
  std::optional<double> question_at;  // default: end of stream

  FrequencyProfile profile(std::uint64_t t) const {
    return dynamic_segments.contains(t) ? FrequencyProfile::kDynamic : FrequencyProfile::kStatic;
  }

  void validate() const {
    geometry.validate();
    if (geometry.concat_dim() < 6) fail(ErrorKind::kInvalidConfig, "synthetic streams need concat_dim >= 6");
    for (auto t : relevant_segments) {
      if (t >= segments) fail(ErrorKind::kInvalidConfig, "relevant segment " + std::to_string(t) + " out of range");
    }
  }
};

/// Relevant block ids per granularity for one question.
struct GroundTruth {
  PerGranularity<std::set<BlockId>> relevant;
};

struct SyntheticStream {
  std::vector<SegmentRecord> records;
  std::vector<QuestionRecord> questions;
  std::vector<GroundTruth> labels;
  std::set<BlockId> distractor_blocks;
};

namespace simbench_detail {

inline std::vector<float> unit(std::size_t dims, std::initializer_list<std::pair<std::size_t, double>> parts) {
  std::vector<double> v(dims, 0.0);
  for (auto [i, x] : parts) v[i] = x;
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  std::vector<float> out(dims);
  for (std::size_t i = 0; i < dims; ++i) out[i] = static_cast<float>(v[i] / n);
  return out;
}

inline AttentionPayload make_attention(std::mt19937_64& rng, AttentionPayload::Kind kind, std::size_t n,
                                       std::size_t heads) {
  std::uniform_real_distribution<double> jitter(0.5, 1.5);
  AttentionPayload p;
  p.kind = kind;
  if (kind == AttentionPayload::Kind::kAggregated) {
    // Earlier tokens draw more attention, as observed in practice.
    std::vector<double> w(n);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      w[j] = std::exp(-2.0 * static_cast<double>(j) / static_cast<double>(n)) * jitter(rng);
      sum += w[j];
    }
    const double total = static_cast<double>(heads) * static_cast<double>(n);
    p.values.resize(n);
    for (std::size_t j = 0; j < n; ++j) p.values[j] = static_cast<float>(w[j] / sum * total);
  } else {
    p.values.resize(heads * n * n);
    std::vector<double> w(n);
    for (std::size_t row = 0; row < heads * n; ++row) {
      double sum = 0.0;
      for (std::size_t j = 0; j < n; ++j) sum += (w[j] = jitter(rng));
      for (std::size_t j = 0; j < n; ++j) p.values[row * n + j] = static_cast<float>(w[j] / sum);
    }
  }
  return p;
}

inline TokenMatrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double scale) {
  std::normal_distribution<double> normal(0.0, 1.0);
  TokenMatrix m(rows, cols);
  for (auto& v : m.data()) v = static_cast<float>(scale * normal(rng));
  return m;
}

}  // namespace simbench_detail

inline SyntheticStream gen_stream(const SyntheticScenario& sc) {
  using namespace simbench_detail;
  sc.validate();
  const auto& g = sc.geometry;
  const std::size_t C = g.concat_dim();
  const std::size_t osc_dim = C - 1;
  const auto plan = build_plan(g, sc.frame_coverage, sc.patch_coverage);
  const auto expected = plan.expected_blocks();
  std::mt19937_64 rng(sc.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  const auto relevant_dir = unit(C, {{0, 0.8}, {2, 0.6}});
  const auto distractor_dir = unit(C, {{0, 0.85}, {1, 0.527}});

  // Pick distractor blocks among non-relevant segments.
  SyntheticStream out;
  {
    std::vector<BlockId> pool;
    for (std::uint64_t t = 0; t < sc.segments; ++t) {
      if (sc.relevant_segments.contains(t)) continue;
      for (const auto& [key, n] : expected) {
        if (key.first == sc.distractor_granularity) pool.push_back({key.first, t, key.second});
      }
    }
    std::shuffle(pool.begin(), pool.end(), rng);
    for (std::size_t i = 0; i < pool.size() && i < sc.distractors; ++i) out.distractor_blocks.insert(pool[i]);
  }

  const double span = static_cast<double>(g.frames_per_segment) / sc.fps;
  for (std::uint64_t t = 0; t < sc.segments; ++t) {
    SegmentRecord rec;
    rec.segment_index = t;
    rec.start_seconds = static_cast<double>(t) * span;
    rec.end_seconds = rec.start_seconds + span;
    rec.geometry = g;

    std::vector<float> background(C, 0.0f);
    {
      double norm = 0.0;
      std::vector<double> v(C, 0.0);
      for (std::size_t i = 3; i + 1 < C; ++i) norm += (v[i] = normal(rng)) * v[i];
      norm = std::sqrt(norm);
      for (std::size_t i = 0; i < C; ++i) background[i] = static_cast<float>(sc.background_scale * v[i] / norm);
    }
    const bool relevant = sc.relevant_segments.contains(t);
    const bool dynamic = sc.profile(t) == FrequencyProfile::kDynamic;
    const double amplitude = dynamic ? 3.0 * sc.static_amplitude : sc.static_amplitude;

    for (const auto& [key, n] : expected) {
      RawBlock block;
      block.id = {key.first, t, key.second};
      block.tokens = n;
      block.attention = make_attention(rng, sc.attention, n, g.num_heads);
      const std::vector<float>& dir = out.distractor_blocks.contains(block.id) ? distractor_dir
                                      : relevant                              ? relevant_dir
                                                                              : background;
      for (std::uint32_t l = 0; l < g.num_layers; ++l) {
        LayerKv layer;
        if (l + 1 == g.num_layers) {
          layer.keys = TokenMatrix(n, C);
          for (std::size_t i = 0; i < n; ++i) {
            auto row = layer.keys.row(i);
            for (std::size_t d = 0; d < C; ++d) row[d] = dir[d];
            const double phase = dynamic ? ((i % 2 == 0) ? 1.0 : -1.0)
                                         : std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                                    static_cast<double>(n));
            row[osc_dim] = static_cast<float>(row[osc_dim] + amplitude * phase);
            if (sc.noise > 0.0) {
              for (std::size_t d = 0; d < C; ++d) row[d] = static_cast<float>(row[d] + sc.noise * normal(rng));
            }
          }
        } else {
          layer.keys = random_matrix(rng, n, C, 0.5);
        }
        layer.values = random_matrix(rng, n, C, 1.0);
        block.layers.push_back(std::move(layer));
      }
      rec.blocks.push_back(std::move(block));
    }
    out.records.push_back(std::move(rec));
  }

  QuestionRecord q;
  q.asked_at = sc.question_at.value_or(static_cast<double>(sc.segments) * span);
  q.query_tokens = TokenMatrix(sc.question_tokens, C);
  for (std::size_t i = 0; i < sc.question_tokens; ++i) {
    auto row = q.query_tokens.row(i);
    row[0] = 1.0f;
    if (sc.noise > 0.0) {
      for (auto& v : row) v = static_cast<float>(v + sc.noise * normal(rng));
    }
  }
  GroundTruth truth;
  for (std::uint64_t t : sc.relevant_segments) {
    if (segment_timestamp(t, g.frames_per_segment, sc.fps) > q.asked_at) continue;
    for (const auto& [key, n] : expected) truth.relevant[index_of(key.first)].insert({key.first, t, key.second});
  }
  out.questions.push_back(std::move(q));
  out.labels.push_back(std::move(truth));
  return out;
}

/// Exact ratio; den == 0 means nothing was relevant.
struct Fraction {
  std::uint64_t num = 0;
  std::uint64_t den = 0;

  double value() const { return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den); }
  std::string str() const { return std::to_string(num) + "/" + std::to_string(den); }

  friend bool operator==(const Fraction&, const Fraction&) = default;
};

struct RecallReport {
  PerGranularity<Fraction> per_granularity;
  Fraction aggregate;
};

inline RecallReport eval_recall(std::span<const RetrievalResult> results, std::span<const GroundTruth> labels) {
  if (results.size() != labels.size()) {
    fail(ErrorKind::kLabelMismatch, std::to_string(results.size()) + " results for " + std::to_string(labels.size()) +
                                        " labelled questions");
  }
  RecallReport r;
  for (std::size_t q = 0; q < results.size(); ++q) {
    for (Granularity g : kAllGranularities) {
      const auto& rel = labels[q].relevant[index_of(g)];
      std::uint64_t hit = 0;
      for (const auto& s : results[q].selected[index_of(g)]) hit += rel.contains(s.block->id) ? 1 : 0;
      auto& f = r.per_granularity[index_of(g)];
      f.num += hit;
      f.den += rel.size();
      r.aggregate.num += hit;
      r.aggregate.den += rel.size();
    }
  }
  return r;
}

inline SyntheticScenario scenario_from_json(const nlohmann::json& j) {
  SyntheticScenario sc;
  config_detail::reject_unknown(j, "scenario",
                                {"seed", "segments", "geometry", "fps", "coverage", "relevant_segments", "distractors",
                                 "distractor_granularity", "noise", "dynamic_segments", "attention",
                                 "background_scale", "static_amplitude", "question_tokens", "question_at"});
  try {
    if (j.contains("seed")) sc.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("segments")) sc.segments = j["segments"].get<std::uint64_t>();
    if (j.contains("geometry")) {
      EngineConfig tmp;
      apply_json(tmp, nlohmann::json{{"geometry", j["geometry"]}});
      sc.geometry = tmp.geometry;
    }
    if (j.contains("fps")) sc.fps = j["fps"].get<double>();
    if (j.contains("coverage")) {
      EngineConfig tmp;
      apply_json(tmp, nlohmann::json{{"coverage", j["coverage"]}});
      sc.frame_coverage = tmp.frame_coverage;
      sc.patch_coverage = tmp.patch_coverage;
    }
    if (j.contains("relevant_segments")) sc.relevant_segments = j["relevant_segments"].get<std::set<std::uint64_t>>();
    if (j.contains("distractors")) sc.distractors = j["distractors"].get<std::uint32_t>();
    if (j.contains("distractor_granularity")) {
      auto g = parse_granularity(j["distractor_granularity"].get<std::string>());
      if (!g) fail(ErrorKind::kInvalidConfig, "distractor_granularity must be patch, frame or segment");
      sc.distractor_granularity = *g;
    }
    if (j.contains("noise")) sc.noise = j["noise"].get<double>();
    if (j.contains("dynamic_segments")) sc.dynamic_segments = j["dynamic_segments"].get<std::set<std::uint64_t>>();
    if (j.contains("attention")) {
      const auto kind = j["attention"].get<std::string>();
      if (kind == "raw") sc.attention = AttentionPayload::Kind::kRaw;
      else if (kind == "aggregated") sc.attention = AttentionPayload::Kind::kAggregated;
      else fail(ErrorKind::kInvalidConfig, "attention must be raw or aggregated");
    }
    if (j.contains("background_scale")) sc.background_scale = j["background_scale"].get<double>();
    if (j.contains("static_amplitude")) sc.static_amplitude = j["static_amplitude"].get<double>();
    if (j.contains("question_tokens")) sc.question_tokens = j["question_tokens"].get<std::uint32_t>();
    if (j.contains("question_at")) sc.question_at = j["question_at"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kInvalidConfig, e.what());
  }
  sc.validate();
  return sc;
}

/// One configuration change applied on top of the base config.
struct SweepPoint {
  std::string label;
  std::optional<PerGranularity<double>> rho;
  std::optional<PerGranularity<double>> alpha;
  std::optional<RetrievalMode> mode;
  std::optional<IndicatorMode> indicator;
};

/// "rho=0.5;rho=0.1/0.1/0.8,indicator=random;mode=semi". Points are split on
/// ';', settings within a point on ','; a triple is written a/b/c (patch,
/// frame, segment) and a single number applies to all three.
inline std::vector<SweepPoint> parse_sweep(std::string_view text) {
  auto split = [](std::string_view s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
      if (c == sep) {
        out.push_back(cur);
        cur.clear();
      } else if (c != ' ') {
        cur += c;
      }
    }
    out.push_back(cur);
    return out;
  };
  auto triple = [&](const std::string& v) {
    const auto parts = split(v, '/');
    PerGranularity<double> t{};
    try {
      if (parts.size() == 1) {
        t.fill(std::stod(parts[0]));
      } else if (parts.size() == 3) {
        for (int i = 0; i < 3; ++i) t[i] = std::stod(parts[i]);
      } else {
        fail(ErrorKind::kInvalidConfig, "sweep triple \"" + v + "\" needs 1 or 3 values");
      }
    } catch (const std::logic_error&) {
      fail(ErrorKind::kInvalidConfig, "sweep value \"" + v + "\" is not a number");
    }
    return t;
  };
  std::vector<SweepPoint> points;
  for (const auto& raw : split(text, ';')) {
    if (raw.empty()) continue;
    SweepPoint p;
    p.label = raw;
    for (const auto& setting : split(raw, ',')) {
      const auto eq = setting.find('=');
      if (eq == std::string::npos) fail(ErrorKind::kInvalidConfig, "sweep setting \"" + setting + "\" lacks '='");
      const std::string key = setting.substr(0, eq), value = setting.substr(eq + 1);
      if (key == "rho") {
        p.rho = triple(value);
      } else if (key == "alpha") {
        p.alpha = triple(value);
      } else if (key == "mode") {
        p.mode = parse_retrieval_mode(value);
        if (!p.mode) fail(ErrorKind::kInvalidConfig, "unknown retrieval mode \"" + value + "\"");
      } else if (key == "indicator") {
        p.indicator = parse_indicator_mode(value);
        if (!p.indicator) fail(ErrorKind::kInvalidConfig, "unknown indicator \"" + value + "\"");
      } else {
        fail(ErrorKind::kInvalidConfig, "unknown sweep key \"" + key + "\"");
      }
    }
    points.push_back(std::move(p));
  }
  return points;
}

inline constexpr std::array<RetrievalMode, 3> kAllModes = {RetrievalMode::kParallel, RetrievalMode::kHierarchical,
                                                           RetrievalMode::kSemiHierarchical};

struct BenchRow {
  std::string label;
  std::uint64_t stored_tokens = 0;
  std::array<std::optional<std::uint64_t>, 3> context_tokens;  // indexed like kAllModes
  std::array<std::optional<Fraction>, 3> recall;
  double ingest_ms = 0.0;
  double retrieve_ms = 0.0;
};

/// Builds a store for `config` from an already generated stream.
inline KvStore build_store(const EngineConfig& config, const SyntheticStream& stream) {
  KvStore store(config.store_settings());
  const auto plan = config.plan();
  for (const auto& rec : stream.records) ingest_record(store, plan, rec);
  return store;
}

/// Engine config whose geometry, fps and coverage follow the scenario.
inline EngineConfig config_for(EngineConfig base, const SyntheticScenario& sc) {
  base.geometry = sc.geometry;
  base.fps = sc.fps;
  base.frame_coverage = sc.frame_coverage;
  base.patch_coverage = sc.patch_coverage;
  return base;
}

inline std::vector<BenchRow> run_bench(const EngineConfig& base, const SyntheticScenario& scenario,
                                       std::span<const SweepPoint> sweep) {
  using clock = std::chrono::steady_clock;
  std::vector<BenchRow> rows;
  if (sweep.empty()) return rows;
  const auto stream = gen_stream(scenario);
  for (const auto& point : sweep) {
    EngineConfig cfg = config_for(base, scenario);
    if (point.rho) cfg.retention.rho = *point.rho;
    if (point.alpha) cfg.retention.alpha = *point.alpha;
    if (point.indicator) cfg.retention.mode = *point.indicator;
    cfg.validate();

    BenchRow row;
    row.label = point.label;
    const auto t0 = clock::now();
    const KvStore store = build_store(cfg, stream);
    const auto t1 = clock::now();
    row.ingest_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    row.stored_tokens = store.stats().total_tokens;

    for (std::size_t m = 0; m < kAllModes.size(); ++m) {
      if (point.mode && *point.mode != kAllModes[m]) continue;
      RetrievalConfig rc = cfg.retrieval;
      rc.mode = kAllModes[m];
      std::vector<RetrievalResult> results;
      const auto r0 = clock::now();
      for (const auto& q : stream.questions) results.push_back(retrieve(q, store, rc));
      row.retrieve_ms += std::chrono::duration<double, std::milli>(clock::now() - r0).count();
      std::uint64_t ctx = 0;
      for (const auto& r : results) ctx += r.total_rows();
      row.context_tokens[m] = ctx;
      row.recall[m] = eval_recall(results, stream.labels).aggregate;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

/// CSV columns: point, stored_tokens, then context_tokens and recall for the
/// parallel, hierarchical and semi modes (empty when a mode was not run;
/// recall as a decimal), ingest_ms, retrieve_ms.
inline void write_bench_csv(std::ostream& os, std::span<const BenchRow> rows) {
  os << "point,stored_tokens";
  for (auto m : kAllModes) os << ",context_" << to_string(m);
  for (auto m : kAllModes) os << ",recall_" << to_string(m);
  os << ",ingest_ms,retrieve_ms\n";
  for (const auto& r : rows) {
    os << '"' << r.label << '"' << ',' << r.stored_tokens;
    for (const auto& c : r.context_tokens) {
      os << ',';
      if (c) os << *c;
    }
    for (const auto& f : r.recall) {
      os << ',';
      if (f) os << f->value();
    }
    std::ostringstream t;
    t.setf(std::ios::fixed);
    t.precision(3);
    t << ',' << r.ingest_ms << ',' << r.retrieve_ms;
    os << t.str() << '\n';
  }
}

}  // namespace mukv

#endif  // MUKV_SIMBENCH_HPP_
