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


#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "mukv/mukv.hpp"
#include "oracles.hpp"

namespace mukv {
namespace {

using fixtures::kind_of;

SyntheticScenario small(std::uint64_t segments = 8) {
  SyntheticScenario sc;
  sc.segments = segments;
  sc.relevant_segments = {3};
  return sc;
}

ScoredBlock scored(BlockId id) {
  auto b = std::make_shared<CompressedBlock>();
  b->id = id;
  return {b, 0, 0};
}

/// Mean DFT magnitude in bins whose circular frequency exceeds n/4.
long double high_bin_energy(const TokenMatrix& keys) {
  const auto spectrum = oracle::frequency(keys);
  const std::size_t n = spectrum.size();
  long double sum = 0;
  for (std::size_t k = 1; k < n; ++k) {
    if (std::min(k, n - k) * 4 > n) sum += spectrum[k];
  }
  return sum;
}

TEST(Generator, SameSeedSameBytes) {
  auto sc = small();
  sc.distractors = 5;
  sc.noise = 0.01;
  const auto a = gen_stream(sc), b = gen_stream(sc);
  ASSERT_EQ(a.records.size(), 8u);
  for (std::size_t i = 0; i < a.records.size(); ++i) EXPECT_EQ(encode_segment(a.records[i]), encode_segment(b.records[i]));
  EXPECT_EQ(encode_question(a.questions[0]), encode_question(b.questions[0]));
  EXPECT_EQ(a.distractor_blocks, b.distractor_blocks);
  sc.seed = 2;
  EXPECT_NE(encode_segment(gen_stream(sc).records[0]), encode_segment(a.records[0]));
}

TEST(Generator, RecordsMatchTheirPlan) {
  for (auto coverage : {Coverage::kAllFrames, Coverage::kMiddleOnly}) {
    for (auto kind : {AttentionPayload::Kind::kAggregated, AttentionPayload::Kind::kRaw}) {
      auto sc = small(3);
      sc.relevant_segments = {1};
      sc.frame_coverage = sc.patch_coverage = coverage;
      sc.attention = kind;
      const auto plan = build_plan(sc.geometry, coverage, coverage);
      const auto s = gen_stream(sc);
      for (const auto& rec : s.records) {
        EXPECT_NO_THROW(validate_record(rec, plan));
        EXPECT_EQ(rec.end_seconds - rec.start_seconds, 8.0);
        EXPECT_EQ(decode_segment(encode_segment(rec)), rec);
      }
    }
  }
}

TEST(Generator, AttentionPayloadsAreNormalized) {
  auto sc = small(2);
  sc.relevant_segments = {0};
  sc.attention = AttentionPayload::Kind::kRaw;
  const auto raw = gen_stream(sc);
  for (const auto& block : raw.records[1].blocks) {
    const std::size_t n = block.tokens;
    for (std::size_t row = 0; row < 2 * n; ++row) {
      double sum = 0;
      for (std::size_t j = 0; j < n; ++j) sum += block.attention.values[row * n + j];
      ASSERT_NEAR(sum, 1.0, 1e-5) << to_string(block.id);
    }
  }
  sc.attention = AttentionPayload::Kind::kAggregated;
  const auto agg = gen_stream(sc);
  for (const auto& block : agg.records[1].blocks) {
    double sum = 0;
    for (float v : block.attention.values) sum += v;
    EXPECT_NEAR(sum, 2.0 * block.tokens, 1e-3 * block.tokens);
  }
}

TEST(Generator, DynamicSegmentsCarryMoreHighFrequencyEnergy) {
  auto sc = small(4);
  sc.dynamic_segments = {2};
  const auto s = gen_stream(sc);
  EXPECT_EQ(sc.profile(2), FrequencyProfile::kDynamic);
  EXPECT_EQ(sc.profile(1), FrequencyProfile::kStatic);
  for (std::size_t b = 0; b < 5; ++b) {  // segment block and frame blocks
    const auto& dyn = s.records[2].blocks[b];
    const auto& sta = s.records[1].blocks[b];
    ASSERT_EQ(dyn.id.granularity, sta.id.granularity);
    if (dyn.id.granularity == Granularity::kPatch) continue;
    EXPECT_GT(high_bin_energy(dyn.layers.back().keys), 10 * high_bin_energy(sta.layers.back().keys))
        << to_string(dyn.id);
  }
}

TEST(Generator, LabelsAndDistractors) {
  SyntheticScenario sc;
  sc.distractors = 20;
  const auto s = gen_stream(sc);
  ASSERT_EQ(s.questions.size(), 1u);
  EXPECT_EQ(s.questions[0].asked_at, 600.0);
  EXPECT_EQ(s.questions[0].query_tokens.rows(), 4u);
  const auto& rel = s.labels[0].relevant;
  EXPECT_EQ(rel[index_of(Granularity::kPatch)].size(), 16u);
  EXPECT_EQ(rel[index_of(Granularity::kFrame)].size(), 4u);
  EXPECT_EQ(rel[index_of(Granularity::kSegment)], (std::set<BlockId>{{Granularity::kSegment, 37, 0}}));
  EXPECT_EQ(s.distractor_blocks.size(), 20u);
  for (const auto& d : s.distractor_blocks) {
    EXPECT_EQ(d.granularity, Granularity::kPatch);
    EXPECT_NE(d.segment, 37u);
  }
  sc.question_at = segment_timestamp(30, 4, 0.5);
  EXPECT_TRUE(gen_stream(sc).labels[0].relevant[index_of(Granularity::kSegment)].empty());
}

TEST(Generator, InvalidScenarios) {
  SyntheticScenario sc;
  sc.segments = 10;
  EXPECT_EQ(kind_of([&] { gen_stream(sc); }), ErrorKind::kInvalidConfig);
  sc = SyntheticScenario{};
  sc.geometry.num_heads = 1;
  sc.geometry.head_dim = 4;
  EXPECT_EQ(kind_of([&] { gen_stream(sc); }), ErrorKind::kInvalidConfig);
}

TEST(Recall, ExactFractions) {
  const BlockId a{Granularity::kPatch, 1, 0}, b{Granularity::kPatch, 1, 1}, c{Granularity::kPatch, 1, 2},
      d{Granularity::kPatch, 1, 3}, x{Granularity::kPatch, 2, 0};
  GroundTruth truth;
  truth.relevant[index_of(Granularity::kPatch)] = {a, b, c, d};
  RetrievalResult r;
  r.selected[index_of(Granularity::kPatch)] = {scored(a), scored(b), scored(c), scored(d)};
  std::vector<RetrievalResult> results{r};
  std::vector<GroundTruth> labels{truth};
  EXPECT_EQ(eval_recall(results, labels).aggregate.value(), 1.0);

  results[0].selected[index_of(Granularity::kPatch)] = {scored(x)};
  EXPECT_EQ(eval_recall(results, labels).aggregate.value(), 0.0);

  results[0].selected[index_of(Granularity::kPatch)] = {scored(a), scored(x), scored(c), scored(d)};
  const auto rep = eval_recall(results, labels);
  EXPECT_EQ(rep.aggregate, (Fraction{3, 4}));
  EXPECT_EQ(rep.aggregate.str(), "3/4");
  EXPECT_EQ(rep.per_granularity[index_of(Granularity::kFrame)].value(), 1.0);  // nothing to find

  labels.push_back(truth);
  EXPECT_EQ(kind_of([&] { eval_recall(results, labels); }), ErrorKind::kLabelMismatch);
}

TEST(Recall, PlantedScenarioIsFoundByEveryMode) {
  SyntheticScenario sc;
  sc.seed = 81;
  const auto s = gen_stream(sc);
  const EngineConfig cfg = config_for(EngineConfig{}, sc);
  const auto store = build_store(cfg, s);
  for (auto mode : kAllModes) {
    RetrievalConfig rc = cfg.retrieval;
    rc.mode = mode;
    std::vector<RetrievalResult> results{retrieve(s.questions[0], store, rc)};
    EXPECT_EQ(eval_recall(results, s.labels).aggregate, (Fraction{21, 21})) << to_string(mode);
  }
}

TEST(Recall, GlobalContextBeatsLocalDistractors) {
  SyntheticScenario sc;
  sc.seed = 7;
  sc.distractors = 20;
  sc.dynamic_segments = {5, 6, 7, 40, 41};
  const auto s = gen_stream(sc);
  const EngineConfig cfg = config_for(EngineConfig{}, sc);
  const auto store = build_store(cfg, s);
  RetrievalConfig rc = cfg.retrieval;
  std::array<RecallReport, 2> rep;
  for (int i = 0; i < 2; ++i) {
    rc.mode = i == 0 ? RetrievalMode::kParallel : RetrievalMode::kSemiHierarchical;
    std::vector<RetrievalResult> results{retrieve(s.questions[0], store, rc)};
    rep[i] = eval_recall(results, s.labels);
  }
  EXPECT_GE(rep[1].aggregate.value(), rep[0].aggregate.value());
  EXPECT_LT(rep[0].per_granularity[index_of(Granularity::kPatch)].value(), 1.0);
  EXPECT_EQ(rep[1].per_granularity[index_of(Granularity::kPatch)].value(), 1.0);
}

TEST(Sweep, Parse) {
  const auto pts = parse_sweep("rho=0.5; rho=0.1/0.1/0.8,indicator=random;mode=semi;alpha=1");
  ASSERT_EQ(pts.size(), 4u);
  EXPECT_EQ(pts[0].rho, (PerGranularity<double>{0.5, 0.5, 0.5}));
  EXPECT_EQ(pts[1].label, "rho=0.1/0.1/0.8,indicator=random");
  EXPECT_EQ(pts[1].rho, (PerGranularity<double>{0.1, 0.1, 0.8}));
  EXPECT_EQ(pts[1].indicator, IndicatorMode::kRandom);
  EXPECT_EQ(pts[2].mode, RetrievalMode::kSemiHierarchical);
  EXPECT_FALSE(pts[2].rho.has_value());
  EXPECT_EQ(pts[3].alpha, (PerGranularity<double>{1, 1, 1}));
  EXPECT_TRUE(parse_sweep("").empty());
  EXPECT_TRUE(parse_sweep(";;").empty());
}

TEST(Sweep, ParseErrors) {
  for (const char* bad : {"rho", "rho=x", "rho=0.1/0.2", "beta=1", "mode=fast", "indicator=loud"}) {
    EXPECT_EQ(kind_of([&] { parse_sweep(bad); }), ErrorKind::kInvalidConfig) << bad;
  }
}

TEST(Bench, EmptySweepWritesHeaderOnly) {
  const auto rows = run_bench(EngineConfig{}, SyntheticScenario{}, {});
  std::ostringstream os;
  write_bench_csv(os, rows);
  EXPECT_EQ(os.str(),
            "point,stored_tokens,context_parallel,context_hierarchical,context_semi,"
            "recall_parallel,recall_hierarchical,recall_semi,ingest_ms,retrieve_ms\n");
}

TEST(Bench, RhoSweepStoredTokens) {
  SyntheticScenario sc;
  sc.seed = 82;
  const auto pts = parse_sweep("rho=0.5;rho=0.25;rho=0.1/0.1/0.8,mode=semi");
  const auto rows = run_bench(EngineConfig{}, sc, pts);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].stored_tokens, 75 * oracle::tokens_per_segment(0.5, 0.5, 0.5));
  EXPECT_EQ(rows[0].stored_tokens, 87600u);
  EXPECT_EQ(rows[1].stored_tokens, 43800u);
  EXPECT_EQ(rows[2].stored_tokens, 57525u);
  EXPECT_EQ(rows[2].context_tokens[2], 8212u);
  EXPECT_FALSE(rows[2].context_tokens[0].has_value());
  EXPECT_EQ(rows[2].recall[2], (Fraction{21, 21}));

  std::ostringstream os;
  write_bench_csv(os, rows);
  std::istringstream in(os.str());
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_EQ(lines[3].rfind("\"rho=0.1/0.1/0.8,mode=semi\",57525,,,8212,,,1,", 0), 0u) << lines[3];
}

TEST(Json, ScenarioKeys) {
  const auto sc = scenario_from_json(nlohmann::json::parse(R"({
    "seed": 7, "segments": 20, "relevant_segments": [3, 4], "distractors": 2,
    "distractor_granularity": "frame", "noise": 0.01, "dynamic_segments": [1],
    "attention": "raw", "static_amplitude": 0.02, "question_at": 50.0,
    "coverage": {"frame": "middle"}})"));
  EXPECT_EQ(sc.seed, 7u);
  EXPECT_EQ(sc.segments, 20u);
  EXPECT_EQ(sc.relevant_segments, (std::set<std::uint64_t>{3, 4}));
  EXPECT_EQ(sc.distractor_granularity, Granularity::kFrame);
  EXPECT_EQ(sc.attention, AttentionPayload::Kind::kRaw);
  EXPECT_EQ(sc.static_amplitude, 0.02);
  EXPECT_EQ(sc.question_at, 50.0);
  EXPECT_EQ(sc.frame_coverage, Coverage::kMiddleOnly);
  EXPECT_EQ(sc.patch_coverage, Coverage::kAllFrames);
  for (const char* bad : {R"({"sead": 1})", R"({"attention": "dense"})", R"({"segments": "many"})",
                          R"({"relevant_segments": [99]})", R"({"coverage": {"frame": "some"}})"}) {
    EXPECT_EQ(kind_of([&] { scenario_from_json(nlohmann::json::parse(bad)); }), ErrorKind::kInvalidConfig) << bad;
  }
}

TEST(Json, EngineConfigRoundTrip) {
  EngineConfig cfg;
  cfg.retention.rho = {0.2, 0.3, 0.4};
  cfg.retention.mode = IndicatorMode::kFrequencyOnly;
  cfg.retrieval.k = {0, 64, 0};
  cfg.retrieval.mode = RetrievalMode::kHierarchical;
  cfg.frame_coverage = Coverage::kMiddleOnly;
  cfg.seed = 99;
  EngineConfig back;
  apply_json(back, to_json(cfg));
  EXPECT_EQ(to_json(back), to_json(cfg));
  EXPECT_EQ(back.store_settings(), cfg.store_settings());
  EXPECT_EQ(back.retrieval, cfg.retrieval);

  EngineConfig partial;
  apply_json(partial, nlohmann::json::parse(R"({"retrieval": {"mode": "parallel"}})"));
  EXPECT_EQ(partial.retrieval.mode, RetrievalMode::kParallel);
  EXPECT_EQ(partial.retention.rho, (PerGranularity<double>{0.1, 0.1, 0.8}));

  for (const char* bad : {R"({"retention": {"rhoo": [1,1,1]}})", R"({"retrieval": {"k": [1, 2]}})",
                          R"({"fps": "fast"})", R"([1, 2])"}) {
    EngineConfig c;
    EXPECT_EQ(kind_of([&] { apply_json(c, nlohmann::json::parse(bad)); }), ErrorKind::kInvalidConfig) << bad;
  }
}

}  // namespace
}  // namespace mukv
