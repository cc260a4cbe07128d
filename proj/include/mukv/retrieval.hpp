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

#ifndef MUKV_RETRIEVAL_HPP_
#define MUKV_RETRIEVAL_HPP_

// Question-time block selection over a store snapshot.
//
// Semi-hierarchical retrieval runs in two stages:
//   1. For each granularity, score every block summary against the mean
//      question query by cosine and keep the best 2k candidates.
//   2. Average the summaries of the best N segment candidates into a global
//      query, score each candidate's agreement with it (cosine), blend
//      s' = (1 - lambda) s + lambda * agreement, and keep the best k.
// Parallel mode stops after stage 1 (truncated to k). Hierarchical mode picks
// the best segments first and only considers frame and patch blocks inside
// them, scoring everything against the question.
//
// Ordering everywhere: higher score, then earlier timestamp, then lower id.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mukv/core.hpp"
#include "mukv/store.hpp"

namespace mukv {

enum class RetrievalMode : std::uint8_t { kParallel = 0, kHierarchical = 1, kSemiHierarchical = 2 };

constexpr std::string_view to_string(RetrievalMode m) {
  switch (m) {
    case RetrievalMode::kParallel: return "parallel";
    case RetrievalMode::kHierarchical: return "hierarchical";
    case RetrievalMode::kSemiHierarchical: return "semi";
  }
  return "?";
}

inline std::optional<RetrievalMode> parse_retrieval_mode(std::string_view s) {
  if (s == "parallel" || s == "para") return RetrievalMode::kParallel;
  if (s == "hierarchical" || s == "hier") return RetrievalMode::kHierarchical;
  if (s == "semi" || s == "semi-hierarchical" || s == "semi_hierarchical") return RetrievalMode::kSemiHierarchical;
  return std::nullopt;
}

struct RetrievalConfig {
  PerGranularity<std::uint32_t> k = {20, 32, 12};
  PerGranularity<double> lambda = {0.3, 0.3, 0.0};
  std::uint32_t global_n = 5;
  RetrievalMode mode = RetrievalMode::kSemiHierarchical;
  std::uint32_t hier_top_segments = 5;

  // A budget of 0 switches a granularity off, which is how single-granularity
  // baselines are expressed.
  void validate() const {
    for (Granularity g : kAllGranularities) {
      const double l = lambda[index_of(g)];
      if (!(l >= 0.0 && l <= 1.0)) {
        fail(ErrorKind::kInvalidConfig, std::string(to_string(g)) + " lambda must lie in [0, 1]");
      }
    }
    if (lambda[index_of(Granularity::kSegment)] != 0.0) {
      fail(ErrorKind::kInvalidConfig, "segment lambda must be 0: the global query is built from segments");
    }
    if (global_n == 0) fail(ErrorKind::kInvalidConfig, "global_n must be at least 1");
    if (hier_top_segments == 0) fail(ErrorKind::kInvalidConfig, "hier_top_segments must be at least 1");
  }

  friend bool operator==(const RetrievalConfig&, const RetrievalConfig&) = default;
};

struct QuestionRecord {
  TokenMatrix query_tokens;  // N_q x C, last-layer query projections
  double asked_at = 0.0;

  friend bool operator==(const QuestionRecord&, const QuestionRecord&) = default;
};

struct ScoredBlock {
  BlockPtr block;
  float stage1 = 0.0f;
  float stage2 = 0.0f;  // final score; equals stage1 when no rerank ran
};

struct RetrievalResult {
  RetrievalMode mode = RetrievalMode::kSemiHierarchical;
  PerGranularity<std::vector<ScoredBlock>> selected;
  std::optional<std::vector<float>> global_query;
  bool degraded_to_parallel = false;   // semi mode with no segment candidates
  std::size_t degenerate_scores = 0;   // cosines against zero vectors, scored 0

  std::size_t total_blocks() const {
    return selected[0].size() + selected[1].size() + selected[2].size();
  }
  std::size_t total_rows() const {
    std::size_t n = 0;
    for (const auto& list : selected) {
      for (const auto& s : list) n += s.block->kept();
    }
    return n;
  }
};

using CandidateLists = PerGranularity<std::vector<ScoredBlock>>;

namespace retrieval_detail {

inline bool ranks_before(const BlockPtr& a, float sa, const BlockPtr& b, float sb) {
  if (sa != sb) return sa > sb;
  if (a->timestamp != b->timestamp) return a->timestamp < b->timestamp;
  return a->id < b->id;
}

inline void sort_by_stage2(std::vector<ScoredBlock>& list) {
  std::sort(list.begin(), list.end(), [](const ScoredBlock& a, const ScoredBlock& b) {
    return ranks_before(a.block, a.stage2, b.block, b.stage2);
  });
}

inline void sort_by_stage1(std::vector<ScoredBlock>& list) {
  std::sort(list.begin(), list.end(), [](const ScoredBlock& a, const ScoredBlock& b) {
    return ranks_before(a.block, a.stage1, b.block, b.stage1);
  });
}

inline float score_or_zero(std::span<const float> a, std::span<const float> b, std::size_t& degenerate) {
  auto c = try_cosine(a, b);
  if (!c) {
    ++degenerate;
    return 0.0f;
  }
  return *c;
}

inline std::vector<ScoredBlock> score_all(std::span<const float> q, const std::vector<BlockPtr>& blocks,
                                          std::size_t& degenerate) {
  std::vector<ScoredBlock> out;
  out.reserve(blocks.size());
  for (const auto& b : blocks) {
    const float s = score_or_zero(q, b->summary, degenerate);
    out.push_back({b, s, s});
  }
  return out;
}

inline void truncate(std::vector<ScoredBlock>& list, std::size_t n) {
  if (list.size() > n) list.resize(n);
}

}  // namespace retrieval_detail

/// Mean of the question's query tokens.
inline std::vector<float> question_embedding(const QuestionRecord& record) {
  if (record.query_tokens.rows() == 0) fail(ErrorKind::kEmptyQuestion, "question has no query tokens");
  return mean_pool_rows(record.query_tokens);
}

/// Stage 1: top min(2k, available) blocks per granularity by cosine to `q`.
inline CandidateLists stage1_parallel(std::span<const float> q, const StoreView& view,
                                      const RetrievalConfig& config, std::size_t* degenerate = nullptr) {
  using namespace retrieval_detail;
  std::size_t local = 0;
  CandidateLists out;
  for (Granularity g : kAllGranularities) {
    auto list = score_all(q, view.blocks(g), local);
    sort_by_stage1(list);
    truncate(list, 2 * std::size_t{config.k[index_of(g)]});
    out[index_of(g)] = std::move(list);
  }
  if (degenerate) *degenerate += local;
  return out;
}

/// Mean summary of the best min(n, available) segment candidates.
inline std::vector<float> global_query(const std::vector<ScoredBlock>& segment_candidates, std::size_t n) {
  if (segment_candidates.empty()) fail(ErrorKind::kNoSegments, "no segment candidates for a global query");
  if (n == 0) fail(ErrorKind::kInvalidConfig, "global query over zero segments");
  const std::size_t take = std::min(n, segment_candidates.size());
  const std::size_t C = segment_candidates.front().block->summary.size();
  std::vector<double> acc(C, 0.0);
  for (std::size_t i = 0; i < take; ++i) {
    const auto& s = segment_candidates[i].block->summary;
    for (std::size_t j = 0; j < C; ++j) acc[j] += s[j];
  }
  std::vector<float> out(C);
  for (std::size_t j = 0; j < C; ++j) out[j] = static_cast<float>(acc[j] / static_cast<double>(take));
  return out;
}

/// Stage 2: blend each candidate's stage-1 score with its agreement with `g`
/// and keep the best k per granularity.
inline RetrievalResult stage2_rerank(CandidateLists candidates, std::span<const float> g,
                                     const RetrievalConfig& config) {
  using namespace retrieval_detail;
  RetrievalResult result;
  result.mode = RetrievalMode::kSemiHierarchical;
  result.global_query = std::vector<float>(g.begin(), g.end());
  for (Granularity level : kAllGranularities) {
    const double lambda = config.lambda[index_of(level)];
    auto& list = candidates[index_of(level)];
    for (auto& c : list) {
      const float gamma = score_or_zero(g, c.block->summary, result.degenerate_scores);
      c.stage2 = static_cast<float>((1.0 - lambda) * c.stage1 + lambda * gamma);
    }
    sort_by_stage2(list);
    truncate(list, config.k[index_of(level)]);
    result.selected[index_of(level)] = std::move(list);
  }
  return result;
}

inline RetrievalResult retrieve_from_view(const QuestionRecord& record, const StoreView& view,
                                          const RetrievalConfig& config) {
  using namespace retrieval_detail;
  config.validate();
  const auto q = question_embedding(record);
  std::size_t degenerate = 0;

  if (config.mode == RetrievalMode::kHierarchical) {
    RetrievalResult result;
    result.mode = RetrievalMode::kHierarchical;
    auto segments = score_all(q, view.blocks(Granularity::kSegment), degenerate);
    sort_by_stage1(segments);
    std::set<std::uint64_t> parents;
    for (std::size_t i = 0; i < segments.size() && i < config.hier_top_segments; ++i) {
      parents.insert(segments[i].block->id.segment);
    }
    truncate(segments, config.k[index_of(Granularity::kSegment)]);
    result.selected[index_of(Granularity::kSegment)] = std::move(segments);
    for (Granularity g : {Granularity::kFrame, Granularity::kPatch}) {
      std::vector<BlockPtr> children;
      for (const auto& b : view.blocks(g)) {
        if (parents.contains(b->id.segment)) children.push_back(b);
      }
      auto list = score_all(q, children, degenerate);
      sort_by_stage1(list);
      truncate(list, config.k[index_of(g)]);
      result.selected[index_of(g)] = std::move(list);
    }
    result.degenerate_scores = degenerate;
    return result;
  }

  auto candidates = stage1_parallel(q, view, config, &degenerate);
  const bool no_segments = candidates[index_of(Granularity::kSegment)].empty();
  if (config.mode == RetrievalMode::kParallel || no_segments) {
    RetrievalResult result;
    result.mode = config.mode;
    result.degraded_to_parallel = config.mode == RetrievalMode::kSemiHierarchical;
    for (Granularity g : kAllGranularities) {
      auto& list = candidates[index_of(g)];
      truncate(list, config.k[index_of(g)]);
      result.selected[index_of(g)] = std::move(list);
    }
    result.degenerate_scores = degenerate;
    return result;
  }
  const auto gq = global_query(candidates[index_of(Granularity::kSegment)], config.global_n);
  auto result = stage2_rerank(std::move(candidates), gq, config);
  result.degenerate_scores += degenerate;
  return result;
}

/// Retrieves against the snapshot at the question's timestamp.
inline RetrievalResult retrieve(const QuestionRecord& record, const KvStore& store, const RetrievalConfig& config) {
  if (record.query_tokens.cols() != store.geometry().concat_dim()) {
    fail(ErrorKind::kShapeMismatch, "question has " + std::to_string(record.query_tokens.cols()) +
                                        " dims, store has " + std::to_string(store.geometry().concat_dim()));
  }
  return retrieve_from_view(record, store.snapshot(record.asked_at), config);
}

struct ProvenanceSpan {
  BlockId id;
  double timestamp = 0.0;
  std::uint32_t row_start = 0;
  std::uint32_t row_count = 0;

  friend bool operator==(const ProvenanceSpan&, const ProvenanceSpan&) = default;
};

/// Per-layer concatenated keys and values handed to a decoder.
struct ContextKv {
  std::uint32_t concat_dim = 0;
  std::vector<LayerKv> layers;
  std::vector<ProvenanceSpan> provenance;

  std::size_t rows() const { return layers.empty() ? 0 : layers.front().keys.rows(); }

  friend bool operator==(const ContextKv&, const ContextKv&) = default;
};

/// Lays the selected blocks out by timestamp, coarse-to-fine within a
/// timestamp, then sub-index. Blocks are resolved through `store`.
inline ContextKv assemble_context(const RetrievalResult& result, const KvStore& store) {
  const auto& geometry = store.geometry();
  const std::size_t C = geometry.concat_dim();
  const auto view = store.snapshot(std::numeric_limits<double>::infinity());

  std::vector<BlockPtr> blocks;
  for (const auto& list : result.selected) {
    for (const auto& s : list) {
      auto b = view.find(s.block->id);
      if (!b) fail(ErrorKind::kMissingBlock, to_string(s.block->id) + ": selected block is not in the store");
      blocks.push_back(std::move(b));
    }
  }
  auto coarse_rank = [](Granularity g) { return 2 - static_cast<int>(index_of(g)); };
  std::sort(blocks.begin(), blocks.end(), [&](const BlockPtr& a, const BlockPtr& b) {
    if (a->timestamp != b->timestamp) return a->timestamp < b->timestamp;
    if (a->id.granularity != b->id.granularity) return coarse_rank(a->id.granularity) < coarse_rank(b->id.granularity);
    if (a->id.sub_index != b->id.sub_index) return a->id.sub_index < b->id.sub_index;
    return a->id.segment < b->id.segment;
  });

  ContextKv ctx;
  ctx.concat_dim = static_cast<std::uint32_t>(C);
  ctx.layers.assign(geometry.num_layers, LayerKv{TokenMatrix(0, C), TokenMatrix(0, C)});
  std::uint32_t row = 0;
  for (const auto& b : blocks) {
    for (std::size_t l = 0; l < ctx.layers.size(); ++l) {
      ctx.layers[l].keys.append_rows(b->layers[l].keys);
      ctx.layers[l].values.append_rows(b->layers[l].values);
    }
    const auto kept = static_cast<std::uint32_t>(b->kept());
    ctx.provenance.push_back({b->id, b->timestamp, row, kept});
    row += kept;
  }
  return ctx;
}

}  // namespace mukv

#endif  // MUKV_RETRIEVAL_HPP_
