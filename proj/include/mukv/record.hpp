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

#ifndef MUKV_RECORD_HPP_
#define MUKV_RECORD_HPP_

#include <cstdint>
#include <vector>

#include "mukv/core.hpp"

namespace mukv {

/// Last-layer attention for one block. Raw holds H x n x n weights, query
/// major, each (head, query) row summing to 1. Aggregated holds the length-n
/// column sums over heads and queries.
struct AttentionPayload {
  enum class Kind : std::uint8_t { kRaw = 0, kAggregated = 1 };

  Kind kind = Kind::kAggregated;
  std::vector<float> values;

  friend bool operator==(const AttentionPayload&, const AttentionPayload&) = default;
};

/// One uncompressed block as produced by a prefill: n tokens, all layers.
struct RawBlock {
  BlockId id;
  std::uint32_t tokens = 0;
  AttentionPayload attention;
  std::vector<LayerKv> layers;

  const TokenMatrix& last_layer_keys() const { return layers.back().keys; }

  friend bool operator==(const RawBlock&, const RawBlock&) = default;
};

/// Everything ingested for one segment, across all granularities.
struct SegmentRecord {
  std::uint64_t segment_index = 0;
  double start_seconds = 0.0;
  double end_seconds = 0.0;
  ModelGeometry geometry;
  std::vector<RawBlock> blocks;

  std::uint64_t total_tokens() const {
    std::uint64_t n = 0;
    for (const auto& b : blocks) n += b.tokens;
    return n;
  }

  friend bool operator==(const SegmentRecord&, const SegmentRecord&) = default;
};

}  // namespace mukv

#endif  // MUKV_RECORD_HPP_
