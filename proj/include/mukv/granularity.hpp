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

#ifndef MUKV_GRANULARITY_HPP_
#define MUKV_GRANULARITY_HPP_

// Partition of one segment's token grid into segment, frame and super-patch
// blocks. Segment-local token index = frame * P + patch, patches in raster
// order.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mukv/core.hpp"
#include "mukv/record.hpp"

namespace mukv {

enum class Coverage : std::uint8_t { kMiddleOnly = 0, kAllFrames = 1 };

constexpr std::string_view to_string(Coverage c) {
  return c == Coverage::kMiddleOnly ? "middle" : "all";
}

inline std::optional<Coverage> parse_coverage(std::string_view s) {
  if (s == "middle" || s == "middle_only") return Coverage::kMiddleOnly;
  if (s == "all" || s == "all_frames") return Coverage::kAllFrames;
  return std::nullopt;
}

struct FrameBlock {
  std::uint32_t frame = 0;
  std::vector<std::uint32_t> indices;

  friend bool operator==(const FrameBlock&, const FrameBlock&) = default;
};

struct PatchBlock {
  std::uint32_t frame = 0;
  std::uint32_t super_patch = 0;
  std::vector<std::uint32_t> indices;

  friend bool operator==(const PatchBlock&, const PatchBlock&) = default;
};

/// Sub-index of a super-patch block: frame * S + super_patch.
constexpr std::uint32_t patch_sub_index(const ModelGeometry& g, std::uint32_t frame,
                                        std::uint32_t super_patch) {
  return frame * g.super_patches + super_patch;
}

struct GranularityPlan {
  ModelGeometry geometry;
  Coverage frame_coverage = Coverage::kAllFrames;
  Coverage patch_coverage = Coverage::kAllFrames;
  std::vector<std::uint32_t> segment_indices;
  std::vector<FrameBlock> frames;
  std::vector<PatchBlock> patches;

  std::size_t block_count(Granularity g) const {
    switch (g) {
      case Granularity::kSegment: return 1;
      case Granularity::kFrame: return frames.size();
      case Granularity::kPatch: return patches.size();
    }
    return 0;
  }

  /// Token count of every block the plan expects, keyed by (granularity, sub_index).
  std::map<std::pair<Granularity, std::uint32_t>, std::uint32_t> expected_blocks() const {
    std::map<std::pair<Granularity, std::uint32_t>, std::uint32_t> out;
    out[{Granularity::kSegment, 0}] = static_cast<std::uint32_t>(segment_indices.size());
    for (const auto& f : frames) {
      out[{Granularity::kFrame, f.frame}] = static_cast<std::uint32_t>(f.indices.size());
    }
    for (const auto& p : patches) {
      out[{Granularity::kPatch, patch_sub_index(geometry, p.frame, p.super_patch)}] =
          static_cast<std::uint32_t>(p.indices.size());
    }
    return out;
  }

  friend bool operator==(const GranularityPlan&, const GranularityPlan&) = default;
};

inline GranularityPlan build_plan(const ModelGeometry& geometry, Coverage frame_coverage,
                                  Coverage patch_coverage) {
  geometry.validate();
  const std::uint32_t P = geometry.patches_per_frame;
  const std::uint32_t F = geometry.frames_per_segment;
  const std::uint32_t S = geometry.super_patches;
  const std::uint32_t width = geometry.super_patch_size();
  const std::uint32_t middle = F / 2;

  GranularityPlan plan;
  plan.geometry = geometry;
  plan.frame_coverage = frame_coverage;
  plan.patch_coverage = patch_coverage;

  plan.segment_indices.resize(static_cast<std::size_t>(P) * F);
  for (std::uint32_t i = 0; i < P * F; ++i) plan.segment_indices[i] = i;

  auto frames_for = [&](Coverage c) {
    std::vector<std::uint32_t> out;
    if (c == Coverage::kMiddleOnly) {
      out.push_back(middle);
    } else {
      for (std::uint32_t f = 0; f < F; ++f) out.push_back(f);
    }
    return out;
  };

  for (std::uint32_t f : frames_for(frame_coverage)) {
    FrameBlock block{f, {}};
    block.indices.reserve(P);
    for (std::uint32_t p = 0; p < P; ++p) block.indices.push_back(f * P + p);
    plan.frames.push_back(std::move(block));
  }
  for (std::uint32_t f : frames_for(patch_coverage)) {
    for (std::uint32_t s = 0; s < S; ++s) {
      // The last super-patch absorbs the P mod S leftover patches.
      const std::uint32_t begin = s * width;
      const std::uint32_t end = (s + 1 == S) ? P : begin + width;
      PatchBlock block{f, s, {}};
      for (std::uint32_t p = begin; p < end; ++p) block.indices.push_back(f * P + p);
      plan.patches.push_back(std::move(block));
    }
  }
  return plan;
}

namespace granularity_detail {

inline void check_payload(const RawBlock& block, std::uint32_t heads) {
  const std::string name = to_string(block.id);
  const std::uint64_t n = block.tokens;
  const auto& payload = block.attention;
  if (payload.kind == AttentionPayload::Kind::kRaw) {
    const std::uint64_t expected = std::uint64_t{heads} * n * n;
    if (payload.values.size() != expected) {
      fail(ErrorKind::kShapeMismatch, name + ": raw attention has " +
                                          std::to_string(payload.values.size()) +
                                          " values, expected " + std::to_string(expected));
    }
    for (std::uint64_t row = 0; row < std::uint64_t{heads} * n; ++row) {
      double sum = 0.0;
      for (std::uint64_t j = 0; j < n; ++j) {
        const float a = payload.values[row * n + j];
        if (!std::isfinite(a)) fail(ErrorKind::kNonFinite, name + ": non-finite attention weight");
        if (a < 0.0f) fail(ErrorKind::kInvalidPayload, name + ": negative attention weight");
        sum += a;
      }
      if (std::abs(sum - 1.0) > 1e-3) {
        fail(ErrorKind::kInvalidPayload, name + ": attention row " + std::to_string(row) +
                                             " sums to " + std::to_string(sum));
      }
    }
  } else if (payload.kind == AttentionPayload::Kind::kAggregated) {
    if (payload.values.size() != n) {
      fail(ErrorKind::kShapeMismatch, name + ": aggregated attention has " +
                                          std::to_string(payload.values.size()) +
                                          " values, expected " + std::to_string(n));
    }
    double sum = 0.0;
    for (float a : payload.values) {
      if (!std::isfinite(a)) fail(ErrorKind::kNonFinite, name + ": non-finite attention weight");
      if (a < 0.0f) fail(ErrorKind::kInvalidPayload, name + ": negative aggregated attention");
      sum += a;
    }
    const double target = static_cast<double>(heads) * static_cast<double>(n);
    if (std::abs(sum - target) > 1e-2 * target) {
      fail(ErrorKind::kInvalidPayload, name + ": aggregated attention sums to " +
                                           std::to_string(sum) + ", expected about " +
                                           std::to_string(target));
    }
  } else {
    fail(ErrorKind::kInvalidPayload, name + ": unknown attention payload kind");
  }
}

}  // namespace granularity_detail

/// Throws unless `record` carries exactly the blocks of `plan` with the
/// plan's token counts and the geometry's layer and feature widths.
inline void validate_record(const SegmentRecord& record, const GranularityPlan& plan) {
  const ModelGeometry& g = plan.geometry;
  if (!(record.geometry == g)) {
    fail(ErrorKind::kShapeMismatch, "segment " + std::to_string(record.segment_index) +
                                        ": geometry echo does not match the engine geometry");
  }
  const auto expected = plan.expected_blocks();
  std::set<std::pair<Granularity, std::uint32_t>> seen;
  const std::size_t C = g.concat_dim();

  for (const auto& block : record.blocks) {
    const std::string name = to_string(block.id);
    if (block.id.segment != record.segment_index) {
      fail(ErrorKind::kShapeMismatch,
           name + ": block belongs to segment " + std::to_string(block.id.segment) +
               " inside record for segment " + std::to_string(record.segment_index));
    }
    const auto key = std::make_pair(block.id.granularity, block.id.sub_index);
    const auto it = expected.find(key);
    if (it == expected.end()) fail(ErrorKind::kShapeMismatch, name + ": block is not part of the plan");
    if (!seen.insert(key).second) fail(ErrorKind::kDuplicateBlock, name + ": block appears twice");
    if (block.tokens != it->second) {
      fail(ErrorKind::kShapeMismatch, name + ": expected " + std::to_string(it->second) +
                                          " tokens, got " + std::to_string(block.tokens));
    }
    if (block.layers.size() != g.num_layers) {
      fail(ErrorKind::kShapeMismatch, name + ": expected " + std::to_string(g.num_layers) +
                                          " layers, got " + std::to_string(block.layers.size()));
    }
    for (std::size_t l = 0; l < block.layers.size(); ++l) {
      for (const TokenMatrix* m : {&block.layers[l].keys, &block.layers[l].values}) {
        if (m->rows() != block.tokens || m->cols() != C) {
          fail(ErrorKind::kShapeMismatch,
               name + ": layer " + std::to_string(l) + " tensor is " + std::to_string(m->rows()) +
                   "x" + std::to_string(m->cols()) + ", expected " + std::to_string(block.tokens) +
                   "x" + std::to_string(C));
        }
        if (!m->all_finite()) {
          fail(ErrorKind::kNonFinite, name + ": layer " + std::to_string(l) + " has non-finite values");
        }
      }
    }
    granularity_detail::check_payload(block, g.num_heads);
  }
  for (const auto& [key, n] : expected) {
    if (!seen.contains(key)) {
      fail(ErrorKind::kMissingBlock,
           to_string(BlockId{key.first, record.segment_index, key.second}) + ": block missing from record");
    }
  }
}

}  // namespace mukv

#endif  // MUKV_GRANULARITY_HPP_
