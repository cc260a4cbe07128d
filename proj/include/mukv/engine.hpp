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

#ifndef MUKV_ENGINE_HPP_
#define MUKV_ENGINE_HPP_

// Ingest pipeline: validate a segment record against the plan, compress every
// block, append the segment.

#include <cstdint>
#include <vector>

#include "mukv/config.hpp"
#include "mukv/dcp.hpp"
#include "mukv/granularity.hpp"
#include "mukv/record.hpp"
#include "mukv/store.hpp"

namespace mukv {

struct IngestReport {
  std::uint64_t segment = 0;
  std::uint64_t tokens_in = 0;
  std::uint64_t tokens_retained = 0;
  std::uint64_t store_tokens = 0;
  bool over_budget = false;
};

inline std::vector<CompressedBlock> compress_segment(const SegmentRecord& record, const StoreSettings& settings) {
  const double ts = segment_timestamp(record.segment_index, settings.geometry.frames_per_segment, settings.fps);
  std::vector<CompressedBlock> out;
  out.reserve(record.blocks.size());
  for (const auto& block : record.blocks) {
    out.push_back(compress_block(block, settings.policy, settings.geometry.num_heads, ts));
  }
  return out;
}

inline IngestReport ingest_record(KvStore& store, const GranularityPlan& plan, const SegmentRecord& record) {
  const std::uint64_t expected = store.segment_count();
  if (record.segment_index < expected) {
    fail(ErrorKind::kDuplicateSegment, "segment " + std::to_string(record.segment_index) + " already stored");
  }
  if (record.segment_index > expected) {
    fail(ErrorKind::kOutOfOrderSegment, "segment " + std::to_string(record.segment_index) +
                                            " arrived while expecting " + std::to_string(expected));
  }
  validate_record(record, plan);
  auto blocks = compress_segment(record, store.settings());
  IngestReport report;
  report.segment = record.segment_index;
  report.tokens_in = record.total_tokens();
  for (const auto& b : blocks) report.tokens_retained += b.kept();
  store.append_segment(record.segment_index, std::move(blocks));
  const auto stats = store.stats();
  report.store_tokens = stats.total_tokens;
  report.over_budget = stats.over_budget;
  return report;
}

}  // namespace mukv

#endif  // MUKV_ENGINE_HPP_
