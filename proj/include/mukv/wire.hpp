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

#ifndef MUKV_WIRE_HPP_
#define MUKV_WIRE_HPP_

// Binary exchange formats. All integers and floats are little-endian; every
// array is preceded by an explicit count or sized from earlier header fields.
//
// .muks  segment record
//   "MUKS" u32 version u64 segment_index f64 start f64 end
//   u32 L H D P F S                      geometry echo
//   u32 block_count, then per block:
//     u8 granularity u32 sub_index u32 n
//     u8 payload kind (0 raw, 1 aggregated), f32[H*n*n] or f32[n]
//     per layer: f32[n*C] keys, f32[n*C] values
//
// .mukq  question record
//   "MUKQ" u32 version f64 asked_at u32 N_q u32 C f32[N_q*C]
//
// .mukc  assembled context
//   "MUKC" u32 version u32 L u32 C u32 rows
//   per layer: u32 layer, f32[rows*C] keys, f32[rows*C] values
//   u32 span_count, per span: u8 granularity u64 segment u32 sub_index
//                             f64 timestamp u32 row_start u32 row_count

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mukv/bytes.hpp"
#include "mukv/core.hpp"
#include "mukv/record.hpp"
#include "mukv/retrieval.hpp"

namespace mukv {

inline constexpr std::uint32_t kWireVersion = 1;

namespace wire_detail {

inline void check_version(ByteReader& r, std::string_view what) {
  const std::uint32_t v = r.u32();
  if (v != kWireVersion) {
    fail(ErrorKind::kVersionMismatch, std::string(what) + " version " + std::to_string(v) + ", expected " +
                                          std::to_string(kWireVersion));
  }
}

inline Granularity read_granularity(ByteReader& r) {
  const std::uint8_t tag = r.u8();
  if (tag > 2) fail(ErrorKind::kShapeMismatch, "granularity tag " + std::to_string(tag));
  return static_cast<Granularity>(tag);
}

}  // namespace wire_detail

inline void encode_segment(const SegmentRecord& rec, ByteWriter& w) {
  const auto& g = rec.geometry;
  const std::size_t C = g.concat_dim();
  w.magic("MUKS");
  w.u32(kWireVersion);
  w.u64(rec.segment_index);
  w.f64(rec.start_seconds);
  w.f64(rec.end_seconds);
  for (auto v : {g.num_layers, g.num_heads, g.head_dim, g.patches_per_frame, g.frames_per_segment, g.super_patches}) {
    w.u32(v);
  }
  w.u32(static_cast<std::uint32_t>(rec.blocks.size()));
  for (const auto& b : rec.blocks) {
    const std::size_t n = b.tokens;
    const std::size_t payload = b.attention.kind == AttentionPayload::Kind::kRaw ? g.num_heads * n * n : n;
    if (b.attention.values.size() != payload || b.layers.size() != g.num_layers) {
      fail(ErrorKind::kShapeMismatch, to_string(b.id) + ": cannot encode a block inconsistent with its geometry");
    }
    w.u8(static_cast<std::uint8_t>(b.id.granularity));
    w.u32(b.id.sub_index);
    w.u32(b.tokens);
    w.u8(static_cast<std::uint8_t>(b.attention.kind));
    w.f32s(b.attention.values);
    for (const auto& layer : b.layers) {
      if (layer.keys.rows() != n || layer.values.rows() != n || layer.keys.cols() != C || layer.values.cols() != C) {
        fail(ErrorKind::kShapeMismatch, to_string(b.id) + ": cannot encode a layer of the wrong shape");
      }
      w.f32s(layer.keys.data());
      w.f32s(layer.values.data());
    }
  }
}

inline Bytes encode_segment(const SegmentRecord& rec) {
  ByteWriter w;
  encode_segment(rec, w);
  return w.take();
}

/// Decodes one record from the front of `r`. Nothing is allocated for an
/// array until its declared size has been checked against the buffer.
inline SegmentRecord decode_segment(ByteReader& r) {
  using namespace wire_detail;
  SegmentRecord rec;
  r.expect_magic("MUKS");
  check_version(r, "segment record");
  rec.segment_index = r.u64();
  rec.start_seconds = r.f64();
  rec.end_seconds = r.f64();
  auto& g = rec.geometry;
  g.num_layers = r.u32();
  g.num_heads = r.u32();
  g.head_dim = r.u32();
  g.patches_per_frame = r.u32();
  g.frames_per_segment = r.u32();
  g.super_patches = r.u32();
  g.validate();
  const std::uint64_t C = g.concat_dim();
  const std::uint32_t count = r.u32();
  r.check_array(count, 10);  // smallest possible block header
  rec.blocks.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    RawBlock b;
    b.id.granularity = read_granularity(r);
    b.id.segment = rec.segment_index;
    b.id.sub_index = r.u32();
    b.tokens = r.u32();
    const std::uint64_t n = b.tokens;
    const std::uint8_t kind = r.u8();
    if (kind > 1) fail(ErrorKind::kInvalidPayload, to_string(b.id) + ": attention payload kind " + std::to_string(kind));
    b.attention.kind = static_cast<AttentionPayload::Kind>(kind);
    const std::uint64_t payload =
        b.attention.kind == AttentionPayload::Kind::kRaw ? checked_mul(checked_mul(g.num_heads, n), n) : n;
    b.attention.values = r.f32s(payload);
    const std::uint64_t cells = checked_mul(n, C);
    // All layers must fit before any of them is materialized.
    r.check_array(checked_mul(checked_mul(cells, 2), g.num_layers), 4);
    b.layers.reserve(g.num_layers);
    for (std::uint32_t l = 0; l < g.num_layers; ++l) {
      LayerKv layer;
      layer.keys = TokenMatrix(n, C, r.f32s(cells));
      layer.values = TokenMatrix(n, C, r.f32s(cells));
      b.layers.push_back(std::move(layer));
    }
    rec.blocks.push_back(std::move(b));
  }
  return rec;
}

inline SegmentRecord decode_segment(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "segment record");
  auto rec = decode_segment(r);
  if (!r.at_end()) fail(ErrorKind::kLengthMismatch, "segment record has " + std::to_string(r.remaining()) + " trailing bytes");
  return rec;
}

inline Bytes encode_question(const QuestionRecord& q) {
  ByteWriter w;
  w.magic("MUKQ");
  w.u32(kWireVersion);
  w.f64(q.asked_at);
  w.u32(static_cast<std::uint32_t>(q.query_tokens.rows()));
  w.u32(static_cast<std::uint32_t>(q.query_tokens.cols()));
  w.f32s(q.query_tokens.data());
  return w.take();
}

inline QuestionRecord decode_question(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "question record");
  r.expect_magic("MUKQ");
  wire_detail::check_version(r, "question record");
  QuestionRecord q;
  q.asked_at = r.f64();
  const std::uint32_t rows = r.u32();
  const std::uint32_t cols = r.u32();
  q.query_tokens = TokenMatrix(rows, cols, r.f32s(checked_mul(rows, cols)));
  if (!r.at_end()) fail(ErrorKind::kLengthMismatch, "question record has trailing bytes");
  if (!q.query_tokens.all_finite()) fail(ErrorKind::kNonFinite, "question record holds non-finite values");
  return q;
}

inline Bytes encode_context(const ContextKv& ctx) {
  ByteWriter w;
  w.magic("MUKC");
  w.u32(kWireVersion);
  w.u32(static_cast<std::uint32_t>(ctx.layers.size()));
  w.u32(ctx.concat_dim);
  w.u32(static_cast<std::uint32_t>(ctx.rows()));
  for (std::size_t l = 0; l < ctx.layers.size(); ++l) {
    w.u32(static_cast<std::uint32_t>(l));
    w.f32s(ctx.layers[l].keys.data());
    w.f32s(ctx.layers[l].values.data());
  }
  w.u32(static_cast<std::uint32_t>(ctx.provenance.size()));
  for (const auto& p : ctx.provenance) {
    w.u8(static_cast<std::uint8_t>(p.id.granularity));
    w.u64(p.id.segment);
    w.u32(p.id.sub_index);
    w.f64(p.timestamp);
    w.u32(p.row_start);
    w.u32(p.row_count);
  }
  return w.take();
}

inline ContextKv decode_context(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "context export");
  r.expect_magic("MUKC");
  wire_detail::check_version(r, "context export");
  ContextKv ctx;
  const std::uint32_t layers = r.u32();
  ctx.concat_dim = r.u32();
  const std::uint32_t rows = r.u32();
  const std::uint64_t cells = checked_mul(rows, ctx.concat_dim);
  r.check_array(checked_mul(checked_mul(cells, 2) + 1, layers), 4);
  for (std::uint32_t l = 0; l < layers; ++l) {
    if (r.u32() != l) fail(ErrorKind::kShapeMismatch, "context layers out of order");
    LayerKv layer;
    layer.keys = TokenMatrix(rows, ctx.concat_dim, r.f32s(cells));
    layer.values = TokenMatrix(rows, ctx.concat_dim, r.f32s(cells));
    ctx.layers.push_back(std::move(layer));
  }
  const std::uint32_t spans = r.u32();
  r.check_array(spans, 29);
  std::uint64_t next = 0;
  for (std::uint32_t i = 0; i < spans; ++i) {
    ProvenanceSpan p;
    p.id.granularity = wire_detail::read_granularity(r);
    p.id.segment = r.u64();
    p.id.sub_index = r.u32();
    p.timestamp = r.f64();
    p.row_start = r.u32();
    p.row_count = r.u32();
    if (p.row_start != next) fail(ErrorKind::kShapeMismatch, "context provenance spans are not contiguous");
    next += p.row_count;
    ctx.provenance.push_back(p);
  }
  if (layers > 0 && next != rows) fail(ErrorKind::kShapeMismatch, "context provenance does not cover all rows");
  if (!r.at_end()) fail(ErrorKind::kLengthMismatch, "context export has trailing bytes");
  return ctx;
}

}  // namespace mukv

#endif  // MUKV_WIRE_HPP_
