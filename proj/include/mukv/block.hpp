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

#ifndef MUKV_BLOCK_HPP_
#define MUKV_BLOCK_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "mukv/bytes.hpp"
#include "mukv/core.hpp"

namespace mukv {

/// A block after pruning: the retained rows of every layer plus the mean of
/// the retained last-layer keys, which is what retrieval scores against.
struct CompressedBlock {
  BlockId id;
  double timestamp = 0.0;
  std::vector<std::uint32_t> retained;  // strictly ascending, block-local
  std::vector<LayerKv> layers;
  std::vector<float> summary;
  std::vector<float> scores;  // fused score of each retained token

  std::size_t kept() const { return retained.size(); }

  friend bool operator==(const CompressedBlock&, const CompressedBlock&) = default;
};

/// Slab framing: gran u8, segment u64, sub u32, timestamp f64, kept u32,
/// indices u32[kept], summary f32[C], scores f32[kept], then per layer
/// K f32[kept*C] followed by V f32[kept*C].
inline void encode_block(const CompressedBlock& b, ByteWriter& w) {
  w.u8(static_cast<std::uint8_t>(b.id.granularity));
  w.u64(b.id.segment);
  w.u32(b.id.sub_index);
  w.f64(b.timestamp);
  w.u32(static_cast<std::uint32_t>(b.retained.size()));
  w.u32s(b.retained);
  w.f32s(b.summary);
  w.f32s(b.scores);
  for (const auto& layer : b.layers) {
    w.f32s(layer.keys.data());
    w.f32s(layer.values.data());
  }
}

inline Bytes encode_block(const CompressedBlock& b) {
  ByteWriter w;
  encode_block(b, w);
  return w.take();
}

inline CompressedBlock decode_block(ByteReader& r, std::uint32_t num_layers, std::uint32_t concat_dim) {
  CompressedBlock b;
  const std::uint8_t gran = r.u8();
  if (gran > 2) fail(ErrorKind::kShapeMismatch, "block granularity tag " + std::to_string(gran));
  b.id.granularity = static_cast<Granularity>(gran);
  b.id.segment = r.u64();
  b.id.sub_index = r.u32();
  b.timestamp = r.f64();
  const std::uint32_t kept = r.u32();
  b.retained = r.u32s(kept);
  b.summary = r.f32s(concat_dim);
  b.scores = r.f32s(kept);
  const std::uint64_t cells = std::uint64_t{kept} * concat_dim;
  b.layers.reserve(num_layers);
  for (std::uint32_t l = 0; l < num_layers; ++l) {
    LayerKv layer;
    layer.keys = TokenMatrix(kept, concat_dim, r.f32s(cells));
    layer.values = TokenMatrix(kept, concat_dim, r.f32s(cells));
    b.layers.push_back(std::move(layer));
  }
  return b;
}

}  // namespace mukv

#endif  // MUKV_BLOCK_HPP_
