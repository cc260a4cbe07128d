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

#ifndef MUKV_STORE_HPP_
#define MUKV_STORE_HPP_

// Append-only multi-granularity block store.
//
// One writer appends whole segments in order; readers take snapshots, which
// hold shared pointers to immutable blocks and therefore never observe later
// appends. Nothing is ever evicted.
//
// On disk a store is a directory:
//   manifest       "MUKV", version, geometry, fps, coverage, policy, segment
//                  count, then per granularity the (id, offset, length, crc32)
//                  of every block, and a trailing crc32 of the manifest itself
//   patch.slab     concatenated framed blocks (see block.hpp)
//   frame.slab
//   segment.slab

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "mukv/block.hpp"
#include "mukv/bytes.hpp"
#include "mukv/core.hpp"
#include "mukv/dcp.hpp"
#include "mukv/granularity.hpp"

namespace mukv {

inline constexpr std::uint32_t kStoreFormatVersion = 1;

using BlockPtr = std::shared_ptr<const CompressedBlock>;

/// Midpoint of segment `index` on the stream clock.
inline double segment_timestamp(std::uint64_t index, std::uint32_t frames_per_segment, double fps) {
  const double span = static_cast<double>(frames_per_segment) / fps;
  return static_cast<double>(index) * span + span / 2.0;
}

/// Immutable, timestamp-bounded read view.
class StoreView {
 public:
  StoreView() = default;
  StoreView(double t_query, PerGranularity<std::vector<BlockPtr>> blocks)
      : t_query_(t_query), blocks_(std::move(blocks)) {}

  double t_query() const { return t_query_; }
  const std::vector<BlockPtr>& blocks(Granularity g) const { return blocks_[index_of(g)]; }

  std::size_t size() const {
    return blocks_[0].size() + blocks_[1].size() + blocks_[2].size();
  }
  bool empty() const { return size() == 0; }

  BlockPtr find(const BlockId& id) const {
    const auto& list = blocks_[index_of(id.granularity)];
    auto it = std::lower_bound(list.begin(), list.end(), id,
                               [](const BlockPtr& b, const BlockId& key) { return b->id < key; });
    if (it != list.end() && (*it)->id == id) return *it;
    return nullptr;
  }

 private:
  double t_query_ = 0.0;
  PerGranularity<std::vector<BlockPtr>> blocks_;
};

struct StoreStats {
  std::uint64_t segments = 0;
  PerGranularity<std::uint64_t> blocks = {0, 0, 0};
  PerGranularity<std::uint64_t> tokens = {0, 0, 0};
  std::uint64_t total_tokens = 0;
  std::uint64_t frames = 0;
  double tokens_per_300_frames = 0.0;
  std::uint64_t estimated_bytes = 0;
  std::uint64_t byte_budget = 0;
  bool over_budget = false;
};

struct StoreSettings {
  ModelGeometry geometry;
  double fps = 0.5;
  Coverage frame_coverage = Coverage::kAllFrames;
  Coverage patch_coverage = Coverage::kAllFrames;
  RetentionPolicy policy;

  friend bool operator==(const StoreSettings&, const StoreSettings&) = default;
};

class KvStore {
 public:
  explicit KvStore(StoreSettings settings) : settings_(std::move(settings)) {
    settings_.geometry.validate();
    if (!(settings_.fps > 0.0)) fail(ErrorKind::kInvalidConfig, "fps must be positive");
  }

  KvStore(KvStore&&) = default;
  KvStore& operator=(KvStore&&) = default;

  const StoreSettings& settings() const { return settings_; }
  const ModelGeometry& geometry() const { return settings_.geometry; }

  /// Non-destructive warning threshold reported by stats(); 0 disables it.
  void set_byte_budget(std::uint64_t bytes) { byte_budget_ = bytes; }

  std::uint64_t segment_count() const {
    std::shared_lock lock(*mu_);
    return segments_;
  }

  /// Appends the blocks of segment `t`, which must equal the current count.
  void append_segment(std::uint64_t t, std::vector<CompressedBlock> blocks) {
    std::unique_lock lock(*mu_);
    if (t < segments_) fail(ErrorKind::kDuplicateSegment, "segment " + std::to_string(t) + " already stored");
    if (t > segments_) {
      fail(ErrorKind::kOutOfOrderSegment, "segment " + std::to_string(t) + " arrived while expecting " +
                                              std::to_string(segments_));
    }
    std::set<BlockId> ids;
    for (const auto& b : blocks) {
      check_block(b, t);
      if (!ids.insert(b.id).second) fail(ErrorKind::kDuplicateBlock, to_string(b.id) + ": appended twice");
    }
    std::sort(blocks.begin(), blocks.end(),
              [](const CompressedBlock& a, const CompressedBlock& b) { return a.id < b.id; });
    for (auto& b : blocks) {
      auto& list = blocks_[index_of(b.id.granularity)];
      list.push_back(std::make_shared<const CompressedBlock>(std::move(b)));
    }
    ++segments_;
  }

  /// Every block with timestamp <= t_query.
  StoreView snapshot(double t_query) const {
    std::shared_lock lock(*mu_);
    PerGranularity<std::vector<BlockPtr>> out;
    for (Granularity g : kAllGranularities) {
      for (const auto& b : blocks_[index_of(g)]) {
        if (b->timestamp <= t_query) out[index_of(g)].push_back(b);
      }
    }
    return StoreView(t_query, std::move(out));
  }

  BlockPtr find(const BlockId& id) const {
    return snapshot(std::numeric_limits<double>::infinity()).find(id);
  }

  /// Retained KV of granularity `g` for segments before `t`, in temporal
  /// order; `window` keeps only the last `window` segments.
  std::vector<LayerKv> rolling_context(Granularity g, std::uint64_t t,
                                       std::optional<std::uint64_t> window = std::nullopt) const {
    std::shared_lock lock(*mu_);
    if (t > segments_) {
      fail(ErrorKind::kOutOfOrderSegment, "rolling context for segment " + std::to_string(t) +
                                              " requested with only " + std::to_string(segments_) +
                                              " stored");
    }
    const std::uint64_t first = (window && *window < t) ? t - *window : 0;
    const std::size_t C = settings_.geometry.concat_dim();
    std::vector<LayerKv> out(settings_.geometry.num_layers, LayerKv{TokenMatrix(0, C), TokenMatrix(0, C)});
    for (const auto& b : blocks_[index_of(g)]) {
      if (b->id.segment < first || b->id.segment >= t) continue;
      for (std::size_t l = 0; l < out.size(); ++l) {
        out[l].keys.append_rows(b->layers[l].keys);
        out[l].values.append_rows(b->layers[l].values);
      }
    }
    return out;
  }

  StoreStats stats() const {
    std::shared_lock lock(*mu_);
    StoreStats s;
    s.segments = segments_;
    for (Granularity g : kAllGranularities) {
      const auto& list = blocks_[index_of(g)];
      s.blocks[index_of(g)] = list.size();
      for (const auto& b : list) s.tokens[index_of(g)] += b->kept();
      s.total_tokens += s.tokens[index_of(g)];
    }
    s.frames = segments_ * settings_.geometry.frames_per_segment;
    if (s.frames > 0) {
      s.tokens_per_300_frames = static_cast<double>(s.total_tokens) * 300.0 / static_cast<double>(s.frames);
    }
    const auto& g = settings_.geometry;
    s.estimated_bytes = s.total_tokens * g.num_layers * 2ull * g.concat_dim() * 4ull;
    s.byte_budget = byte_budget_;
    s.over_budget = byte_budget_ > 0 && s.estimated_bytes > byte_budget_;
    return s;
  }

  void persist(const std::filesystem::path& dir) const;
  static KvStore load(const std::filesystem::path& dir);
  static CompressedBlock load_block(const std::filesystem::path& dir, const BlockId& id);

 private:
  void check_block(const CompressedBlock& b, std::uint64_t t) const {
    const auto& g = settings_.geometry;
    const std::string name = to_string(b.id);
    if (b.id.segment != t) {
      fail(ErrorKind::kShapeMismatch, name + ": appended as part of segment " + std::to_string(t));
    }
    const std::size_t kept = b.retained.size();
    if (kept == 0) fail(ErrorKind::kDegenerateBlock, name + ": no retained tokens");
    for (std::size_t i = 1; i < kept; ++i) {
      if (b.retained[i] <= b.retained[i - 1]) {
        fail(ErrorKind::kShapeMismatch, name + ": retained indices are not strictly ascending");
      }
    }
    if (b.layers.size() != g.num_layers) {
      fail(ErrorKind::kShapeMismatch, name + ": has " + std::to_string(b.layers.size()) + " layers, expected " +
                                          std::to_string(g.num_layers));
    }
    for (const auto& layer : b.layers) {
      if (layer.keys.rows() != kept || layer.values.rows() != kept || layer.keys.cols() != g.concat_dim() ||
          layer.values.cols() != g.concat_dim()) {
        fail(ErrorKind::kShapeMismatch, name + ": layer tensor shape disagrees with retained count");
      }
    }
    if (b.summary.size() != g.concat_dim() || b.scores.size() != kept) {
      fail(ErrorKind::kShapeMismatch, name + ": summary or score length mismatch");
    }
    const auto& list = blocks_[index_of(b.id.granularity)];
    if (!list.empty() && list.back()->timestamp > b.timestamp) {
      fail(ErrorKind::kOutOfOrderSegment, name + ": timestamp precedes the previous block");
    }
  }

  StoreSettings settings_;
  std::uint64_t byte_budget_ = 0;
  std::uint64_t segments_ = 0;
  PerGranularity<std::vector<BlockPtr>> blocks_;
  std::unique_ptr<std::shared_mutex> mu_ = std::make_unique<std::shared_mutex>();
};

namespace store_detail {

inline constexpr char kManifestName[] = "manifest";

inline std::filesystem::path slab_path(const std::filesystem::path& dir, Granularity g) {
  return dir / (std::string(to_string(g)) + ".slab");
}

struct ManifestEntry {
  BlockId id;
  std::uint64_t offset = 0;
  std::uint64_t length = 0;
  std::uint32_t crc = 0;
};

struct Manifest {
  StoreSettings settings;
  std::uint64_t segments = 0;
  PerGranularity<std::vector<ManifestEntry>> entries;
};

inline void write_settings(ByteWriter& w, const StoreSettings& s) {
  const auto& g = s.geometry;
  for (auto v : {g.num_layers, g.num_heads, g.head_dim, g.patches_per_frame, g.frames_per_segment, g.super_patches}) {
    w.u32(v);
  }
  w.f64(s.fps);
  w.u8(static_cast<std::uint8_t>(s.frame_coverage));
  w.u8(static_cast<std::uint8_t>(s.patch_coverage));
  for (double a : s.policy.alpha) w.f64(a);
  for (double r : s.policy.rho) w.f64(r);
  w.u8(static_cast<std::uint8_t>(s.policy.mode));
  w.u64(s.policy.seed);
  w.u8(s.policy.keep_high_frequency ? 1 : 0);
}

inline StoreSettings read_settings(ByteReader& r) {
  StoreSettings s;
  auto& g = s.geometry;
  g.num_layers = r.u32();
  g.num_heads = r.u32();
  g.head_dim = r.u32();
  g.patches_per_frame = r.u32();
  g.frames_per_segment = r.u32();
  g.super_patches = r.u32();
  s.fps = r.f64();
  const auto fc = r.u8(), pc = r.u8();
  if (fc > 1 || pc > 1) fail(ErrorKind::kChecksumFailure, "manifest: invalid coverage tag");
  s.frame_coverage = static_cast<Coverage>(fc);
  s.patch_coverage = static_cast<Coverage>(pc);
  for (double& a : s.policy.alpha) a = r.f64();
  for (double& v : s.policy.rho) v = r.f64();
  const auto mode = r.u8();
  if (mode > 3) fail(ErrorKind::kChecksumFailure, "manifest: invalid indicator mode tag");
  s.policy.mode = static_cast<IndicatorMode>(mode);
  s.policy.seed = r.u64();
  s.policy.keep_high_frequency = r.u8() != 0;
  return s;
}

inline Bytes encode_manifest(const Manifest& m) {
  ByteWriter w;
  w.magic("MUKV");
  w.u32(kStoreFormatVersion);
  write_settings(w, m.settings);
  w.u64(m.segments);
  for (Granularity g : kAllGranularities) {
    const auto& list = m.entries[index_of(g)];
    w.u64(list.size());
    for (const auto& e : list) {
      w.u64(e.id.segment);
      w.u32(e.id.sub_index);
      w.u64(e.offset);
      w.u64(e.length);
      w.u32(e.crc);
    }
  }
  const std::uint32_t crc = crc32_of(w.buffer());
  w.u32(crc);
  return w.take();
}

inline Manifest decode_manifest(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "manifest");
  r.expect_magic("MUKV");
  const std::uint32_t version = r.u32();
  if (version != kStoreFormatVersion) {
    fail(ErrorKind::kVersionMismatch, "manifest version " + std::to_string(version) + ", expected " +
                                          std::to_string(kStoreFormatVersion));
  }
  if (bytes.size() < 4) fail(ErrorKind::kTruncatedFile, "manifest too short");
  ByteReader tail(bytes.subspan(bytes.size() - 4), "manifest");
  if (crc32_of(bytes.first(bytes.size() - 4)) != tail.u32()) {
    fail(ErrorKind::kChecksumFailure, "manifest checksum does not match");
  }
  Manifest m;
  m.settings = read_settings(r);
  m.segments = r.u64();
  for (Granularity g : kAllGranularities) {
    const std::uint64_t count = r.u64();
    r.check_array(count, 32);
    auto& list = m.entries[index_of(g)];
    list.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
      ManifestEntry e;
      e.id.granularity = g;
      e.id.segment = r.u64();
      e.id.sub_index = r.u32();
      e.offset = r.u64();
      e.length = r.u64();
      e.crc = r.u32();
      list.push_back(e);
    }
  }
  if (r.remaining() != 4) fail(ErrorKind::kChecksumFailure, "manifest has trailing bytes");
  return m;
}

inline void write_atomically(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  write_file(tmp, bytes);
  std::filesystem::rename(tmp, path);
}

inline CompressedBlock decode_checked(std::span<const std::uint8_t> region, const ManifestEntry& e,
                                      const ModelGeometry& g) {
  if (crc32_of(region) != e.crc) {
    fail(ErrorKind::kChecksumFailure, "block " + to_string(e.id) + " fails its checksum");
  }
  ByteReader r(region, "block " + to_string(e.id));
  auto block = decode_block(r, g.num_layers, g.concat_dim());
  if (!r.at_end() || !(block.id == e.id)) {
    fail(ErrorKind::kChecksumFailure, "block " + to_string(e.id) + " disagrees with the manifest");
  }
  return block;
}

}  // namespace store_detail

inline void KvStore::persist(const std::filesystem::path& dir) const {
  using namespace store_detail;
  std::shared_lock lock(*mu_);
  std::filesystem::create_directories(dir);
  Manifest m;
  m.settings = settings_;
  m.segments = segments_;
  for (Granularity g : kAllGranularities) {
    ByteWriter slab;
    for (const auto& b : blocks_[index_of(g)]) {
      ManifestEntry e;
      e.id = b->id;
      e.offset = slab.size();
      const Bytes framed = encode_block(*b);
      e.length = framed.size();
      e.crc = crc32_of(framed);
      slab.bytes(framed);
      m.entries[index_of(g)].push_back(e);
    }
    write_atomically(slab_path(dir, g), slab.buffer());
  }
  write_atomically(dir / kManifestName, encode_manifest(m));
}

inline KvStore KvStore::load(const std::filesystem::path& dir) {
  using namespace store_detail;
  const Bytes manifest_bytes = read_file(dir / kManifestName);
  const Manifest m = decode_manifest(manifest_bytes);
  m.settings.geometry.validate();
  KvStore store(m.settings);

  PerGranularity<std::vector<CompressedBlock>> decoded;
  for (Granularity g : kAllGranularities) {
    const auto& entries = m.entries[index_of(g)];
    const Bytes slab = read_file(slab_path(dir, g));
    std::uint64_t expected_offset = 0;
    for (const auto& e : entries) {
      if (e.offset != expected_offset) {
        fail(ErrorKind::kChecksumFailure, "block " + to_string(e.id) + " has a non-contiguous slab offset");
      }
      if (e.length > slab.size() || e.offset > slab.size() - e.length) {
        fail(ErrorKind::kTruncatedFile, std::string(to_string(g)) + " slab ends inside block " + to_string(e.id));
      }
      const std::span<const std::uint8_t> region(slab.data() + e.offset, e.length);
      decoded[index_of(g)].push_back(decode_checked(region, e, m.settings.geometry));
      expected_offset += e.length;
    }
    if (expected_offset != slab.size()) {
      fail(ErrorKind::kChecksumFailure, std::string(to_string(g)) + " slab has trailing bytes");
    }
  }

  // Regroup by segment and replay through the normal append checks.
  PerGranularity<std::size_t> cursor = {0, 0, 0};
  for (std::uint64_t t = 0; t < m.segments; ++t) {
    std::vector<CompressedBlock> seg;
    for (Granularity g : kAllGranularities) {
      auto& list = decoded[index_of(g)];
      auto& i = cursor[index_of(g)];
      while (i < list.size() && list[i].id.segment == t) seg.push_back(std::move(list[i++]));
    }
    store.append_segment(t, std::move(seg));
  }
  for (Granularity g : kAllGranularities) {
    if (cursor[index_of(g)] != decoded[index_of(g)].size()) {
      fail(ErrorKind::kChecksumFailure, std::string(to_string(g)) + " slab holds blocks beyond the segment count");
    }
  }
  return store;
}

/// Reads one block by seeking to its slab region; the rest of the slab is
/// never read.
inline CompressedBlock KvStore::load_block(const std::filesystem::path& dir, const BlockId& id) {
  using namespace store_detail;
  const Bytes manifest_bytes = read_file(dir / kManifestName);
  const Manifest m = decode_manifest(manifest_bytes);
  const auto& entries = m.entries[index_of(id.granularity)];
  auto it = std::find_if(entries.begin(), entries.end(), [&](const ManifestEntry& e) { return e.id == id; });
  if (it == entries.end()) fail(ErrorKind::kUnknownBlock, to_string(id) + ": not in store");
  std::ifstream in(slab_path(dir, id.granularity), std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open slab for " + to_string(id));
  in.seekg(static_cast<std::streamoff>(it->offset));
  Bytes region(it->length);
  if (!in.read(reinterpret_cast<char*>(region.data()), static_cast<std::streamsize>(region.size()))) {
    fail(ErrorKind::kTruncatedFile, "slab ends inside block " + to_string(id));
  }
  return decode_checked(region, *it, m.settings.geometry);
}

}  // namespace mukv

#endif  // MUKV_STORE_HPP_
