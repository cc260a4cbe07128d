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

#ifndef MUKV_CORE_HPP_
#define MUKV_CORE_HPP_

// Shared numeric types: model geometry, row-major token matrices, the three
// storage granularities and the handful of vector kernels every other module
// builds on. Values are stored as float; every reduction accumulates in
// double and rounds the final result back to float.

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mukv/error.hpp"

namespace mukv {

/// Coarseness order: Patch < Frame < Segment.
enum class Granularity : std::uint8_t { kPatch = 0, kFrame = 1, kSegment = 2 };

inline constexpr std::array<Granularity, 3> kAllGranularities = {
    Granularity::kPatch, Granularity::kFrame, Granularity::kSegment};

/// Coarse-to-fine order used when laying out an assembled context.
inline constexpr std::array<Granularity, 3> kCoarseToFine = {
    Granularity::kSegment, Granularity::kFrame, Granularity::kPatch};

constexpr std::size_t index_of(Granularity g) { return static_cast<std::size_t>(g); }

constexpr std::string_view to_string(Granularity g) {
  switch (g) {
    case Granularity::kPatch: return "patch";
    case Granularity::kFrame: return "frame";
    case Granularity::kSegment: return "segment";
  }
  return "?";
}

inline std::optional<Granularity> parse_granularity(std::string_view s) {
  for (Granularity g : kAllGranularities) {
    if (to_string(g) == s) return g;
  }
  return std::nullopt;
}

/// Per-granularity triple, indexed patch, frame, segment.
template <class T>
using PerGranularity = std::array<T, 3>;

/// Identity of one stored or ingested block. Ordering is
/// (granularity, segment, sub_index), which is the "lower block id" rule used
/// for tie-breaking.
struct BlockId {
  Granularity granularity = Granularity::kSegment;
  std::uint64_t segment = 0;
  std::uint32_t sub_index = 0;

  friend auto operator<=>(const BlockId&, const BlockId&) = default;
};

inline std::string to_string(const BlockId& id) {
  return std::string(to_string(id.granularity)) + ":" + std::to_string(id.segment) + ":" +
         std::to_string(id.sub_index);
}

/// Parses "granularity:segment:sub", e.g. "frame:12:3".
inline std::optional<BlockId> parse_block_id(std::string_view s) {
  const auto first = s.find(':');
  if (first == std::string_view::npos) return std::nullopt;
  const auto second = s.find(':', first + 1);
  if (second == std::string_view::npos) return std::nullopt;
  auto g = parse_granularity(s.substr(0, first));
  if (!g) return std::nullopt;
  try {
    std::size_t used = 0;
    const std::string seg(s.substr(first + 1, second - first - 1));
    const std::string sub(s.substr(second + 1));
    if (seg.empty() || sub.empty() || seg[0] == '-' || sub[0] == '-') return std::nullopt;
    const auto segment = std::stoull(seg, &used);
    if (used != seg.size()) return std::nullopt;
    const auto sub_index = std::stoull(sub, &used);
    if (used != sub.size() || sub_index > UINT32_MAX) return std::nullopt;
    return BlockId{*g, segment, static_cast<std::uint32_t>(sub_index)};
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

/// Transformer and token-grid dimensions. The concatenated feature width is
/// always heads * head_dim, with head 0's dimensions first.
struct ModelGeometry {
  std::uint32_t num_layers = 2;
  std::uint32_t num_heads = 2;
  std::uint32_t head_dim = 8;
  std::uint32_t patches_per_frame = 196;
  std::uint32_t frames_per_segment = 4;
  std::uint32_t super_patches = 4;

  std::uint32_t concat_dim() const { return num_heads * head_dim; }
  std::uint32_t tokens_per_segment() const { return patches_per_frame * frames_per_segment; }
  std::uint32_t super_patch_size() const { return patches_per_frame / super_patches; }

  void validate() const {
    if (num_layers == 0 || num_heads == 0 || head_dim == 0 || patches_per_frame == 0 ||
        frames_per_segment == 0 || super_patches == 0) {
      fail(ErrorKind::kInvalidGeometry, "every geometry count must be positive");
    }
    if (super_patches >= patches_per_frame) {
      fail(ErrorKind::kInvalidGeometry,
           "super_patches (" + std::to_string(super_patches) + ") must be below patches_per_frame (" +
               std::to_string(patches_per_frame) + ")");
    }
    // Keep every derived size comfortably inside u32 wire fields.
    const std::uint64_t c = std::uint64_t{num_heads} * head_dim;
    const std::uint64_t o = std::uint64_t{patches_per_frame} * frames_per_segment;
    if (c > (1u << 20) || o > (1u << 24) || num_layers > 4096) {
      fail(ErrorKind::kInvalidGeometry, "geometry exceeds supported limits");
    }
  }

  friend bool operator==(const ModelGeometry&, const ModelGeometry&) = default;
};

/// Row-major float matrix whose rows are tokens in their original order.
class TokenMatrix {
 public:
  TokenMatrix() = default;
  TokenMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}
  TokenMatrix(std::size_t rows, std::size_t cols, std::vector<float> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      fail(ErrorKind::kShapeMismatch, "matrix data has " + std::to_string(data_.size()) +
                                          " values, expected " + std::to_string(rows_ * cols_));
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0; }

  std::span<const float> data() const { return data_; }
  std::span<float> data() { return data_; }

  std::span<const float> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  std::span<float> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }

  float operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  float& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
  }

  /// Rows at `indices`, in the given order.
  TokenMatrix gather_rows(std::span<const std::uint32_t> indices) const {
    TokenMatrix out(indices.size(), cols_);
    for (std::size_t r = 0; r < indices.size(); ++r) {
      const auto src = row(indices[r]);
      std::copy(src.begin(), src.end(), out.row(r).begin());
    }
    return out;
  }

  void append_rows(const TokenMatrix& other) {
    if (rows_ == 0 && cols_ == 0) cols_ = other.cols_;
    if (other.cols_ != cols_) {
      fail(ErrorKind::kShapeMismatch, "cannot append " + std::to_string(other.cols_) +
                                          "-column rows to a " + std::to_string(cols_) +
                                          "-column matrix");
    }
    data_.insert(data_.end(), other.data_.begin(), other.data_.end());
    rows_ += other.rows_;
  }

  friend bool operator==(const TokenMatrix&, const TokenMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

/// Keys and values of one transformer layer, both tokens x concat_dim.
struct LayerKv {
  TokenMatrix keys;
  TokenMatrix values;

  friend bool operator==(const LayerKv&, const LayerKv&) = default;
};

inline constexpr double kZeroNormThreshold = 1e-12;

/// Cosine similarity, or nullopt when either vector has norm below 1e-12.
inline std::optional<float> try_cosine(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    fail(ErrorKind::kLengthMismatch, "cosine of vectors with lengths " + std::to_string(a.size()) +
                                         " and " + std::to_string(b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += double{a[i]} * double{b[i]};
    na += double{a[i]} * double{a[i]};
    nb += double{b[i]} * double{b[i]};
  }
  na = std::sqrt(na);
  nb = std::sqrt(nb);
  if (na < kZeroNormThreshold || nb < kZeroNormThreshold) return std::nullopt;
  return static_cast<float>(std::clamp(dot / (na * nb), -1.0, 1.0));
}

inline float cosine(std::span<const float> a, std::span<const float> b) {
  auto c = try_cosine(a, b);
  if (!c) fail(ErrorKind::kZeroVector, "cosine with a vector of norm below 1e-12");
  return *c;
}

inline std::vector<float> mean_pool_rows(const TokenMatrix& m) {
  if (m.rows() == 0) fail(ErrorKind::kEmptyMatrix, "mean pool over zero rows");
  std::vector<double> acc(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto r = m.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) acc[j] += r[j];
  }
  std::vector<float> out(m.cols());
  const double n = static_cast<double>(m.rows());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = static_cast<float>(acc[j] / n);
  return out;
}

/// Maps scores onto [0, 1]. A constant input maps to all zeros so that a
/// degenerate signal contributes nothing to a fused score.
inline std::vector<float> minmax_normalize(std::span<const float> s) {
  if (s.empty()) fail(ErrorKind::kEmptyMatrix, "min-max normalization of an empty vector");
  for (float v : s) {
    if (!std::isfinite(v)) fail(ErrorKind::kNonFinite, "min-max normalization of a non-finite score");
  }
  const auto [lo_it, hi_it] = std::minmax_element(s.begin(), s.end());
  const double lo = *lo_it, hi = *hi_it;
  std::vector<float> out(s.size(), 0.0f);
  if (hi == lo) return out;
  const double range = hi - lo;
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = static_cast<float>((double{s[i]} - lo) / range);
  return out;
}

}  // namespace mukv

#endif  // MUKV_CORE_HPP_
