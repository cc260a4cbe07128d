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

#ifndef MUKV_DCP_HPP_
#define MUKV_DCP_HPP_

// Dual-signal token pruning.
//
// Each block gets two per-token importance signals computed from last-layer
// tensors only:
//   attention  - column mean of the attention weights over heads and queries;
//   frequency  - for every feature dimension, the DFT of that dimension's
//                sequence along the token axis; bin i's magnitude is credited
//                to token i and magnitudes are averaged over dimensions.
// Both are min-max normalized, blended with the granularity's alpha, and the
// top floor(rho * n) tokens (at least one) are kept. The same retained rows
// are sliced out of every layer.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mukv/block.hpp"
#include "mukv/core.hpp"
#include "mukv/fft.hpp"
#include "mukv/record.hpp"

namespace mukv {

enum class IndicatorMode : std::uint8_t {
  kDual = 0,
  kAttentionOnly = 1,
  kFrequencyOnly = 2,
  kRandom = 3,
};

constexpr std::string_view to_string(IndicatorMode m) {
  switch (m) {
    case IndicatorMode::kDual: return "dual";
    case IndicatorMode::kAttentionOnly: return "attention";
    case IndicatorMode::kFrequencyOnly: return "frequency";
    case IndicatorMode::kRandom: return "random";
  }
  return "?";
}

inline std::optional<IndicatorMode> parse_indicator_mode(std::string_view s) {
  for (auto m : {IndicatorMode::kDual, IndicatorMode::kAttentionOnly, IndicatorMode::kFrequencyOnly,
                 IndicatorMode::kRandom}) {
    if (to_string(m) == s) return m;
  }
  return std::nullopt;
}

struct RetentionPolicy {
  PerGranularity<double> alpha = {0.5, 0.7, 0.8};
  PerGranularity<double> rho = {0.1, 0.1, 0.8};
  IndicatorMode mode = IndicatorMode::kDual;
  std::uint64_t seed = 0;  // stream seed for kRandom
  bool keep_high_frequency = true;

  /// Attention weight actually applied; the single-signal modes pin it.
  double effective_alpha(Granularity g) const {
    switch (mode) {
      case IndicatorMode::kAttentionOnly: return 1.0;
      case IndicatorMode::kFrequencyOnly: return 0.0;
      default: return alpha[index_of(g)];
    }
  }

  void validate() const {
    for (Granularity g : kAllGranularities) {
      const double a = alpha[index_of(g)];
      const double r = rho[index_of(g)];
      if (!(a >= 0.0 && a <= 1.0)) {
        fail(ErrorKind::kInvalidConfig, std::string(to_string(g)) + " alpha must lie in [0, 1]");
      }
      if (!(r > 0.0 && r <= 1.0)) {
        fail(ErrorKind::kInvalidConfig, std::string(to_string(g)) + " rho must lie in (0, 1]");
      }
    }
  }

  friend bool operator==(const RetentionPolicy&, const RetentionPolicy&) = default;
};

/// I_att[j] = (1 / (H n)) * sum_h sum_i A[h, i, j].
inline std::vector<float> attention_indicator(const AttentionPayload& payload, std::size_t n,
                                              std::size_t heads) {
  std::vector<double> acc(n, 0.0);
  if (payload.kind == AttentionPayload::Kind::kRaw) {
    if (payload.values.size() != heads * n * n) {
      fail(ErrorKind::kShapeMismatch, "raw attention has " + std::to_string(payload.values.size()) +
                                          " values, expected " + std::to_string(heads * n * n));
    }
    for (std::size_t row = 0; row < heads * n; ++row) {
      const float* a = payload.values.data() + row * n;
      for (std::size_t j = 0; j < n; ++j) acc[j] += a[j];
    }
  } else {
    if (payload.values.size() != n) {
      fail(ErrorKind::kShapeMismatch, "aggregated attention has " +
                                          std::to_string(payload.values.size()) +
                                          " values, expected " + std::to_string(n));
    }
    for (std::size_t j = 0; j < n; ++j) acc[j] = payload.values[j];
  }
  const double scale = 1.0 / (static_cast<double>(heads) * static_cast<double>(n));
  std::vector<float> out(n);
  for (std::size_t j = 0; j < n; ++j) out[j] = static_cast<float>(acc[j] * scale);
  return out;
}

/// Mean over feature dimensions of |DFT along the token axis|.
///
/// The constant part of each column is split off and credited to bin 0
/// directly, so a constant column contributes exactly |c| * n to token 0 and
/// nothing elsewhere.
inline std::vector<float> frequency_indicator(const TokenMatrix& keys) {
  const std::size_t n = keys.rows();
  const std::size_t dims = keys.cols();
  if (n == 0 || dims == 0) fail(ErrorKind::kEmptyMatrix, "frequency indicator of an empty block");
  const DftPlan plan(n);
  std::vector<double> column(n);
  std::vector<std::complex<double>> spectrum(n);
  std::vector<double> acc(n, 0.0);
  for (std::size_t d = 0; d < dims; ++d) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += keys(i, d);
    const double mean = sum / static_cast<double>(n);
    bool constant = true;
    for (std::size_t i = 0; i < n; ++i) {
      column[i] = keys(i, d) - mean;
      constant = constant && column[i] == 0.0;
    }
    acc[0] += std::abs(sum);
    if (constant) continue;
    plan.forward(column, spectrum);
    // Bin 0 of the centered column is zero up to rounding.
    for (std::size_t i = 1; i < n; ++i) acc[i] += std::abs(spectrum[i]);
  }
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<float>(acc[i] / static_cast<double>(dims));
  return out;
}

/// alpha * norm(att) + (1 - alpha) * norm(+/-fft). With keep_high_frequency
/// false the frequency signal is negated first, favouring low-frequency tokens.
inline std::vector<float> fuse_scores(std::span<const float> att, std::span<const float> fft,
                                      double alpha, bool keep_high_frequency = true) {
  if (att.size() != fft.size()) {
    fail(ErrorKind::kLengthMismatch, "fusing " + std::to_string(att.size()) + " attention scores with " +
                                         std::to_string(fft.size()) + " frequency scores");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) fail(ErrorKind::kInvalidConfig, "alpha must lie in [0, 1]");
  std::vector<float> freq(fft.begin(), fft.end());
  if (!keep_high_frequency) {
    for (auto& v : freq) v = -v;
  }
  const auto na = minmax_normalize(att);
  const auto nf = minmax_normalize(freq);
  std::vector<float> out(att.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>(alpha * na[i] + (1.0 - alpha) * nf[i]);
  }
  return out;
}

/// kappa = max(1, floor(rho * n)), capped at n. A 1e-9 slack absorbs binary
/// representation error so that e.g. 0.29 * 100 yields 29.
inline std::size_t retention_count(std::size_t n, double rho) {
  if (n == 0) return 0;
  const auto k = static_cast<std::size_t>(std::floor(rho * static_cast<double>(n) + 1e-9));
  return std::clamp<std::size_t>(k, 1, n);
}

/// Indices of the kappa largest scores (ties to the lower index), returned in
/// ascending index order.
inline std::vector<std::uint32_t> select_topk(std::span<const float> scores, double rho) {
  if (!(rho > 0.0 && rho <= 1.0)) fail(ErrorKind::kInvalidConfig, "rho must lie in (0, 1]");
  const std::size_t n = scores.size();
  const std::size_t k = retention_count(n, rho);
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  auto better = [&](std::uint32_t a, std::uint32_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  if (k < n) std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), better);
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

namespace dcp_detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace dcp_detail

/// Per-block seed; independent of the order in which blocks are compressed.
constexpr std::uint64_t derive_block_seed(std::uint64_t stream_seed, const BlockId& id) {
  using dcp_detail::splitmix64;
  std::uint64_t h = splitmix64(stream_seed);
  h = splitmix64(h ^ id.segment);
  h = splitmix64(h ^ ((std::uint64_t{static_cast<std::uint8_t>(id.granularity)} << 32) | id.sub_index));
  return h;
}

/// First kappa entries of a seeded Fisher-Yates permutation, sorted ascending.
/// The bounded draw is done by hand so results do not depend on the standard
/// library's distribution implementations.
inline std::vector<std::uint32_t> random_selection(std::size_t n, std::size_t kappa, std::uint64_t seed) {
  std::vector<std::uint32_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0u);
  std::mt19937_64 rng(seed);
  auto bounded = [&](std::uint64_t bound) {
    // Rejection sampling for an unbiased draw in [0, bound).
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
      x = rng();
    } while (x >= limit);
    return x % bound;
  };
  for (std::size_t i = 0; i < kappa && i + 1 < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(bounded(n - i));
    std::swap(perm[i], perm[j]);
  }
  perm.resize(kappa);
  std::sort(perm.begin(), perm.end());
  return perm;
}

/// Fused per-token scores of `block` under `policy` (before selection).
inline std::vector<float> block_scores(const RawBlock& block, const RetentionPolicy& policy,
                                       std::size_t heads) {
  const Granularity g = block.id.granularity;
  double alpha = policy.effective_alpha(g);
  const std::size_t n = block.tokens;
  std::vector<float> att, freq;
  if (alpha > 0.0) att = attention_indicator(block.attention, n, heads);
  if (alpha < 1.0) freq = frequency_indicator(block.last_layer_keys());
  if (att.empty()) att.assign(n, 0.0f);
  if (freq.empty()) freq.assign(n, 0.0f);
  return fuse_scores(att, freq, alpha, policy.keep_high_frequency);
}

/// Prunes one validated block. `heads` comes from the engine geometry.
inline CompressedBlock compress_block(const RawBlock& block, const RetentionPolicy& policy,
                                      std::size_t heads, double timestamp) {
  const std::size_t n = block.tokens;
  if (block.layers.empty()) fail(ErrorKind::kShapeMismatch, to_string(block.id) + ": block has no layers");
  const double rho = policy.rho[index_of(block.id.granularity)];
  const std::size_t kappa = retention_count(n, rho);
  if (kappa == 0) fail(ErrorKind::kDegenerateBlock, to_string(block.id) + ": no tokens to retain");

  const auto fused = block_scores(block, policy, heads);
  CompressedBlock out;
  out.id = block.id;
  out.timestamp = timestamp;
  out.retained = policy.mode == IndicatorMode::kRandom
                     ? random_selection(n, kappa, derive_block_seed(policy.seed, block.id))
                     : select_topk(fused, rho);
  out.layers.reserve(block.layers.size());
  for (const auto& layer : block.layers) {
    out.layers.push_back({layer.keys.gather_rows(out.retained), layer.values.gather_rows(out.retained)});
  }
  out.summary = mean_pool_rows(out.layers.back().keys);
  out.scores.reserve(kappa);
  for (auto i : out.retained) out.scores.push_back(fused[i]);
  return out;
}

}  // namespace mukv

#endif  // MUKV_DCP_HPP_
