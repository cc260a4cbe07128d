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

#ifndef MUKV_FFT_HPP_
#define MUKV_FFT_HPP_

// Unnormalized forward DFT of real sequences of any length. Power-of-two
// lengths run an iterative radix-2 transform; other lengths go through
// Bluestein's chirp-z reformulation on a power-of-two convolution.

#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "mukv/error.hpp"

namespace mukv {

namespace fft_detail {

using cd = std::complex<double>;

class Radix2 {
 public:
  explicit Radix2(std::size_t m) : m_(m), twiddle_(m / 2) {
    for (std::size_t k = 0; k < m / 2; ++k) {
      twiddle_[k] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) /
                                        static_cast<double>(m));
    }
  }

  std::size_t size() const { return m_; }

  // In place; inverse uses conjugate twiddles and does not scale.
  void run(std::span<cd> a, bool inverse) const {
    const std::size_t n = m_;
    for (std::size_t i = 1, j = 0; i < n; ++i) {
      std::size_t bit = n >> 1;
      for (; j & bit; bit >>= 1) j ^= bit;
      j ^= bit;
      if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
      const std::size_t stride = n / len;
      const std::size_t half = len / 2;
      for (std::size_t i = 0; i < n; i += len) {
        for (std::size_t k = 0; k < half; ++k) {
          const cd w = inverse ? std::conj(twiddle_[k * stride]) : twiddle_[k * stride];
          const cd u = a[i + k];
          const cd v = a[i + k + half] * w;
          a[i + k] = u + v;
          a[i + k + half] = u - v;
        }
      }
    }
  }

 private:
  std::size_t m_;
  std::vector<cd> twiddle_;
};

}  // namespace fft_detail

/// Reusable transform for one sequence length.
class DftPlan {
 public:
  explicit DftPlan(std::size_t n) : n_(n), conv_(conv_size(n)) {
    if (n == 0) fail(ErrorKind::kEmptyMatrix, "DFT of an empty sequence");
    if (std::has_single_bit(n)) return;
    // chirp[k] = exp(-i*pi*k^2/n); k^2 is reduced mod 2n so large k keep precision.
    chirp_.resize(n);
    const std::uint64_t two_n = 2 * static_cast<std::uint64_t>(n);
    for (std::size_t k = 0; k < n; ++k) {
      const std::uint64_t k2 = (static_cast<std::uint64_t>(k) * k) % two_n;
      chirp_[k] = std::polar(1.0, -std::numbers::pi * static_cast<double>(k2) /
                                      static_cast<double>(n));
    }
    const std::size_t m = conv_.size();
    kernel_.assign(m, {0.0, 0.0});
    kernel_[0] = std::conj(chirp_[0]);
    for (std::size_t k = 1; k < n; ++k) {
      kernel_[k] = std::conj(chirp_[k]);
      kernel_[m - k] = std::conj(chirp_[k]);
    }
    conv_.run(kernel_, false);
  }

  std::size_t size() const { return n_; }

  void forward(std::span<const double> in, std::span<std::complex<double>> out) const {
    if (in.size() != n_ || out.size() != n_) {
      fail(ErrorKind::kLengthMismatch, "DFT plan of length " + std::to_string(n_) +
                                           " applied to length " + std::to_string(in.size()));
    }
    if (chirp_.empty()) {
      for (std::size_t i = 0; i < n_; ++i) out[i] = {in[i], 0.0};
      conv_.run(out, false);
      return;
    }
    const std::size_t m = conv_.size();
    std::vector<std::complex<double>> work(m, {0.0, 0.0});
    for (std::size_t k = 0; k < n_; ++k) work[k] = in[k] * chirp_[k];
    conv_.run(work, false);
    for (std::size_t k = 0; k < m; ++k) work[k] *= kernel_[k];
    conv_.run(work, true);
    const double scale = 1.0 / static_cast<double>(m);
    for (std::size_t k = 0; k < n_; ++k) out[k] = work[k] * scale * chirp_[k];
  }

 private:
  static std::size_t conv_size(std::size_t n) {
    if (n == 0 || std::has_single_bit(n)) return n == 0 ? 1 : n;
    return std::bit_ceil(2 * n - 1);
  }

  std::size_t n_;
  fft_detail::Radix2 conv_;
  std::vector<std::complex<double>> chirp_;
  std::vector<std::complex<double>> kernel_;
};

}  // namespace mukv

#endif  // MUKV_FFT_HPP_
