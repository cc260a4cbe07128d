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


#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "mukv/fft.hpp"

namespace mukv {
namespace {

std::vector<std::complex<long double>> naive_dft(const std::vector<double>& x) {
  const std::size_t n = x.size();
  const long double pi = 3.141592653589793238462643383279502884L;
  std::vector<std::complex<long double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t t = 0; t < n; ++t) {
      const long double a = -2.0L * pi * static_cast<long double>((k * t) % n) / static_cast<long double>(n);
      out[k] += std::complex<long double>(x[t] * std::cos(a), x[t] * std::sin(a));
    }
  }
  return out;
}

class DftLengths : public ::testing::TestWithParam<std::size_t> {};

TEST_P(DftLengths, MatchesNaiveTransform) {
  const std::size_t n = GetParam();
  std::mt19937_64 rng(n);
  std::normal_distribution<double> normal;
  std::vector<double> x(n);
  for (auto& v : x) v = normal(rng);
  const DftPlan plan(n);
  std::vector<std::complex<double>> got(n);
  plan.forward(x, got);
  const auto want = naive_dft(x);
  double scale = 0;
  for (const auto& w : want) scale = std::max<double>(scale, std::abs(w));
  for (std::size_t k = 0; k < n; ++k) {
    EXPECT_NEAR(got[k].real(), static_cast<double>(want[k].real()), 1e-9 * (1 + scale)) << "bin " << k;
    EXPECT_NEAR(got[k].imag(), static_cast<double>(want[k].imag()), 1e-9 * (1 + scale)) << "bin " << k;
  }
}

INSTANTIATE_TEST_SUITE_P(PowersAndOthers, DftLengths,
                         ::testing::Values(1, 2, 3, 4, 5, 7, 8, 12, 16, 19, 49, 64, 97, 128, 196, 255, 256, 784,
                                           1000));

TEST(Dft, SingleToneLandsInOneBin) {
  const std::size_t n = 49;
  std::vector<double> x(n);
  for (std::size_t t = 0; t < n; ++t) x[t] = std::cos(2 * std::numbers::pi * 5 * static_cast<double>(t) / n);
  std::vector<std::complex<double>> out(n);
  DftPlan(n).forward(x, out);
  for (std::size_t k = 0; k < n; ++k) {
    const double expect = (k == 5 || k == n - 5) ? n / 2.0 : 0.0;
    EXPECT_NEAR(std::abs(out[k]), expect, 1e-9);
  }
}

}  // namespace
}  // namespace mukv
