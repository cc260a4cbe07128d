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


#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "mukv/core.hpp"
#include "oracles.hpp"

namespace mukv {
namespace {

using fixtures::kind_of;

TEST(Cosine, IdenticalAndOrthogonal) {
  EXPECT_FLOAT_EQ(cosine(std::vector<float>{1, 0}, std::vector<float>{1, 0}), 1.0f);
  EXPECT_FLOAT_EQ(cosine(std::vector<float>{1, 0}, std::vector<float>{0, 1}), 0.0f);
}

TEST(Cosine, MatchesHighPrecisionOracle) {
  const std::vector<float> a{1, 2, 3}, b{4, 5, 6};
  EXPECT_NEAR(cosine(a, b), static_cast<double>(oracle::cosine(a, b)), 1e-6);

  fixtures::Rng rng(11);
  std::normal_distribution<float> normal;
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<float> x(1 + trial % 64), y(x.size());
    for (auto& v : x) v = normal(rng);
    for (auto& v : y) v = normal(rng);
    EXPECT_NEAR(cosine(x, y), static_cast<double>(oracle::cosine(x, y)), 1e-6);
  }
}

TEST(Cosine, SymmetryBoundsAndScaleInvariance) {
  fixtures::Rng rng(3);
  std::normal_distribution<float> normal;
  std::uniform_real_distribution<float> scale(1e-3f, 1e3f);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<float> x(16), y(16);
    for (auto& v : x) v = normal(rng);
    for (auto& v : y) v = normal(rng);
    const float c = cosine(x, y);
    EXPECT_EQ(c, cosine(y, x));
    EXPECT_LE(std::abs(c), 1.0f + 1e-6f);
    EXPECT_NEAR(cosine(x, x), 1.0f, 1e-6f);
    auto sx = x;
    const float a = scale(rng);
    for (auto& v : sx) v *= a;
    EXPECT_NEAR(cosine(sx, y), c, 1e-6f);
  }
}

TEST(Cosine, ZeroVectorIsAnError) {
  const std::vector<float> z{0, 0, 0}, x{1, 2, 3};
  EXPECT_EQ(kind_of([&] { cosine(z, x); }), ErrorKind::kZeroVector);
  EXPECT_EQ(kind_of([&] { cosine(x, std::vector<float>{1e-20f, 0, 0}); }), ErrorKind::kZeroVector);
  EXPECT_FALSE(try_cosine(z, x).has_value());
  EXPECT_EQ(kind_of([&] { cosine(x, std::vector<float>{1, 2}); }), ErrorKind::kLengthMismatch);
}

TEST(MeanPool, SmallCases) {
  EXPECT_EQ(mean_pool_rows(TokenMatrix(1, 2, {3, 4})), (std::vector<float>{3, 4}));
  EXPECT_EQ(mean_pool_rows(TokenMatrix(2, 2, {1, 1, 3, 3})), (std::vector<float>{2, 2}));
  EXPECT_EQ(kind_of([] { mean_pool_rows(TokenMatrix(0, 3)); }), ErrorKind::kEmptyMatrix);
}

TEST(MeanPool, MatchesSummationOracle) {
  fixtures::Rng rng(5);
  const auto m = fixtures::random_matrix(rng, 7, 5);
  const auto got = mean_pool_rows(m);
  const auto want = oracle::column_means(m);
  for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(got[j], static_cast<double>(want[j]), 1e-6);
}

TEST(MeanPool, EqualRowsReturnTheRow) {
  fixtures::Rng rng(6);
  std::normal_distribution<float> normal;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t rows = 1 + trial % 50;
    std::vector<float> v(8);
    for (auto& x : v) x = normal(rng);
    TokenMatrix m(rows, 8);
    for (std::size_t i = 0; i < rows; ++i) std::copy(v.begin(), v.end(), m.row(i).begin());
    const auto got = mean_pool_rows(m);
    for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(got[j], v[j], 1e-7);
  }
}

TEST(MinMax, Examples) {
  EXPECT_EQ(minmax_normalize(std::vector<float>{2, 4, 6}), (std::vector<float>{0, 0.5f, 1}));
  EXPECT_EQ(minmax_normalize(std::vector<float>{5, 5, 5}), (std::vector<float>{0, 0, 0}));
  EXPECT_EQ(minmax_normalize(std::vector<float>{-1, 0, 3}), (std::vector<float>{0, 0.25f, 1}));
}

TEST(MinMax, RejectsNonFiniteAndEmpty) {
  EXPECT_EQ(kind_of([] { minmax_normalize(std::vector<float>{1, std::numeric_limits<float>::quiet_NaN()}); }),
            ErrorKind::kNonFinite);
  EXPECT_EQ(kind_of([] { minmax_normalize(std::vector<float>{std::numeric_limits<float>::infinity()}); }),
            ErrorKind::kNonFinite);
  EXPECT_EQ(kind_of([] { minmax_normalize(std::vector<float>{}); }), ErrorKind::kEmptyMatrix);
}

TEST(MinMax, PreservesOrder) {
  fixtures::Rng rng(8);
  std::uniform_real_distribution<float> u(-100, 100);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<float> s(2 + trial % 40);
    for (auto& v : s) v = u(rng);
    const auto n = minmax_normalize(s);
    for (std::size_t i = 0; i < s.size(); ++i) {
      EXPECT_GE(n[i], 0.0f);
      EXPECT_LE(n[i], 1.0f);
      for (std::size_t j = 0; j < s.size(); ++j) {
        if (s[i] < s[j]) EXPECT_LE(n[i], n[j]);
      }
    }
  }
}

TEST(Geometry, Validation) {
  ModelGeometry g;
  EXPECT_NO_THROW(g.validate());
  EXPECT_EQ(g.concat_dim(), 16u);
  EXPECT_EQ(g.tokens_per_segment(), 784u);
  EXPECT_EQ(g.super_patch_size(), 49u);
  auto bad = g;
  bad.super_patches = 196;
  EXPECT_EQ(kind_of([&] { bad.validate(); }), ErrorKind::kInvalidGeometry);
  bad = g;
  bad.num_heads = 0;
  EXPECT_EQ(kind_of([&] { bad.validate(); }), ErrorKind::kInvalidGeometry);
  bad = g;
  bad.head_dim = 1u << 21;
  EXPECT_EQ(kind_of([&] { bad.validate(); }), ErrorKind::kInvalidGeometry);
}

TEST(BlockIds, OrderingAndText) {
  const BlockId a{Granularity::kPatch, 3, 1}, b{Granularity::kFrame, 0, 0}, c{Granularity::kPatch, 3, 2};
  EXPECT_LT(a, b);  // Patch < Frame < Segment
  EXPECT_LT(a, c);
  EXPECT_EQ(to_string(BlockId{Granularity::kFrame, 12, 3}), "frame:12:3");
  EXPECT_EQ(parse_block_id("frame:12:3"), (BlockId{Granularity::kFrame, 12, 3}));
  EXPECT_EQ(parse_block_id("segment:0:0"), (BlockId{Granularity::kSegment, 0, 0}));
  for (const char* bad : {"", "frame", "frame:1", "tile:1:2", "frame:-1:2", "frame:1:x", "frame:1:99999999999"}) {
    EXPECT_FALSE(parse_block_id(bad).has_value()) << bad;
  }
}

TEST(TokenMatrixOps, GatherAppendAndShape) {
  TokenMatrix m(3, 2, {1, 2, 3, 4, 5, 6});
  const std::vector<std::uint32_t> idx{0, 2};
  EXPECT_EQ(m.gather_rows(idx), TokenMatrix(2, 2, {1, 2, 5, 6}));
  TokenMatrix acc(0, 2);
  acc.append_rows(m);
  acc.append_rows(m.gather_rows(idx));
  EXPECT_EQ(acc.rows(), 5u);
  EXPECT_EQ(kind_of([&] { acc.append_rows(TokenMatrix(1, 3)); }), ErrorKind::kShapeMismatch);
  EXPECT_EQ(kind_of([] { TokenMatrix(2, 2, {1, 2, 3}); }), ErrorKind::kShapeMismatch);
  EXPECT_TRUE(m.all_finite());
  m(1, 1) = std::numeric_limits<float>::infinity();
  EXPECT_FALSE(m.all_finite());
}

}  // namespace
}  // namespace mukv
