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


#ifndef MUKV_TESTS_FIXTURES_HPP_
#define MUKV_TESTS_FIXTURES_HPP_

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "mukv/mukv.hpp"

namespace fixtures {

/// Kind of the mukv::Error thrown by `f`; records a failure if none is.
template <class F>
mukv::ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const mukv::Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an mukv::Error";
  return mukv::ErrorKind::kIo;
}

using Rng = std::mt19937_64;

inline mukv::ModelGeometry tiny_geometry() {
  mukv::ModelGeometry g;
  g.num_layers = 1;
  g.num_heads = 1;
  g.head_dim = 2;
  g.patches_per_frame = 4;
  g.frames_per_segment = 1;
  g.super_patches = 2;
  return g;
}

inline mukv::TokenMatrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  mukv::TokenMatrix m(rows, cols);
  for (auto& v : m.data()) v = static_cast<float>(normal(rng));
  return m;
}

inline mukv::AttentionPayload random_payload(Rng& rng, mukv::AttentionPayload::Kind kind, std::size_t n,
                                             std::size_t heads) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  mukv::AttentionPayload p;
  p.kind = kind;
  if (kind == mukv::AttentionPayload::Kind::kRaw) {
    p.values.resize(heads * n * n);
    for (std::size_t row = 0; row < heads * n; ++row) {
      std::vector<double> w(n);
      double sum = 0;
      for (auto& x : w) sum += (x = u(rng));
      for (std::size_t j = 0; j < n; ++j) p.values[row * n + j] = static_cast<float>(w[j] / sum);
    }
  } else {
    std::vector<double> w(n);
    double sum = 0;
    for (auto& x : w) sum += (x = u(rng));
    p.values.resize(n);
    for (std::size_t j = 0; j < n; ++j) p.values[j] = static_cast<float>(w[j] / sum * double(heads * n));
  }
  return p;
}

inline mukv::RawBlock random_block(Rng& rng, const mukv::BlockId& id, std::uint32_t n, const mukv::ModelGeometry& g,
                                   mukv::AttentionPayload::Kind kind = mukv::AttentionPayload::Kind::kAggregated) {
  mukv::RawBlock b;
  b.id = id;
  b.tokens = n;
  b.attention = random_payload(rng, kind, n, g.num_heads);
  for (std::uint32_t l = 0; l < g.num_layers; ++l) {
    b.layers.push_back({random_matrix(rng, n, g.concat_dim()), random_matrix(rng, n, g.concat_dim())});
  }
  return b;
}

inline mukv::SegmentRecord random_record(Rng& rng, std::uint64_t t, const mukv::GranularityPlan& plan,
                                         mukv::AttentionPayload::Kind kind = mukv::AttentionPayload::Kind::kAggregated) {
  mukv::SegmentRecord rec;
  rec.segment_index = t;
  rec.geometry = plan.geometry;
  rec.start_seconds = static_cast<double>(t) * 8.0;
  rec.end_seconds = rec.start_seconds + 8.0;
  for (const auto& [key, n] : plan.expected_blocks()) {
    rec.blocks.push_back(random_block(rng, {key.first, t, key.second}, n, plan.geometry, kind));
  }
  return rec;
}

/// A store of hand-made blocks with random summaries. Summary entries are
/// drawn from a small lattice when `ties` is set so equal scores occur.
struct RandomStore {
  mukv::KvStore store;
  std::vector<mukv::CompressedBlock> blocks;
};

inline RandomStore random_store(Rng& rng, std::uint64_t segments, const mukv::PerGranularity<std::uint32_t>& per_segment,
                                bool ties = false) {
  mukv::StoreSettings settings;
  settings.geometry.num_layers = 1;
  settings.geometry.num_heads = 1;
  settings.geometry.head_dim = 4;
  settings.geometry.patches_per_frame = 4;
  settings.geometry.frames_per_segment = 1;
  settings.geometry.super_patches = 2;
  const std::size_t C = settings.geometry.concat_dim();
  RandomStore out{mukv::KvStore(settings), {}};
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> lattice(-2, 2);
  for (std::uint64_t t = 0; t < segments; ++t) {
    std::vector<mukv::CompressedBlock> seg;
    for (auto g : mukv::kAllGranularities) {
      for (std::uint32_t s = 0; s < per_segment[mukv::index_of(g)]; ++s) {
        mukv::CompressedBlock b;
        b.id = {g, t, s};
        b.timestamp = mukv::segment_timestamp(t, 1, settings.fps);
        b.retained = {0};
        mukv::TokenMatrix keys(1, C);
        for (auto& v : keys.data()) v = ties ? static_cast<float>(lattice(rng)) : static_cast<float>(normal(rng));
        b.summary.assign(keys.data().begin(), keys.data().end());
        b.layers.push_back({keys, random_matrix(rng, 1, C)});
        b.scores = {1.0f};
        seg.push_back(b);
      }
    }
    out.blocks.insert(out.blocks.end(), seg.begin(), seg.end());
    out.store.append_segment(t, std::move(seg));
  }
  return out;
}

inline mukv::QuestionRecord question(std::vector<float> v, double asked_at) {
  mukv::QuestionRecord q;
  q.asked_at = asked_at;
  const std::size_t cols = v.size();
  q.query_tokens = mukv::TokenMatrix(1, cols, std::move(v));
  return q;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("mukv_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixtures

#endif  // MUKV_TESTS_FIXTURES_HPP_
