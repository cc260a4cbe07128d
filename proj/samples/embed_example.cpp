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


// Embedding the library: generate a small synthetic stream, ingest it,
// persist the store, ask one question and assemble the context.

#include <filesystem>
#include <iostream>

#include "mukv/mukv.hpp"

int main(int argc, char** argv) {
  const std::filesystem::path dir = argc > 1 ? argv[1] : "example.store";

  mukv::SyntheticScenario scenario;
  scenario.segments = 12;
  scenario.relevant_segments = {4};
  const auto stream = mukv::gen_stream(scenario);

  mukv::EngineConfig config = mukv::config_for(mukv::EngineConfig{}, scenario);
  mukv::KvStore store(config.store_settings());
  for (const auto& record : stream.records) {
    const auto report = mukv::ingest_record(store, config.plan(), record);
    std::cout << "segment " << report.segment << ": " << report.tokens_in << " -> " << report.tokens_retained
              << " tokens\n";
  }
  store.persist(dir);

  const auto reopened = mukv::KvStore::load(dir);
  const auto result = mukv::retrieve(stream.questions.front(), reopened, config.retrieval);
  for (auto g : mukv::kCoarseToFine) {
    const auto& list = result.selected[mukv::index_of(g)];
    if (!list.empty()) {
      std::cout << mukv::to_string(g) << " best " << mukv::to_string(list.front().block->id) << " s~="
                << list.front().stage2 << "\n";
    }
  }
  const auto context = mukv::assemble_context(result, reopened);
  std::cout << "context rows " << context.rows() << " across " << context.layers.size() << " layers\n";
  return 0;
}
