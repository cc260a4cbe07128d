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

// mukv: operator tool for the streaming KV store.
//
//   mukv ingest  --store DIR --input stream.muks [--skip-bad]
//   mukv query   --store DIR --question q.mukq [--mode semi] [--emit-context out.mukc]
//   mukv stats   --store DIR
//   mukv inspect --store DIR frame:12:3
//   mukv bench   [--scenario s.json] --sweep "rho=1;rho=0.5" [--out table.csv]
//   mukv gen     [--scenario s.json] --stream out.muks --question out.mukq
//
// The config file comes from --config or $MUKV_CONFIG; flags override it.
// Exit codes: 0 success, 2 usage, 3 decode, 4 validation, 5 store integrity.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mukv/mukv.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

enum ExitCode { kOk = 0, kUsage = 2, kDecode = 3, kValidation = 4, kIntegrity = 5 };

int exit_code_for(mukv::ErrorKind kind) {
  using mukv::ErrorKind;
  switch (kind) {
    case ErrorKind::kInvalidConfig:
      return kUsage;
    case ErrorKind::kTruncatedFile:
    case ErrorKind::kBadMagic:
    case ErrorKind::kLengthOverflow:
    case ErrorKind::kVersionMismatch:
    case ErrorKind::kLengthMismatch:
    case ErrorKind::kIo:
      return kDecode;
    case ErrorKind::kChecksumFailure:
      return kIntegrity;
    default:
      return kValidation;
  }
}

/// Raised for any failure while opening a persisted store.
struct StoreFailure {
  mukv::Error error;
};

std::string with_commas(std::uint64_t v) {
  std::string digits = std::to_string(v);
  std::string out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i != 0 && (digits.size() - i) % 3 == 0) out += ',';
    out += digits[i];
  }
  return out;
}

std::string fixed(double v, int precision) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(precision);
  os << v;
  return os.str();
}

struct Overrides {
  std::string config_path;
  std::string store;
  std::vector<double> rho, alpha, lambda;
  std::vector<std::uint32_t> k;
  std::string indicator, mode, frame_coverage, patch_coverage;
  std::optional<std::uint64_t> seed, byte_budget, global_n, hier_top;
  std::optional<double> fps;
  bool json = false;
};

mukv::PerGranularity<double> triple(const std::vector<double>& v) {
  if (v.size() == 1) return {v[0], v[0], v[0]};
  return {v[0], v[1], v[2]};
}

mukv::EngineConfig resolve_config(const Overrides& o) {
  using mukv::ErrorKind;
  mukv::EngineConfig cfg;
  std::string path = o.config_path;
  if (path.empty()) {
    if (const char* env = std::getenv("MUKV_CONFIG")) path = env;
  }
  if (!path.empty()) cfg = mukv::load_config(path);
  if (!o.store.empty()) cfg.store_path = o.store;
  if (!o.rho.empty()) cfg.retention.rho = triple(o.rho);
  if (!o.alpha.empty()) cfg.retention.alpha = triple(o.alpha);
  if (!o.lambda.empty()) cfg.retrieval.lambda = triple(o.lambda);
  if (!o.k.empty()) {
    cfg.retrieval.k = o.k.size() == 1 ? mukv::PerGranularity<std::uint32_t>{o.k[0], o.k[0], o.k[0]}
                                      : mukv::PerGranularity<std::uint32_t>{o.k[0], o.k[1], o.k[2]};
  }
  if (!o.indicator.empty()) {
    auto m = mukv::parse_indicator_mode(o.indicator);
    if (!m) mukv::fail(ErrorKind::kInvalidConfig, "--indicator must be dual, attention, frequency or random");
    cfg.retention.mode = *m;
  }
  if (!o.mode.empty()) {
    auto m = mukv::parse_retrieval_mode(o.mode);
    if (!m) mukv::fail(ErrorKind::kInvalidConfig, "--mode must be parallel, hierarchical or semi");
    cfg.retrieval.mode = *m;
  }
  for (auto [flag, target] : {std::pair{&o.frame_coverage, &cfg.frame_coverage},
                              std::pair{&o.patch_coverage, &cfg.patch_coverage}}) {
    if (flag->empty()) continue;
    auto c = mukv::parse_coverage(*flag);
    if (!c) mukv::fail(ErrorKind::kInvalidConfig, "coverage must be middle or all");
    *target = *c;
  }
  if (o.seed) cfg.seed = *o.seed;
  if (o.byte_budget) cfg.byte_budget = *o.byte_budget;
  if (o.global_n) cfg.retrieval.global_n = static_cast<std::uint32_t>(*o.global_n);
  if (o.hier_top) cfg.retrieval.hier_top_segments = static_cast<std::uint32_t>(*o.hier_top);
  if (o.fps) cfg.fps = *o.fps;
  cfg.validate();
  return cfg;
}

bool store_exists(const fs::path& dir) { return fs::exists(dir / mukv::store_detail::kManifestName); }

mukv::KvStore open_store(const fs::path& dir) {
  if (!store_exists(dir)) {
    throw StoreFailure{mukv::Error(mukv::ErrorKind::kIo, "no store at " + dir.string())};
  }
  try {
    return mukv::KvStore::load(dir);
  } catch (const mukv::Error& e) {
    throw StoreFailure{e};
  }
}

json stats_json(const mukv::StoreStats& s) {
  json per = json::object();
  for (auto g : mukv::kAllGranularities) {
    per[std::string(mukv::to_string(g))] = {{"blocks", s.blocks[mukv::index_of(g)]},
                                            {"tokens", s.tokens[mukv::index_of(g)]}};
  }
  return {{"segments", s.segments},
          {"frames", s.frames},
          {"total_tokens", s.total_tokens},
          {"tokens_per_300_frames", s.tokens_per_300_frames},
          {"estimated_bytes", s.estimated_bytes},
          {"byte_budget", s.byte_budget},
          {"over_budget", s.over_budget},
          {"granularities", per}};
}

// ---------------------------------------------------------------------------

int cmd_ingest(const Overrides& o, const std::vector<std::string>& inputs, bool skip_bad) {
  const auto cfg = resolve_config(o);
  const fs::path dir = cfg.store_path;
  std::optional<mukv::KvStore> store;
  if (store_exists(dir)) {
    store.emplace(open_store(dir));
    if (!(store->settings() == cfg.store_settings())) {
      mukv::fail(mukv::ErrorKind::kInvalidConfig,
                 "store at " + dir.string() + " was built with different geometry, coverage or retention settings");
    }
  } else {
    store.emplace(cfg.store_settings());
  }
  store->set_byte_budget(cfg.byte_budget);
  const auto plan = cfg.plan();

  json log = json::array();
  std::uint64_t skipped = 0;
  auto finish = [&] {
    store->persist(dir);
    const auto stats = store->stats();
    if (o.json) {
      std::cout << json{{"segments", log}, {"skipped", skipped}, {"stats", stats_json(stats)}}.dump(2) << "\n";
    } else {
      if (skipped > 0) std::cout << "skipped " << skipped << " undecodable region(s)\n";
      std::cout << "stored=" << with_commas(stats.total_tokens) << " tokens\n";
    }
  };

  for (const auto& input : inputs) {
    mukv::Bytes bytes;
    if (input == "-") {
      std::ostringstream ss;
      ss << std::cin.rdbuf();
      const std::string s = ss.str();
      bytes.assign(s.begin(), s.end());
    } else {
      bytes = mukv::read_file(input);
    }
    std::size_t pos = 0;
    while (pos < bytes.size()) {
      mukv::ByteReader reader(std::span<const std::uint8_t>(bytes).subspan(pos), input);
      mukv::SegmentRecord rec;
      try {
        rec = mukv::decode_segment(reader);
      } catch (const mukv::Error& e) {
        if (!skip_bad || exit_code_for(e.kind()) == kUsage) throw;
        std::cerr << "mukv: skipping bad record at byte " << pos << " of " << input << ": " << e.what() << "\n";
        ++skipped;
        // Resynchronize on the next record magic.
        const std::string_view hay(reinterpret_cast<const char*>(bytes.data()), bytes.size());
        const auto next = hay.find("MUKS", pos + 1);
        pos = next == std::string_view::npos ? bytes.size() : next;
        continue;
      }
      pos += reader.position();
      mukv::IngestReport r;
      try {
        r = mukv::ingest_record(*store, plan, rec);
      } catch (const mukv::Error&) {
        store->persist(dir);
        throw;
      }
      if (o.json) {
        log.push_back({{"segment", r.segment},
                       {"tokens_in", r.tokens_in},
                       {"tokens_retained", r.tokens_retained},
                       {"store_tokens", r.store_tokens},
                       {"over_budget", r.over_budget}});
      } else {
        std::cout << "segment " << r.segment << ": in=" << with_commas(r.tokens_in)
                  << " retained=" << with_commas(r.tokens_retained) << " store=" << with_commas(r.store_tokens)
                  << (r.over_budget ? " (over byte budget)" : "") << "\n";
      }
    }
  }
  finish();
  return kOk;
}

int cmd_query(const Overrides& o, const std::string& question_path, const std::string& emit_path) {
  const auto cfg = resolve_config(o);
  const auto store = open_store(cfg.store_path);
  const auto question = mukv::decode_question(mukv::read_file(question_path));
  const auto result = mukv::retrieve(question, store, cfg.retrieval);
  const auto ctx = mukv::assemble_context(result, store);
  if (!emit_path.empty()) mukv::write_file(emit_path, mukv::encode_context(ctx));

  if (o.json) {
    json sel = json::object();
    for (auto g : mukv::kAllGranularities) {
      json list = json::array();
      for (const auto& s : result.selected[mukv::index_of(g)]) {
        list.push_back({{"id", mukv::to_string(s.block->id)},
                        {"timestamp", s.block->timestamp},
                        {"s", s.stage1},
                        {"s_tilde", s.stage2},
                        {"tokens", s.block->kept()}});
      }
      sel[std::string(mukv::to_string(g))] = list;
    }
    std::cout << json{{"mode", mukv::to_string(result.mode)},
                      {"degraded_to_parallel", result.degraded_to_parallel},
                      {"degenerate_scores", result.degenerate_scores},
                      {"blocks_selected", result.total_blocks()},
                      {"context_rows", ctx.rows()},
                      {"selected", sel}}
                     .dump(2)
              << "\n";
    return kOk;
  }
  for (auto g : mukv::kCoarseToFine) {
    const auto& list = result.selected[mukv::index_of(g)];
    std::cout << mukv::to_string(g) << ": " << list.size() << " selected\n";
    for (const auto& s : list) {
      std::cout << "  " << mukv::to_string(s.block->id) << "  t=" << fixed(s.block->timestamp, 3)
                << "  s=" << fixed(s.stage1, 6) << "  s~=" << fixed(s.stage2, 6) << "\n";
    }
  }
  if (result.degraded_to_parallel) std::cout << "note: no segment candidates, ran parallel retrieval\n";
  if (result.degenerate_scores > 0) std::cout << "note: " << result.degenerate_scores << " zero-vector scores\n";
  std::cout << result.total_blocks() << " blocks selected, context rows " << with_commas(ctx.rows()) << "\n";
  return kOk;
}

int cmd_stats(const Overrides& o) {
  const auto cfg = resolve_config(o);
  auto store = open_store(cfg.store_path);
  store.set_byte_budget(cfg.byte_budget);
  const auto s = store.stats();
  if (o.json) {
    std::cout << stats_json(s).dump(2) << "\n";
    return kOk;
  }
  std::cout << "segments              " << s.segments << "\n"
            << "frames                " << s.frames << "\n";
  for (auto g : mukv::kCoarseToFine) {
    std::cout << mukv::to_string(g) << std::string(22 - mukv::to_string(g).size(), ' ')
              << s.blocks[mukv::index_of(g)] << " blocks, " << with_commas(s.tokens[mukv::index_of(g)])
              << " tokens\n";
  }
  std::cout << "total tokens          " << with_commas(s.total_tokens) << "\n"
            << "tokens per 300 frames " << with_commas(static_cast<std::uint64_t>(s.tokens_per_300_frames + 0.5))
            << "\n"
            << "estimated bytes       " << with_commas(s.estimated_bytes) << "\n";
  if (s.byte_budget > 0) {
    std::cout << "byte budget           " << with_commas(s.byte_budget) << (s.over_budget ? " (exceeded)" : "")
              << "\n";
  }
  return kOk;
}

int cmd_inspect(const Overrides& o, const std::string& id_text) {
  const auto cfg = resolve_config(o);
  const auto id = mukv::parse_block_id(id_text);
  if (!id) mukv::fail(mukv::ErrorKind::kInvalidConfig, "block id must look like frame:12:3");
  if (!store_exists(cfg.store_path)) open_store(cfg.store_path);
  mukv::CompressedBlock b;
  try {
    b = mukv::KvStore::load_block(cfg.store_path, *id);
  } catch (const mukv::Error& e) {
    if (e.kind() == mukv::ErrorKind::kUnknownBlock) throw;
    throw StoreFailure{e};
  }
  double lo = 0, hi = 0, sum = 0;
  if (!b.scores.empty()) {
    lo = hi = b.scores.front();
    for (float s : b.scores) {
      lo = std::min<double>(lo, s);
      hi = std::max<double>(hi, s);
      sum += s;
    }
  }
  const double mean = b.scores.empty() ? 0.0 : sum / static_cast<double>(b.scores.size());
  json layers = json::array();
  for (std::size_t l = 0; l < b.layers.size(); ++l) {
    layers.push_back({{"layer", l},
                      {"keys_crc32", mukv::crc32_of_floats(b.layers[l].keys.data())},
                      {"values_crc32", mukv::crc32_of_floats(b.layers[l].values.data())}});
  }
  const json report = {{"id", mukv::to_string(b.id)},
                       {"timestamp", b.timestamp},
                       {"kept", b.kept()},
                       {"retained", b.retained},
                       {"scores", {{"min", lo}, {"mean", mean}, {"max", hi}}},
                       {"summary_crc32", mukv::crc32_of_floats(b.summary)},
                       {"layers", layers}};
  if (o.json) {
    std::cout << report.dump(2) << "\n";
    return kOk;
  }
  std::cout << "block      " << mukv::to_string(b.id) << "\n"
            << "timestamp  " << fixed(b.timestamp, 3) << "\n"
            << "kept       " << b.kept() << "\n"
            << "retained  ";
  for (auto i : b.retained) std::cout << ' ' << i;
  std::cout << "\n"
            << "scores     min " << fixed(lo, 6) << "  mean " << fixed(mean, 6) << "  max " << fixed(hi, 6) << "\n";
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08x", mukv::crc32_of_floats(b.summary));
  std::cout << "summary    crc32 " << buf << "\n";
  for (const auto& l : layers) {
    char k[16], v[16];
    std::snprintf(k, sizeof k, "%08x", l["keys_crc32"].get<std::uint32_t>());
    std::snprintf(v, sizeof v, "%08x", l["values_crc32"].get<std::uint32_t>());
    std::cout << "layer " << l["layer"].get<std::size_t>() << "    keys " << k << "  values " << v << "\n";
  }
  return kOk;
}

mukv::SyntheticScenario load_scenario(const std::string& path) {
  if (path.empty()) return mukv::SyntheticScenario{};
  std::ifstream in(path);
  if (!in) mukv::fail(mukv::ErrorKind::kIo, "cannot open scenario " + path);
  try {
    return mukv::scenario_from_json(json::parse(in));
  } catch (const json::exception& e) {
    mukv::fail(mukv::ErrorKind::kInvalidConfig, path + ": " + e.what());
  }
}

int cmd_bench(const Overrides& o, const std::string& scenario_path, const std::string& sweep,
              const std::string& out_path) {
  const auto cfg = resolve_config(o);
  const auto scenario = load_scenario(scenario_path);
  const auto points = mukv::parse_sweep(sweep);
  const auto rows = mukv::run_bench(cfg, scenario, points);
  mukv::write_bench_csv(std::cout, rows);
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) mukv::fail(mukv::ErrorKind::kIo, "cannot write " + out_path);
    mukv::write_bench_csv(out, rows);
  }
  return kOk;
}

int cmd_gen(const Overrides& o, const std::string& scenario_path, const std::string& stream_path,
            const std::string& question_path, const std::string& labels_path) {
  const auto scenario = load_scenario(scenario_path);
  const auto stream = mukv::gen_stream(scenario);
  mukv::ByteWriter w;
  for (const auto& rec : stream.records) mukv::encode_segment(rec, w);
  mukv::write_file(stream_path, w.buffer());
  if (!question_path.empty()) mukv::write_file(question_path, mukv::encode_question(stream.questions.front()));
  json labels = json::object();
  for (auto g : mukv::kAllGranularities) {
    json ids = json::array();
    for (const auto& id : stream.labels.front().relevant[mukv::index_of(g)]) ids.push_back(mukv::to_string(id));
    labels[std::string(mukv::to_string(g))] = ids;
  }
  if (!labels_path.empty()) {
    std::ofstream out(labels_path);
    if (!out) mukv::fail(mukv::ErrorKind::kIo, "cannot write " + labels_path);
    out << labels.dump(2) << "\n";
  }
  if (o.json) {
    std::cout << json{{"segments", stream.records.size()}, {"relevant", labels}}.dump(2) << "\n";
  } else {
    std::cout << "wrote " << stream.records.size() << " segments to " << stream_path << "\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming multi-granularity KV store"};
  app.fallthrough();  // global options may follow the subcommand
  app.require_subcommand(1);
  Overrides o;
  app.add_option("--config", o.config_path, "Config file (default: $MUKV_CONFIG)");
  app.add_flag("--json", o.json, "Machine-readable output");

  auto add_store = [&](CLI::App* sub) { sub->add_option("--store", o.store, "Store directory"); };
  auto add_retention = [&](CLI::App* sub) {
    sub->add_option("--rho", o.rho, "Retention ratio, one value or patch frame segment")->expected(1, 3);
    sub->add_option("--alpha", o.alpha, "Attention weight, one value or patch frame segment")->expected(1, 3);
    sub->add_option("--indicator", o.indicator, "dual, attention, frequency or random");
    sub->add_option("--seed", o.seed, "Stream seed");
    sub->add_option("--fps", o.fps, "Frames per second");
    sub->add_option("--frame-coverage", o.frame_coverage, "middle or all");
    sub->add_option("--patch-coverage", o.patch_coverage, "middle or all");
    sub->add_option("--byte-budget", o.byte_budget, "Warn when the store exceeds this many bytes");
  };
  auto add_retrieval = [&](CLI::App* sub) {
    sub->add_option("--k", o.k, "Blocks per granularity, one value or patch frame segment")->expected(1, 3);
    sub->add_option("--lambda", o.lambda, "Consistency weight, one value or patch frame segment")->expected(1, 3);
    sub->add_option("--mode", o.mode, "parallel, hierarchical or semi");
    sub->add_option("--global-n", o.global_n, "Segments averaged into the global query");
    sub->add_option("--hier-top", o.hier_top, "Parent segments kept in hierarchical mode");
  };

  std::vector<std::string> inputs;
  bool skip_bad = false;
  auto* ingest = app.add_subcommand("ingest", "Compress and append segment records");
  add_store(ingest);
  add_retention(ingest);
  ingest->add_option("--input,-i", inputs, "Segment record stream(s), '-' for stdin")->required();
  ingest->add_flag("--skip-bad", skip_bad, "Continue past undecodable records");

  std::string question, emit;
  auto* query = app.add_subcommand("query", "Retrieve blocks for a question");
  add_store(query);
  add_retrieval(query);
  query->add_option("--question,-q", question, "Question record (.mukq)")->required();
  query->add_option("--emit-context", emit, "Write the assembled context (.mukc)");

  auto* stats = app.add_subcommand("stats", "Store accounting");
  add_store(stats);
  stats->add_option("--byte-budget", o.byte_budget, "Report against this byte budget");

  std::string block_id;
  auto* inspect = app.add_subcommand("inspect", "Dump one block");
  add_store(inspect);
  inspect->add_option("block", block_id, "Block id, e.g. frame:12:3")->required();

  std::string scenario, sweep, out;
  auto* bench = app.add_subcommand("bench", "Sweep settings over a synthetic stream");
  add_retention(bench);
  add_retrieval(bench);
  bench->add_option("--scenario", scenario, "Scenario JSON (default scenario if omitted)");
  bench->add_option("--sweep", sweep, "Sweep points, e.g. \"rho=1;rho=0.5;mode=semi\"");
  bench->add_option("--out", out, "Also write the CSV here");

  std::string stream_out, question_out, labels_out;
  auto* gen = app.add_subcommand("gen", "Write a synthetic stream and question");
  gen->add_option("--scenario", scenario, "Scenario JSON (default scenario if omitted)");
  gen->add_option("--stream", stream_out, "Output segment stream (.muks)")->required();
  gen->add_option("--question", question_out, "Output question (.mukq)");
  gen->add_option("--labels", labels_out, "Output relevance labels (JSON)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*ingest) return cmd_ingest(o, inputs, skip_bad);
    if (*query) return cmd_query(o, question, emit);
    if (*stats) return cmd_stats(o);
    if (*inspect) return cmd_inspect(o, block_id);
    if (*bench) return cmd_bench(o, scenario, sweep, out);
    if (*gen) return cmd_gen(o, scenario, stream_out, question_out, labels_out);
  } catch (const StoreFailure& f) {
    std::cerr << "mukv: store: " << f.error.what() << "\n";
    return kIntegrity;
  } catch (const mukv::Error& e) {
    std::cerr << "mukv: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "mukv: Io: " << e.what() << "\n";
    return kDecode;
  }
  return kUsage;
}
