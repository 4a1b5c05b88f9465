/*
 * Copyright 2026 The DFFRec Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "dffrec/ablation.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <thread>

#include "dffrec/error.hpp"
#include "dffrec/hash.hpp"
#include "json.hpp"

namespace dffrec {
namespace {

struct CellSpec {
  std::string arm;
  std::string source;
  std::size_t layer = 0;
  RunConfig config;
  const FeatureStore* store = nullptr;
  std::string store_hash;
};

// Full-scale published figures, shown beside desk-scale results for
// orientation only.
const char* ReferenceNote(const std::string& sweep) {
  if (sweep == "layer_sweep") {
    return "full-scale reference (not reproduced at desk scale): uniform "
           "average HR@10 0.1012, NDCG@10 0.0571; best single layer HR@10 "
           "0.1005, NDCG@10 0.0569";
  }
  if (sweep == "strategy_matrix") {
    return "full-scale reference (not reproduced at desk scale): HR@10 "
           "fusion 0.0975, replacement 0.0665, ID-only 0.0909";
  }
  return "full-scale reference (not reproduced at desk scale): learned-weight "
         "fusion HR@10 0.1020, NDCG@10 0.0577";
}

std::string CellHash(const CellSpec& spec, const std::string& split_hash) {
  RunConfig keyed = spec.config;
  // Where results land does not change what is computed.
  keyed.output_dir.clear();
  keyed.store_path.clear();
  keyed.caption_store_path.clear();
  keyed.log_path.clear();
  return Sha1Hex(ConfigToText(keyed) + "split=" + split_hash +
                 "\nstore=" + spec.store_hash + "\narm=" + spec.arm +
                 "\nsource=" + spec.source + "\n");
}

nlohmann::ordered_json CellToJson(const CellResult& c) {
  nlohmann::ordered_json j;
  j["arm"] = c.arm;
  j["source"] = c.source;
  j["layer"] = c.layer;
  j["seed"] = c.seed;
  j["cell_hash"] = c.cell_hash;
  j["split_hash"] = c.split_hash;
  j["val_hit_rate_10"] = c.val_hit_rate_10;
  j["best_epoch"] = c.best_epoch;
  j["layer_weights"] = c.layer_weights;
  j["num_items"] = c.test.num_items;
  j["cutoffs"] = nlohmann::ordered_json::array();
  for (const auto& m : c.test.cutoffs) j["cutoffs"].push_back(m.cutoff);
  j["ranks"] = nlohmann::ordered_json::array();
  for (const auto& r : c.test.ranks) j["ranks"].push_back({r.user_id, r.rank});
  return j;
}

CellResult CellFromJson(const nlohmann::json& j) {
  CellResult c;
  c.arm = j.at("arm").get<std::string>();
  c.source = j.at("source").get<std::string>();
  c.layer = j.at("layer").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.cell_hash = j.at("cell_hash").get<std::string>();
  c.split_hash = j.at("split_hash").get<std::string>();
  c.val_hit_rate_10 = j.at("val_hit_rate_10").get<double>();
  c.best_epoch = j.at("best_epoch").get<int>();
  c.layer_weights = j.at("layer_weights").get<std::vector<float>>();
  std::vector<UserRank> ranks;
  for (const auto& r : j.at("ranks")) {
    ranks.push_back({r.at(0).get<std::uint64_t>(), r.at(1).get<std::size_t>()});
  }
  const auto cutoffs = j.at("cutoffs").get<std::vector<std::size_t>>();
  c.test = AggregateRanks(std::move(ranks), cutoffs,
                          j.at("num_items").get<std::size_t>(), "test");
  c.reused = true;
  return c;
}

std::string CsvRow(const CellResult& c) {
  const auto metric = [&](std::size_t n, bool hit) {
    for (const auto& m : c.test.cutoffs) {
      if (m.cutoff == n) return hit ? m.hit_rate : m.ndcg;
    }
    return -1.0;
  };
  std::string arm = c.arm;
  if (c.source != "-") arm += "/" + c.source;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s,%zu,%.6f,%.6f,%.6f,%.6f,%llu\n",
                arm.c_str(), c.layer, metric(10, true), metric(10, false),
                metric(20, true), metric(20, false),
                static_cast<unsigned long long>(c.seed));
  return buf;
}

constexpr const char* kCsvHeader = "arm,layer,HR@10,NDCG@10,HR@20,NDCG@20,seed\n";

SweepResult RunCells(const Dataset& data, const std::string& name,
                     const std::vector<CellSpec>& specs,
                     const std::filesystem::path& out_dir,
                     const SweepOptions& options) {
  const std::filesystem::path dir = out_dir / name;
  const std::filesystem::path cell_dir = dir / "cells";
  std::filesystem::create_directories(cell_dir);

  std::vector<CellResult> results(specs.size());
  std::vector<std::string> hashes(specs.size());
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    hashes[i] = CellHash(specs[i], data.split_hash);
    const auto path = cell_dir / (hashes[i] + ".json");
    if (std::filesystem::exists(path)) {
      results[i] = CellFromJson(nlohmann::json::parse(ReadTextFile(path)));
      if (results[i].cell_hash != hashes[i]) {
        throw DataError("cell file " + path.string() + " has a mismatched hash");
      }
    } else {
      pending.push_back(i);
    }
  }

  std::vector<std::exception_ptr> errors(specs.size());
  const auto run = [&](std::size_t i) {
    try {
      const CellSpec& spec = specs[i];
      TrainOutcome outcome =
          TrainAndEvaluate(data, spec.store, spec.config, /*jobs=*/1);
      CellResult& c = results[i];
      c.arm = spec.arm;
      c.source = spec.source;
      c.layer = spec.layer;
      c.seed = spec.config.seed;
      c.cell_hash = hashes[i];
      c.split_hash = data.split_hash;
      c.val_hit_rate_10 = outcome.run.best_val_hit_rate_10;
      c.best_epoch = outcome.run.best_epoch;
      c.test = std::move(outcome.test);
      c.layer_weights = outcome.run.model->encoder().LayerWeights();
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::max(options.jobs, 1)), 1,
      std::max<std::size_t>(pending.size(), 1));
  if (workers == 1) {
    for (std::size_t i : pending) run(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t k = next++; k < pending.size(); k = next++) {
          run(pending[k]);
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  for (const auto& c : results) {
    if (c.split_hash != data.split_hash) {
      throw DataError("cell " + c.cell_hash + " was computed on a different split");
    }
  }

  // Single writer: cell files and appended curve rows, in cell order.
  SweepResult sweep;
  sweep.name = name;
  sweep.csv_path = dir / (name + ".csv");
  sweep.table_path = dir / (name + "_table.txt");
  const bool new_csv = !std::filesystem::exists(sweep.csv_path);
  std::ofstream csv(sweep.csv_path, std::ios::app);
  if (!csv) throw DataError("cannot write " + sweep.csv_path.string());
  if (new_csv) csv << kCsvHeader;
  for (std::size_t i : pending) {
    WriteTextFile(cell_dir / (hashes[i] + ".json"),
                  CellToJson(results[i]).dump(2) + "\n");
    csv << CsvRow(results[i]);
  }
  sweep.cells = std::move(results);
  WriteTextFile(sweep.table_path, FormatSweepTable(sweep));
  return sweep;
}

const FeatureStore& RequireStore(const Dataset& data) {
  if (!data.store) throw UsageError("paths.store is required");
  return *data.store;
}

}  // namespace

SweepResult LayerSweep(const Dataset& data, const RunConfig& base,
                       const SweepOptions& options) {
  const FeatureStore& store = RequireStore(data);
  const std::size_t num_layers = store.header().num_layers;
  if (num_layers < 2) throw DataError("layer sweep needs a store with L >= 2");
  std::vector<CellSpec> specs;
  for (std::size_t l = 1; l <= num_layers; ++l) {
    CellSpec s{"single_layer", "-", l, base, &store, data.store_hash};
    s.config.model.fusion.strategy = Strategy::kFusion;
    s.config.model.fusion.aggregation = Aggregation::kSingleLayer;
    s.config.model.fusion.layer = l;
    specs.push_back(std::move(s));
  }
  CellSpec avg{"uniform_average", "-", 0, base, &store, data.store_hash};
  avg.config.model.fusion.strategy = Strategy::kFusion;
  avg.config.model.fusion.aggregation = Aggregation::kUniformAverage;
  specs.push_back(std::move(avg));
  return RunCells(data, "layer_sweep", specs, base.output_dir, options);
}

SweepResult StrategyMatrix(const Dataset& data, const RunConfig& base,
                           const SweepOptions& options) {
  const FeatureStore& hc = RequireStore(data);
  if (!data.caption_store) throw UsageError("paths.caption_store is required");
  const FeatureStore& cc = *data.caption_store;
  std::vector<CellSpec> specs;
  CellSpec id{"id_only", "-", 0, base, nullptr, ""};
  id.config.model.fusion.strategy = Strategy::kIdOnly;
  specs.push_back(std::move(id));
  for (const auto& [source, store, hash] :
       {std::tuple{"HC", &hc, data.store_hash},
        std::tuple{"CC", &cc, data.caption_store_hash}}) {
    for (Strategy s : {Strategy::kReplacement, Strategy::kFusion}) {
      CellSpec c{StrategyName(s), source, 0, base, store, hash};
      c.config.model.fusion.strategy = s;
      if (store->header().num_layers == 1) {
        c.config.model.fusion.aggregation = Aggregation::kSingleLayer;
        c.config.model.fusion.layer = 1;
      }
      if (c.config.model.fusion.aggregation == Aggregation::kSingleLayer) {
        c.layer = c.config.model.fusion.layer;
      }
      specs.push_back(std::move(c));
    }
  }
  SweepResult result =
      RunCells(data, "strategy_matrix", specs, base.output_dir, options);
  // ID-only appears under both sources.
  CellResult cc_copy = result.cells.front();
  result.cells.front().source = "HC";
  cc_copy.source = "CC";
  result.cells.insert(result.cells.begin() + 1 + 2, cc_copy);
  WriteTextFile(result.table_path, FormatSweepTable(result));
  return result;
}

SweepResult DffRun(const Dataset& data, const RunConfig& base,
                   const SweepOptions& options) {
  const FeatureStore& store = RequireStore(data);
  CellSpec s{"dff", "HC", 0, base, &store, data.store_hash};
  s.config.model.fusion.strategy = Strategy::kFusion;
  s.config.model.fusion.aggregation = Aggregation::kLearnedWeights;
  SweepResult result = RunCells(data, "dff", {s}, base.output_dir, options);
  std::string alpha = "layer,alpha\n";
  const auto& w = result.cells.front().layer_weights;
  for (std::size_t l = 0; l < w.size(); ++l) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%zu,%.9g\n", l + 1, w[l]);
    alpha += buf;
  }
  WriteTextFile(std::filesystem::path(base.output_dir) / "dff" / "alpha.csv",
                alpha);
  return result;
}

std::string FormatSweepTable(const SweepResult& result) {
  std::string out = result.name + "\n";
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-18s %-6s %-5s %8s %8s %8s %8s %8s\n",
                "arm", "source", "layer", "HR@10", "NDCG@10", "HR@20",
                "NDCG@20", "val@10");
  out += buf;
  for (const auto& c : result.cells) {
    const auto metric = [&](std::size_t n, bool hit) {
      for (const auto& m : c.test.cutoffs) {
        if (m.cutoff == n) return hit ? m.hit_rate : m.ndcg;
      }
      return -1.0;
    };
    const std::string layer = c.layer == 0 ? "all" : std::to_string(c.layer);
    std::snprintf(buf, sizeof(buf),
                  "%-18s %-6s %-5s %8.4f %8.4f %8.4f %8.4f %8.4f\n",
                  c.arm.c_str(), c.source.c_str(),
                  c.arm == "id_only" ? "-" : layer.c_str(), metric(10, true),
                  metric(10, false), metric(20, true), metric(20, false),
                  c.val_hit_rate_10);
    out += buf;
    if (!c.layer_weights.empty() && c.arm == "dff") {
      out += "  alpha:";
      for (float a : c.layer_weights) {
        std::snprintf(buf, sizeof(buf), " %.4f", a);
        out += buf;
      }
      out += "\n";
    }
  }
  out += std::string("# ") + ReferenceNote(result.name) + "\n";
  return out;
}

}  // namespace dffrec
