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

#include <cmath>
#include <set>
#include <sstream>
#include <string>

#include "cli_fixture.hpp"
#include "doctest.h"
#include "dffrec/ablation.hpp"
#include "dffrec/run.hpp"

using namespace dffrec;
using testing::SmallProject;

namespace {

std::size_t CsvRows(const std::filesystem::path& path) {
  const std::string text = testing::ReadText(path);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) - 1;
}

}  // namespace

TEST_SUITE("ablation") {
  TEST_CASE("layer sweep has one row per layer plus the average") {
    SmallProject p;
    const RunConfig config = LoadRunConfig(p.config);
    const Dataset data = LoadDataset(config);
    const SweepResult r = LayerSweep(data, config);
    REQUIRE(r.cells.size() == 4);
    for (std::size_t l = 0; l < 3; ++l) {
      CHECK(r.cells[l].arm == "single_layer");
      CHECK(r.cells[l].layer == l + 1);
    }
    CHECK(r.cells[3].arm == "uniform_average");
    CHECK(CsvRows(r.csv_path) == 4);
    const std::string header = testing::ReadText(r.csv_path).substr(0, 42);
    CHECK(header == "arm,layer,HR@10,NDCG@10,HR@20,NDCG@20,seed");
    for (const auto& c : r.cells) CHECK(c.split_hash == data.split_hash);
    CHECK(testing::ReadText(r.table_path).find("full-scale reference") != std::string::npos);
  }

  TEST_CASE("re-running a completed sweep reuses every cell and appends nothing") {
    SmallProject p;
    const RunConfig config = LoadRunConfig(p.config);
    const Dataset data = LoadDataset(config);
    const SweepResult first = LayerSweep(data, config);
    const std::string csv = testing::ReadText(first.csv_path);
    const SweepResult second = LayerSweep(data, config);
    CHECK(testing::ReadText(second.csv_path) == csv);
    for (std::size_t i = 0; i < second.cells.size(); ++i) {
      CHECK(second.cells[i].reused);
      CHECK(second.cells[i].cell_hash == first.cells[i].cell_hash);
      CHECK(second.cells[i].test.ToJson() == first.cells[i].test.ToJson());
    }

    // A new seed is a new cell: rows are appended, never rewritten.
    RunConfig other = config;
    other.seed = 6;
    const SweepResult third = LayerSweep(data, other);
    CHECK_FALSE(third.cells[0].reused);
    CHECK(CsvRows(third.csv_path) == 8);
    CHECK(testing::ReadText(third.csv_path).rfind(csv, 0) == 0);
  }

  TEST_CASE("strategy matrix lists six rows from five trainings") {
    SmallProject p;
    const RunConfig config = LoadRunConfig(p.config);
    const Dataset data = LoadDataset(config, true);
    const SweepResult r = StrategyMatrix(data, config, {2});
    REQUIRE(r.cells.size() == 6);
    std::set<std::string> hashes;
    std::multiset<std::string> rows;
    for (const auto& c : r.cells) {
      hashes.insert(c.cell_hash);
      rows.insert(c.arm + "/" + c.source);
      CHECK(c.split_hash == data.split_hash);
    }
    CHECK(hashes.size() == 5);
    CHECK(rows == std::multiset<std::string>{"id_only/HC", "id_only/CC", "replacement/HC",
                                             "fusion/HC", "replacement/CC", "fusion/CC"});
    CHECK(CsvRows(r.csv_path) == 5);
  }

  TEST_CASE("dff exports normalized layer weights") {
    SmallProject p;
    const RunConfig config = LoadRunConfig(p.config);
    const Dataset data = LoadDataset(config);
    const SweepResult r = DffRun(data, config);
    REQUIRE(r.cells.size() == 1);
    const auto& w = r.cells[0].layer_weights;
    REQUIRE(w.size() == 3);
    double total = 0.0;
    for (float a : w) total += a;
    CHECK(std::abs(total - 1.0) <= 1e-6);
    std::istringstream alpha(testing::ReadText(p.out() / "dff" / "alpha.csv"));
    std::string line;
    std::getline(alpha, line);
    CHECK(line == "layer,alpha");
    double file_total = 0.0;
    while (std::getline(alpha, line)) file_total += std::stod(line.substr(line.find(',') + 1));
    CHECK(std::abs(file_total - 1.0) <= 1e-6);
  }

  TEST_CASE("sweep commands through the CLI") {
    SmallProject p;
    for (const char* cmd : {"layer-sweep", "strategy-matrix", "dff"}) {
      const auto r = testing::Cli({cmd, "--config", p.config});
      INFO(cmd << ": " << r.err);
      CHECK(r.code == kExitOk);
    }
  }
}
