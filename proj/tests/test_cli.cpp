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

#include <string>

#include "cli_fixture.hpp"
#include "doctest.h"
#include "dffrec/config.hpp"
#include "json.hpp"

using namespace dffrec;
using testing::Cli;
using testing::SmallProject;

namespace {

std::size_t Lines(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("synth then validate succeeds") {
    SmallProject p;
    REQUIRE(p.synth.code == kExitOk);
    const auto v = Cli({"validate", "--store", p.store, "--log", p.log});
    CHECK(v.code == kExitOk);
    CHECK(v.out.rfind("ok:", 0) == 0);
    CHECK(Cli({"validate", "--store", p.captions, "--log", p.log}).code == kExitOk);
  }

  TEST_CASE("validate reports items missing from the store") {
    SmallProject p;
    testing::WriteBytes(p.dir / "extra.tsv", {'1', '\t', '9', '9', '9', '\t', '0', '\n'});
    const auto v = Cli({"validate", "--store", p.store, "--log", (p.dir / "extra.tsv").string()});
    CHECK(v.code == kExitData);
    CHECK(v.err.find("999") != std::string::npos);
    CHECK(Lines(v.err) == 1);
  }

  TEST_CASE("unknown flags and subcommands are usage errors") {
    const auto a = Cli({"train", "--frobnicate"});
    CHECK(a.code == kExitUsage);
    CHECK(Lines(a.err) == 1);
    CHECK(Cli({"teleport"}).code == kExitUsage);
  }

  TEST_CASE("missing files") {
    const auto a = Cli({"train", "--config", "/nonexistent/run.cfg"});
    CHECK(a.code != kExitOk);
    CHECK(Lines(a.err) == 1);
    const auto b = Cli({"validate", "--store", "/nonexistent.dffs", "--log", "/nonexistent.tsv"});
    CHECK(b.code == kExitData);
  }

  TEST_CASE("malformed config names the line") {
    SmallProject p;
    WriteTextFile(p.config, "seed = 1\nmodel.d\n");
    const auto r = Cli({"train", "--config", p.config});
    CHECK(r.code == kExitUsage);
    CHECK(r.err.find(":2:") != std::string::npos);
    CHECK(Lines(r.err) == 1);
  }

  TEST_CASE("train on an empty log") {
    SmallProject p;
    WriteTextFile(p.log, "");
    const auto r = Cli({"train", "--config", p.config});
    CHECK(r.code == kExitData);
    CHECK(r.err.find("no users after min-length filter") != std::string::npos);
  }

  TEST_CASE("train writes checkpoint, reports and a manifest echoing every key") {
    SmallProject p;
    const auto r = Cli({"train", "--config", p.config});
    REQUIRE_MESSAGE(r.code == kExitOk, r.err);
    for (const char* f : {"checkpoint.dffc", "manifest.json", "report_test.json",
                          "report_validation.json", "report_test.txt", "report_test.csv"}) {
      CHECK(std::filesystem::exists(p.out() / f));
    }
    const auto manifest = nlohmann::json::parse(testing::ReadText(p.out() / "manifest.json"));
    for (const auto& [key, value] : ConfigEntries(LoadRunConfig(p.config))) {
      INFO(key);
      CHECK(manifest["config"][key] == value);
    }
    CHECK(manifest.contains("split_hash"));
    CHECK(manifest.contains("created_at"));
  }

  TEST_CASE("grid runs log every cell") {
    SmallProject p;
    p.WriteConfig("train.lr_grid = 1e-3, 1e-4\ntrain.d_grid = 4, 8\ntrain.max_epochs = 1\n");
    const auto r = Cli({"train", "--config", p.config, "--jobs", "2"});
    REQUIRE_MESSAGE(r.code == kExitOk, r.err);
    const auto manifest = nlohmann::json::parse(testing::ReadText(p.out() / "manifest.json"));
    CHECK(manifest["grid"].size() == 4);
  }

  TEST_CASE("identical runs produce identical files") {
    SmallProject p;
    REQUIRE(Cli({"train", "--config", p.config}).code == kExitOk);
    const auto ckpt = testing::ReadBytes(p.out() / "checkpoint.dffc");
    const auto report = testing::ReadBytes(p.out() / "report_test.json");
    auto manifest = nlohmann::json::parse(testing::ReadText(p.out() / "manifest.json"));
    REQUIRE(Cli({"train", "--config", p.config}).code == kExitOk);
    CHECK(testing::ReadBytes(p.out() / "checkpoint.dffc") == ckpt);
    CHECK(testing::ReadBytes(p.out() / "report_test.json") == report);
    auto again = nlohmann::json::parse(testing::ReadText(p.out() / "manifest.json"));
    manifest.erase("created_at");
    again.erase("created_at");
    CHECK(manifest == again);
  }

  TEST_CASE("eval reloads a checkpoint and reproduces the test report") {
    SmallProject p;
    REQUIRE(Cli({"train", "--config", p.config}).code == kExitOk);
    const auto r = Cli({"eval", "--config", p.config, "--checkpoint",
                        (p.out() / "checkpoint.dffc").string(), "--phase", "test"});
    REQUIRE_MESSAGE(r.code == kExitOk, r.err);
    CHECK(testing::ReadText(p.out() / "eval_test.json") ==
          testing::ReadText(p.out() / "report_test.json"));
  }

  TEST_CASE("eval with a mismatched width names both dimensions") {
    SmallProject p;
    REQUIRE(Cli({"train", "--config", p.config}).code == kExitOk);
    const auto r = Cli({"eval", "--config", p.config, "--set", "model.d=12", "--checkpoint",
                        (p.out() / "checkpoint.dffc").string(), "--phase", "test"});
    CHECK(r.code == kExitData);
    CHECK(r.err.find("8") != std::string::npos);
    CHECK(r.err.find("12") != std::string::npos);
  }

  TEST_CASE("eval against a store of another feature dim names both dimensions") {
    SmallProject p;
    REQUIRE(Cli({"train", "--config", p.config}).code == kExitOk);
    const std::string spec6 = (p.dir / "spec6.txt").string();
    WriteTextFile(spec6, testing::ReadText(p.spec) + "dim = 6\n");
    const std::string store6 = (p.dir / "items6.dffs").string();
    REQUIRE(Cli({"synth", "--spec", spec6, "--seed", "3", "--out-store", store6,
                 "--out-log", (p.dir / "log6.tsv").string()}).code == kExitOk);
    const auto r = Cli({"eval", "--config", p.config, "--set", "paths.store=" + store6,
                        "--checkpoint", (p.out() / "checkpoint.dffc").string()});
    CHECK(r.code == kExitData);
    CHECK(r.err.find("4") != std::string::npos);
    CHECK(r.err.find("6") != std::string::npos);
  }

  TEST_CASE("print-defaults emits parseable text") {
    const auto run = Cli({"train", "--print-defaults"});
    CHECK(run.code == kExitOk);
    CHECK(ConfigToText(ParseRunConfig(run.out)) == run.out);
    const auto spec = Cli({"synth", "--print-defaults"});
    CHECK(spec.code == kExitOk);
    CHECK(SynthSpecToText(ParseSynthSpec(spec.out)) == spec.out);
  }

  TEST_CASE("gradcheck command") {
    const auto r = Cli({"gradcheck", "--seeds", "3"});
    CHECK(r.code == kExitOk);
    CHECK(r.out.find("PASS") != std::string::npos);
    CHECK(Cli({"gradcheck", "--seeds", "2", "--tol", "1e-12"}).code == kExitNumerical);
  }
}
