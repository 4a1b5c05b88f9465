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
#include <vector>

#include "doctest.h"
#include "dffrec/config.hpp"
#include "dffrec/error.hpp"

using namespace dffrec;

TEST_SUITE("config") {
  TEST_CASE("unspecified keys take the documented defaults") {
    const RunConfig c = ParseRunConfig("# nothing set\n\n");
    const RunConfig d;
    CHECK(ConfigToText(c) == ConfigToText(d));
    CHECK(c.model.fusion.strategy == Strategy::kFusion);
    CHECK(c.model.fusion.aggregation == Aggregation::kLearnedWeights);
    CHECK(c.model.backbone.num_blocks == 2);
    CHECK(c.model.backbone.num_heads == 2);
    CHECK(c.model.backbone.max_seq_len == 20);
    CHECK(c.schedule.weight_decay == 0.1F);
    CHECK(c.schedule.patience == 5);
    CHECK(c.schedule.max_epochs == 100);
    CHECK(c.eval.exclude_history);
  }

  TEST_CASE("text round trip covers every key") {
    RunConfig c;
    c.store_path = "a/b.dffs";
    c.model.fusion.strategy = Strategy::kReplacement;
    c.model.fusion.aggregation = Aggregation::kSingleLayer;
    c.model.fusion.layer = 3;
    c.model.fusion.gate = GateShape::kScalar;
    c.schedule.lr_grid = {1e-3F, 1e-4F};
    c.schedule.d_grid = {32, 64};
    c.eval.cutoffs = {5, 10, 20};
    c.eval.exclude_history = false;
    c.seed = 12;
    const std::string text = ConfigToText(c);
    CHECK(ConfigToText(ParseRunConfig(text)) == text);
    std::vector<std::string> keys;
    for (const auto& [key, value] : ConfigEntries(c)) keys.push_back(key);
    const std::vector<std::string> expected = {
        "paths.store", "paths.log", "paths.caption_store", "paths.output_dir",
        "seed", "model.d", "fusion.strategy", "fusion.aggregation",
        "fusion.layer", "fusion.gate", "backbone.num_blocks",
        "backbone.num_heads", "backbone.max_seq_len", "backbone.dropout",
        "train.learning_rate", "train.lr_grid", "train.d_grid",
        "train.weight_decay", "train.batch_size", "train.patience",
        "train.max_epochs", "train.layer_logit_lr_scale", "train.sampled_negatives",
        "eval.exclude_history", "eval.cutoffs"};
    CHECK(keys == expected);
  }

  TEST_CASE("model.d sets both widths") {
    const RunConfig c = ParseRunConfig("model.d = 48\n");
    CHECK(c.model.fusion.d == 48);
    CHECK(c.model.backbone.d == 48);
  }

  TEST_CASE("comments, blanks and whitespace") {
    const RunConfig c = ParseRunConfig("  train.batch_size=7   # trailing\n# x = y\n");
    CHECK(c.schedule.batch_size == 7);
  }

  TEST_CASE("errors name the origin line") {
    CHECK_THROWS_WITH_AS(ParseRunConfig("seed = 1\nbogus = 2\n", "run.cfg"),
                         doctest::Contains("run.cfg:2: unknown key 'bogus'"), UsageError);
    CHECK_THROWS_WITH_AS(ParseRunConfig("seed 1\n", "run.cfg"),
                         doctest::Contains("run.cfg:1: expected 'key = value'"), UsageError);
    CHECK_THROWS_WITH_AS(ParseRunConfig("train.batch_size = many\n", "run.cfg"),
                         doctest::Contains("run.cfg:1"), UsageError);
    CHECK_THROWS_AS(ParseRunConfig("fusion.strategy = blend\n"), UsageError);
  }

  TEST_CASE("overrides") {
    RunConfig c;
    ApplyConfigOverride(c, "fusion.aggregation=uniform_average");
    CHECK(c.model.fusion.aggregation == Aggregation::kUniformAverage);
    CHECK_THROWS_AS(ApplyConfigOverride(c, "fusion.aggregation"), UsageError);
    CHECK_THROWS_AS(ApplyConfigOverride(c, "nope=1"), UsageError);
  }

  TEST_CASE("synth spec text round trip and validation") {
    SynthSpec s;
    s.signal_layers = {2, 3};
    s.split_signal = true;
    s.num_layers = 4;
    const std::string text = SynthSpecToText(s);
    CHECK(SynthSpecToText(ParseSynthSpec(text)) == text);
    CHECK(ParseSynthSpec("signal_layers = 1, 3\n").signal_layers ==
          std::vector<std::size_t>{1, 3});
    CHECK_THROWS_AS(ParseSynthSpec("signal_layers = 12\n"), UsageError);
    CHECK_THROWS_AS(ParseSynthSpec("colour = red\n"), UsageError);
  }

  TEST_CASE("missing file") {
    CHECK_THROWS_WITH_AS(LoadRunConfig("/nonexistent/run.cfg"),
                         doctest::Contains("cannot open"), UsageError);
  }
}
