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
#include <random>
#include <vector>

#include "checks.hpp"
#include "doctest.h"
#include "dffrec/catalog.hpp"
#include "dffrec/error.hpp"
#include "dffrec/synth.hpp"
#include "dffrec/training.hpp"

using namespace dffrec;

namespace {

struct Toy {
  SynthCatalog synth;
  InteractionLog log;
  SplitDataset split;
  Catalog catalog;

  explicit Toy(std::uint64_t seed) {
    SynthSpec spec;
    spec.num_users = 40;
    spec.num_items = 20;
    spec.num_topics = 4;
    spec.num_layers = 3;
    spec.dim = 4;
    spec.signal_layers = {2};
    spec.min_seq_len = 4;
    spec.max_seq_len = 8;
    synth = GenerateCatalog(spec, seed);
    log = GenerateInteractions(spec, synth, seed);
    split = SplitLeaveOneOut(log);
    catalog = Catalog::FromStore(synth.store);
  }
  TrainData data() const { return {&split, &catalog, &synth.store}; }
};

ModelConfig TinyModel(Strategy s = Strategy::kFusion) {
  ModelConfig c;
  c.fusion.strategy = s;
  c.fusion.d = 8;
  c.backbone.d = 8;
  c.backbone.num_blocks = 1;
  c.backbone.max_seq_len = 6;
  return c;
}

TrainSchedule Short(int epochs = 3) {
  TrainSchedule s;
  s.max_epochs = epochs;
  s.batch_size = 16;
  s.seed = 4;
  return s;
}

}  // namespace

TEST_SUITE("split") {
  TEST_CASE("five items split into three train, one validation, one test") {
    InteractionLog log;
    for (std::uint64_t i = 0; i < 5; ++i) log.Append(1, 10 + i, static_cast<std::int64_t>(i));
    const SplitDataset s = SplitLeaveOneOut(log);
    REQUIRE(s.users.size() == 1);
    CHECK(s.users[0].train == std::vector<std::uint64_t>{10, 11, 12});
    CHECK(s.users[0].validation == 13);
    CHECK(s.users[0].test == 14);
  }

  TEST_CASE("two-item users are dropped and counted") {
    InteractionLog log;
    log.Append(1, 1, 0);
    log.Append(1, 2, 1);
    const SplitDataset s = SplitLeaveOneOut(log);
    CHECK(s.users.empty());
    CHECK(s.dropped_users == 1);
    CHECK_FALSE(s.warnings.empty());
  }

  TEST_CASE("empty log gives an empty split with a warning") {
    const SplitDataset s = SplitLeaveOneOut(InteractionLog{});
    CHECK(s.users.empty());
    CHECK(s.warnings.size() == 1);
  }

  TEST_CASE("random logs reconstruct and never leak held-out items") {
    const auto result = checks::SplitProtocol(15, 21);
    INFO(result.detail);
    CHECK(result.ok);
  }

  TEST_CASE("split hash tracks content") {
    const Toy a(1), b(1), c(2);
    CHECK(a.split.Hash() == b.split.Hash());
    CHECK(a.split.Hash() != c.split.Hash());
  }
}

TEST_SUITE("early_stopping") {
  TEST_CASE("patience 5 stops after epoch 7 with best epoch 2") {
    EarlyStopping stop(5);
    const double history[] = {0.5, 0.6, 0.6, 0.6, 0.6, 0.6, 0.6};
    int stopped_at = 0;
    for (double v : history) {
      if (stop.Update(v)) {
        stopped_at = stop.epochs_seen();
        break;
      }
    }
    CHECK(stopped_at == 7);
    CHECK(stop.best_epoch() == 2);
  }
}

TEST_SUITE("train") {
  TEST_CASE("learning rate zero leaves parameters exactly unchanged") {
    const Toy toy(1);
    const Recommender fresh(TinyModel(), toy.catalog, &toy.synth.store, Short().seed);
    TrainSchedule s = Short(2);
    s.learning_rate = 0.0F;
    const TrainResult r = Train(toy.data(), TinyModel(), s);
    CHECK(r.steps > 0);
    CHECK(r.model->params().TakeSnapshot() == fresh.params().TakeSnapshot());
  }

  TEST_CASE("same seed gives identical loss curves and parameters") {
    const Toy toy(1);
    const TrainResult a = Train(toy.data(), TinyModel(), Short());
    const TrainResult b = Train(toy.data(), TinyModel(), Short());
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
      CHECK(a.history[i].train_loss == b.history[i].train_loss);
      CHECK(a.history[i].val_hit_rate_10 == b.history[i].val_hit_rate_10);
    }
    CHECK(a.model->params().TakeSnapshot() == b.model->params().TakeSnapshot());
  }

  TEST_CASE("returned parameters come from the best validation epoch") {
    const Toy toy(3);
    const TrainResult r = Train(toy.data(), TinyModel(), Short(6));
    std::size_t argmax = 0;
    for (std::size_t i = 1; i < r.history.size(); ++i) {
      if (r.history[i].val_hit_rate_10 > r.history[argmax].val_hit_rate_10) argmax = i;
    }
    CHECK(r.best_epoch == r.history[argmax].epoch);
    const double replay =
        Evaluate(*r.model, toy.split, Phase::kValidation).HitRate(10);
    CHECK(replay == r.best_val_hit_rate_10);
  }

  TEST_CASE("loss decreases on planted data") {
    const Toy toy(2);
    const TrainResult r = Train(toy.data(), TinyModel(), Short(5));
    CHECK(r.history.back().train_loss < r.history.front().train_loss);
  }

  TEST_CASE("sampled softmax is deterministic and matches full softmax once it covers the catalog") {
    const Toy toy(2);
    TrainSchedule sampled = Short(4);
    sampled.sampled_negatives = 5;
    const TrainResult a = Train(toy.data(), TinyModel(), sampled);
    const TrainResult b = Train(toy.data(), TinyModel(), sampled);
    CHECK(a.model->params().TakeSnapshot() == b.model->params().TakeSnapshot());
    CHECK(a.history.back().train_loss < a.history.front().train_loss);

    TrainSchedule covering = Short(2);
    covering.sampled_negatives = toy.catalog.size();
    const TrainResult c = Train(toy.data(), TinyModel(), covering);
    const TrainResult full = Train(toy.data(), TinyModel(), Short(2));
    CHECK(c.model->params().TakeSnapshot() == full.model->params().TakeSnapshot());
  }

  TEST_CASE("no users after the min-length filter") {
    const Toy toy(1);
    const SplitDataset empty;
    CHECK_THROWS_WITH_AS(Train({&empty, &toy.catalog, &toy.synth.store}, TinyModel(), Short()),
                         "no users after min-length filter", DataError);
  }

  TEST_CASE("non-finite loss aborts with epoch and batch context") {
    const Toy toy(1);
    TrainSchedule s = Short(2);
    s.learning_rate = 1e30F;
    try {
      Train(toy.data(), TinyModel(), s);
      FAIL("expected a throw");
    } catch (const NumericalError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("epoch") != std::string::npos);
      CHECK(msg.find("batch") != std::string::npos);
    }
  }
}

TEST_SUITE("grid_search") {
  TEST_CASE("single cell grid returns that cell") {
    const Toy toy(1);
    TrainSchedule s = Short(1);
    s.lr_grid = {1e-3F};
    s.d_grid = {8};
    const GridResult g = GridSearch(toy.data(), TinyModel(), s);
    CHECK(g.cells.size() == 1);
    CHECK(g.best == 0);
  }

  TEST_CASE("ties go to the smaller width, then the smaller learning rate") {
    std::vector<GridCell> cells = {
        {1e-3F, 64, 0.5, 1, 1}, {1e-3F, 32, 0.5, 1, 1}, {1e-4F, 32, 0.5, 1, 1}};
    CHECK(SelectBestCell(cells) == 2);
    cells.push_back({1e-2F, 128, 0.6, 1, 1});
    CHECK(SelectBestCell(cells) == 3);
  }

  TEST_CASE("three by three grid runs nine cells") {
    const Toy toy(1);
    TrainSchedule s = Short(1);
    s.lr_grid = {1e-2F, 1e-3F, 1e-4F};
    s.d_grid = {4, 8, 12};
    ModelConfig m = TinyModel();
    m.backbone.num_heads = 2;
    const GridResult g = GridSearch(toy.data(), m, s, {}, 2);
    CHECK(g.cells.size() == 9);
    CHECK(g.best_run.model != nullptr);
    CHECK(g.best_run.best_val_hit_rate_10 == g.cells[g.best].val_hit_rate_10);
  }

  TEST_CASE("desk and full-scale grids") {
    const TrainSchedule desk = DeskGrid({});
    CHECK(desk.lr_grid == std::vector<float>{1e-3F, 1e-4F});
    CHECK(desk.d_grid == std::vector<std::size_t>{32, 64});
    CHECK(desk.batch_size == 128);
    CHECK(FullScaleGrid({}).lr_grid.size() * FullScaleGrid({}).d_grid.size() == 9);
  }
}

TEST_SUITE("evaluate") {
  TEST_CASE("a target that is the only remaining candidate scores one everywhere") {
    // Every user consumes the whole catalog, so with history exclusion the
    // held-out item is ranked against nothing.
    InteractionLog log;
    std::mt19937_64 rng(3);
    for (std::uint64_t u = 1; u <= 6; ++u) {
      std::vector<std::uint64_t> items = {1, 2, 3, 4, 5};
      std::shuffle(items.begin(), items.end(), rng);
      for (std::size_t i = 0; i < items.size(); ++i) {
        log.Append(u, items[i], static_cast<std::int64_t>(i));
      }
    }
    const SplitDataset split = SplitLeaveOneOut(log);
    const Catalog catalog = Catalog::FromLog(log);
    const Recommender model(TinyModel(Strategy::kIdOnly), catalog, nullptr, 1);
    const EvalReport test = Evaluate(model, split, Phase::kTest);
    for (const auto& c : test.cutoffs) {
      CHECK(c.hit_rate == 1.0);
      CHECK(c.ndcg == 1.0);
    }
    EvalOptions strict;
    strict.exclude_history = false;
    const EvalReport all = Evaluate(model, split, Phase::kTest, strict);
    for (const auto& r : all.ranks) CHECK(r.rank <= 5);
  }

  TEST_CASE("validation ranks the validation item, test the test item") {
    const Toy toy(1);
    const Recommender model(TinyModel(), toy.catalog, &toy.synth.store, 1);
    const EvalReport v = Evaluate(model, toy.split, Phase::kValidation);
    const EvalReport t = Evaluate(model, toy.split, Phase::kTest);
    CHECK(v.phase == "validation");
    CHECK(t.phase == "test");
    CHECK(v.num_users == toy.split.users.size());
    CHECK(t.num_items == toy.catalog.size());
  }
}
