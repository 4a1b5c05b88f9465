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

#include "dffrec/run.hpp"

#include <chrono>
#include <ctime>

#include "dffrec/error.hpp"
#include "dffrec/hash.hpp"
#include "json.hpp"

namespace dffrec {
namespace {

FeatureStore LoadValidatedStore(const std::string& path,
                                const InteractionLog& log) {
  if (!std::filesystem::exists(path)) {
    throw DataError("feature store not found: " + path);
  }
  FeatureStore store = ReadStore(path);
  const StoreValidationReport report = ValidateStore(store, log);
  if (!report.clean()) throw DataError(path + ": " + report.Summary());
  return store;
}

}  // namespace

Dataset LoadDataset(const RunConfig& config, bool require_caption_store) {
  if (config.log_path.empty()) throw UsageError("paths.log is required");
  if (!std::filesystem::exists(config.log_path)) {
    throw DataError("interaction log not found: " + config.log_path);
  }
  Dataset data;
  data.log = InteractionLog::ReadTsv(config.log_path);
  if (!config.store_path.empty()) {
    data.store = LoadValidatedStore(config.store_path, data.log);
    data.store_hash = GitBlobHash(config.store_path);
  } else if (config.model.fusion.strategy != Strategy::kIdOnly) {
    throw UsageError("paths.store is required for strategy " +
                     std::string(StrategyName(config.model.fusion.strategy)));
  }
  if (!config.caption_store_path.empty()) {
    data.caption_store = LoadValidatedStore(config.caption_store_path, data.log);
    data.caption_store_hash = GitBlobHash(config.caption_store_path);
  } else if (require_caption_store) {
    throw UsageError("paths.caption_store is required");
  }
  data.split = SplitLeaveOneOut(data.log);
  data.split_hash = data.split.Hash();
  data.catalog = data.store ? Catalog::FromStore(*data.store)
                            : Catalog::FromLog(data.log);
  return data;
}

TrainOutcome TrainAndEvaluate(const Dataset& data, const FeatureStore* store,
                              const RunConfig& config, int jobs) {
  const TrainData train_data{&data.split, &data.catalog, store};
  TrainSchedule schedule = config.schedule;
  schedule.seed = config.seed;
  TrainOutcome outcome;
  if (!schedule.lr_grid.empty() || !schedule.d_grid.empty()) {
    GridResult grid =
        GridSearch(train_data, config.model, schedule, config.eval, jobs);
    outcome.cells = std::move(grid.cells);
    outcome.best_cell = grid.best;
    outcome.run = std::move(grid.best_run);
  } else {
    outcome.run = Train(train_data, config.model, schedule, config.eval);
  }
  outcome.validation =
      Evaluate(*outcome.run.model, data.split, Phase::kValidation, config.eval);
  outcome.test =
      Evaluate(*outcome.run.model, data.split, Phase::kTest, config.eval);
  return outcome;
}

std::string BuildManifest(const std::string& command, const RunConfig& config,
                          const Dataset& data, const TrainOutcome& outcome,
                          const std::string& created_at) {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["seed"] = config.seed;
  nlohmann::ordered_json cfg;
  for (const auto& [k, v] : ConfigEntries(config)) cfg[k] = v;
  j["config"] = cfg;
  j["split_hash"] = data.split_hash;
  j["store_hash"] = data.store_hash;
  if (!data.caption_store_hash.empty()) {
    j["caption_store_hash"] = data.caption_store_hash;
  }
  j["num_users"] = data.split.users.size();
  j["dropped_users"] = data.split.dropped_users;
  j["warnings"] = data.split.warnings;
  j["grid"] = nlohmann::ordered_json::array();
  for (const auto& c : outcome.cells) {
    j["grid"].push_back({{"learning_rate", c.learning_rate},
                         {"d", c.d},
                         {"val_hit_rate_10", c.val_hit_rate_10},
                         {"best_epoch", c.best_epoch},
                         {"epochs_run", c.epochs_run}});
  }
  if (!outcome.cells.empty()) j["best_cell"] = outcome.best_cell;
  j["best_epoch"] = outcome.run.best_epoch;
  j["best_val_hit_rate_10"] = outcome.run.best_val_hit_rate_10;
  j["steps"] = outcome.run.steps;
  j["history"] = nlohmann::ordered_json::array();
  for (const auto& e : outcome.run.history) {
    j["history"].push_back({{"epoch", e.epoch},
                            {"train_loss", e.train_loss},
                            {"val_hit_rate_10", e.val_hit_rate_10}});
  }
  j["layer_weights"] = outcome.run.model->encoder().LayerWeights();
  nlohmann::ordered_json metrics;
  for (const EvalReport* r : {&outcome.validation, &outcome.test}) {
    for (const auto& c : r->cutoffs) {
      metrics[r->phase]["hr@" + std::to_string(c.cutoff)] = c.hit_rate;
      metrics[r->phase]["ndcg@" + std::to_string(c.cutoff)] = c.ndcg;
    }
  }
  j["metrics"] = metrics;
  if (!created_at.empty()) j["created_at"] = created_at;
  return j.dump(2) + "\n";
}

std::string UtcTimestamp() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace dffrec
