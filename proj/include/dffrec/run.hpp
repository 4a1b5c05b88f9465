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

// Loading a dataset from a run config, training with or without a grid, and
// writing the run manifest.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dffrec/catalog.hpp"
#include "dffrec/config.hpp"
#include "dffrec/evaluation.hpp"
#include "dffrec/feature_store.hpp"
#include "dffrec/interaction_log.hpp"
#include "dffrec/training.hpp"

namespace dffrec {

struct Dataset {
  std::optional<FeatureStore> store;
  std::optional<FeatureStore> caption_store;
  std::string store_hash;
  std::string caption_store_hash;
  InteractionLog log;
  SplitDataset split;
  Catalog catalog;
  std::string split_hash;
};

// Reads the log and stores named by `config`, validates each store against
// the log (DataError with the validation summary when not clean), and splits.
// The store may be omitted only for the ID-only strategy; the catalog then
// comes from the log.
Dataset LoadDataset(const RunConfig& config, bool require_caption_store = false);

struct TrainOutcome {
  TrainResult run;
  // Present when a grid was searched; empty for a single run.
  std::vector<GridCell> cells;
  std::size_t best_cell = 0;
  EvalReport validation;
  EvalReport test;
};

// Trains on `store` (may be null for ID-only) and evaluates both phases.
TrainOutcome TrainAndEvaluate(const Dataset& data, const FeatureStore* store,
                              const RunConfig& config, int jobs = 1);

// JSON manifest: command, seed, every config key, split and store hashes,
// grid cells, best epoch, epoch history, metrics. `created_at` is the only
// time-dependent field and is omitted when empty.
std::string BuildManifest(const std::string& command, const RunConfig& config,
                          const Dataset& data, const TrainOutcome& outcome,
                          const std::string& created_at);

std::string UtcTimestamp();

}  // namespace dffrec
