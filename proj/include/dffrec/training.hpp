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

// Leave-one-out splitting, the AdamW epoch loop with early stopping, and the
// learning-rate x width grid search.

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dffrec/catalog.hpp"
#include "dffrec/evaluation.hpp"
#include "dffrec/feature_store.hpp"
#include "dffrec/interaction_log.hpp"
#include "dffrec/model.hpp"

namespace dffrec {

struct UserSplit {
  std::uint64_t user_id = 0;
  std::vector<std::uint64_t> train;
  std::uint64_t validation = 0;
  std::uint64_t test = 0;
};

struct SplitDataset {
  std::vector<UserSplit> users;
  // Users with fewer than three interactions.
  std::size_t dropped_users = 0;
  std::vector<std::string> warnings;

  // Hex SHA-1 over the serialized split; equal splits hash equal.
  std::string Hash() const;
};

SplitDataset SplitLeaveOneOut(const InteractionLog& log);

struct TrainSchedule {
  float learning_rate = 1e-3F;
  // Grid search runs when either grid is non-empty; an empty grid falls back
  // to the single learning_rate / model d.
  std::vector<float> lr_grid;
  std::vector<std::size_t> d_grid;
  float weight_decay = 0.1F;
  std::size_t batch_size = 128;
  int patience = 5;
  int max_epochs = 100;
  std::uint64_t seed = 0;
  // Learning-rate multiplier for the layer-weight logits.
  float layer_logit_lr_scale = 1.0F;
  // Uniform negatives per batch for sampled softmax; 0 scores the full
  // catalog.
  std::size_t sampled_negatives = 0;
};

// The desk-scale and full-size hyperparameter grids.
TrainSchedule DeskGrid(TrainSchedule base);
TrainSchedule FullScaleGrid(TrainSchedule base);

// Stops after `patience` consecutive epochs without strict improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}
  // Records the metric for the next epoch (1-based); true means stop now.
  bool Update(double metric);
  int best_epoch() const { return best_epoch_; }
  double best_metric() const { return best_metric_; }
  int epochs_seen() const { return epoch_; }

 private:
  int patience_;
  int epoch_ = 0;
  int best_epoch_ = 0;
  double best_metric_ = -1.0;
  int stale_ = 0;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_hit_rate_10 = 0.0;
};

struct TrainResult {
  std::unique_ptr<Recommender> model;  // holds best-epoch parameters
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_val_hit_rate_10 = 0.0;
  std::int64_t steps = 0;
};

// Called with the user of each batch row before the step is taken.
using BatchObserver = std::function<void(std::span<const std::uint64_t> users,
                                         const SequenceBatch& batch)>;

struct TrainData {
  const SplitDataset* split = nullptr;
  const Catalog* catalog = nullptr;
  const FeatureStore* store = nullptr;
};

TrainResult Train(const TrainData& data, const ModelConfig& config,
                  const TrainSchedule& schedule,
                  const EvalOptions& eval_options = {},
                  const BatchObserver& observer = {});

struct GridCell {
  float learning_rate = 0.0F;
  std::size_t d = 0;
  double val_hit_rate_10 = 0.0;
  int best_epoch = 0;
  int epochs_run = 0;
};

// Highest validation HR@10; ties go to smaller d, then smaller lr.
std::size_t SelectBestCell(std::span<const GridCell> cells);

struct GridResult {
  std::vector<GridCell> cells;
  std::size_t best = 0;
  TrainResult best_run;
};

GridResult GridSearch(const TrainData& data, const ModelConfig& base,
                      const TrainSchedule& schedule,
                      const EvalOptions& eval_options = {}, int jobs = 1);

}  // namespace dffrec
