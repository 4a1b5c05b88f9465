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

#include "dffrec/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "dffrec/error.hpp"
#include "dffrec/hash.hpp"
#include "dffrec/optim.hpp"

namespace dffrec {

std::string SplitDataset::Hash() const {
  std::ostringstream out;
  for (const auto& u : users) {
    out << u.user_id << ':';
    for (auto id : u.train) out << id << ',';
    out << '|' << u.validation << '|' << u.test << '\n';
  }
  out << "dropped=" << dropped_users;
  return Sha1Hex(out.str());
}

SplitDataset SplitLeaveOneOut(const InteractionLog& log) {
  SplitDataset split;
  if (log.empty()) {
    split.warnings.push_back("empty interaction log");
    return split;
  }
  for (const auto& [user, items] : log.sequences()) {
    if (items.size() < 3) {
      ++split.dropped_users;
      continue;
    }
    UserSplit u;
    u.user_id = user;
    u.train.assign(items.begin(), items.end() - 2);
    u.validation = items[items.size() - 2];
    u.test = items.back();
    split.users.push_back(std::move(u));
  }
  if (split.dropped_users > 0) {
    split.warnings.push_back(std::to_string(split.dropped_users) +
                             " user(s) with fewer than 3 interactions dropped");
  }
  return split;
}

TrainSchedule DeskGrid(TrainSchedule base) {
  base.lr_grid = {1e-3F, 1e-4F};
  base.d_grid = {32, 64};
  base.batch_size = 128;
  return base;
}

TrainSchedule FullScaleGrid(TrainSchedule base) {
  base.lr_grid = {1e-4F, 1e-5F, 1e-6F};
  base.d_grid = {512, 1024, 2048};
  base.batch_size = 512;
  return base;
}

bool EarlyStopping::Update(double metric) {
  ++epoch_;
  if (metric > best_metric_) {
    best_metric_ = metric;
    best_epoch_ = epoch_;
    stale_ = 0;
    return false;
  }
  return ++stale_ >= patience_;
}

TrainResult Train(const TrainData& data, const ModelConfig& config,
                  const TrainSchedule& schedule,
                  const EvalOptions& eval_options,
                  const BatchObserver& observer) {
  if (data.split == nullptr || data.catalog == nullptr) {
    throw std::invalid_argument("train: split and catalog are required");
  }
  const SplitDataset& split = *data.split;
  if (split.users.empty()) throw DataError("no users after min-length filter");
  if (schedule.batch_size == 0) throw UsageError("train.batch_size must be > 0");
  if (schedule.max_epochs < 1) throw UsageError("train.max_epochs must be >= 1");

  TrainResult result;
  result.model = std::make_unique<Recommender>(config, *data.catalog,
                                               data.store, schedule.seed);
  Recommender& model = *result.model;
  AdamWOptions adam;
  adam.learning_rate = schedule.learning_rate;
  adam.weight_decay = schedule.weight_decay;
  AdamW optimizer(model.params(), adam);
  if (model.params().Contains(ItemEncoder::kLayerLogits)) {
    optimizer.SetLearningRateScale(ItemEncoder::kLayerLogits,
                                   schedule.layer_logit_lr_scale);
  }

  std::vector<std::vector<std::int64_t>> histories(split.users.size());
  std::vector<std::size_t> trainable;
  for (std::size_t u = 0; u < split.users.size(); ++u) {
    for (auto id : split.users[u].train) {
      histories[u].push_back(data.catalog->IndexOf(id));
    }
    if (histories[u].size() >= 2) trainable.push_back(u);
  }

  EvalOptions val_options = eval_options;
  if (std::find(val_options.cutoffs.begin(), val_options.cutoffs.end(), 10) ==
      val_options.cutoffs.end()) {
    val_options.cutoffs.push_back(10);
  }

  std::mt19937_64 shuffle_rng(schedule.seed ^ 0x9E3779B97F4A7C15ULL);
  std::mt19937_64 dropout_rng(schedule.seed + 1);
  std::mt19937_64 negative_rng(schedule.seed + 2);
  EarlyStopping stopper(schedule.patience);
  ParameterSet::Snapshot best = model.params().TakeSnapshot();
  const std::size_t seq_len = config.backbone.max_seq_len;

  for (int epoch = 1; epoch <= schedule.max_epochs; ++epoch) {
    std::vector<std::size_t> order = trainable;
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += schedule.batch_size) {
      const std::size_t end = std::min(order.size(), start + schedule.batch_size);
      std::vector<const std::vector<std::int64_t>*> rows;
      std::vector<std::uint64_t> users;
      for (std::size_t i = start; i < end; ++i) {
        rows.push_back(&histories[order[i]]);
        users.push_back(split.users[order[i]].user_id);
      }
      const SequenceBatch batch = MakeTrainingBatch(rows, seq_len);
      if (observer) observer(users, batch);
      try {
        const std::vector<std::int64_t> candidates =
            schedule.sampled_negatives == 0
                ? std::vector<std::int64_t>{}
                : SampleCandidates(batch, data.catalog->size(),
                                   schedule.sampled_negatives, negative_rng);
        const ad::Tensor loss =
            model.TrainingLoss(batch, &dropout_rng, candidates);
        if (!std::isfinite(loss.item())) throw NumericalError("non-finite loss");
        model.params().ZeroGrad();
        loss.backward();
        optimizer.Step();
        loss_sum += loss.item();
      } catch (const NumericalError& e) {
        throw NumericalError("epoch " + std::to_string(epoch) + " batch " +
                             std::to_string(batches + 1) + ": " + e.what());
      }
      ++batches;
    }
    const double val =
        Evaluate(model, split, Phase::kValidation, val_options).HitRate(10);
    result.history.push_back(
        {epoch, batches > 0 ? loss_sum / static_cast<double>(batches) : 0.0, val});
    const bool stop = stopper.Update(val);
    if (stopper.best_epoch() == epoch) best = model.params().TakeSnapshot();
    if (stop) break;
  }
  model.params().Restore(best);
  result.best_epoch = stopper.best_epoch();
  result.best_val_hit_rate_10 = stopper.best_metric();
  result.steps = optimizer.step_count();
  return result;
}

std::size_t SelectBestCell(std::span<const GridCell> cells) {
  if (cells.empty()) throw std::invalid_argument("grid search: empty grid");
  std::size_t best = 0;
  for (std::size_t i = 1; i < cells.size(); ++i) {
    const GridCell& a = cells[i];
    const GridCell& b = cells[best];
    if (a.val_hit_rate_10 != b.val_hit_rate_10) {
      if (a.val_hit_rate_10 > b.val_hit_rate_10) best = i;
    } else if (a.d != b.d) {
      if (a.d < b.d) best = i;
    } else if (a.learning_rate < b.learning_rate) {
      best = i;
    }
  }
  return best;
}

GridResult GridSearch(const TrainData& data, const ModelConfig& base,
                      const TrainSchedule& schedule,
                      const EvalOptions& eval_options, int jobs) {
  const std::vector<float> lrs =
      schedule.lr_grid.empty() ? std::vector<float>{schedule.learning_rate}
                               : schedule.lr_grid;
  const std::vector<std::size_t> ds =
      schedule.d_grid.empty() ? std::vector<std::size_t>{base.fusion.d}
                              : schedule.d_grid;
  struct Job {
    ModelConfig config;
    TrainSchedule schedule;
  };
  std::vector<Job> work;
  for (std::size_t d : ds) {
    for (float lr : lrs) {
      Job job{base, schedule};
      job.config.fusion.d = d;
      job.config.backbone.d = d;
      job.schedule.learning_rate = lr;
      work.push_back(job);
    }
  }

  std::vector<TrainResult> runs(work.size());
  std::vector<std::exception_ptr> errors(work.size());
  auto run = [&](std::size_t i) {
    try {
      runs[i] = Train(data, work[i].config, work[i].schedule, eval_options);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t workers =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), 1,
                              work.size());
  if (workers == 1) {
    for (std::size_t i = 0; i < work.size(); ++i) run(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < work.size(); i = next++) run(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  GridResult result;
  for (std::size_t i = 0; i < work.size(); ++i) {
    result.cells.push_back({work[i].schedule.learning_rate, work[i].config.fusion.d,
                            runs[i].best_val_hit_rate_10, runs[i].best_epoch,
                            static_cast<int>(runs[i].history.size())});
  }
  result.best = SelectBestCell(result.cells);
  result.best_run = std::move(runs[result.best]);
  return result;
}

}  // namespace dffrec
