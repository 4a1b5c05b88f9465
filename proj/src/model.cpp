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

#include "dffrec/model.hpp"

#include <algorithm>
#include <stdexcept>

#include "dffrec/error.hpp"
#include "dffrec/ops.hpp"
#include "json.hpp"

namespace dffrec {

using ad::Tensor;

SequenceBatch MakeTrainingBatch(
    const std::vector<const std::vector<std::int64_t>*>& histories,
    std::size_t seq_len) {
  SequenceBatch batch;
  batch.batch = histories.size();
  batch.seq_len = seq_len;
  batch.inputs.assign(batch.batch * seq_len, 0);
  batch.targets.assign(batch.batch * seq_len, 0);
  batch.valid.assign(batch.batch * seq_len, 0);
  for (std::size_t b = 0; b < histories.size(); ++b) {
    const auto& h = *histories[b];
    if (h.size() < 2) continue;
    const std::size_t pairs = std::min(h.size() - 1, seq_len);
    const std::size_t start = h.size() - 1 - pairs;
    for (std::size_t i = 0; i < pairs; ++i) {
      const std::size_t slot = b * seq_len + (seq_len - pairs + i);
      batch.inputs[slot] = h[start + i];
      batch.targets[slot] = h[start + i + 1];
      batch.valid[slot] = 1;
    }
  }
  return batch;
}

SequenceBatch MakeInferenceBatch(
    const std::vector<const std::vector<std::int64_t>*>& histories,
    std::size_t seq_len) {
  SequenceBatch batch;
  batch.batch = histories.size();
  batch.seq_len = seq_len;
  batch.inputs.assign(batch.batch * seq_len, 0);
  batch.targets.assign(batch.batch * seq_len, 0);
  batch.valid.assign(batch.batch * seq_len, 0);
  for (std::size_t b = 0; b < histories.size(); ++b) {
    const auto& h = *histories[b];
    if (h.empty()) {
      throw std::invalid_argument("inference batch: empty history");
    }
    const std::size_t n = std::min(h.size(), seq_len);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t slot = b * seq_len + (seq_len - n + i);
      batch.inputs[slot] = h[h.size() - n + i];
      batch.valid[slot] = 1;
    }
  }
  return batch;
}

Recommender::Recommender(const ModelConfig& config, const Catalog& catalog,
                         const FeatureStore* store, std::uint64_t seed)
    : config_(config), catalog_(catalog) {
  if (config.fusion.d != config.backbone.d) {
    throw UsageError("fusion d=" + std::to_string(config.fusion.d) +
                     " must equal backbone d=" +
                     std::to_string(config.backbone.d));
  }
  ValidateBackboneConfig(config.backbone);
  if (store != nullptr) {
    feature_dim_ = store->dim();
    for (auto id : catalog.raw_ids()) {
      if (!store->Contains(id)) {
        throw DataError("item not found in feature store: " +
                        std::to_string(id));
      }
    }
  }
  std::mt19937_64 rng(seed);
  const FeatureStore* content =
      config.fusion.strategy == Strategy::kIdOnly ? nullptr : store;
  encoder_ = std::make_unique<ItemEncoder>(config.fusion, catalog_, content,
                                           params_, rng);
  backbone_ = std::make_unique<SasRecBackbone>(config.backbone, params_, rng);
}

Tensor Recommender::TrainingLoss(const SequenceBatch& batch,
                                 std::mt19937_64* dropout_rng,
                                 std::span<const std::int64_t> candidates) const {
  const Tensor table = encoder_->CatalogTable();
  const Tensor inputs = ad::Embedding(table, batch.inputs);
  const Tensor hidden = backbone_->Encode(inputs, batch.batch, batch.seq_len,
                                          batch.valid, dropout_rng);
  if (!candidates.empty()) {
    const Tensor scores =
        ScoreCandidates(hidden, ad::Embedding(table, candidates));
    return SampledSequenceLoss(scores, batch.targets, batch.SupervisedMask(),
                               candidates);
  }
  const std::int64_t n = static_cast<std::int64_t>(catalog_.size());
  std::vector<std::int64_t> rows(n);
  for (std::int64_t i = 0; i < n; ++i) rows[i] = i + 1;
  const Tensor scores = ScoreCandidates(hidden, ad::Embedding(table, rows));
  return SequenceLoss(scores, batch.targets, batch.SupervisedMask());
}

std::vector<float> Recommender::ScoreHistories(
    const std::vector<const std::vector<std::int64_t>*>& histories) const {
  ad::NoGradGuard no_grad;
  const std::size_t seq_len = config_.backbone.max_seq_len;
  const SequenceBatch batch = MakeInferenceBatch(histories, seq_len);
  const Tensor table = encoder_->CatalogTable();
  const Tensor hidden =
      backbone_->Encode(ad::Embedding(table, batch.inputs), batch.batch,
                        seq_len, batch.valid, nullptr);
  std::vector<std::int64_t> last(batch.batch);
  for (std::size_t b = 0; b < batch.batch; ++b) {
    last[b] = static_cast<std::int64_t>(b * seq_len + seq_len - 1);
  }
  const std::int64_t n = static_cast<std::int64_t>(catalog_.size());
  std::vector<std::int64_t> rows(n);
  for (std::int64_t i = 0; i < n; ++i) rows[i] = i + 1;
  const Tensor scores = ScoreCandidates(ad::Embedding(hidden, last),
                                        ad::Embedding(table, rows));
  return {scores.data().begin(), scores.data().end()};
}

std::string Recommender::Metadata() const {
  nlohmann::ordered_json j;
  j["format"] = "dffrec-checkpoint";
  j["fusion"] = {{"strategy", StrategyName(config_.fusion.strategy)},
                 {"aggregation", AggregationName(config_.fusion.aggregation)},
                 {"layer", config_.fusion.layer},
                 {"d", config_.fusion.d},
                 {"gate", GateShapeName(config_.fusion.gate)}};
  j["backbone"] = {{"d", config_.backbone.d},
                   {"num_blocks", config_.backbone.num_blocks},
                   {"num_heads", config_.backbone.num_heads},
                   {"max_seq_len", config_.backbone.max_seq_len}};
  j["num_items"] = catalog_.size();
  j["feature_dim"] = feature_dim_;
  return j.dump();
}

void Recommender::SaveCheckpoint(const std::string& path) const {
  params_.Save(path, Metadata());
}

void Recommender::LoadCheckpoint(const std::string& path) {
  const auto meta = nlohmann::json::parse(ParameterSet::ReadMetadata(path),
                                          nullptr, false);
  if (meta.is_discarded() || !meta.contains("fusion")) {
    throw DataError("checkpoint " + path + " has unreadable metadata");
  }
  const std::size_t ckpt_d = meta["fusion"].value("d", std::size_t{0});
  if (ckpt_d != config_.fusion.d) {
    throw DataError("checkpoint d=" + std::to_string(ckpt_d) +
                    " does not match configured d=" +
                    std::to_string(config_.fusion.d));
  }
  const std::size_t ckpt_dim = meta.value("feature_dim", std::size_t{0});
  if (feature_dim_ != 0 && ckpt_dim != feature_dim_) {
    throw DataError("checkpoint feature dim " + std::to_string(ckpt_dim) +
                    " does not match store dim " +
                    std::to_string(feature_dim_));
  }
  const std::size_t ckpt_items = meta.value("num_items", std::size_t{0});
  if (ckpt_items != catalog_.size()) {
    throw DataError("checkpoint catalog size " + std::to_string(ckpt_items) +
                    " does not match " + std::to_string(catalog_.size()));
  }
  params_.Load(path);
}

}  // namespace dffrec
