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

// Full recommender: item encoder feeding the sequence backbone, scoring the
// whole catalog.

#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "dffrec/backbone.hpp"
#include "dffrec/catalog.hpp"
#include "dffrec/feature_store.hpp"
#include "dffrec/fusion.hpp"
#include "dffrec/parameters.hpp"

namespace dffrec {

struct ModelConfig {
  FusionConfig fusion;
  BackboneConfig backbone;
};

// Builds a left-padded training batch: each history contributes its last
// seq_len + 1 items as seq_len inputs with shifted next-item targets.
// Histories with fewer than two items contribute an unsupervised row.
SequenceBatch MakeTrainingBatch(
    const std::vector<const std::vector<std::int64_t>*>& histories,
    std::size_t seq_len);

// Left-padded inference batch of the last seq_len items of each history.
SequenceBatch MakeInferenceBatch(
    const std::vector<const std::vector<std::int64_t>*>& histories,
    std::size_t seq_len);

class Recommender {
 public:
  // fusion.d and backbone.d must agree. `store` may be null for ID-only.
  Recommender(const ModelConfig& config, const Catalog& catalog,
              const FeatureStore* store, std::uint64_t seed);
  Recommender(const Recommender&) = delete;
  Recommender& operator=(const Recommender&) = delete;

  // Full-catalog softmax when `candidates` is empty, otherwise softmax over
  // the given ascending catalog indices.
  ad::Tensor TrainingLoss(const SequenceBatch& batch,
                          std::mt19937_64* dropout_rng,
                          std::span<const std::int64_t> candidates = {}) const;

  // Row-major histories.size() x num_items scores from the last position
  // of each (non-empty) history; column j scores catalog index j + 1.
  std::vector<float> ScoreHistories(
      const std::vector<const std::vector<std::int64_t>*>& histories) const;

  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  const ModelConfig& config() const { return config_; }
  const ItemEncoder& encoder() const { return *encoder_; }
  const SasRecBackbone& backbone() const { return *backbone_; }
  const Catalog& catalog() const { return catalog_; }
  std::size_t feature_dim() const { return feature_dim_; }

  // JSON description stored in checkpoints.
  std::string Metadata() const;
  void SaveCheckpoint(const std::string& path) const;
  // Throws DataError when the checkpoint's dims disagree with this model.
  void LoadCheckpoint(const std::string& path);

 private:
  ModelConfig config_;
  Catalog catalog_;
  std::size_t feature_dim_ = 0;
  ParameterSet params_;
  std::unique_ptr<ItemEncoder> encoder_;
  std::unique_ptr<SasRecBackbone> backbone_;
};

}  // namespace dffrec
