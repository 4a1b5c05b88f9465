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

#include "dffrec/fusion.hpp"

#include <cmath>
#include <stdexcept>

#include "dffrec/error.hpp"
#include "dffrec/init.hpp"
#include "dffrec/ops.hpp"

namespace dffrec {

using ad::Tensor;

const char* StrategyName(Strategy s) {
  switch (s) {
    case Strategy::kIdOnly:
      return "id_only";
    case Strategy::kReplacement:
      return "replacement";
    case Strategy::kFusion:
      return "fusion";
  }
  return "unknown";
}

const char* AggregationName(Aggregation a) {
  switch (a) {
    case Aggregation::kSingleLayer:
      return "single_layer";
    case Aggregation::kUniformAverage:
      return "uniform_average";
    case Aggregation::kLearnedWeights:
      return "learned_weights";
  }
  return "unknown";
}

const char* GateShapeName(GateShape g) {
  return g == GateShape::kVector ? "vector" : "scalar";
}

Strategy ParseStrategy(const std::string& name) {
  if (name == "id_only") return Strategy::kIdOnly;
  if (name == "replacement") return Strategy::kReplacement;
  if (name == "fusion") return Strategy::kFusion;
  throw UsageError("unknown fusion strategy '" + name +
                   "' (expected id_only, replacement or fusion)");
}

Aggregation ParseAggregation(const std::string& name) {
  if (name == "single_layer") return Aggregation::kSingleLayer;
  if (name == "uniform_average") return Aggregation::kUniformAverage;
  if (name == "learned_weights") return Aggregation::kLearnedWeights;
  throw UsageError("unknown aggregation '" + name +
                   "' (expected single_layer, uniform_average or "
                   "learned_weights)");
}

GateShape ParseGateShape(const std::string& name) {
  if (name == "vector") return GateShape::kVector;
  if (name == "scalar") return GateShape::kScalar;
  throw UsageError("unknown gate shape '" + name + "'");
}

Tensor BuildLayerStack(std::span<const ItemFeatures> items,
                       std::size_t num_layers, std::size_t dim) {
  if (items.empty()) throw std::invalid_argument("layer stack: no items");
  const std::size_t n = items.size();
  std::vector<float> data(num_layers * n * dim);
  for (std::size_t i = 0; i < n; ++i) {
    if (items[i].values.size() != num_layers * dim) {
      throw DataError("item " + std::to_string(items[i].item_id) +
                      ": expected " + std::to_string(num_layers) +
                      " layers of dim " + std::to_string(dim));
    }
    for (std::size_t l = 0; l < num_layers; ++l) {
      std::copy_n(items[i].values.data() + l * dim, dim,
                  data.data() + l * n * dim + i * dim);
    }
  }
  return Tensor::FromData({num_layers, n * dim}, std::move(data));
}

Tensor BuildLayerStack(const FeatureStore& store,
                       std::span<const std::uint64_t> raw_ids) {
  std::vector<ItemFeatures> items;
  items.reserve(raw_ids.size());
  for (auto id : raw_ids) {
    const auto values = store.Item(id);
    items.push_back({id, std::vector<float>(values.begin(), values.end())});
  }
  return BuildLayerStack(items, store.num_layers(), store.dim());
}

LayerAggregator::LayerAggregator(Aggregation mode, std::size_t num_layers,
                                 std::size_t in_dim, std::size_t out_dim,
                                 std::size_t layer, ParameterSet& params,
                                 std::mt19937_64& rng)
    : mode_(mode), num_layers_(num_layers), in_dim_(in_dim), layer_(layer) {
  if (num_layers == 0 || in_dim == 0 || out_dim == 0) {
    throw std::invalid_argument("aggregator: zero-sized dimension");
  }
  if (mode == Aggregation::kSingleLayer &&
      (layer < 1 || layer > num_layers)) {
    throw UsageError("single_layer k=" + std::to_string(layer) +
                     " out of range 1.." + std::to_string(num_layers));
  }
  if (mode == Aggregation::kLearnedWeights) {
    logits_ = params.Add(ItemEncoder::kLayerLogits,
                         Tensor::Zeros({1, num_layers}, true));
  }
  projection_ = params.Add("agg.projection", XavierParameter(in_dim, out_dim, rng));
  bias_ = params.Add("agg.projection_bias", Tensor::Zeros({1, out_dim}, true));
}

Tensor LayerAggregator::Weights() const {
  switch (mode_) {
    case Aggregation::kLearnedWeights:
      return ad::Softmax(logits_);
    case Aggregation::kUniformAverage:
      // Same op as learned weights at zero logits.
      return ad::Softmax(Tensor::Zeros({1, num_layers_}));
    case Aggregation::kSingleLayer: {
      std::vector<float> onehot(num_layers_, 0.0F);
      onehot[layer_ - 1] = 1.0F;
      return Tensor::FromData({1, num_layers_}, std::move(onehot));
    }
  }
  throw std::logic_error("unreachable");
}

std::vector<float> LayerAggregator::EffectiveWeights() const {
  ad::NoGradGuard no_grad;
  const Tensor w = Weights();
  return {w.data().begin(), w.data().end()};
}

Tensor LayerAggregator::Mix(const Tensor& layer_stack,
                            std::size_t num_items) const {
  if (layer_stack.rank() != 2 || layer_stack.shape()[0] != num_layers_ ||
      layer_stack.shape()[1] != num_items * in_dim_) {
    throw DataError("aggregate_layers: feature stack " +
                    ad::ShapeToString(layer_stack.shape()) + " does not match " +
                    std::to_string(num_layers_) + " layers x " +
                    std::to_string(num_items) + " items x dim " +
                    std::to_string(in_dim_));
  }
  if (mode_ == Aggregation::kSingleLayer) {
    // Copy the selected row so other layers never enter the computation.
    const std::int64_t row = static_cast<std::int64_t>(layer_ - 1);
    return ad::Reshape(ad::Embedding(layer_stack, std::span(&row, 1)),
                       {num_items, in_dim_});
  }
  return ad::Reshape(ad::MatMul(Weights(), layer_stack), {num_items, in_dim_});
}

Tensor LayerAggregator::Aggregate(const Tensor& layer_stack,
                                  std::size_t num_items) const {
  return ad::Add(ad::MatMul(Mix(layer_stack, num_items), projection_), bias_);
}

FusionGate::FusionGate(Strategy strategy, GateShape shape, std::size_t d,
                       ParameterSet& params, std::mt19937_64& rng)
    : strategy_(strategy), shape_(shape), d_(d) {
  if (strategy != Strategy::kFusion) return;
  const std::size_t out = shape == GateShape::kVector ? d : 1;
  w1_ = params.Add("gate.w1", XavierParameter(2 * d, d, rng));
  b1_ = params.Add("gate.b1", Tensor::Zeros({1, d}, true));
  w2_ = params.Add("gate.w2", XavierParameter(d, out, rng));
  b2_ = params.Add("gate.b2", Tensor::Zeros({1, out}, true));
}

Tensor FusionGate::Gate(const Tensor& e_id, const Tensor& e_v) const {
  if (strategy_ != Strategy::kFusion) {
    throw std::logic_error("gate requested for non-fusion strategy");
  }
  const Tensor parts[] = {e_id, e_v};
  const Tensor hidden =
      ad::Relu(ad::Add(ad::MatMul(ad::Concat(parts, 1), w1_), b1_));
  return ad::Sigmoid(ad::Add(ad::MatMul(hidden, w2_), b2_));
}

Tensor FusionGate::Fuse(const Tensor& e_id, const Tensor& e_v) const {
  if (e_id.shape() != e_v.shape() || e_id.cols() != d_) {
    throw std::invalid_argument("fuse: length mismatch " +
                                ad::ShapeToString(e_id.shape()) + " vs " +
                                ad::ShapeToString(e_v.shape()) + " for d=" +
                                std::to_string(d_));
  }
  switch (strategy_) {
    case Strategy::kReplacement:
      return e_v;
    case Strategy::kIdOnly:
      return e_id;
    case Strategy::kFusion: {
      const Tensor g = Gate(e_id, e_v);
      // e_v + g (e_id - e_v) == g e_id + (1 - g) e_v
      return ad::Add(e_v, ad::Mul(ad::Sub(e_id, e_v), g));
    }
  }
  throw std::logic_error("unreachable");
}

ItemEncoder::ItemEncoder(const FusionConfig& config, const Catalog& catalog,
                         const FeatureStore* store, ParameterSet& params,
                         std::mt19937_64& rng)
    : config_(config),
      num_items_(catalog.size()),
      gate_(config.strategy, config.gate, config.d, params, rng) {
  if (num_items_ == 0) throw DataError("empty catalog");
  if (config.d == 0) throw UsageError("fusion.d must be positive");
  {
    // Registered for every strategy; replacement never reads it.
    std::vector<float> table((num_items_ + 1) * config.d);
    std::normal_distribution<float> dist(
        0.0F, 1.0F / std::sqrt(static_cast<float>(config.d)));
    for (std::size_t i = config.d; i < table.size(); ++i) table[i] = dist(rng);
    id_table_ = params.Add(kIdTable, Tensor::FromData({num_items_ + 1, config.d},
                                                      std::move(table), true));
  }
  item_rows_.resize(num_items_);
  for (std::size_t i = 0; i < num_items_; ++i) {
    item_rows_[i] = static_cast<std::int64_t>(i + 1);
  }
  if (config.strategy != Strategy::kIdOnly) {
    if (store == nullptr) {
      throw UsageError(std::string(StrategyName(config.strategy)) +
                       " strategy needs a feature store");
    }
    layer_stack_ = BuildLayerStack(*store, catalog.raw_ids());
    aggregator_.emplace(config.aggregation, store->num_layers(), store->dim(),
                        config.d, config.layer, params, rng);
  }
}

Tensor ItemEncoder::IdRows() const {
  return ad::Embedding(id_table_, item_rows_);
}

Tensor ItemEncoder::CatalogTable() const {
  Tensor fused;
  if (config_.strategy == Strategy::kIdOnly) {
    fused = IdRows();
  } else {
    const Tensor e_v = aggregator_->Aggregate(layer_stack_, num_items_);
    const Tensor e_id =
        config_.strategy == Strategy::kFusion ? IdRows() : Tensor{};
    fused = config_.strategy == Strategy::kFusion ? gate_.Fuse(e_id, e_v) : e_v;
  }
  const Tensor parts[] = {Tensor::Zeros({1, config_.d}), fused};
  return ad::Concat(parts, 0);
}

Tensor ItemEncoder::Embed(std::span<const std::int64_t> indices) const {
  return ad::Embedding(CatalogTable(), indices);
}

std::vector<float> ItemEncoder::LayerWeights() const {
  if (!aggregator_) return {};
  return aggregator_->EffectiveWeights();
}

}  // namespace dffrec
