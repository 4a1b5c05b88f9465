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

// Item encoders that turn frozen multi-layer content features and trainable
// ID embeddings into one vector per item.
//
//   content   e_v = projection(sum_l alpha_l h_l)
//   fusion    g = sigmoid(MLP([e_id; e_v])),  e = g * e_id + (1 - g) * e_v
//
// alpha is softmax(layer_logits) for learned weights, the uniform vector for
// plain averaging, and a one-hot vector for single-layer selection.

#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dffrec/catalog.hpp"
#include "dffrec/feature_store.hpp"
#include "dffrec/parameters.hpp"
#include "dffrec/tensor.hpp"

namespace dffrec {

enum class Strategy { kIdOnly, kReplacement, kFusion };
enum class Aggregation { kSingleLayer, kUniformAverage, kLearnedWeights };
enum class GateShape { kVector, kScalar };

const char* StrategyName(Strategy s);
const char* AggregationName(Aggregation a);
const char* GateShapeName(GateShape g);
Strategy ParseStrategy(const std::string& name);
Aggregation ParseAggregation(const std::string& name);
GateShape ParseGateShape(const std::string& name);

struct FusionConfig {
  Strategy strategy = Strategy::kFusion;
  Aggregation aggregation = Aggregation::kLearnedWeights;
  // 1-based; only read for kSingleLayer.
  std::size_t layer = 1;
  std::size_t d = 64;
  GateShape gate = GateShape::kVector;
};

// Frozen per-layer features of a list of items packed as a
// num_layers x (num_items * dim) constant, so a layer mix is one matmul.
ad::Tensor BuildLayerStack(const FeatureStore& store,
                           std::span<const std::uint64_t> raw_ids);
ad::Tensor BuildLayerStack(std::span<const ItemFeatures> items,
                           std::size_t num_layers, std::size_t dim);

class LayerAggregator {
 public:
  LayerAggregator(Aggregation mode, std::size_t num_layers, std::size_t in_dim,
                  std::size_t out_dim, std::size_t layer, ParameterSet& params,
                  std::mt19937_64& rng);

  // 1 x num_layers mixing weights as a graph node.
  ad::Tensor Weights() const;
  std::vector<float> EffectiveWeights() const;

  // num_items x in_dim, before projection.
  ad::Tensor Mix(const ad::Tensor& layer_stack, std::size_t num_items) const;
  // num_items x out_dim.
  ad::Tensor Aggregate(const ad::Tensor& layer_stack,
                       std::size_t num_items) const;

  Aggregation mode() const { return mode_; }
  std::size_t num_layers() const { return num_layers_; }
  std::size_t in_dim() const { return in_dim_; }

 private:
  Aggregation mode_;
  std::size_t num_layers_;
  std::size_t in_dim_;
  std::size_t layer_;
  ad::Tensor logits_;
  ad::Tensor projection_;
  ad::Tensor bias_;
};

class FusionGate {
 public:
  FusionGate(Strategy strategy, GateShape shape, std::size_t d,
             ParameterSet& params, std::mt19937_64& rng);

  // rows x d (vector gate) or rows x 1 (scalar gate) in (0, 1).
  ad::Tensor Gate(const ad::Tensor& e_id, const ad::Tensor& e_v) const;
  ad::Tensor Fuse(const ad::Tensor& e_id, const ad::Tensor& e_v) const;

  Strategy strategy() const { return strategy_; }

 private:
  Strategy strategy_;
  GateShape shape_;
  std::size_t d_;
  ad::Tensor w1_, b1_, w2_, b2_;
};

// Produces the (num_items + 1) x d table of item embeddings whose row 0 is
// the zero padding vector. Replacement and fusion need a content store; the
// ID-only arm ignores it.
class ItemEncoder {
 public:
  static constexpr const char* kLayerLogits = "agg.layer_logits";
  static constexpr const char* kIdTable = "item.id_table";

  ItemEncoder(const FusionConfig& config, const Catalog& catalog,
              const FeatureStore* store, ParameterSet& params,
              std::mt19937_64& rng);

  ad::Tensor CatalogTable() const;
  // Rows for catalog indices; index 0 gives a zero row.
  ad::Tensor Embed(std::span<const std::int64_t> indices) const;
  // Row 0 of the ID table stays zero.
  ad::Tensor IdRows() const;

  std::vector<float> LayerWeights() const;
  const FusionConfig& config() const { return config_; }
  std::size_t num_items() const { return num_items_; }
  bool uses_content() const { return aggregator_.has_value(); }
  const LayerAggregator* aggregator() const {
    return aggregator_ ? &*aggregator_ : nullptr;
  }
  const FusionGate& gate() const { return gate_; }

 private:
  FusionConfig config_;
  std::size_t num_items_;
  ad::Tensor layer_stack_;
  ad::Tensor id_table_;
  std::vector<std::int64_t> item_rows_;
  std::optional<LayerAggregator> aggregator_;
  FusionGate gate_;
};

}  // namespace dffrec
