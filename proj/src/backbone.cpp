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

#include "dffrec/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <stdexcept>
#include <string>

#include "dffrec/error.hpp"
#include "dffrec/init.hpp"
#include "dffrec/ops.hpp"

namespace dffrec {

using ad::Tensor;

void ValidateBackboneConfig(const BackboneConfig& config) {
  if (config.d == 0) throw UsageError("backbone.d must be positive");
  if (config.num_blocks < 1) throw UsageError("backbone.num_blocks must be >= 1");
  if (config.num_heads < 1 || config.d % config.num_heads != 0) {
    throw UsageError("backbone.num_heads=" + std::to_string(config.num_heads) +
                     " must divide d=" + std::to_string(config.d));
  }
  if (config.max_seq_len < 2) throw UsageError("backbone.max_seq_len must be >= 2");
  if (!(config.dropout >= 0.0F && config.dropout < 1.0F)) {
    throw UsageError("backbone.dropout must lie in [0, 1)");
  }
}

std::vector<std::uint8_t> SequenceBatch::SupervisedMask() const {
  std::vector<std::uint8_t> mask(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) mask[i] = targets[i] != 0;
  return mask;
}

SasRecBackbone::SasRecBackbone(const BackboneConfig& config,
                               ParameterSet& params, std::mt19937_64& rng)
    : config_(config) {
  ValidateBackboneConfig(config);
  const std::size_t d = config.d;
  const float emb_std = 1.0F / std::sqrt(static_cast<float>(d));
  positions_ = params.Add("backbone.positions",
                          NormalParameter({config.max_seq_len, d}, emb_std, rng));
  for (std::size_t b = 0; b < config.num_blocks; ++b) {
    const std::string p = "backbone.block" + std::to_string(b) + ".";
    Block blk;
    blk.ln1_gamma = params.Add(p + "ln1.gamma", Tensor::Full({1, d}, 1.0F, true));
    blk.ln1_beta = params.Add(p + "ln1.beta", Tensor::Zeros({1, d}, true));
    blk.wq = params.Add(p + "attn.wq", XavierParameter(d, d, rng));
    blk.bq = params.Add(p + "attn.bq", Tensor::Zeros({1, d}, true));
    blk.wk = params.Add(p + "attn.wk", XavierParameter(d, d, rng));
    blk.bk = params.Add(p + "attn.bk", Tensor::Zeros({1, d}, true));
    blk.wv = params.Add(p + "attn.wv", XavierParameter(d, d, rng));
    blk.bv = params.Add(p + "attn.bv", Tensor::Zeros({1, d}, true));
    blk.wo = params.Add(p + "attn.wo", XavierParameter(d, d, rng));
    blk.bo = params.Add(p + "attn.bo", Tensor::Zeros({1, d}, true));
    blk.ln2_gamma = params.Add(p + "ln2.gamma", Tensor::Full({1, d}, 1.0F, true));
    blk.ln2_beta = params.Add(p + "ln2.beta", Tensor::Zeros({1, d}, true));
    blk.w1 = params.Add(p + "ffn.w1", XavierParameter(d, d, rng));
    blk.b1 = params.Add(p + "ffn.b1", Tensor::Zeros({1, d}, true));
    blk.w2 = params.Add(p + "ffn.w2", XavierParameter(d, d, rng));
    blk.b2 = params.Add(p + "ffn.b2", Tensor::Zeros({1, d}, true));
    blocks_.push_back(std::move(blk));
  }
  final_gamma_ = params.Add("backbone.final_ln.gamma", Tensor::Full({1, d}, 1.0F, true));
  final_beta_ = params.Add("backbone.final_ln.beta", Tensor::Zeros({1, d}, true));
}

Tensor SasRecBackbone::Encode(const Tensor& embeddings, std::size_t batch,
                              std::size_t seq_len,
                              std::span<const std::uint8_t> valid,
                              std::mt19937_64* dropout_rng) const {
  const std::size_t d = config_.d;
  if (seq_len > config_.max_seq_len) {
    throw DataError("sequence length " + std::to_string(seq_len) +
                    " exceeds max_seq_len " +
                    std::to_string(config_.max_seq_len));
  }
  if (embeddings.rank() != 2 || embeddings.rows() != batch * seq_len ||
      embeddings.cols() != d) {
    throw std::invalid_argument(
        "encode_sequence: embeddings " + ad::ShapeToString(embeddings.shape()) +
        " do not match batch " + std::to_string(batch) + " x seq_len " +
        std::to_string(seq_len) + " x d " + std::to_string(d));
  }
  if (valid.size() != batch * seq_len) {
    throw std::invalid_argument("encode_sequence: mask length mismatch");
  }
  const bool use_dropout = config_.dropout > 0.0F && dropout_rng != nullptr;
  auto dropout = [&](const Tensor& x) {
    return use_dropout ? ad::Dropout(x, config_.dropout, *dropout_rng) : x;
  };

  std::vector<std::int64_t> pos(batch * seq_len);
  std::vector<float> keep(batch * seq_len);
  for (std::size_t i = 0; i < pos.size(); ++i) {
    pos[i] = static_cast<std::int64_t>(i % seq_len);
    keep[i] = valid[i] ? 1.0F : 0.0F;
  }
  const Tensor row_mask = Tensor::FromData({batch * seq_len, 1}, std::move(keep));

  Tensor x = ad::Add(ad::Scale(embeddings, std::sqrt(static_cast<float>(d))),
                     ad::Embedding(positions_, pos));
  x = ad::Mul(dropout(x), row_mask);
  for (const Block& blk : blocks_) {
    const Tensor h = ad::LayerNorm(x, blk.ln1_gamma, blk.ln1_beta);
    const Tensor q = ad::Add(ad::MatMul(h, blk.wq), blk.bq);
    const Tensor k = ad::Add(ad::MatMul(h, blk.wk), blk.bk);
    const Tensor v = ad::Add(ad::MatMul(h, blk.wv), blk.bv);
    const Tensor attn = ad::CausalAttention(q, k, v, batch, seq_len,
                                            config_.num_heads, valid);
    x = ad::Add(x, dropout(ad::Add(ad::MatMul(attn, blk.wo), blk.bo)));
    const Tensor h2 = ad::LayerNorm(x, blk.ln2_gamma, blk.ln2_beta);
    const Tensor ff = ad::Add(
        ad::MatMul(ad::Relu(ad::Add(ad::MatMul(h2, blk.w1), blk.b1)), blk.w2),
        blk.b2);
    x = ad::Mul(ad::Add(x, dropout(ff)), row_mask);
  }
  return ad::Mul(ad::LayerNorm(x, final_gamma_, final_beta_), row_mask);
}

Tensor ScoreCandidates(const Tensor& hidden, const Tensor& candidates) {
  if (hidden.cols() != candidates.cols()) {
    throw std::invalid_argument("score_candidates: dim mismatch " +
                                ad::ShapeToString(hidden.shape()) + " vs " +
                                ad::ShapeToString(candidates.shape()));
  }
  return ad::MatMulNT(hidden, candidates);
}

Tensor SequenceLoss(const Tensor& scores, std::span<const std::int64_t> targets,
                    std::span<const std::uint8_t> mask) {
  if (targets.size() != mask.size()) {
    throw std::invalid_argument("sequence_loss: targets/mask length mismatch");
  }
  std::vector<std::int64_t> columns(targets.size(), 0);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (!mask[i]) continue;
    if (targets[i] == 0) {
      throw DataError("sequence_loss: padding target at supervised position " +
                      std::to_string(i));
    }
    columns[i] = targets[i] - 1;
  }
  return ad::SoftmaxCrossEntropy(scores, columns, mask);
}

std::vector<std::int64_t> SampleCandidates(const SequenceBatch& batch,
                                           std::size_t num_items,
                                           std::size_t num_negatives,
                                           std::mt19937_64& rng) {
  std::vector<std::uint8_t> is_target(num_items + 1, 0);
  for (auto t : batch.targets) {
    if (t < 0 || static_cast<std::size_t>(t) > num_items) {
      throw DataError("sample_candidates: target " + std::to_string(t) +
                      " outside catalog of " + std::to_string(num_items));
    }
    is_target[static_cast<std::size_t>(t)] = 1;
  }
  std::vector<std::int64_t> targets, others;
  for (std::size_t i = 1; i <= num_items; ++i) {
    (is_target[i] ? targets : others).push_back(static_cast<std::int64_t>(i));
  }
  std::vector<std::int64_t> negatives;
  std::sample(others.begin(), others.end(), std::back_inserter(negatives),
              num_negatives, rng);
  std::vector<std::int64_t> out;
  std::merge(targets.begin(), targets.end(), negatives.begin(), negatives.end(),
             std::back_inserter(out));
  return out;
}

Tensor SampledSequenceLoss(const Tensor& scores,
                           std::span<const std::int64_t> targets,
                           std::span<const std::uint8_t> mask,
                           std::span<const std::int64_t> candidates) {
  if (targets.size() != mask.size()) {
    throw std::invalid_argument("sequence_loss: targets/mask length mismatch");
  }
  std::vector<std::int64_t> columns(targets.size(), 0);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (!mask[i]) continue;
    const auto it = std::lower_bound(candidates.begin(), candidates.end(), targets[i]);
    if (targets[i] == 0 || it == candidates.end() || *it != targets[i]) {
      throw DataError("sequence_loss: target " + std::to_string(targets[i]) +
                      " at supervised position " + std::to_string(i) +
                      " is not a candidate");
    }
    columns[i] = it - candidates.begin();
  }
  return ad::SoftmaxCrossEntropy(scores, columns, mask);
}

}  // namespace dffrec
