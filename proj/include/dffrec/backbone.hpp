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

// SASRec-style causal transformer over item embedding sequences.

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "dffrec/parameters.hpp"
#include "dffrec/tensor.hpp"

namespace dffrec {

struct BackboneConfig {
  std::size_t d = 64;
  std::size_t num_blocks = 2;
  std::size_t num_heads = 2;
  std::size_t max_seq_len = 20;
  float dropout = 0.0F;
};

void ValidateBackboneConfig(const BackboneConfig& config);

// Left-padded id matrix with next-item targets. Index 0 is padding.
struct SequenceBatch {
  std::size_t batch = 0;
  std::size_t seq_len = 0;
  std::vector<std::int64_t> inputs;   // batch * seq_len
  std::vector<std::int64_t> targets;  // batch * seq_len, 0 where unsupervised
  std::vector<std::uint8_t> valid;    // inputs != 0

  // Row-wise position mask: targets != 0.
  std::vector<std::uint8_t> SupervisedMask() const;
};

class SasRecBackbone {
 public:
  SasRecBackbone(const BackboneConfig& config, ParameterSet& params,
                 std::mt19937_64& rng);

  // embeddings: (batch * seq_len) x d item rows, padding rows zero.
  // Returns (batch * seq_len) x d hidden states; output at position t
  // depends only on inputs at positions <= t. dropout_rng may be null when
  // dropout is 0 or the forward pass is for evaluation.
  ad::Tensor Encode(const ad::Tensor& embeddings, std::size_t batch,
                    std::size_t seq_len, std::span<const std::uint8_t> valid,
                    std::mt19937_64* dropout_rng) const;

  const BackboneConfig& config() const { return config_; }

 private:
  struct Block {
    ad::Tensor ln1_gamma, ln1_beta;
    ad::Tensor wq, bq, wk, bk, wv, bv, wo, bo;
    ad::Tensor ln2_gamma, ln2_beta;
    ad::Tensor w1, b1, w2, b2;
  };

  BackboneConfig config_;
  ad::Tensor positions_;
  std::vector<Block> blocks_;
  ad::Tensor final_gamma_, final_beta_;
};

// scores(v) = <hidden_row, candidate_v>; rows x num_candidates.
ad::Tensor ScoreCandidates(const ad::Tensor& hidden,
                           const ad::Tensor& candidates);

// Mean full-softmax cross-entropy over supervised positions. scores columns
// are catalog indices 1..n (column j holds item j+1). Throws DataError for a
// padding target at a supervised position and "no supervised positions" when
// nothing is supervised.
ad::Tensor SequenceLoss(const ad::Tensor& scores,
                        std::span<const std::int64_t> targets,
                        std::span<const std::uint8_t> mask);

// Catalog indices for one sampled-softmax step: every supervised target plus
// up to num_negatives other items drawn uniformly without replacement,
// ascending. Covers 1..num_items once num_negatives reaches the remainder.
std::vector<std::int64_t> SampleCandidates(const SequenceBatch& batch,
                                           std::size_t num_items,
                                           std::size_t num_negatives,
                                           std::mt19937_64& rng);

// SequenceLoss restricted to `candidates` (ascending catalog indices);
// scores column j holds candidates[j]. Throws DataError if a supervised
// target is not a candidate.
ad::Tensor SampledSequenceLoss(const ad::Tensor& scores,
                               std::span<const std::int64_t> targets,
                               std::span<const std::uint8_t> mask,
                               std::span<const std::int64_t> candidates);

}  // namespace dffrec
