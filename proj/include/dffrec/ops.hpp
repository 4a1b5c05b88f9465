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

// The closed set of differentiable ops. Matrix ops view a tensor as
// rows() x cols() over its last axis. Every op throws std::invalid_argument
// naming itself and the offending shapes on mismatch, and NumericalError when
// it would produce a non-finite value.

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "dffrec/tensor.hpp"

namespace dffrec::ad {

// (m x k) . (k x n)
Tensor MatMul(const Tensor& a, const Tensor& b);
// (m x k) . (n x k)^T
Tensor MatMulNT(const Tensor& a, const Tensor& b);

// Elementwise with matrix broadcasting: b may be (r x c), (1 x c), (r x 1)
// or a single element.
Tensor Add(const Tensor& a, const Tensor& b);
Tensor Sub(const Tensor& a, const Tensor& b);
Tensor Mul(const Tensor& a, const Tensor& b);
Tensor Scale(const Tensor& a, float factor);

Tensor Sigmoid(const Tensor& x);
Tensor Relu(const Tensor& x);
// Smallest |input| seen by Relu on this thread since the last reset.
// Finite-difference checks use it to keep perturbations clear of the kink.
void ResetReluMargin();
float ReluMargin();
// Along the last axis.
Tensor Softmax(const Tensor& x);
Tensor LayerNorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 float eps = 1e-5F);

// axis 0 stacks rows, axis 1 joins columns.
Tensor Concat(std::span<const Tensor> parts, int axis);
Tensor Reshape(const Tensor& x, Shape shape);
Tensor Sum(const Tensor& x);

// Row gather; ids index rows of table.
Tensor Embedding(const Tensor& table, std::span<const std::int64_t> ids);

// Inverted dropout. rate == 0 returns x unchanged.
Tensor Dropout(const Tensor& x, float rate, std::mt19937_64& rng);

// Causal multi-head scaled dot-product attention over batch x seq_len rows.
// q, k, v are (batch*seq_len) x d with heads taking contiguous column blocks.
// Query t attends to keys s <= t with key_valid[b*seq_len+s] != 0; keys
// outside that set never enter the computation. A query with no admissible
// key yields a zero row.
Tensor CausalAttention(const Tensor& q, const Tensor& k, const Tensor& v,
                       std::size_t batch, std::size_t seq_len,
                       std::size_t num_heads,
                       std::span<const std::uint8_t> key_valid);

// Mean softmax cross-entropy over rows with mask[r] != 0; targets index
// columns of logits.
Tensor SoftmaxCrossEntropy(const Tensor& logits,
                           std::span<const std::int64_t> targets,
                           std::span<const std::uint8_t> mask);

}  // namespace dffrec::ad
