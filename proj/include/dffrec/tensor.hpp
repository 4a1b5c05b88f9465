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

// Dense float32 tensors with tape-free reverse-mode differentiation.
//
// Every op returns a new Tensor whose node keeps shared ownership of its
// inputs together with a closure that pushes the output gradient back into
// them. Calling backward() on a scalar walks that DAG in reverse topological
// order. A graph is owned by whichever Tensors still reference it, so
// distinct graphs are independent and may live on distinct threads.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace dffrec::ad {

using Shape = std::vector<std::size_t>;

std::size_t NumElements(const Shape& shape);
std::string ShapeToString(const Shape& shape);

struct Node {
  Shape shape;
  std::vector<float> value;
  // Sized like value iff requires_grad.
  std::vector<float> grad;
  bool requires_grad = false;
  std::string op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into the inputs' grads.
  std::function<void(Node&)> backward_fn;
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor Zeros(Shape shape, bool requires_grad = false);
  static Tensor Full(Shape shape, float value, bool requires_grad = false);
  static Tensor FromData(Shape shape, std::vector<float> data,
                         bool requires_grad = false);
  static Tensor Scalar(float value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t numel() const { return node_->value.size(); }
  std::size_t rank() const { return node_->shape.size(); }
  // Rows/cols of the tensor viewed as a matrix over its last axis.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const float> data() const { return node_->value; }
  std::span<float> mutable_data() { return node_->value; }
  std::span<const float> grad() const { return node_->grad; }
  std::span<float> mutable_grad() { return node_->grad; }
  float item() const;
  float at(std::size_t row, std::size_t col) const {
    return node_->value[row * cols() + col];
  }

  bool requires_grad() const { return node_->requires_grad; }
  const std::string& op() const { return node_->op; }
  void zero_grad();

  // Overwrites grad on every requires_grad leaf reachable from this scalar.
  // Leaves that are not reachable are left untouched.
  void backward() const;

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// While alive on a thread, ops on that thread record no backward closures and
// produce outputs with requires_grad == false.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool GradEnabled();

}  // namespace dffrec::ad
