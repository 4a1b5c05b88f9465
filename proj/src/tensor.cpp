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

#include "dffrec/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "dffrec/error.hpp"

namespace dffrec::ad {
namespace {

thread_local bool grad_enabled = true;

}  // namespace

std::size_t NumElements(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t s : shape) n *= s;
  return n;
}

std::string ShapeToString(const Shape& shape) {
  std::ostringstream out;
  out << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out << ", ";
    out << shape[i];
  }
  if (shape.size() == 1) out << ",";
  out << ")";
  return out.str();
}

Tensor Tensor::Zeros(Shape shape, bool requires_grad) {
  return Full(std::move(shape), 0.0F, requires_grad);
}

Tensor Tensor::Full(Shape shape, float value, bool requires_grad) {
  std::vector<float> data(NumElements(shape), value);
  return FromData(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::FromData(Shape shape, std::vector<float> data,
                        bool requires_grad) {
  for (std::size_t s : shape) {
    if (s == 0) {
      throw std::invalid_argument("tensor: zero-sized dimension in shape " +
                                  ShapeToString(shape));
    }
  }
  if (data.size() != NumElements(shape)) {
    throw std::invalid_argument("tensor: data length " +
                                std::to_string(data.size()) +
                                " does not match shape " +
                                ShapeToString(shape));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  if (requires_grad) node->grad.assign(node->value.size(), 0.0F);
  return Tensor(std::move(node));
}

Tensor Tensor::Scalar(float value, bool requires_grad) {
  return FromData({}, {value}, requires_grad);
}

std::size_t Tensor::cols() const {
  return node_->shape.empty() ? 1 : node_->shape.back();
}

std::size_t Tensor::rows() const { return numel() / cols(); }

float Tensor::item() const {
  if (numel() != 1) {
    throw std::invalid_argument("item: tensor of shape " +
                                ShapeToString(shape()) + " is not a scalar");
  }
  return node_->value[0];
}

void Tensor::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0F);
}

void Tensor::backward() const {
  if (numel() != 1) {
    throw std::invalid_argument("backward: loss of shape " +
                                ShapeToString(shape()) + " is not a scalar");
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS; reversing gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* node : order) {
    std::fill(node->grad.begin(), node->grad.end(), 0.0F);
  }
  node_->grad[0] = 1.0F;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
  }
  for (Node* node : order) {
    if (node->backward_fn) continue;
    for (float g : node->grad) {
      if (!std::isfinite(g)) {
        throw NumericalError("backward: non-finite gradient on leaf of shape " +
                             ShapeToString(node->shape));
      }
    }
  }
}

NoGradGuard::NoGradGuard() : previous_(grad_enabled) { grad_enabled = false; }
NoGradGuard::~NoGradGuard() { grad_enabled = previous_; }

bool GradEnabled() { return grad_enabled; }

}  // namespace dffrec::ad
