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

#include "dffrec/optim.hpp"

#include <cmath>
#include <stdexcept>

#include "dffrec/error.hpp"

namespace dffrec {

void AdamWUpdate(std::span<float> param, std::span<const float> grad,
                 MomentBuffers& moments, const AdamWOptions& options,
                 std::int64_t step, float lr_scale, const std::string& name) {
  if (grad.size() != param.size()) {
    throw std::invalid_argument("adamw: gradient size mismatch for '" + name +
                                "'");
  }
  if (step < 1) throw std::invalid_argument("adamw: step index must be >= 1");
  for (float g : grad) {
    if (!std::isfinite(g)) {
      throw NumericalError("adamw: non-finite gradient in parameter '" + name +
                           "'");
    }
  }
  if (moments.first.size() != param.size()) {
    moments.first.assign(param.size(), 0.0F);
    moments.second.assign(param.size(), 0.0F);
  }
  const float lr = options.learning_rate * lr_scale;
  const float decay = 1.0F - lr * options.weight_decay;
  const double correction1 =
      1.0 - std::pow(static_cast<double>(options.beta1), step);
  const double correction2 =
      1.0 - std::pow(static_cast<double>(options.beta2), step);
  for (std::size_t i = 0; i < param.size(); ++i) {
    float& m = moments.first[i];
    float& v = moments.second[i];
    m = options.beta1 * m + (1.0F - options.beta1) * grad[i];
    v = options.beta2 * v + (1.0F - options.beta2) * grad[i] * grad[i];
    param[i] *= decay;
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    param[i] -= static_cast<float>(lr * m_hat /
                                   (std::sqrt(v_hat) + options.epsilon));
  }
}

AdamW::AdamW(ParameterSet& params, AdamWOptions options)
    : params_(params), options_(options) {
  if (!(options_.learning_rate >= 0.0F) || options_.weight_decay < 0.0F) {
    throw std::invalid_argument(
        "adamw: learning rate and weight decay must be non-negative");
  }
  for (const auto& name : params_.names()) {
    const std::size_t n = params_.Get(name).numel();
    moments_[name] = MomentBuffers{std::vector<float>(n, 0.0F),
                                   std::vector<float>(n, 0.0F)};
  }
}

void AdamW::SetLearningRateScale(const std::string& name, float scale) {
  if (!params_.Contains(name)) {
    throw std::out_of_range("adamw: unknown parameter '" + name + "'");
  }
  lr_scale_[name] = scale;
}

void AdamW::SetNoWeightDecay(const std::string& name) {
  if (!params_.Contains(name)) {
    throw std::out_of_range("adamw: unknown parameter '" + name + "'");
  }
  no_decay_[name] = true;
}

void AdamW::Step() {
  const std::int64_t step = step_count_ + 1;
  // Reject before touching anything so a failed step leaves no partial update.
  for (const auto& name : params_.names()) {
    for (float g : params_.Get(name).grad()) {
      if (!std::isfinite(g)) {
        throw NumericalError("adamw: non-finite gradient in parameter '" +
                             name + "'");
      }
    }
  }
  for (const auto& name : params_.names()) {
    ad::Tensor& p = params_.Get(name);
    auto it = lr_scale_.find(name);
    const float scale = it == lr_scale_.end() ? 1.0F : it->second;
    AdamWOptions options = options_;
    if (no_decay_.count(name) > 0) options.weight_decay = 0.0F;
    AdamWUpdate(p.mutable_data(), p.grad(), moments_.at(name), options, step,
                scale, name);
  }
  step_count_ = step;
}

const MomentBuffers& AdamW::moments(const std::string& name) const {
  return moments_.at(name);
}

}  // namespace dffrec
