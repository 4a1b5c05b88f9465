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

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dffrec/parameters.hpp"

namespace dffrec {

struct AdamWOptions {
  float learning_rate = 1e-3F;
  float weight_decay = 0.1F;
  float beta1 = 0.9F;
  float beta2 = 0.999F;
  float epsilon = 1e-8F;
};

struct MomentBuffers {
  std::vector<float> first;
  std::vector<float> second;
};

// One AdamW update of a single parameter buffer. Weight decay is decoupled:
// the parameter is shrunk by (1 - lr * wd) before the moment-based step.
// `step` is the 1-based index of this update. Throws NumericalError naming
// `name` if any gradient entry is non-finite.
void AdamWUpdate(std::span<float> param, std::span<const float> grad,
                 MomentBuffers& moments, const AdamWOptions& options,
                 std::int64_t step, float lr_scale, const std::string& name);

class AdamW {
 public:
  AdamW(ParameterSet& params, AdamWOptions options);

  // Multiplies the learning rate of one parameter (e.g. the layer logits).
  void SetLearningRateScale(const std::string& name, float scale);
  // Excludes one parameter from weight decay.
  void SetNoWeightDecay(const std::string& name);

  void Step();

  std::int64_t step_count() const { return step_count_; }
  const AdamWOptions& options() const { return options_; }
  const MomentBuffers& moments(const std::string& name) const;

 private:
  ParameterSet& params_;
  AdamWOptions options_;
  std::int64_t step_count_ = 0;
  std::map<std::string, MomentBuffers> moments_;
  std::map<std::string, float> lr_scale_;
  std::map<std::string, bool> no_decay_;
};

}  // namespace dffrec
