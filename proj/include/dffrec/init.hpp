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

#include <cmath>
#include <random>

#include "dffrec/tensor.hpp"

namespace dffrec {

inline ad::Tensor NormalParameter(ad::Shape shape, float stddev,
                                  std::mt19937_64& rng) {
  std::normal_distribution<float> dist(0.0F, stddev);
  std::vector<float> data(ad::NumElements(shape));
  for (float& v : data) v = dist(rng);
  return ad::Tensor::FromData(std::move(shape), std::move(data), true);
}

// Glorot-uniform for a fan_in x fan_out weight.
inline ad::Tensor XavierParameter(std::size_t fan_in, std::size_t fan_out,
                                  std::mt19937_64& rng) {
  const float bound = std::sqrt(6.0F / static_cast<float>(fan_in + fan_out));
  std::uniform_real_distribution<float> dist(-bound, bound);
  std::vector<float> data(fan_in * fan_out);
  for (float& v : data) v = dist(rng);
  return ad::Tensor::FromData({fan_in, fan_out}, std::move(data), true);
}

}  // namespace dffrec
