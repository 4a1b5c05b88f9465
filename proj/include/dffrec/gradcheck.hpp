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
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dffrec/tensor.hpp"

namespace dffrec {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
  // Input position and flat index of the worst coordinate.
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  bool passed = true;
};

// Compares backward() against central differences over every coordinate of
// every input. `loss` must rebuild the graph from the current input values.
// The error per coordinate is |analytic - numeric| / max(1, |analytic|,
// |numeric|): relative for gradients of magnitude above one and absolute
// below, which keeps float32 cancellation noise on tiny gradients from
// dominating the report.
GradCheckReport FiniteDifferenceCheck(const std::function<ad::Tensor()>& loss,
                                      std::span<ad::Tensor> inputs, float h,
                                      double tol);

// Finite-difference checks of the gate MLP on random inputs and of the
// learned-weights fusion + backbone training loss on a 2-user / 4-item /
// 3-layer toy, differentiated with respect to every parameter. Draws whose
// ReLU inputs come within 10h of zero are redrawn from the same seed stream.
GradCheckReport GateMlpCheck(std::uint64_t seed, float h, double tol);
GradCheckReport FullModelCheck(std::uint64_t seed, float h, double tol);

// Named end-to-end checks run by the `gradcheck` command.
struct GradCheckCase {
  std::string name;
  GradCheckReport report;
};

// Every op on randomized small shapes over `seeds` seeds, plus the gate MLP
// subgraph and the full fusion + backbone graph on a 2-user / 4-item / 3-layer
// toy.
std::vector<GradCheckCase> RunGradCheckSuite(int seeds, float h, double tol);

}  // namespace dffrec
