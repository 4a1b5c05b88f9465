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

// Reproducible comparison sweeps: per-layer curves, the integration-strategy
// x feature-source matrix, and the full learned-weights fusion run.
//
// Each cell is keyed by a hash of its config, the data split, the store, and
// the seed. A completed cell's result file is reused instead of retrained, and
// curve rows are only ever appended.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dffrec/config.hpp"
#include "dffrec/evaluation.hpp"
#include "dffrec/run.hpp"

namespace dffrec {

struct CellResult {
  std::string arm;
  // "HC" (multi-layer hidden-state store), "CC" (caption store) or "-".
  std::string source = "-";
  // Selected layer for single-layer arms, 0 otherwise.
  std::size_t layer = 0;
  std::uint64_t seed = 0;
  std::string cell_hash;
  std::string split_hash;
  double val_hit_rate_10 = 0.0;
  int best_epoch = 0;
  EvalReport test;
  std::vector<float> layer_weights;
  // True when loaded from an earlier run instead of trained.
  bool reused = false;
};

struct SweepOptions {
  int jobs = 1;
};

struct SweepResult {
  std::string name;
  std::vector<CellResult> cells;
  std::filesystem::path csv_path;
  std::filesystem::path table_path;
};

// One single-layer fusion run per layer plus one uniform-average run.
SweepResult LayerSweep(const Dataset& data, const RunConfig& base,
                       const SweepOptions& options = {});

// {ID-only, replacement, fusion} x {HC, CC}. HC cells use the base
// aggregation; the CC store has one layer. ID-only ignores the store, so it
// is trained once and its row is listed under both sources.
SweepResult StrategyMatrix(const Dataset& data, const RunConfig& base,
                           const SweepOptions& options = {});

// Learned layer weights + gated fusion on the HC store; the final weights are
// exported next to the metrics.
SweepResult DffRun(const Dataset& data, const RunConfig& base,
                   const SweepOptions& options = {});

// The consolidated comparison table written next to the curve file.
std::string FormatSweepTable(const SweepResult& result);

}  // namespace dffrec
