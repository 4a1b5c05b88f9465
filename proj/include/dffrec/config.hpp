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

// Flat `key = value` run configuration with dotted section keys.
//
//   # comment
//   paths.store = data/items.dffs
//   fusion.strategy = fusion
//   train.lr_grid = 1e-3, 1e-4
//
// Every key has a documented default; unknown keys and malformed values are
// usage errors that name the line.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "dffrec/evaluation.hpp"
#include "dffrec/model.hpp"
#include "dffrec/synth.hpp"
#include "dffrec/training.hpp"

namespace dffrec {

struct RunConfig {
  std::string store_path;
  std::string log_path;
  // Single-layer caption-style store for the strategy matrix; optional.
  std::string caption_store_path;
  std::string output_dir = "runs";
  ModelConfig model;
  TrainSchedule schedule;
  EvalOptions eval;
  std::uint64_t seed = 0;

  RunConfig();
};

// Ordered (key, value) rows covering every field.
std::vector<std::pair<std::string, std::string>> ConfigEntries(
    const RunConfig& config);
std::string ConfigToText(const RunConfig& config);

// `origin` names the source in diagnostics.
RunConfig ParseRunConfig(const std::string& text,
                         const std::string& origin = "config");
RunConfig LoadRunConfig(const std::filesystem::path& path);
// Applies one `key=value` override on top of an existing config.
void ApplyConfigOverride(RunConfig& config, const std::string& assignment);

std::vector<std::pair<std::string, std::string>> SynthEntries(
    const SynthSpec& spec);
std::string SynthSpecToText(const SynthSpec& spec);
SynthSpec ParseSynthSpec(const std::string& text,
                         const std::string& origin = "spec");
SynthSpec LoadSynthSpec(const std::filesystem::path& path);

std::string ReadTextFile(const std::filesystem::path& path);
void WriteTextFile(const std::filesystem::path& path, const std::string& text);

}  // namespace dffrec
