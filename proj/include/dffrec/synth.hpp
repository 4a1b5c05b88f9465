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

// Seeded desk-scale datasets with planted signals.
//
// Items carry a topic and a unit-norm content direction near that topic's
// centroid. Only the configured signal layers see the content (plus noise);
// every other layer is pure noise of matching scale. Users pick next items by
// a softmax over content affinity (preference . content) and a collaborative
// affinity drawn from latent factors attached to raw item ids, which the
// content features never see.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dffrec/feature_store.hpp"
#include "dffrec/interaction_log.hpp"

namespace dffrec {

struct SynthSpec {
  std::size_t num_users = 1500;
  std::size_t num_items = 200;
  std::size_t num_topics = 8;
  std::uint64_t catalog_seed = 7;
  std::size_t num_layers = 8;
  std::size_t dim = 32;
  // 1-based.
  std::vector<std::size_t> signal_layers = {4, 5};
  // When true, each signal layer carries a disjoint block of content
  // coordinates instead of the whole direction.
  bool split_signal = false;
  double content_strength = 12.0;
  double collaborative_strength = 8.0;
  double noise_scale = 0.3;
  std::size_t min_seq_len = 10;
  std::size_t max_seq_len = 30;
  // Within-topic spread of item directions and user preferences.
  double item_spread = 1.5;
  double user_spread = 1.0;
  std::size_t collaborative_rank = 4;
  // Extra noise on the single-layer caption-style store.
  double caption_noise = 1.0;
};

// Throws UsageError on an inconsistent spec.
void ValidateSynthSpec(const SynthSpec& spec);

struct SynthCatalog {
  FeatureStore store;
  std::vector<std::size_t> topic;                // per item row
  std::vector<std::vector<float>> content;       // per item row, unit norm
  std::vector<std::vector<float>> topic_centroids;
};

SynthCatalog GenerateCatalog(const SynthSpec& spec, std::uint64_t seed);

// Single-layer caption-provenance store: topic centroid plus heavy noise,
// a lossy summary of the same items.
FeatureStore GenerateCaptionStore(const SynthSpec& spec,
                                  const SynthCatalog& catalog,
                                  std::uint64_t seed);

// Items within a user's sequence never repeat.
InteractionLog GenerateInteractions(const SynthSpec& spec,
                                    const SynthCatalog& catalog,
                                    std::uint64_t seed);

}  // namespace dffrec
