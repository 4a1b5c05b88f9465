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

#include "dffrec/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "dffrec/error.hpp"

namespace dffrec {
namespace {

using Vec = std::vector<float>;

Vec GaussianVec(std::size_t dim, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Vec v(dim);
  for (float& x : v) x = static_cast<float>(dist(rng));
  return v;
}

double Norm(const Vec& v) {
  double s = 0.0;
  for (float x : v) s += double(x) * x;
  return std::sqrt(s);
}

void Normalize(Vec& v) {
  const double n = Norm(v);
  if (n == 0.0) return;
  for (float& x : v) x = static_cast<float>(x / n);
}

double Dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += double(a[i]) * b[i];
  return s;
}

// Unit vector; coordinates N(0, 1/dim) so the expected norm is one.
Vec Direction(std::size_t dim, std::mt19937_64& rng) {
  Vec v = GaussianVec(dim, 1.0 / std::sqrt(static_cast<double>(dim)), rng);
  Normalize(v);
  return v;
}

std::vector<Vec> TopicCentroids(const SynthSpec& spec, std::mt19937_64& rng) {
  std::vector<Vec> centroids;
  for (std::size_t t = 0; t < spec.num_topics; ++t) {
    Vec v = Direction(spec.dim, rng);
    if (spec.num_topics <= spec.dim) {
      // Gram-Schmidt against earlier centroids.
      for (const Vec& prev : centroids) {
        const double p = Dot(v, prev);
        for (std::size_t i = 0; i < v.size(); ++i) {
          v[i] = static_cast<float>(v[i] - p * prev[i]);
        }
      }
      Normalize(v);
    }
    centroids.push_back(std::move(v));
  }
  return centroids;
}

}  // namespace

void ValidateSynthSpec(const SynthSpec& spec) {
  if (spec.num_users == 0 || spec.num_items == 0 || spec.num_topics == 0 ||
      spec.num_layers == 0 || spec.dim == 0) {
    throw UsageError("synth: sizes must be positive");
  }
  if (spec.content_strength < 0 || spec.collaborative_strength < 0 ||
      spec.noise_scale < 0 || spec.item_spread < 0 || spec.user_spread < 0 ||
      spec.caption_noise < 0) {
    throw UsageError("synth: strengths, spreads and noise must be >= 0");
  }
  if (spec.content_strength > 0 && spec.signal_layers.empty()) {
    throw UsageError("synth: signal_layers must be non-empty when "
                     "content_strength > 0");
  }
  for (std::size_t l : spec.signal_layers) {
    if (l < 1 || l > spec.num_layers) {
      throw UsageError("synth: signal layer " + std::to_string(l) +
                       " outside 1.." + std::to_string(spec.num_layers));
    }
  }
  if (spec.split_signal && spec.signal_layers.size() > spec.dim) {
    throw UsageError("synth: more signal layers than coordinates to split");
  }
  if (spec.min_seq_len < 1 || spec.min_seq_len > spec.max_seq_len) {
    throw UsageError("synth: need 1 <= min_seq_len <= max_seq_len");
  }
  if (spec.collaborative_rank == 0) {
    throw UsageError("synth: collaborative_rank must be positive");
  }
}

SynthCatalog GenerateCatalog(const SynthSpec& spec, std::uint64_t seed) {
  ValidateSynthSpec(spec);
  std::seed_seq seq{spec.catalog_seed, seed, std::uint64_t{0xCA7A}};
  std::mt19937_64 rng(seq);
  SynthCatalog out;
  out.topic_centroids = TopicCentroids(spec, rng);

  std::vector<std::size_t> topics(spec.num_items);
  for (std::size_t i = 0; i < topics.size(); ++i) topics[i] = i % spec.num_topics;
  std::shuffle(topics.begin(), topics.end(), rng);

  std::vector<bool> is_signal(spec.num_layers, false);
  for (std::size_t l : spec.signal_layers) is_signal[l - 1] = true;

  // Coordinate block owned by each signal layer in split mode.
  std::vector<std::size_t> owner(spec.dim, 0);
  if (spec.split_signal && !spec.signal_layers.empty()) {
    std::vector<std::size_t> coords(spec.dim);
    std::iota(coords.begin(), coords.end(), 0);
    std::shuffle(coords.begin(), coords.end(), rng);
    for (std::size_t i = 0; i < coords.size(); ++i) {
      owner[coords[i]] = i % spec.signal_layers.size();
    }
  }
  const double signal_energy =
      spec.split_signal && !spec.signal_layers.empty()
          ? 1.0 / static_cast<double>(spec.signal_layers.size())
          : 1.0;
  const double sigma = spec.noise_scale;
  const double coord_std = 1.0 / std::sqrt(static_cast<double>(spec.dim));
  const double pure_noise_std = std::sqrt(signal_energy + sigma * sigma) * coord_std;

  std::vector<ItemFeatures> items(spec.num_items);
  out.topic = topics;
  for (std::size_t i = 0; i < spec.num_items; ++i) {
    Vec c = out.topic_centroids[topics[i]];
    const Vec jitter = GaussianVec(spec.dim, spec.item_spread * coord_std, rng);
    for (std::size_t k = 0; k < c.size(); ++k) c[k] += jitter[k];
    Normalize(c);

    items[i].item_id = i + 1;
    items[i].values.resize(spec.num_layers * spec.dim);
    for (std::size_t l = 0; l < spec.num_layers; ++l) {
      float* h = items[i].values.data() + l * spec.dim;
      if (!is_signal[l]) {
        const Vec noise = GaussianVec(spec.dim, pure_noise_std, rng);
        std::copy(noise.begin(), noise.end(), h);
        continue;
      }
      const std::size_t slot = static_cast<std::size_t>(
          std::find(spec.signal_layers.begin(), spec.signal_layers.end(), l + 1) -
          spec.signal_layers.begin());
      for (std::size_t k = 0; k < spec.dim; ++k) {
        const bool carries = !spec.split_signal || owner[k] == slot;
        h[k] = carries ? c[k] : 0.0F;
      }
      if (sigma > 0.0) {
        const Vec noise = GaussianVec(spec.dim, sigma * coord_std, rng);
        for (std::size_t k = 0; k < spec.dim; ++k) h[k] += noise[k];
      }
    }
    out.content.push_back(std::move(c));
  }

  FeatureStoreHeader header;
  header.provenance = Provenance::kSynthetic;
  header.num_layers = static_cast<std::uint32_t>(spec.num_layers);
  header.dim = static_cast<std::uint32_t>(spec.dim);
  header.model_tag = "synthetic:seed=" + std::to_string(seed);
  out.store = FeatureStore(std::move(header), std::move(items));
  return out;
}

FeatureStore GenerateCaptionStore(const SynthSpec& spec,
                                  const SynthCatalog& catalog,
                                  std::uint64_t seed) {
  std::seed_seq seq{spec.catalog_seed, seed, std::uint64_t{0xCA9710}};
  std::mt19937_64 rng(seq);
  const double coord_std = 1.0 / std::sqrt(static_cast<double>(spec.dim));
  std::vector<ItemFeatures> items(catalog.topic.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    items[i].item_id = catalog.store.item_ids()[i];
    Vec h = catalog.topic_centroids[catalog.topic[i]];
    const Vec noise = GaussianVec(spec.dim, spec.caption_noise * coord_std, rng);
    for (std::size_t k = 0; k < h.size(); ++k) h[k] += noise[k];
    items[i].values = std::move(h);
  }
  FeatureStoreHeader header;
  header.provenance = Provenance::kCaption;
  header.num_layers = 1;
  header.dim = static_cast<std::uint32_t>(spec.dim);
  header.model_tag = "synthetic-caption:seed=" + std::to_string(seed);
  return FeatureStore(std::move(header), std::move(items));
}

InteractionLog GenerateInteractions(const SynthSpec& spec,
                                    const SynthCatalog& catalog,
                                    std::uint64_t seed) {
  ValidateSynthSpec(spec);
  std::seed_seq seq{seed, std::uint64_t{0x1A7E}};
  std::mt19937_64 rng(seq);
  const std::size_t n = catalog.content.size();
  const std::size_t rank = spec.collaborative_rank;

  // Collaborative factors tied to raw item ids; independent of content.
  std::vector<Vec> item_factors(n);
  for (auto& q : item_factors) q = Direction(rank, rng);

  const double coord_std = 1.0 / std::sqrt(static_cast<double>(spec.dim));
  std::uniform_int_distribution<std::size_t> topic_dist(0, spec.num_topics - 1);
  std::uniform_int_distribution<std::size_t> len_dist(
      spec.min_seq_len, std::min(spec.max_seq_len, n));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  InteractionLog log;
  std::vector<double> logits(n);
  std::vector<double> weights(n);
  std::vector<bool> used(n);
  for (std::size_t u = 0; u < spec.num_users; ++u) {
    Vec pref = catalog.topic_centroids[topic_dist(rng)];
    const Vec jitter = GaussianVec(spec.dim, spec.user_spread * coord_std, rng);
    for (std::size_t k = 0; k < pref.size(); ++k) pref[k] += jitter[k];
    Normalize(pref);
    const Vec user_factor = Direction(rank, rng);
    for (std::size_t i = 0; i < n; ++i) {
      logits[i] = spec.content_strength * Dot(pref, catalog.content[i]) +
                  spec.collaborative_strength * Dot(user_factor, item_factors[i]);
    }
    const std::size_t len = std::min(len_dist(rng), n);
    std::fill(used.begin(), used.end(), false);
    for (std::size_t step = 0; step < len; ++step) {
      double mx = -INFINITY;
      for (std::size_t i = 0; i < n; ++i) {
        if (!used[i]) mx = std::max(mx, logits[i]);
      }
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        weights[i] = used[i] ? 0.0 : std::exp(logits[i] - mx);
        total += weights[i];
      }
      double r = unit(rng) * total;
      std::size_t pick = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (used[i]) continue;
        pick = i;
        r -= weights[i];
        if (r <= 0.0) break;
      }
      used[pick] = true;
      log.Append(u + 1, catalog.store.item_ids()[pick],
                 static_cast<std::int64_t>(step + 1));
    }
  }
  return log;
}

}  // namespace dffrec
