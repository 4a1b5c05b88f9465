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

// Full-catalog leave-one-out ranking metrics.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace dffrec {

class Recommender;
struct SplitDataset;

// 1-based rank of `target` among positions not flagged in `excluded`
// (excluded may be empty, meaning nothing is excluded). Items tied with the
// target count as ranked above it. Throws std::invalid_argument if the target
// is excluded or a score is non-finite.
std::size_t RankTarget(std::span<const float> scores, std::size_t target,
                       std::span<const std::uint8_t> excluded);

struct HitNdcg {
  double hit = 0.0;
  double ndcg = 0.0;
};

// hit = [rank <= n]; ndcg = 1 / log2(rank + 1) when hit (ideal DCG = 1).
HitNdcg MetricsAtN(std::size_t rank, std::size_t n);

struct CutoffMetrics {
  std::size_t cutoff = 0;
  double hit_rate = 0.0;
  double ndcg = 0.0;
};

struct UserRank {
  std::uint64_t user_id = 0;
  std::size_t rank = 0;
};

struct EvalReport {
  std::string phase;
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  std::vector<CutoffMetrics> cutoffs;
  std::vector<UserRank> ranks;

  const CutoffMetrics& At(std::size_t cutoff) const;
  double HitRate(std::size_t cutoff) const { return At(cutoff).hit_rate; }
  double Ndcg(std::size_t cutoff) const { return At(cutoff).ndcg; }

  // Metric table plus a rank histogram.
  std::string ToText() const;
  std::string ToJson() const;
  // "cutoff,hit_rate,ndcg" rows.
  std::string ToCsv() const;
  void Write(const std::filesystem::path& stem) const;
};

// Averages per-user metrics over the given ranks.
EvalReport AggregateRanks(std::vector<UserRank> ranks,
                          std::span<const std::size_t> cutoffs,
                          std::size_t num_items, std::string phase);

enum class Phase { kValidation, kTest };

struct EvalOptions {
  // Remove the items already in the scored history (other than the target)
  // from each user's candidate set.
  bool exclude_history = true;
  std::vector<std::size_t> cutoffs = {10, 20};
  std::size_t batch_size = 256;
};

// Validation scores the train prefix and ranks the validation target; test
// scores prefix + validation item and ranks the test target.
EvalReport Evaluate(const Recommender& model, const SplitDataset& split,
                    Phase phase, const EvalOptions& options = {});

}  // namespace dffrec
