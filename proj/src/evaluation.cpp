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

#include "dffrec/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dffrec/error.hpp"
#include "dffrec/model.hpp"
#include "dffrec/training.hpp"
#include "json.hpp"

namespace dffrec {

std::size_t RankTarget(std::span<const float> scores, std::size_t target,
                       std::span<const std::uint8_t> excluded) {
  if (target >= scores.size()) {
    throw std::invalid_argument("rank_target: target " + std::to_string(target) +
                                " outside catalog of " +
                                std::to_string(scores.size()));
  }
  if (!excluded.empty() && excluded.size() != scores.size()) {
    throw std::invalid_argument("rank_target: exclusion mask length mismatch");
  }
  if (!excluded.empty() && excluded[target]) {
    throw std::invalid_argument("rank_target: target " + std::to_string(target) +
                                " is in the exclusion set");
  }
  const float target_score = scores[target];
  std::size_t above = 0;
  for (std::size_t v = 0; v < scores.size(); ++v) {
    if (!std::isfinite(scores[v])) {
      throw std::invalid_argument("rank_target: non-finite score at " +
                                  std::to_string(v));
    }
    if (v == target || (!excluded.empty() && excluded[v])) continue;
    if (scores[v] >= target_score) ++above;
  }
  return above + 1;
}

HitNdcg MetricsAtN(std::size_t rank, std::size_t n) {
  if (rank < 1 || n < 1) {
    throw std::invalid_argument("metrics_at_n: rank and N must be >= 1");
  }
  if (rank > n) return {};
  return {1.0, 1.0 / std::log2(static_cast<double>(rank) + 1.0)};
}

const CutoffMetrics& EvalReport::At(std::size_t cutoff) const {
  for (const auto& c : cutoffs) {
    if (c.cutoff == cutoff) return c;
  }
  throw std::out_of_range("no metrics at cutoff " + std::to_string(cutoff));
}

EvalReport AggregateRanks(std::vector<UserRank> ranks,
                          std::span<const std::size_t> cutoffs,
                          std::size_t num_items, std::string phase) {
  EvalReport report;
  report.phase = std::move(phase);
  report.num_users = ranks.size();
  report.num_items = num_items;
  for (std::size_t n : cutoffs) {
    CutoffMetrics m{n, 0.0, 0.0};
    for (const auto& r : ranks) {
      const HitNdcg c = MetricsAtN(r.rank, n);
      m.hit_rate += c.hit;
      m.ndcg += c.ndcg;
    }
    if (!ranks.empty()) {
      m.hit_rate /= static_cast<double>(ranks.size());
      m.ndcg /= static_cast<double>(ranks.size());
    }
    report.cutoffs.push_back(m);
  }
  report.ranks = std::move(ranks);
  return report;
}

std::string EvalReport::ToText() const {
  std::ostringstream out;
  out << "phase: " << phase << "\nusers: " << num_users
      << "\ncatalog: " << num_items << "\n\n";
  out << "cutoff  HR        NDCG\n";
  char line[64];
  for (const auto& c : cutoffs) {
    std::snprintf(line, sizeof(line), "%-7zu %.6f  %.6f\n", c.cutoff,
                  c.hit_rate, c.ndcg);
    out << line;
  }
  static constexpr std::size_t kEdges[] = {1, 5, 10, 20, 50, 100};
  std::size_t counts[std::size(kEdges) + 1] = {};
  for (const auto& r : ranks) {
    std::size_t bucket = 0;
    while (bucket < std::size(kEdges) && r.rank > kEdges[bucket]) ++bucket;
    ++counts[bucket];
  }
  out << "\nrank histogram\n";
  std::size_t lo = 1;
  for (std::size_t b = 0; b <= std::size(kEdges); ++b) {
    std::string label = b < std::size(kEdges)
                            ? (lo == kEdges[b] ? std::to_string(lo)
                                               : std::to_string(lo) + "-" +
                                                     std::to_string(kEdges[b]))
                            : ">" + std::to_string(kEdges[b - 1]);
    std::snprintf(line, sizeof(line), "%-8s %zu\n", label.c_str(), counts[b]);
    out << line;
    if (b < std::size(kEdges)) lo = kEdges[b] + 1;
  }
  return out.str();
}

std::string EvalReport::ToJson() const {
  nlohmann::ordered_json j;
  j["phase"] = phase;
  j["num_users"] = num_users;
  j["num_items"] = num_items;
  j["metrics"] = nlohmann::ordered_json::array();
  for (const auto& c : cutoffs) {
    j["metrics"].push_back(
        {{"cutoff", c.cutoff}, {"hit_rate", c.hit_rate}, {"ndcg", c.ndcg}});
  }
  j["ranks"] = nlohmann::ordered_json::array();
  for (const auto& r : ranks) {
    j["ranks"].push_back({{"user", r.user_id}, {"rank", r.rank}});
  }
  return j.dump(2);
}

std::string EvalReport::ToCsv() const {
  std::ostringstream out;
  out << "cutoff,hit_rate,ndcg\n";
  char line[96];
  for (const auto& c : cutoffs) {
    std::snprintf(line, sizeof(line), "%zu,%.9g,%.9g\n", c.cutoff, c.hit_rate,
                  c.ndcg);
    out << line;
  }
  return out.str();
}

void EvalReport::Write(const std::filesystem::path& stem) const {
  auto write = [](const std::filesystem::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << body;
  };
  write(stem.string() + ".json", ToJson() + "\n");
  write(stem.string() + ".txt", ToText());
  write(stem.string() + ".csv", ToCsv());
}

EvalReport Evaluate(const Recommender& model, const SplitDataset& split,
                    Phase phase, const EvalOptions& options) {
  const Catalog& catalog = model.catalog();
  const std::size_t n = catalog.size();
  std::vector<std::vector<std::int64_t>> histories(split.users.size());
  std::vector<std::int64_t> targets(split.users.size());
  for (std::size_t u = 0; u < split.users.size(); ++u) {
    const UserSplit& user = split.users[u];
    auto& h = histories[u];
    for (auto id : user.train) h.push_back(catalog.IndexOf(id));
    if (phase == Phase::kTest) h.push_back(catalog.IndexOf(user.validation));
    targets[u] = catalog.IndexOf(phase == Phase::kTest ? user.test
                                                       : user.validation);
  }

  std::vector<UserRank> ranks;
  ranks.reserve(split.users.size());
  std::vector<std::uint8_t> excluded;
  const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
  for (std::size_t start = 0; start < histories.size(); start += batch) {
    const std::size_t end = std::min(histories.size(), start + batch);
    std::vector<const std::vector<std::int64_t>*> chunk;
    for (std::size_t u = start; u < end; ++u) chunk.push_back(&histories[u]);
    const std::vector<float> scores = model.ScoreHistories(chunk);
    for (std::size_t u = start; u < end; ++u) {
      const std::size_t target = static_cast<std::size_t>(targets[u] - 1);
      excluded.clear();
      if (options.exclude_history) {
        excluded.assign(n, 0);
        for (auto idx : histories[u]) excluded[idx - 1] = 1;
        excluded[target] = 0;
      }
      const std::span<const float> row(scores.data() + (u - start) * n, n);
      ranks.push_back({split.users[u].user_id, RankTarget(row, target, excluded)});
    }
  }
  return AggregateRanks(std::move(ranks), options.cutoffs, n,
                        phase == Phase::kTest ? "test" : "validation");
}

}  // namespace dffrec
