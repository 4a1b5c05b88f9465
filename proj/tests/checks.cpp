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

#include "checks.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include "dffrec/backbone.hpp"
#include "dffrec/catalog.hpp"
#include "dffrec/evaluation.hpp"
#include "dffrec/interaction_log.hpp"
#include "dffrec/training.hpp"

namespace dffrec::checks {
namespace {

CheckResult Fail(std::size_t trial, const std::string& what) {
  return {false, trial, "trial " + std::to_string(trial) + ": " + what};
}

// Candidates sorted by descending score with the target placed after every
// item tied with it; the rank is its 1-based position.
std::size_t OracleRank(const std::vector<float>& scores, std::size_t target,
                       const std::vector<std::uint8_t>& excluded) {
  std::vector<std::size_t> order;
  for (std::size_t v = 0; v < scores.size(); ++v) {
    if (v == target || !excluded[v]) order.push_back(v);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a != target && b == target;
  });
  return static_cast<std::size_t>(
             std::find(order.begin(), order.end(), target) - order.begin()) + 1;
}

}  // namespace

CheckResult MetricOracle(std::size_t num_vectors, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> size_dist(1, 50);
  std::normal_distribution<float> normal(0.0F, 1.0F);
  std::uniform_int_distribution<int> coarse(0, 4);
  std::bernoulli_distribution coin(0.5);
  std::bernoulli_distribution rare(0.15);
  const std::size_t cutoffs[] = {10, 20};

  std::vector<UserRank> batch_ranks;
  std::vector<std::size_t> batch_oracle;
  for (std::size_t t = 0; t < num_vectors; ++t) {
    const std::size_t n = size_dist(rng);
    // Half the vectors draw from five levels so ties are common.
    const bool tied = coin(rng);
    std::vector<float> scores(n);
    for (float& s : scores) {
      s = tied ? static_cast<float>(coarse(rng)) : normal(rng);
    }
    const std::size_t target = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    std::vector<std::uint8_t> excluded(n, 0);
    for (std::size_t v = 0; v < n; ++v) excluded[v] = v != target && rare(rng);

    const std::size_t rank = RankTarget(scores, target, excluded);
    const std::size_t oracle = OracleRank(scores, target, excluded);
    if (rank != oracle) {
      return Fail(t, "rank " + std::to_string(rank) + " != oracle " +
                         std::to_string(oracle));
    }
    for (std::size_t cut : cutoffs) {
      const HitNdcg m = MetricsAtN(rank, cut);
      const double hit = oracle <= cut ? 1.0 : 0.0;
      const double ndcg = oracle <= cut ? 1.0 / std::log2(oracle + 1.0) : 0.0;
      if (m.hit != hit || m.ndcg != ndcg) return Fail(t, "metric mismatch");
    }
    batch_ranks.push_back({t, rank});
    batch_oracle.push_back(oracle);
    // Every 10 vectors form one evaluation batch of users.
    if (batch_ranks.size() == 10 || t + 1 == num_vectors) {
      const EvalReport report = AggregateRanks(batch_ranks, cutoffs, 50, "oracle");
      for (std::size_t cut : cutoffs) {
        double hit = 0.0, ndcg = 0.0;
        for (std::size_t r : batch_oracle) {
          if (r <= cut) {
            hit += 1.0;
            ndcg += 1.0 / std::log2(r + 1.0);
          }
        }
        hit /= static_cast<double>(batch_oracle.size());
        ndcg /= static_cast<double>(batch_oracle.size());
        if (report.HitRate(cut) != hit || report.Ndcg(cut) != ndcg) {
          return Fail(t, "aggregate mismatch at cutoff " + std::to_string(cut));
        }
      }
      batch_ranks.clear();
      batch_oracle.clear();
    }
  }
  return {true, num_vectors, ""};
}

CheckResult SplitProtocol(std::size_t num_logs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t t = 0; t < num_logs; ++t) {
    const std::size_t num_users = std::uniform_int_distribution<std::size_t>(1, 12)(rng);
    const std::size_t num_items = std::uniform_int_distribution<std::size_t>(8, 30)(rng);
    InteractionLog log;
    std::map<std::uint64_t, std::vector<std::uint64_t>> truth;
    std::size_t expected_dropped = 0;
    for (std::size_t u = 0; u < num_users; ++u) {
      const std::uint64_t user = 1000 + 7 * u;
      const std::size_t len = std::uniform_int_distribution<std::size_t>(0, num_items)(rng);
      std::vector<std::uint64_t> items(num_items);
      std::iota(items.begin(), items.end(), 100);
      std::shuffle(items.begin(), items.end(), rng);
      items.resize(len);
      std::int64_t ts = 0;
      for (auto id : items) {
        ts += std::uniform_int_distribution<int>(0, 2)(rng);
        log.Append(user, id, ts);
      }
      if (len > 0) truth[user] = items;
      if (len > 0 && len < 3) ++expected_dropped;
    }

    const SplitDataset split = SplitLeaveOneOut(log);
    if (split.dropped_users != expected_dropped) return Fail(t, "dropped count");
    if (split.users.size() + expected_dropped != truth.size()) {
      return Fail(t, "users lost by the split");
    }
    for (const auto& u : split.users) {
      std::vector<std::uint64_t> rebuilt = u.train;
      rebuilt.push_back(u.validation);
      rebuilt.push_back(u.test);
      if (rebuilt != truth.at(u.user_id)) {
        return Fail(t, "reconstruction failed for user " + std::to_string(u.user_id));
      }
    }
    if (split.users.empty()) continue;

    const Catalog catalog = Catalog::FromLog(log);
    std::map<std::uint64_t, const UserSplit*> by_user;
    for (const auto& u : split.users) by_user[u.user_id] = &u;
    ModelConfig config;
    config.fusion.strategy = Strategy::kIdOnly;
    config.fusion.d = 4;
    config.backbone.d = 4;
    config.backbone.num_blocks = 1;
    config.backbone.num_heads = 1;
    config.backbone.max_seq_len = std::uniform_int_distribution<std::size_t>(2, 12)(rng);
    TrainSchedule schedule;
    schedule.max_epochs = 2;
    schedule.batch_size = std::uniform_int_distribution<std::size_t>(1, 5)(rng);
    schedule.seed = t;
    std::string violation;
    std::map<std::uint64_t, std::size_t> rows_per_user;
    auto audit = [&](std::span<const std::uint64_t> users, const SequenceBatch& batch) {
      for (std::size_t r = 0; r < batch.batch && violation.empty(); ++r) {
        ++rows_per_user[users[r]];
        const UserSplit& u = *by_user.at(users[r]);
        std::set<std::int64_t> forbidden = {catalog.IndexOf(u.validation),
                                            catalog.IndexOf(u.test)};
        std::vector<std::int64_t> seen;
        std::int64_t last_target = 0;
        for (std::size_t p = 0; p < batch.seq_len; ++p) {
          const std::int64_t in = batch.inputs[r * batch.seq_len + p];
          const std::int64_t tg = batch.targets[r * batch.seq_len + p];
          if (forbidden.count(in) || forbidden.count(tg)) {
            violation = "held-out item in a training batch of user " +
                        std::to_string(u.user_id);
          }
          if (in != 0) seen.push_back(in);
          if (tg != 0) last_target = tg;
        }
        if (last_target != 0) seen.push_back(last_target);
        // The row must be a contiguous suffix of the training prefix.
        std::vector<std::int64_t> prefix;
        for (auto id : u.train) prefix.push_back(catalog.IndexOf(id));
        if (seen.size() > prefix.size() ||
            !std::equal(seen.begin(), seen.end(), prefix.end() - seen.size())) {
          violation = "batch row is not a suffix of the training prefix of user " +
                      std::to_string(u.user_id);
        }
      }
    };
    const TrainResult run = Train({&split, &catalog, nullptr}, config, schedule, {}, audit);
    if (!violation.empty()) return Fail(t, violation);
    // One row per epoch for every user with at least one supervised step.
    for (const auto& u : split.users) {
      const std::size_t expected = u.train.size() >= 2 ? run.history.size() : 0;
      const auto it = rows_per_user.find(u.user_id);
      if ((it == rows_per_user.end() ? 0 : it->second) != expected) {
        return Fail(t, "user " + std::to_string(u.user_id) + " batched " +
                           std::to_string(it == rows_per_user.end() ? 0 : it->second) +
                           " times, expected " + std::to_string(expected));
      }
    }
    if (rows_per_user.size() > split.users.size()) return Fail(t, "unknown user in a batch");
  }
  return {true, num_logs, ""};
}

CheckResult Causality(std::size_t num_sequences, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal(0.0F, 1.0F);
  for (std::size_t t = 0; t < num_sequences; ++t) {
    BackboneConfig config;
    config.num_heads = std::uniform_int_distribution<std::size_t>(1, 2)(rng);
    config.d = 4 * config.num_heads;
    config.num_blocks = std::uniform_int_distribution<std::size_t>(1, 2)(rng);
    config.max_seq_len = std::uniform_int_distribution<std::size_t>(2, 10)(rng);
    config.dropout = 0.0F;
    ParameterSet params;
    std::mt19937_64 init(seed * 31 + t);
    const SasRecBackbone backbone(config, params, init);

    const std::size_t len = config.max_seq_len;
    const std::size_t pad = std::uniform_int_distribution<std::size_t>(0, len - 1)(rng);
    std::vector<std::uint8_t> valid(len, 0);
    std::vector<float> emb(len * config.d, 0.0F);
    for (std::size_t p = pad; p < len; ++p) {
      valid[p] = 1;
      for (std::size_t c = 0; c < config.d; ++c) emb[p * config.d + c] = normal(rng);
    }
    const std::size_t pos = std::uniform_int_distribution<std::size_t>(pad, len - 1)(rng);
    std::vector<float> perturbed = emb;
    for (std::size_t c = 0; c < config.d; ++c) perturbed[pos * config.d + c] += 5.0F * normal(rng);

    ad::NoGradGuard no_grad;
    const ad::Tensor a = backbone.Encode(ad::Tensor::FromData({len, config.d}, emb), 1,
                                         len, valid, nullptr);
    const ad::Tensor b = backbone.Encode(
        ad::Tensor::FromData({len, config.d}, perturbed), 1, len, valid, nullptr);
    for (std::size_t p = 0; p < pos; ++p) {
      for (std::size_t c = 0; c < config.d; ++c) {
        if (a.at(p, c) != b.at(p, c)) {
          std::ostringstream msg;
          msg << "output at position " << p << " moved after perturbing position " << pos;
          return Fail(t, msg.str());
        }
      }
    }
    bool moved = false;
    for (std::size_t c = 0; c < config.d; ++c) moved |= a.at(pos, c) != b.at(pos, c);
    if (!moved) return Fail(t, "perturbed position output did not change");
  }
  return {true, num_sequences, ""};
}

}  // namespace dffrec::checks
