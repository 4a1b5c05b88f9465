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
#include <unordered_map>
#include <vector>

#include "dffrec/feature_store.hpp"
#include "dffrec/interaction_log.hpp"

namespace dffrec {

// Dense indexing of raw item ids: index 0 is padding, items take 1..size()
// in ascending raw-id order.
class Catalog {
 public:
  Catalog() = default;
  explicit Catalog(std::vector<std::uint64_t> raw_ids);
  static Catalog FromStore(const FeatureStore& store);
  static Catalog FromLog(const InteractionLog& log);

  std::size_t size() const { return raw_ids_.size(); }
  // Throws DataError("item not found: <id>").
  std::int64_t IndexOf(std::uint64_t raw_id) const;
  bool Contains(std::uint64_t raw_id) const { return index_.contains(raw_id); }
  std::uint64_t RawId(std::int64_t index) const;
  const std::vector<std::uint64_t>& raw_ids() const { return raw_ids_; }

 private:
  std::vector<std::uint64_t> raw_ids_;
  std::unordered_map<std::uint64_t, std::int64_t> index_;
};

}  // namespace dffrec
