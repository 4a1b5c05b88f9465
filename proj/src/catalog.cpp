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

#include "dffrec/catalog.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "dffrec/error.hpp"

namespace dffrec {

Catalog::Catalog(std::vector<std::uint64_t> raw_ids) : raw_ids_(std::move(raw_ids)) {
  std::sort(raw_ids_.begin(), raw_ids_.end());
  raw_ids_.erase(std::unique(raw_ids_.begin(), raw_ids_.end()), raw_ids_.end());
  for (std::size_t i = 0; i < raw_ids_.size(); ++i) {
    index_[raw_ids_[i]] = static_cast<std::int64_t>(i + 1);
  }
}

Catalog Catalog::FromStore(const FeatureStore& store) {
  return Catalog(store.item_ids());
}

Catalog Catalog::FromLog(const InteractionLog& log) {
  const auto items = log.DistinctItems();
  return Catalog(std::vector<std::uint64_t>(items.begin(), items.end()));
}

std::int64_t Catalog::IndexOf(std::uint64_t raw_id) const {
  auto it = index_.find(raw_id);
  if (it == index_.end()) {
    throw DataError("item not found: " + std::to_string(raw_id));
  }
  return it->second;
}

std::uint64_t Catalog::RawId(std::int64_t index) const {
  if (index < 1 || static_cast<std::size_t>(index) > raw_ids_.size()) {
    throw std::out_of_range("catalog index " + std::to_string(index) +
                            " out of range");
  }
  return raw_ids_[index - 1];
}

}  // namespace dffrec
