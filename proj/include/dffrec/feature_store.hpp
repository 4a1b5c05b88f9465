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

// DFFS: single-file container of frozen per-item, per-layer feature vectors.
//
// Layout (all integers and floats little-endian):
//   "DFFS"            4 bytes
//   version           u32 (currently 1)
//   provenance        u32 (0 hidden_state, 1 caption, 2 synthetic)
//   num_items         u64
//   num_layers        u32 (>= 1; caption stores hold exactly 1)
//   dim               u32 (>= 1)
//   model_tag         u32 byte length + UTF-8 bytes
//   index table       num_items x (u64 item_id, u64 payload byte offset),
//                     sorted by item_id
//   payload           num_items x num_layers x dim float32, row-major, items
//                     in index order

#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dffrec/interaction_log.hpp"

namespace dffrec {

enum class Provenance : std::uint32_t {
  kHiddenState = 0,
  kCaption = 1,
  kSynthetic = 2,
};

const char* ProvenanceName(Provenance p);
Provenance ParseProvenance(const std::string& name);

inline constexpr std::uint32_t kFeatureStoreVersion = 1;

struct FeatureStoreHeader {
  std::uint32_t version = kFeatureStoreVersion;
  Provenance provenance = Provenance::kSynthetic;
  std::uint64_t num_items = 0;
  std::uint32_t num_layers = 1;
  std::uint32_t dim = 1;
  std::string model_tag;

  bool operator==(const FeatureStoreHeader&) const = default;
};

struct ItemFeatures {
  std::uint64_t item_id = 0;
  // num_layers x dim, row-major.
  std::vector<float> values;
};

class FeatureStore {
 public:
  FeatureStore() = default;
  // Sorts by id. Throws DataError on an empty item list, duplicate ids,
  // vector length mismatch, or a caption store with more than one layer.
  // num_items in the header is taken from `items`.
  FeatureStore(FeatureStoreHeader header, std::vector<ItemFeatures> items);

  static FeatureStore Read(const std::filesystem::path& path);
  // Throws DataError on non-finite values. Output bytes depend only on the
  // header and the (id, vector) contents.
  void Write(const std::filesystem::path& path) const;

  const FeatureStoreHeader& header() const { return header_; }
  std::size_t num_items() const { return ids_.size(); }
  std::size_t num_layers() const { return header_.num_layers; }
  std::size_t dim() const { return header_.dim; }
  // Sorted ascending.
  const std::vector<std::uint64_t>& item_ids() const { return ids_; }

  bool Contains(std::uint64_t item_id) const;
  // Throws DataError("item not found: <id>").
  std::span<const float> Item(std::uint64_t item_id) const;
  // 0-based layer.
  std::span<const float> Layer(std::uint64_t item_id, std::size_t layer) const;
  // Row `row` of the sorted index (0-based).
  std::span<const float> ItemAtRow(std::size_t row) const;

 private:
  FeatureStoreHeader header_;
  std::vector<std::uint64_t> ids_;
  std::vector<float> payload_;
  std::unordered_map<std::uint64_t, std::size_t> row_of_;
};

void WriteStore(const std::filesystem::path& path,
                const FeatureStoreHeader& header,
                std::vector<ItemFeatures> items);
FeatureStore ReadStore(const std::filesystem::path& path);

struct NonFiniteEntry {
  std::uint64_t item_id = 0;
  std::size_t layer = 0;  // 1-based
};

struct StoreValidationReport {
  std::set<std::uint64_t> missing_items;
  std::vector<NonFiniteEntry> non_finite;
  // Every item vector has num_layers * dim entries.
  bool dimensions_consistent = true;
  bool clean() const {
    return missing_items.empty() && non_finite.empty() && dimensions_consistent;
  }
  std::string Summary() const;
};

StoreValidationReport ValidateStore(const FeatureStore& store,
                                    const InteractionLog& log);

}  // namespace dffrec
