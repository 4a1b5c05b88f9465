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

#include "dffrec/feature_store.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dffrec/binary_io.hpp"
#include "dffrec/error.hpp"

namespace dffrec {
namespace {

constexpr char kMagic[4] = {'D', 'F', 'F', 'S'};

}  // namespace

const char* ProvenanceName(Provenance p) {
  switch (p) {
    case Provenance::kHiddenState:
      return "hidden_state";
    case Provenance::kCaption:
      return "caption";
    case Provenance::kSynthetic:
      return "synthetic";
  }
  return "unknown";
}

Provenance ParseProvenance(const std::string& name) {
  if (name == "hidden_state") return Provenance::kHiddenState;
  if (name == "caption") return Provenance::kCaption;
  if (name == "synthetic") return Provenance::kSynthetic;
  throw DataError("unknown provenance '" + name + "'");
}

FeatureStore::FeatureStore(FeatureStoreHeader header,
                           std::vector<ItemFeatures> items)
    : header_(std::move(header)) {
  if (items.empty()) throw DataError("empty store");
  if (header_.num_layers == 0 || header_.dim == 0) {
    throw DataError("store needs num_layers >= 1 and dim >= 1");
  }
  if (header_.provenance == Provenance::kCaption && header_.num_layers != 1) {
    throw DataError("caption store must have exactly 1 layer, got " +
                    std::to_string(header_.num_layers));
  }
  std::sort(items.begin(), items.end(),
            [](const ItemFeatures& a, const ItemFeatures& b) {
              return a.item_id < b.item_id;
            });
  const std::size_t row_len =
      static_cast<std::size_t>(header_.num_layers) * header_.dim;
  payload_.reserve(items.size() * row_len);
  ids_.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0 && items[i].item_id == items[i - 1].item_id) {
      throw DataError("duplicate item id " + std::to_string(items[i].item_id));
    }
    if (items[i].values.size() != row_len) {
      throw DataError("item " + std::to_string(items[i].item_id) + " has " +
                      std::to_string(items[i].values.size()) +
                      " values, expected " + std::to_string(row_len) + " (" +
                      std::to_string(header_.num_layers) + " layers x dim " +
                      std::to_string(header_.dim) + ")");
    }
    ids_.push_back(items[i].item_id);
    row_of_[items[i].item_id] = i;
    payload_.insert(payload_.end(), items[i].values.begin(),
                    items[i].values.end());
  }
  header_.num_items = ids_.size();
}

void FeatureStore::Write(const std::filesystem::path& path) const {
  const std::size_t row_len = num_layers() * dim();
  for (std::size_t i = 0; i < payload_.size(); ++i) {
    if (!std::isfinite(payload_[i])) {
      throw DataError("non-finite value in item " +
                      std::to_string(ids_[i / row_len]) + " layer " +
                      std::to_string((i % row_len) / dim() + 1));
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write store " + path.string());
  out.write(kMagic, 4);
  io::WriteLE<std::uint32_t>(out, header_.version);
  io::WriteLE<std::uint32_t>(out, static_cast<std::uint32_t>(header_.provenance));
  io::WriteLE<std::uint64_t>(out, ids_.size());
  io::WriteLE<std::uint32_t>(out, header_.num_layers);
  io::WriteLE<std::uint32_t>(out, header_.dim);
  io::WriteString(out, header_.model_tag);
  const std::uint64_t row_bytes = row_len * sizeof(float);
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    io::WriteLE<std::uint64_t>(out, ids_[i]);
    io::WriteLE<std::uint64_t>(out, i * row_bytes);
  }
  for (float v : payload_) io::WriteF32(out, v);
  if (!out) throw DataError("failed writing store " + path.string());
}

FeatureStore FeatureStore::Read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open store " + path.string());
  const auto file_size = std::filesystem::file_size(path);

  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw DataError("bad magic in " + path.string());
  }
  FeatureStoreHeader header;
  header.version = io::ReadLE<std::uint32_t>(in, "store version");
  if (header.version != kFeatureStoreVersion) {
    throw DataError("unsupported store version " +
                    std::to_string(header.version) + " in " + path.string());
  }
  const auto provenance = io::ReadLE<std::uint32_t>(in, "provenance");
  if (provenance > 2) {
    throw DataError("unknown provenance code " + std::to_string(provenance));
  }
  header.provenance = static_cast<Provenance>(provenance);
  header.num_items = io::ReadLE<std::uint64_t>(in, "num_items");
  header.num_layers = io::ReadLE<std::uint32_t>(in, "num_layers");
  header.dim = io::ReadLE<std::uint32_t>(in, "dim");
  header.model_tag = io::ReadString(in, "model_tag");
  if (header.num_items == 0) throw DataError("empty store");
  if (header.num_layers == 0 || header.dim == 0) {
    throw DataError("store header has zero layers or dim");
  }

  const std::uint64_t row_len =
      static_cast<std::uint64_t>(header.num_layers) * header.dim;
  const std::uint64_t row_bytes = row_len * sizeof(float);
  const std::uint64_t header_bytes = static_cast<std::uint64_t>(in.tellg());
  const std::uint64_t index_bytes = header.num_items * 16;
  if (header_bytes + index_bytes > file_size) {
    throw DataError("truncated index table in " + path.string());
  }
  const std::uint64_t payload_bytes = file_size - header_bytes - index_bytes;
  if (payload_bytes < header.num_items * row_bytes) {
    throw DataError("truncated payload in " + path.string());
  }
  if (payload_bytes != header.num_items * row_bytes) {
    throw DataError("index/payload size disagreement in " + path.string());
  }

  std::vector<ItemFeatures> items(header.num_items);
  for (std::uint64_t i = 0; i < header.num_items; ++i) {
    items[i].item_id = io::ReadLE<std::uint64_t>(in, "index id");
    const auto offset = io::ReadLE<std::uint64_t>(in, "index offset");
    if (offset != i * row_bytes) {
      throw DataError("index/payload size disagreement in " + path.string() +
                      ": item " + std::to_string(items[i].item_id) +
                      " at offset " + std::to_string(offset));
    }
    if (i > 0 && items[i].item_id <= items[i - 1].item_id) {
      throw DataError("index table not strictly sorted in " + path.string());
    }
  }
  for (auto& item : items) {
    item.values.resize(row_len);
    for (float& v : item.values) v = io::ReadF32(in, "payload");
  }
  return FeatureStore(std::move(header), std::move(items));
}

bool FeatureStore::Contains(std::uint64_t item_id) const {
  return row_of_.contains(item_id);
}

std::span<const float> FeatureStore::ItemAtRow(std::size_t row) const {
  const std::size_t row_len = num_layers() * dim();
  return std::span<const float>(payload_).subspan(row * row_len, row_len);
}

std::span<const float> FeatureStore::Item(std::uint64_t item_id) const {
  auto it = row_of_.find(item_id);
  if (it == row_of_.end()) {
    throw DataError("item not found: " + std::to_string(item_id));
  }
  return ItemAtRow(it->second);
}

std::span<const float> FeatureStore::Layer(std::uint64_t item_id,
                                           std::size_t layer) const {
  if (layer >= num_layers()) {
    throw std::out_of_range("layer " + std::to_string(layer + 1) +
                            " out of range for " +
                            std::to_string(num_layers()) + "-layer store");
  }
  return Item(item_id).subspan(layer * dim(), dim());
}

void WriteStore(const std::filesystem::path& path,
                const FeatureStoreHeader& header,
                std::vector<ItemFeatures> items) {
  FeatureStore(header, std::move(items)).Write(path);
}

FeatureStore ReadStore(const std::filesystem::path& path) {
  return FeatureStore::Read(path);
}

std::string StoreValidationReport::Summary() const {
  std::ostringstream out;
  if (clean()) {
    out << "store OK";
    return out.str();
  }
  if (!missing_items.empty()) {
    out << missing_items.size() << " log item(s) missing from store:";
    std::size_t shown = 0;
    for (auto id : missing_items) {
      if (shown++ == 10) {
        out << " ...";
        break;
      }
      out << ' ' << id;
    }
    out << "; ";
  }
  if (!non_finite.empty()) {
    out << non_finite.size() << " non-finite (item, layer):";
    std::size_t shown = 0;
    for (const auto& e : non_finite) {
      if (shown++ == 10) {
        out << " ...";
        break;
      }
      out << " (" << e.item_id << ", " << e.layer << ")";
    }
    out << "; ";
  }
  if (!dimensions_consistent) out << "inconsistent vector dimensions; ";
  return out.str();
}

StoreValidationReport ValidateStore(const FeatureStore& store,
                                    const InteractionLog& log) {
  StoreValidationReport report;
  for (auto id : log.DistinctItems()) {
    if (!store.Contains(id)) report.missing_items.insert(id);
  }
  const std::size_t dim = store.dim();
  for (std::size_t row = 0; row < store.num_items(); ++row) {
    const auto values = store.ItemAtRow(row);
    if (values.size() != store.num_layers() * dim) {
      report.dimensions_consistent = false;
      continue;
    }
    for (std::size_t l = 0; l < store.num_layers(); ++l) {
      const auto layer = values.subspan(l * dim, dim);
      if (!std::all_of(layer.begin(), layer.end(),
                       [](float v) { return std::isfinite(v); })) {
        report.non_finite.push_back({store.item_ids()[row], l + 1});
      }
    }
  }
  return report;
}

}  // namespace dffrec
