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

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dffrec/tensor.hpp"

namespace dffrec {

// Named, insertion-ordered collection of trainable leaves. Tensors are shared
// handles, so modules holding a Tensor see updates applied through the set.
class ParameterSet {
 public:
  ad::Tensor& Add(const std::string& name, ad::Tensor tensor);
  const ad::Tensor& Get(const std::string& name) const;
  ad::Tensor& Get(const std::string& name);
  bool Contains(const std::string& name) const;

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  std::size_t NumScalars() const;

  void ZeroGrad();

  using Snapshot = std::vector<std::vector<float>>;
  Snapshot TakeSnapshot() const;
  void Restore(const Snapshot& snapshot);

  // Binary checkpoint: magic "DFFC", u32 version, metadata string, then per
  // tensor its name, shape, and little-endian float32 values.
  void Save(const std::filesystem::path& path,
            const std::string& metadata) const;
  // Loads values into already-registered tensors; names and shapes must
  // match. Returns the stored metadata string.
  std::string Load(const std::filesystem::path& path);
  static std::string ReadMetadata(const std::filesystem::path& path);

 private:
  std::vector<std::string> names_;
  std::map<std::string, ad::Tensor> tensors_;
};

}  // namespace dffrec
