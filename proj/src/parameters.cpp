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

#include "dffrec/parameters.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>
#include <utility>

#include "dffrec/binary_io.hpp"
#include "dffrec/error.hpp"

namespace dffrec {
namespace {

constexpr char kCheckpointMagic[4] = {'D', 'F', 'F', 'C'};
constexpr std::uint32_t kCheckpointVersion = 1;

void ReadHeader(std::istream& in, const std::filesystem::path& path) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw DataError("checkpoint " + path.string() + ": bad magic");
  }
  const auto version = io::ReadLE<std::uint32_t>(in, "checkpoint version");
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint " + path.string() + ": unsupported version " +
                    std::to_string(version));
  }
}

}  // namespace

ad::Tensor& ParameterSet::Add(const std::string& name, ad::Tensor tensor) {
  if (tensors_.contains(name)) {
    throw std::invalid_argument("parameter '" + name + "' registered twice");
  }
  if (!tensor.requires_grad()) {
    throw std::invalid_argument("parameter '" + name +
                                "' does not track gradients");
  }
  names_.push_back(name);
  return tensors_.emplace(name, std::move(tensor)).first->second;
}

const ad::Tensor& ParameterSet::Get(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) {
    throw std::out_of_range("unknown parameter '" + name + "'");
  }
  return it->second;
}

ad::Tensor& ParameterSet::Get(const std::string& name) {
  return const_cast<ad::Tensor&>(std::as_const(*this).Get(name));
}

bool ParameterSet::Contains(const std::string& name) const {
  return tensors_.contains(name);
}

std::size_t ParameterSet::NumScalars() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors_) n += t.numel();
  return n;
}

void ParameterSet::ZeroGrad() {
  for (auto& [name, t] : tensors_) t.zero_grad();
}

ParameterSet::Snapshot ParameterSet::TakeSnapshot() const {
  Snapshot snapshot;
  snapshot.reserve(names_.size());
  for (const auto& name : names_) {
    const auto data = Get(name).data();
    snapshot.emplace_back(data.begin(), data.end());
  }
  return snapshot;
}

void ParameterSet::Restore(const Snapshot& snapshot) {
  if (snapshot.size() != names_.size()) {
    throw std::invalid_argument("snapshot does not match parameter set");
  }
  for (std::size_t i = 0; i < names_.size(); ++i) {
    auto dst = Get(names_[i]).mutable_data();
    if (dst.size() != snapshot[i].size()) {
      throw std::invalid_argument("snapshot size mismatch for '" + names_[i] +
                                  "'");
    }
    std::copy(snapshot[i].begin(), snapshot[i].end(), dst.begin());
  }
}

void ParameterSet::Save(const std::filesystem::path& path,
                        const std::string& metadata) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(kCheckpointMagic, 4);
  io::WriteLE<std::uint32_t>(out, kCheckpointVersion);
  io::WriteString(out, metadata);
  io::WriteLE<std::uint32_t>(out, static_cast<std::uint32_t>(names_.size()));
  for (const auto& name : names_) {
    const ad::Tensor& t = Get(name);
    io::WriteString(out, name);
    io::WriteLE<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t dim : t.shape()) io::WriteLE<std::uint64_t>(out, dim);
    for (float v : t.data()) io::WriteF32(out, v);
  }
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

std::string ParameterSet::Load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  ReadHeader(in, path);
  std::string metadata = io::ReadString(in, "checkpoint metadata");
  const auto count = io::ReadLE<std::uint32_t>(in, "tensor count");
  if (count != names_.size()) {
    throw DataError("checkpoint " + path.string() + " holds " +
                    std::to_string(count) + " tensors, model expects " +
                    std::to_string(names_.size()));
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = io::ReadString(in, "tensor name");
    if (!Contains(name)) {
      throw DataError("checkpoint tensor '" + name + "' unknown to the model");
    }
    ad::Tensor& t = Get(name);
    const auto rank = io::ReadLE<std::uint32_t>(in, "tensor rank");
    ad::Shape shape(rank);
    for (auto& dim : shape) dim = io::ReadLE<std::uint64_t>(in, "tensor dim");
    if (shape != t.shape()) {
      throw DataError("checkpoint tensor '" + name + "' has shape " +
                      ad::ShapeToString(shape) + ", model expects " +
                      ad::ShapeToString(t.shape()));
    }
    for (float& v : t.mutable_data()) v = io::ReadF32(in, "tensor values");
  }
  return metadata;
}

std::string ParameterSet::ReadMetadata(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  ReadHeader(in, path);
  return io::ReadString(in, "checkpoint metadata");
}

}  // namespace dffrec
