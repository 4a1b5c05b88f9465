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

// Little-endian primitive encoding shared by the on-disk formats.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <type_traits>

#include "dffrec/error.hpp"

namespace dffrec::io {

template <typename T>
void WriteLE(std::ostream& out, T value) {
  static_assert(std::is_integral_v<T>);
  using U = std::make_unsigned_t<T>;
  U bits = static_cast<U>(value);
  char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  }
  out.write(bytes, sizeof(T));
}

inline void WriteF32(std::ostream& out, float value) {
  WriteLE(out, std::bit_cast<std::uint32_t>(value));
}

inline void WriteString(std::ostream& out, const std::string& s) {
  WriteLE(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T ReadLE(std::istream& in, const char* what) {
  static_assert(std::is_integral_v<T>);
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw DataError(std::string("truncated file while reading ") + what);
  }
  std::make_unsigned_t<T> bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bits |= static_cast<std::make_unsigned_t<T>>(bytes[i]) << (8 * i);
  }
  return static_cast<T>(bits);
}

inline float ReadF32(std::istream& in, const char* what) {
  return std::bit_cast<float>(ReadLE<std::uint32_t>(in, what));
}

inline std::string ReadString(std::istream& in, const char* what,
                              std::uint32_t max_len = 1U << 20) {
  const auto len = ReadLE<std::uint32_t>(in, what);
  if (len > max_len) {
    throw DataError(std::string("implausible string length while reading ") +
                    what);
  }
  std::string s(len, '\0');
  if (len > 0 && !in.read(s.data(), len)) {
    throw DataError(std::string("truncated file while reading ") + what);
  }
  return s;
}

}  // namespace dffrec::io
