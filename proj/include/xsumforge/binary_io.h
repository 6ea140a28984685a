// Copyright 2026 The XSumForge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef XSUMFORGE_BINARY_IO_H_
#define XSUMFORGE_BINARY_IO_H_

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>

#include "xsumforge/common.h"

namespace xsf::binio {

// Little-endian scalar I/O for int64/uint64/double.
template <typename T>
void write(std::ostream& out, T value) {
  static_assert(sizeof(T) == 8);
  uint64_t bits;
  std::memcpy(&bits, &value, 8);
  if constexpr (std::endian::native == std::endian::big) {
    bits = __builtin_bswap64(bits);
  }
  out.write(reinterpret_cast<const char*>(&bits), 8);
}

template <typename T>
T read(std::istream& in) {
  static_assert(sizeof(T) == 8);
  uint64_t bits = 0;
  if (!in.read(reinterpret_cast<char*>(&bits), 8)) {
    throw Error(ErrorCode::kFormatError, "unexpected end of binary file");
  }
  if constexpr (std::endian::native == std::endian::big) {
    bits = __builtin_bswap64(bits);
  }
  T value;
  std::memcpy(&value, &bits, 8);
  return value;
}

template <typename T>
void write_span(std::ostream& out, std::span<const T> values) {
  for (const T& v : values) write<T>(out, v);
}

template <typename T>
void read_into(std::istream& in, std::span<T> values) {
  for (T& v : values) v = read<T>(in);
}

inline void write_string(std::ostream& out, const std::string& s) {
  write<uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in, uint64_t max_len = 1u << 30) {
  const auto n = read<uint64_t>(in);
  if (n > max_len) throw Error(ErrorCode::kFormatError, "string too long");
  std::string s(n, '\0');
  if (n > 0 && !in.read(s.data(), static_cast<std::streamsize>(n))) {
    throw Error(ErrorCode::kFormatError, "unexpected end of binary file");
  }
  return s;
}

}  // namespace xsf::binio

#endif  // XSUMFORGE_BINARY_IO_H_
