// Copyright 2026 The BCAE Codec Authors
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

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "bcae/error.hpp"
#include "bcae/half.hpp"

// Little-endian stream helpers shared by the binary formats.
namespace bcae::le {

template <typename U>
U byteswap_if_big(U v) {
  if constexpr (std::endian::native == std::endian::big && sizeof(U) > 1) {
    U out = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      out = static_cast<U>((out << 8) | ((v >> (8 * i)) & 0xff));
    }
    return out;
  } else {
    return v;
  }
}

template <typename T>
auto to_bits(T v) {
  if constexpr (std::is_same_v<T, float>) {
    return std::bit_cast<std::uint32_t>(v);
  } else if constexpr (std::is_same_v<T, Half>) {
    return v.bits;
  } else {
    return v;
  }
}

template <typename T>
T from_bits(decltype(to_bits(T{})) b) {
  if constexpr (std::is_same_v<T, float>) {
    return std::bit_cast<float>(b);
  } else if constexpr (std::is_same_v<T, Half>) {
    return Half{b};
  } else {
    return b;
  }
}

inline std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > 0xffffffffu) throw FormatError(std::string(what) + " does not fit in 32 bits");
  return static_cast<std::uint32_t>(v);
}

template <typename T>
void put(std::ostream& out, T v) {
  auto b = byteswap_if_big(to_bits(v));
  out.write(reinterpret_cast<const char*>(&b), sizeof(b));
}

inline void put_u8(std::ostream& out, std::uint8_t v) { put(out, v); }
inline void put_u32(std::ostream& out, std::uint32_t v) { put(out, v); }
inline void put_u64(std::ostream& out, std::uint64_t v) { put(out, v); }

template <typename T>
void put_array(std::ostream& out, std::span<const T> values) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size_bytes()));
  } else {
    for (const T& v : values) put(out, v);
  }
}

template <typename T>
T get(std::istream& in, const char* what) {
  decltype(to_bits(T{})) b{};
  in.read(reinterpret_cast<char*>(&b), sizeof(b));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(b))) {
    throw FormatError(std::string("truncated header: missing ") + what);
  }
  return from_bits<T>(byteswap_if_big(b));
}

inline std::uint8_t get_u8(std::istream& in, const char* what) {
  return get<std::uint8_t>(in, what);
}
inline std::uint32_t get_u32(std::istream& in, const char* what) {
  return get<std::uint32_t>(in, what);
}
inline std::uint64_t get_u64(std::istream& in, const char* what) {
  return get<std::uint64_t>(in, what);
}

template <typename T>
void get_array(std::istream& in, std::span<T> values, const char* what) {
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(values.size_bytes()));
  if (in.gcount() != static_cast<std::streamsize>(values.size_bytes())) {
    throw FormatError(what);
  }
  if constexpr (std::endian::native == std::endian::big) {
    for (T& v : values) v = from_bits<T>(byteswap_if_big(to_bits(v)));
  }
}

}  // namespace bcae::le
