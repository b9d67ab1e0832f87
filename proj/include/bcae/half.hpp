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

#include <cstdint>
#include <type_traits>

namespace bcae {

/// IEEE 754 binary16 storage value. Arithmetic is never done on Half
/// directly; kernels widen to float, multiply and accumulate there, and
/// narrow the result back.
struct Half {
  std::uint16_t bits = 0;

  friend constexpr bool operator==(Half a, Half b) { return a.bits == b.bits; }
};

inline constexpr float kHalfMaxFinite = 65504.0f;

/// Round-to-nearest-even conversion. Finite values beyond the binary16 range
/// saturate to +-65504 and bump the process-wide overflow counter.
Half to_half(float value) noexcept;
float to_float(Half value) noexcept;

/// Rounds `value` through binary16 and back.
inline float round_to_half(float value) noexcept {
  return to_float(to_half(value));
}

std::uint64_t half_overflow_count() noexcept;
void reset_half_overflow_count() noexcept;

/// Scalar type used for products and running sums of element type T.
template <typename T>
struct Accumulator {
  using type = T;
};
template <>
struct Accumulator<Half> {
  using type = float;
};
template <typename T>
using accum_t = typename Accumulator<T>::type;

template <typename T>
inline accum_t<T> widen(T value) noexcept {
  if constexpr (std::is_same_v<T, Half>) {
    return to_float(value);
  } else {
    return value;
  }
}

template <typename T>
inline T narrow(accum_t<T> value) noexcept {
  if constexpr (std::is_same_v<T, Half>) {
    return to_half(value);
  } else {
    return value;
  }
}

}  // namespace bcae
