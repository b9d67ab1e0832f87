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

#include "bcae/half.hpp"

#include <atomic>
#include <bit>
#include <cmath>

namespace bcae {
namespace {

std::atomic<std::uint64_t> g_overflows{0};

}  // namespace

Half to_half(float value) noexcept {
  const auto x = std::bit_cast<std::uint32_t>(value);
  const auto sign = static_cast<std::uint16_t>((x >> 16) & 0x8000u);
  std::uint32_t magnitude = x & 0x7fffffffu;

  if (magnitude >= 0x7f800000u) {
    // inf stays inf, NaN stays quiet NaN
    const std::uint16_t payload = magnitude > 0x7f800000u ? 0x7e00u : 0x7c00u;
    return Half{static_cast<std::uint16_t>(sign | payload)};
  }
  // 65520 is the first value that rounds to infinity.
  if (magnitude >= 0x477ff000u) {
    g_overflows.fetch_add(1, std::memory_order_relaxed);
    return Half{static_cast<std::uint16_t>(sign | 0x7bffu)};
  }
  if (magnitude < 0x38800000u) {
    // Subnormal range: quantize onto multiples of 2^-24 with ties to even.
    const float scaled =
        std::bit_cast<float>(magnitude) * 16777216.0f;  // exact power of two
    const auto units = static_cast<std::uint16_t>(std::nearbyint(scaled));
    return Half{static_cast<std::uint16_t>(sign | units)};
  }
  const std::uint32_t odd = (magnitude >> 13) & 1u;
  magnitude += 0xc8000fffu + odd;  // rebias exponent by -112, round half even
  return Half{static_cast<std::uint16_t>(sign | (magnitude >> 13))};
}

float to_float(Half value) noexcept {
  const std::uint32_t sign = static_cast<std::uint32_t>(value.bits & 0x8000u)
                             << 16;
  const std::uint32_t exponent = (value.bits >> 10) & 0x1fu;
  const std::uint32_t mantissa = value.bits & 0x3ffu;
  if (exponent == 0) {
    const float magnitude = static_cast<float>(mantissa) * 5.9604644775390625e-8f;
    return sign ? -magnitude : magnitude;
  }
  if (exponent == 31) {
    return std::bit_cast<float>(sign | 0x7f800000u | (mantissa << 13));
  }
  return std::bit_cast<float>(sign | ((exponent + 112u) << 23) |
                              (mantissa << 13));
}

std::uint64_t half_overflow_count() noexcept {
  return g_overflows.load(std::memory_order_relaxed);
}

void reset_half_overflow_count() noexcept {
  g_overflows.store(0, std::memory_order_relaxed);
}

}  // namespace bcae
