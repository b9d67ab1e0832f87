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

#include <cstddef>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "bcae/error.hpp"
#include "bcae/half.hpp"

namespace bcae {

enum class Precision : std::uint8_t { kFull32 = 0, kHalf16 = 1 };

const char* to_string(Precision precision);
Precision parse_precision(const std::string& text);

/// Row-major extents, outermost first.
using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string to_string(const Shape& shape);

/// Dense row-major tensor. The element type fixes the storage precision:
/// float is full32, Half is half16, double is only used for verification.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape, T fill = T{})
      : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

  BasicTensor(Shape shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != element_count(shape_)) {
      throw DimensionError("tensor", "payload", element_count(shape_),
                           data_.size());
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  Precision precision() const noexcept
    requires(!std::is_same_v<T, double>)
  {
    return std::is_same_v<T, Half> ? Precision::kHalf16 : Precision::kFull32;
  }

  /// Same payload viewed under new extents with equal element count.
  BasicTensor reshaped(Shape shape) const& {
    return BasicTensor(std::move(shape), data_);
  }
  BasicTensor reshaped(Shape shape) && {
    return BasicTensor(std::move(shape), std::move(data_));
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using HalfTensor = BasicTensor<Half>;
using Tensor64 = BasicTensor<double>;

struct CastReport {
  std::uint64_t overflows = 0;
};

/// Re-encodes a tensor in another element type. Narrowing to Half rounds to
/// nearest even and saturates out-of-range values (counted in `report`).
template <typename To, typename From>
BasicTensor<To> cast_precision(const BasicTensor<From>& tensor,
                               CastReport* report = nullptr) {
  const auto before = half_overflow_count();
  std::vector<To> out(tensor.size());
  for (std::size_t i = 0; i < tensor.size(); ++i) {
    if constexpr (std::is_same_v<To, Half> && std::is_same_v<From, Half>) {
      out[i] = tensor[i];
    } else if constexpr (std::is_same_v<To, Half>) {
      out[i] = to_half(static_cast<float>(tensor[i]));
    } else if constexpr (std::is_same_v<From, Half>) {
      out[i] = static_cast<To>(to_float(tensor[i]));
    } else {
      out[i] = static_cast<To>(tensor[i]);
    }
  }
  if (report != nullptr) report->overflows += half_overflow_count() - before;
  return BasicTensor<To>(tensor.shape(), std::move(out));
}

/// Sum of all elements, accumulated in at least 32-bit precision.
template <typename T>
accum_t<T> sum(const BasicTensor<T>& tensor) {
  accum_t<T> total{};
  for (const T& v : tensor.data()) total += widen(v);
  return total;
}

/// True when every element is finite.
template <typename T>
bool all_finite(const BasicTensor<T>& tensor);

}  // namespace bcae
