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

#include "bcae/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>

namespace bcae {

const char* to_string(Precision precision) {
  return precision == Precision::kHalf16 ? "half" : "full";
}

Precision parse_precision(const std::string& text) {
  if (text == "full" || text == "full32" || text == "f32") {
    return Precision::kFull32;
  }
  if (text == "half" || text == "half16" || text == "f16") {
    return Precision::kHalf16;
  }
  throw ConfigError("unknown precision '" + text + "' (expected full|half)");
}

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != 0) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + ")";
}

template <typename T>
bool all_finite(const BasicTensor<T>& tensor) {
  for (const T& v : tensor.data()) {
    if (!std::isfinite(widen(v))) return false;
  }
  return true;
}

template bool all_finite(const BasicTensor<float>&);
template bool all_finite(const BasicTensor<double>&);
template bool all_finite(const BasicTensor<Half>&);

}  // namespace bcae
