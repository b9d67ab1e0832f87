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

#include "bcae/wedge.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace bcae {

RawWedge zero_suppress(const RawWedge& raw, std::uint16_t threshold) {
  RawWedge out = raw;
  for (auto& v : out.adc) {
    if (v < threshold) v = 0;
  }
  return out;
}

LogWedge log_transform(const RawWedge& raw) {
  std::vector<float> values(raw.adc.size());
  for (std::size_t i = 0; i < raw.adc.size(); ++i) {
    if (raw.adc[i] > kAdcMax) {
      throw FormatError("ADC value " + std::to_string(raw.adc[i]) +
                        " exceeds the 10-bit range");
    }
    values[i] = static_cast<float>(std::log2(static_cast<double>(raw.adc[i]) + 1.0));
  }
  LogWedge w;
  w.values = Tensor(raw.extents, std::move(values));
  w.original_horizontal = raw.extents.at(2);
  return w;
}

RawWedge delog(const LogWedge& wedge) {
  const LogWedge plain = wedge.padded ? clip_horizontal(wedge) : wedge;
  RawWedge raw(plain.extents());
  for (std::size_t i = 0; i < raw.adc.size(); ++i) {
    const double adc = std::round(std::exp2(static_cast<double>(plain.values[i])) - 1.0);
    raw.adc[i] = static_cast<std::uint16_t>(std::clamp(adc, 0.0, double{kAdcMax}));
  }
  return raw;
}

LogWedge pad_horizontal(const LogWedge& wedge, std::size_t alignment) {
  if (wedge.padded) {
    throw ConfigError("wedge is already horizontally padded");
  }
  if (alignment == 0) throw ConfigError("padding alignment must be positive");
  const Shape& e = wedge.extents();
  const std::size_t h = e.at(2);
  const std::size_t padded_h = (h + alignment - 1) / alignment * alignment;
  Tensor out({e[0], e[1], padded_h}, 0.0f);
  for (std::size_t row = 0; row < e[0] * e[1]; ++row) {
    std::copy_n(wedge.values.data().begin() + row * h, h,
                out.data().begin() + row * padded_h);
  }
  LogWedge w;
  w.values = std::move(out);
  w.padded = true;
  w.original_horizontal = h;
  return w;
}

Tensor clip_columns(const Tensor& values, std::size_t horizontal) {
  const Shape& e = values.shape();
  if (e.size() != 3 || horizontal > e[2]) {
    throw DimensionError("clip_horizontal", "horizontal", horizontal,
                         e.size() == 3 ? e[2] : 0);
  }
  Tensor out({e[0], e[1], horizontal});
  for (std::size_t row = 0; row < e[0] * e[1]; ++row) {
    std::copy_n(values.data().begin() + row * e[2], horizontal,
                out.data().begin() + row * horizontal);
  }
  return out;
}

LogWedge clip_horizontal(const LogWedge& wedge) {
  if (!wedge.padded) return wedge;
  LogWedge w;
  w.values = clip_columns(wedge.values, wedge.original_horizontal);
  w.original_horizontal = wedge.original_horizontal;
  return w;
}

double occupancy(const RawWedge& raw) {
  if (raw.adc.empty()) return 0.0;
  const auto nonzero = std::count_if(raw.adc.begin(), raw.adc.end(),
                                     [](std::uint16_t v) { return v != 0; });
  return static_cast<double>(nonzero) / static_cast<double>(raw.adc.size());
}

double occupancy(const Tensor& values) {
  if (values.empty()) return 0.0;
  const auto nonzero = std::count_if(values.data().begin(), values.data().end(),
                                     [](float v) { return v != 0.0f; });
  return static_cast<double>(nonzero) / static_cast<double>(values.size());
}

EventSplit split_events(std::size_t event_count, double train_fraction,
                        std::uint64_t seed) {
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) {
    throw ConfigError("train fraction must lie in [0, 1]");
  }
  std::vector<std::size_t> order(event_count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(
      std::llround(train_fraction * static_cast<double>(event_count)));
  EventSplit split;
  split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

}  // namespace bcae
