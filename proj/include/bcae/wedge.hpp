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
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "bcae/tensor.hpp"

namespace bcae {

inline constexpr std::uint16_t kAdcMax = 1023;
inline constexpr std::uint16_t kSuppressionThreshold = 64;
inline constexpr std::size_t kWedgesPerEvent = 24;

/// One wedge's 10-bit ADC grid, extents (radial, azimuthal, horizontal).
struct RawWedge {
  Shape extents;
  std::vector<std::uint16_t> adc;

  RawWedge() = default;
  explicit RawWedge(Shape e) : extents(std::move(e)), adc(element_count(extents), 0) {}

  friend bool operator==(const RawWedge&, const RawWedge&) = default;
};

/// log2(ADC + 1) values, optionally zero padded along the horizontal axis.
struct LogWedge {
  Tensor values;
  bool padded = false;
  /// Horizontal extent before padding.
  std::size_t original_horizontal = 0;

  const Shape& extents() const { return values.shape(); }
  /// Extents with padding removed.
  Shape original_extents() const {
    return {values.dim(0), values.dim(1), original_horizontal};
  }
};

/// Zeroes every value below `threshold`; idempotent.
RawWedge zero_suppress(const RawWedge& raw,
                       std::uint16_t threshold = kSuppressionThreshold);

LogWedge log_transform(const RawWedge& raw);
/// Inverse of log_transform: round(2^v - 1), clamped to [0, 1023].
RawWedge delog(const LogWedge& wedge);

/// Appends zero columns so the horizontal extent becomes a multiple of
/// `alignment` (249 -> 256 for the default of 16).
LogWedge pad_horizontal(const LogWedge& wedge, std::size_t alignment = 16);
/// Removes the columns added by pad_horizontal.
LogWedge clip_horizontal(const LogWedge& wedge);
/// Keeps the first `horizontal` columns of a [R, A, H] tensor.
Tensor clip_columns(const Tensor& values, std::size_t horizontal);

/// Fraction of nonzero voxels.
double occupancy(const RawWedge& raw);
double occupancy(const Tensor& values);

struct EventSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Deterministic event-level split; round(train_fraction * events) events
/// go to training.
EventSplit split_events(std::size_t event_count, double train_fraction,
                        std::uint64_t seed);

/// Splits wedges event by event, keeping each event's wedges together and
/// in their original order.
template <typename W>
std::pair<std::vector<W>, std::vector<W>> split_dataset(
    const std::vector<W>& wedges, double train_fraction, std::uint64_t seed,
    std::size_t wedges_per_event = kWedgesPerEvent) {
  if (wedges_per_event == 0 || wedges.size() % wedges_per_event != 0) {
    throw ConfigError("wedge count is not a multiple of wedges per event");
  }
  const EventSplit split =
      split_events(wedges.size() / wedges_per_event, train_fraction, seed);
  std::pair<std::vector<W>, std::vector<W>> out;
  auto take = [&](const std::vector<std::size_t>& events, std::vector<W>& into) {
    for (std::size_t e : events) {
      for (std::size_t i = 0; i < wedges_per_event; ++i) {
        into.push_back(wedges[e * wedges_per_event + i]);
      }
    }
  };
  take(split.train, out.first);
  take(split.test, out.second);
  return out;
}

}  // namespace bcae
