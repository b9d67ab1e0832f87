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
#include <optional>
#include <vector>

#include "bcae/wedge.hpp"
#include "json.hpp"

namespace bcae {

/// Synthetic sparse-track wedges. Each track is a helical segment running
/// outward through the radial layers; charge falls off as a Gaussian around
/// the track centre and the peak ADC is log-normal.
struct GeneratorConfig {
  Shape extents = {16, 192, 249};
  /// Tracks per wedge are drawn uniformly from [tracks_min, tracks_max].
  std::size_t tracks_min = 150;
  std::size_t tracks_max = 350;
  double peak_log_mean = 5.7;   // ln of the median peak ADC
  double peak_log_sigma = 0.6;
  double track_width = 1.5;     // transverse sigma, voxels
  double noise_rate = 1e-3;     // fraction of voxels hit by noise
  /// When set, the track range is rescaled until the mean occupancy lands
  /// within `occupancy_tolerance` of it.
  std::optional<double> target_occupancy = 0.108;
  double occupancy_tolerance = 0.01;
  std::size_t calibration_wedges = 4;
  std::size_t calibration_rounds = 12;
  std::uint64_t seed = 0;
  std::size_t events = 1;
  std::size_t wedges_per_event = kWedgesPerEvent;

  void validate() const;
  nlohmann::json to_json() const;
  static GeneratorConfig from_json(const nlohmann::json& j);
};

class WedgeGenerator {
 public:
  /// Runs the occupancy calibration; throws ConfigError if the target cannot
  /// be reached.
  explicit WedgeGenerator(GeneratorConfig config);

  const GeneratorConfig& config() const { return config_; }
  /// Factor applied to the configured track range after calibration.
  double track_scale() const { return scale_; }
  std::size_t tracks_min() const;
  std::size_t tracks_max() const;

  /// Depends only on (config, seed, event, index).
  RawWedge wedge(std::size_t event, std::size_t index) const;
  std::vector<RawWedge> event(std::size_t event) const;
  /// All configured events, wedges in event-major order.
  std::vector<RawWedge> generate(std::size_t threads = 1) const;

 private:
  RawWedge render(std::uint64_t stream, double scale) const;
  double mean_occupancy(double scale) const;

  GeneratorConfig config_;
  double scale_ = 1.0;
};

/// Stream seed for one wedge.
std::uint64_t wedge_stream(std::uint64_t seed, std::size_t event, std::size_t index);

}  // namespace bcae
