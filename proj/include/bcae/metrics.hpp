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
#include <optional>
#include <span>
#include <string>

#include "bcae/tensor.hpp"
#include "json.hpp"

namespace bcae {

inline constexpr double kPsnrPeak = 10.0;
/// Reported in place of +inf (and of anything above it).
inline constexpr double kPsnrCap = 100.0;
/// Log-ADC values above this count as ground-truth positives.
inline constexpr double kPositiveLogAdc = 6.0;

struct ConfusionCounts {
  std::uint64_t true_pos = 0;
  std::uint64_t pred_pos = 0;
  std::uint64_t actual_pos = 0;
  std::uint64_t voxels = 0;
};

/// Reconstruction quality of one wedge or an aggregate. `precision` is empty
/// when nothing was predicted positive, `recall` when nothing is positive.
struct MetricsReport {
  double mae = 0.0;
  double mse = 0.0;
  double psnr = kPsnrCap;
  bool psnr_capped = true;
  std::optional<double> precision;
  std::optional<double> recall;
  double occupancy = 0.0;
  ConfusionCounts counts;
};

/// PSNR = 10 log10(peak^2 / mse), capped at kPsnrCap.
double psnr(double mse, double peak = kPsnrPeak);

/// All tensors share the (clipped) wedge extents. Predicted positive is
/// seg > h, actual positive is target > 6.
MetricsReport compute_metrics(const Tensor& reconstruction, const Tensor& seg,
                              const Tensor& target, double threshold);

/// MAE, MSE and occupancy are means of the per-wedge values; precision and
/// recall come from the pooled confusion counts.
MetricsReport aggregate(std::span<const MetricsReport> reports);

/// Input elements over code elements (both treated as 16-bit values).
double compression_ratio(const Shape& input, const Shape& code);

/// CSV columns: label,mae,mse,psnr,precision,recall,occupancy,true_pos,
/// pred_pos,actual_pos,voxels. Missing precision/recall are written empty.
std::string metrics_csv_header();
std::string metrics_csv_row(const std::string& label, const MetricsReport& report);
nlohmann::json to_json(const MetricsReport& report);

}  // namespace bcae
