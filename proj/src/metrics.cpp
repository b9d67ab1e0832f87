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

#include "bcae/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace bcae {
namespace {

std::optional<double> ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

double psnr(double mse, double peak) {
  if (!(mse > 0.0)) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

MetricsReport compute_metrics(const Tensor& reconstruction, const Tensor& seg,
                              const Tensor& target, double threshold) {
  if (reconstruction.shape() != target.shape()) {
    throw DimensionError("metrics", "reconstruction", target.size(), reconstruction.size());
  }
  if (seg.shape() != target.shape()) {
    throw DimensionError("metrics", "seg", target.size(), seg.size());
  }
  MetricsReport r;
  double abs_sum = 0.0, sq_sum = 0.0;
  std::uint64_t nonzero = 0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double t = target[i];
    const double diff = static_cast<double>(reconstruction[i]) - t;
    abs_sum += std::abs(diff);
    sq_sum += diff * diff;
    const bool predicted = static_cast<double>(seg[i]) > threshold;
    const bool actual = t > kPositiveLogAdc;
    r.counts.pred_pos += predicted;
    r.counts.actual_pos += actual;
    r.counts.true_pos += predicted && actual;
    nonzero += t != 0.0;
  }
  const auto n = static_cast<double>(target.size());
  r.counts.voxels = target.size();
  r.mae = target.empty() ? 0.0 : abs_sum / n;
  r.mse = target.empty() ? 0.0 : sq_sum / n;
  r.psnr = psnr(r.mse);
  r.psnr_capped = r.psnr >= kPsnrCap;
  r.precision = ratio(r.counts.true_pos, r.counts.pred_pos);
  r.recall = ratio(r.counts.true_pos, r.counts.actual_pos);
  r.occupancy = target.empty() ? 0.0 : static_cast<double>(nonzero) / n;
  return r;
}

MetricsReport aggregate(std::span<const MetricsReport> reports) {
  MetricsReport out;
  if (reports.empty()) return out;
  for (const auto& r : reports) {
    out.mae += r.mae;
    out.mse += r.mse;
    out.occupancy += r.occupancy;
    out.counts.true_pos += r.counts.true_pos;
    out.counts.pred_pos += r.counts.pred_pos;
    out.counts.actual_pos += r.counts.actual_pos;
    out.counts.voxels += r.counts.voxels;
  }
  const auto n = static_cast<double>(reports.size());
  out.mae /= n;
  out.mse /= n;
  out.occupancy /= n;
  out.psnr = psnr(out.mse);
  out.psnr_capped = out.psnr >= kPsnrCap;
  out.precision = ratio(out.counts.true_pos, out.counts.pred_pos);
  out.recall = ratio(out.counts.true_pos, out.counts.actual_pos);
  return out;
}

double compression_ratio(const Shape& input, const Shape& code) {
  return static_cast<double>(element_count(input)) /
         static_cast<double>(element_count(code));
}

std::string metrics_csv_header() {
  return "label,mae,mse,psnr,precision,recall,occupancy,true_pos,pred_pos,"
         "actual_pos,voxels";
}

std::string metrics_csv_row(const std::string& label, const MetricsReport& r) {
  auto opt = [](const std::optional<double>& v) {
    return v ? format_number(*v) : std::string{};
  };
  return label + "," + format_number(r.mae) + "," + format_number(r.mse) + "," +
         format_number(r.psnr) + "," + opt(r.precision) + "," + opt(r.recall) + "," +
         format_number(r.occupancy) + "," + std::to_string(r.counts.true_pos) + "," +
         std::to_string(r.counts.pred_pos) + "," + std::to_string(r.counts.actual_pos) +
         "," + std::to_string(r.counts.voxels);
}

nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["mae"] = r.mae;
  j["mse"] = r.mse;
  j["psnr"] = r.psnr;
  j["psnr_capped"] = r.psnr_capped;
  j["precision"] = r.precision ? nlohmann::json(*r.precision) : nlohmann::json(nullptr);
  j["recall"] = r.recall ? nlohmann::json(*r.recall) : nlohmann::json(nullptr);
  j["occupancy"] = r.occupancy;
  j["true_pos"] = r.counts.true_pos;
  j["pred_pos"] = r.counts.pred_pos;
  j["actual_pos"] = r.counts.actual_pos;
  j["voxels"] = r.counts.voxels;
  return j;
}

}  // namespace bcae
