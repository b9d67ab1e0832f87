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

#include "bcae/loss.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace bcae {
namespace {

void check_same(const char* op, const Shape& a, const Shape& b) {
  if (a != b) {
    throw DimensionError(op, "shape " + to_string(a) + " vs " + to_string(b),
                         element_count(a), element_count(b));
  }
}

}  // namespace

void LossConfig::validate() const {
  if (!(gamma >= 0.0)) throw ConfigError("focal gamma must be >= 0");
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ConfigError("segmentation threshold must lie in (0, 1)");
  }
  if (!(balancer_c0 > 0.0)) throw ConfigError("balancer c0 must be positive");
}

template <typename T>
LossValue<T> focal_loss(const BasicTensor<T>& seg, const BasicTensor<T>& labels,
                        double gamma) {
  check_same("focal_loss", seg.shape(), labels.shape());
  const double inv_ln2 = 1.0 / std::numbers::ln2;
  const double scale = seg.empty() ? 0.0 : 1.0 / static_cast<double>(seg.size());
  LossValue<T> out{0.0, BasicTensor<T>(seg.shape())};
  double total = 0.0;
  for (std::size_t i = 0; i < seg.size(); ++i) {
    const double raw = static_cast<double>(seg[i]);
    const double p = std::clamp(raw, kFocalClamp, 1.0 - kFocalClamp);
    const double l = static_cast<double>(labels[i]);
    const double q = 1.0 - p;
    const double log_p = std::log2(p);
    const double log_q = std::log2(q);
    const double q_g = std::pow(q, gamma);
    const double p_g = std::pow(p, gamma);
    total += -l * log_p * q_g - (1.0 - l) * log_q * p_g;

    double grad = 0.0;
    if (raw > kFocalClamp && raw < 1.0 - kFocalClamp) {
      // d/dp [-log2(p) q^g] and d/dp [-log2(q) p^g]
      const double d_pos = -inv_ln2 / p * q_g +
                           (gamma > 0.0 ? log_p * gamma * std::pow(q, gamma - 1.0) : 0.0);
      const double d_neg = inv_ln2 / q * p_g -
                           (gamma > 0.0 ? log_q * gamma * std::pow(p, gamma - 1.0) : 0.0);
      grad = l * d_pos + (1.0 - l) * d_neg;
    }
    out.grad[i] = static_cast<T>(grad * scale);
  }
  out.value = total * scale;
  return out;
}

template <typename T>
LossValue<T> masked_regression_loss(const BasicTensor<T>& reg,
                                    const BasicTensor<T>& target,
                                    const BasicTensor<T>& seg, double threshold) {
  check_same("masked_regression_loss", reg.shape(), target.shape());
  check_same("masked_regression_loss", reg.shape(), seg.shape());
  const double scale = reg.empty() ? 0.0 : 1.0 / static_cast<double>(reg.size());
  LossValue<T> out{0.0, BasicTensor<T>(reg.shape())};
  double total = 0.0;
  for (std::size_t i = 0; i < reg.size(); ++i) {
    const bool keep = static_cast<double>(seg[i]) > threshold;
    const double pred = keep ? static_cast<double>(reg[i]) : 0.0;
    const double diff = pred - static_cast<double>(target[i]);
    total += std::abs(diff);
    if (keep && diff != 0.0) {
      out.grad[i] = static_cast<T>((diff > 0.0 ? 1.0 : -1.0) * scale);
    }
  }
  out.value = total * scale;
  return out;
}

BalancerState update_balancer(const BalancerState& state, double rho_seg,
                              double rho_reg) {
  BalancerState next = state;
  next.epoch = state.epoch + 1;
  if (!(rho_seg > 0.0)) {
    next.stalled = true;
    return next;
  }
  next.stalled = false;
  next.c = (0.5 * state.c + rho_reg / rho_seg) / 1.5;
  return next;
}

template LossValue<float> focal_loss(const Tensor&, const Tensor&, double);
template LossValue<double> focal_loss(const Tensor64&, const Tensor64&, double);
template LossValue<float> masked_regression_loss(const Tensor&, const Tensor&,
                                                 const Tensor&, double);
template LossValue<double> masked_regression_loss(const Tensor64&, const Tensor64&,
                                                  const Tensor64&, double);

}  // namespace bcae
