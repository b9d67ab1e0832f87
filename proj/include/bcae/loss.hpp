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

#include "bcae/tensor.hpp"

namespace bcae {

struct LossConfig {
  double gamma = 2.0;        // focusing parameter
  double threshold = 0.5;    // segmentation threshold h
  double balancer_c0 = 2000.0;

  void validate() const;
};

/// Segmentation probabilities are clamped to [eps, 1 - eps] inside the
/// focal loss.
inline constexpr double kFocalClamp = 1e-7;

template <typename T>
struct LossValue {
  double value = 0.0;
  BasicTensor<T> grad;  // d value / d prediction
};

/// Mean over voxels of
///   -l log2(p) (1-p)^gamma - (1-l) log2(1-p) p^gamma
/// with p clamped to [eps, 1-eps]. The gradient is zero where the clamp is
/// active.
template <typename T>
LossValue<T> focal_loss(const BasicTensor<T>& seg, const BasicTensor<T>& labels,
                        double gamma);

/// Mean absolute error between the masked prediction reg * 1[seg > h] and
/// the target. The mask is a constant: gradient flows to `reg` only where
/// seg > h.
template <typename T>
LossValue<T> masked_regression_loss(const BasicTensor<T>& reg,
                                    const BasicTensor<T>& target,
                                    const BasicTensor<T>& seg, double threshold);

/// c * seg_loss + reg_loss.
inline double combined_loss(double seg_loss, double reg_loss, double c) {
  return c * seg_loss + reg_loss;
}

/// Epoch-wise coefficient of the segmentation loss.
struct BalancerState {
  double c = 2000.0;
  std::size_t epoch = 0;
  /// Set when an update was skipped because the segmentation loss was zero.
  bool stalled = false;
};

/// c_{t+1} = (0.5 c_t + rho_r / rho_s) / 1.5. With rho_s == 0 the coefficient
/// is kept and `stalled` is raised.
BalancerState update_balancer(const BalancerState& state, double rho_seg,
                              double rho_reg);

}  // namespace bcae
