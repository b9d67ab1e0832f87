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
#include <string>
#include <vector>

#include "bcae/tensor.hpp"

namespace bcae {

/// Geometry of a (transposed) convolution over 1-3 spatial axes.
struct ConvParams {
  std::vector<std::size_t> kernel;
  std::vector<std::size_t> stride;
  std::vector<std::size_t> padding;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;

  /// Same kernel/stride/padding on every one of `spatial_rank` axes.
  static ConvParams uniform(std::size_t spatial_rank, std::size_t in_channels,
                            std::size_t out_channels, std::size_t kernel,
                            std::size_t stride = 1, std::size_t padding = 0);

  std::size_t spatial_rank() const noexcept { return kernel.size(); }
  std::size_t kernel_volume() const noexcept;

  /// floor((in + 2p - k) / s) + 1; throws when the result would be < 1.
  std::size_t output_extent(std::size_t axis, std::size_t in) const;
  /// (in - 1) * s - 2p + k.
  std::size_t transposed_extent(std::size_t axis, std::size_t in) const;

  Shape output_shape(const Shape& input) const;
  Shape transposed_output_shape(const Shape& input) const;

  /// [out, in, k...] for convolution.
  Shape weight_shape() const;
  /// [in, out, k...] for transposed convolution.
  Shape transposed_weight_shape() const;

  void validate() const;
};

template <typename T>
struct ConvGrads {
  BasicTensor<T> input;
  BasicTensor<T> weight;
  BasicTensor<T> bias;
};

// Convolution is cross-correlation. Inputs are [C, spatial...] (no batch axis).
template <typename T>
BasicTensor<T> conv_forward(const BasicTensor<T>& input,
                            const BasicTensor<T>& weight,
                            const BasicTensor<T>& bias,
                            const ConvParams& params);

template <typename T>
ConvGrads<T> conv_backward(const BasicTensor<T>& input,
                           const BasicTensor<T>& weight,
                           const ConvParams& params,
                           const BasicTensor<T>& grad_output);

/// Weight layout [in, out, k...]; output extent follows transposed_extent.
template <typename T>
BasicTensor<T> transposed_conv_forward(const BasicTensor<T>& input,
                                       const BasicTensor<T>& weight,
                                       const BasicTensor<T>& bias,
                                       const ConvParams& params);

template <typename T>
ConvGrads<T> transposed_conv_backward(const BasicTensor<T>& input,
                                      const BasicTensor<T>& weight,
                                      const ConvParams& params,
                                      const BasicTensor<T>& grad_output);

/// 2x2 mean pooling with stride 2 over the last two axes of [C, H, W].
template <typename T>
BasicTensor<T> avgpool2d_forward(const BasicTensor<T>& input);
template <typename T>
BasicTensor<T> avgpool2d_backward(const BasicTensor<T>& grad_output);

/// Each value replicated into a 2x2 block over the last two axes.
template <typename T>
BasicTensor<T> upsample_nearest2d_forward(const BasicTensor<T>& input);
template <typename T>
BasicTensor<T> upsample_nearest2d_backward(const BasicTensor<T>& grad_output);

enum class ActivationKind : std::uint8_t {
  kIdentity,
  kRelu,
  kSigmoid,
  kExpAffine,  // a + b * exp(x), continued linearly past the knee
};

/// exp_affine switches from a + b e^x to its tangent line once b e^x reaches
/// this value, so outputs stay finite when a head drifts. Log-ADC never
/// exceeds 10, so with a = 6 the exponential part covers every real target.
inline constexpr double kExpAffineKnee = 10.0;

struct Activation {
  ActivationKind kind = ActivationKind::kIdentity;
  double a = 0.0;
  double b = 1.0;

  static Activation identity() { return {}; }
  static Activation relu() { return {ActivationKind::kRelu}; }
  static Activation sigmoid() { return {ActivationKind::kSigmoid}; }
  static Activation exp_affine(double a, double b) {
    return {ActivationKind::kExpAffine, a, b};
  }
};

std::string to_string(const Activation& activation);

template <typename T>
BasicTensor<T> activation_forward(const BasicTensor<T>& input,
                                  const Activation& activation);

/// Needs both the forward input and output (relu reads the input, sigmoid
/// and exp_affine read the output).
template <typename T>
BasicTensor<T> activation_backward(const BasicTensor<T>& input,
                                   const BasicTensor<T>& output,
                                   const BasicTensor<T>& grad_output,
                                   const Activation& activation);

/// Elementwise a + b (shapes must match).
template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);

}  // namespace bcae
