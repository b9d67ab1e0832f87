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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bcae/ops.hpp"
#include "bcae/tensor.hpp"

namespace bcae {

enum class LayerKind : std::uint8_t {
  kConv,
  kTransposedConv,
  kAvgPool,
  kUpsample,
  kResidual,  // conv -> relu -> conv, plus skip, then relu
  kActivation,
};

const char* to_string(LayerKind kind);

struct ParamDecl {
  std::string name;
  Shape shape;
  std::size_t fan_in = 1;
};

struct LayerDesc {
  LayerKind kind = LayerKind::kConv;
  std::string name;
  ConvParams conv;  // both convs of a residual block share this geometry
  Activation activation;
  /// Indices into LayerGraph::params: [weight, bias] for convolutions,
  /// [w1, b1, w2, b2] for residual blocks.
  std::vector<std::size_t> params;
};

/// Ordered operator sequence with its parameter declarations.
struct LayerGraph {
  std::vector<LayerDesc> layers;
  std::vector<ParamDecl> params;

  void add_conv(const std::string& name, const ConvParams& conv);
  void add_transposed_conv(const std::string& name, const ConvParams& conv);
  void add_residual(const std::string& name, const ConvParams& conv);
  void add_avgpool(const std::string& name);
  void add_upsample(const std::string& name);
  void add_activation(const std::string& name, const Activation& activation);
  /// Appends `other`, renumbering its parameters.
  void append(const LayerGraph& other);

  /// Composes every layer's shape law over `input`.
  Shape output_shape(const Shape& input) const;
};

std::size_t count_parameters(const LayerGraph& graph);

/// Intermediate values kept by forward() for backward().
template <typename T>
struct Tape {
  std::vector<std::vector<BasicTensor<T>>> saved;
};

/// Runs the graph. `params` are the graph's tensors in declaration order.
/// When `tape` is given, the values backward() needs are recorded.
template <typename T>
BasicTensor<T> forward(const LayerGraph& graph,
                       std::span<const BasicTensor<T>> params,
                       BasicTensor<T> input, Tape<T>* tape = nullptr);

/// Backpropagates `grad_output` through a recorded forward pass. Parameter
/// gradients are added into `param_grads`; returns the input gradient.
template <typename T>
BasicTensor<T> backward(const LayerGraph& graph,
                        std::span<const BasicTensor<T>> params,
                        const Tape<T>& tape, BasicTensor<T> grad_output,
                        std::span<BasicTensor<T>> param_grads);

/// Name of the first layer whose output contains NaN/Inf, if any.
std::optional<std::string> first_nonfinite_layer(const LayerGraph& graph,
                                                 std::span<const Tensor> params,
                                                 Tensor input);

}  // namespace bcae
