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

#include "bcae/graph.hpp"

namespace bcae {

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv:
      return "conv";
    case LayerKind::kTransposedConv:
      return "transposed_conv";
    case LayerKind::kAvgPool:
      return "avgpool2d";
    case LayerKind::kUpsample:
      return "upsample_nearest2d";
    case LayerKind::kResidual:
      return "residual";
    case LayerKind::kActivation:
      return "activation";
  }
  return "unknown";
}

namespace {

std::size_t declare(LayerGraph& g, std::string name, Shape shape,
                    std::size_t fan_in) {
  g.params.push_back(ParamDecl{std::move(name), std::move(shape), fan_in});
  return g.params.size() - 1;
}

template <typename T>
void accumulate(BasicTensor<T>& into, const BasicTensor<T>& delta) {
  for (std::size_t i = 0; i < into.size(); ++i) {
    into[i] = narrow<T>(widen(into[i]) + widen(delta[i]));
  }
}

template <typename T>
BasicTensor<T> relu_mask(const BasicTensor<T>& pre, BasicTensor<T> grad) {
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!(widen(pre[i]) > accum_t<T>{0})) grad[i] = T{};
  }
  return grad;
}

}  // namespace

void LayerGraph::add_conv(const std::string& name, const ConvParams& conv) {
  conv.validate();
  LayerDesc l{LayerKind::kConv, name, conv, {}, {}};
  const std::size_t fan_in = conv.in_channels * conv.kernel_volume();
  l.params.push_back(declare(*this, name + ".weight", conv.weight_shape(), fan_in));
  l.params.push_back(declare(*this, name + ".bias", {conv.out_channels}, fan_in));
  layers.push_back(std::move(l));
}

void LayerGraph::add_transposed_conv(const std::string& name,
                                     const ConvParams& conv) {
  conv.validate();
  LayerDesc l{LayerKind::kTransposedConv, name, conv, {}, {}};
  const std::size_t fan_in = conv.out_channels * conv.kernel_volume();
  l.params.push_back(
      declare(*this, name + ".weight", conv.transposed_weight_shape(), fan_in));
  l.params.push_back(declare(*this, name + ".bias", {conv.out_channels}, fan_in));
  layers.push_back(std::move(l));
}

void LayerGraph::add_residual(const std::string& name, const ConvParams& conv) {
  conv.validate();
  if (conv.in_channels != conv.out_channels) {
    throw ConfigError("residual block " + name + " must preserve channel count");
  }
  for (std::size_t i = 0; i < conv.spatial_rank(); ++i) {
    if (conv.stride[i] != 1 || conv.kernel[i] != 2 * conv.padding[i] + 1) {
      throw ConfigError("residual block " + name + " must preserve extents");
    }
  }
  LayerDesc l{LayerKind::kResidual, name, conv, {}, {}};
  const std::size_t fan_in = conv.in_channels * conv.kernel_volume();
  l.params.push_back(declare(*this, name + ".conv1.weight", conv.weight_shape(), fan_in));
  l.params.push_back(declare(*this, name + ".conv1.bias", {conv.out_channels}, fan_in));
  l.params.push_back(declare(*this, name + ".conv2.weight", conv.weight_shape(), fan_in));
  l.params.push_back(declare(*this, name + ".conv2.bias", {conv.out_channels}, fan_in));
  layers.push_back(std::move(l));
}

void LayerGraph::add_avgpool(const std::string& name) {
  layers.push_back(LayerDesc{LayerKind::kAvgPool, name, {}, {}, {}});
}

void LayerGraph::add_upsample(const std::string& name) {
  layers.push_back(LayerDesc{LayerKind::kUpsample, name, {}, {}, {}});
}

void LayerGraph::add_activation(const std::string& name,
                                const Activation& activation) {
  layers.push_back(LayerDesc{LayerKind::kActivation, name, {}, activation, {}});
}

void LayerGraph::append(const LayerGraph& other) {
  const std::size_t offset = params.size();
  params.insert(params.end(), other.params.begin(), other.params.end());
  for (LayerDesc l : other.layers) {
    for (auto& p : l.params) p += offset;
    layers.push_back(std::move(l));
  }
}

Shape LayerGraph::output_shape(const Shape& input) const {
  Shape s = input;
  for (const auto& l : layers) {
    switch (l.kind) {
      case LayerKind::kConv:
      case LayerKind::kResidual:
        if (s.size() != l.conv.spatial_rank() + 1) {
          throw DimensionError(l.name, "rank", l.conv.spatial_rank() + 1, s.size());
        }
        if (s[0] != l.conv.in_channels) {
          throw DimensionError(l.name, "channels", l.conv.in_channels, s[0]);
        }
        s = l.conv.output_shape(s);
        break;
      case LayerKind::kTransposedConv:
        if (s[0] != l.conv.in_channels) {
          throw DimensionError(l.name, "channels", l.conv.in_channels, s[0]);
        }
        s = l.conv.transposed_output_shape(s);
        break;
      case LayerKind::kAvgPool:
        if (s[s.size() - 2] % 2 != 0 || s.back() % 2 != 0) {
          throw DimensionError(l.name, "spatial", s.back() + 1, s.back(),
                               "odd extent; pad the input first");
        }
        s[s.size() - 2] /= 2;
        s.back() /= 2;
        break;
      case LayerKind::kUpsample:
        s[s.size() - 2] *= 2;
        s.back() *= 2;
        break;
      case LayerKind::kActivation:
        break;
    }
  }
  return s;
}

std::size_t count_parameters(const LayerGraph& graph) {
  std::size_t total = 0;
  for (const auto& p : graph.params) total += element_count(p.shape);
  return total;
}

template <typename T>
BasicTensor<T> forward(const LayerGraph& graph,
                       std::span<const BasicTensor<T>> params,
                       BasicTensor<T> x, Tape<T>* tape) {
  if (params.size() != graph.params.size()) {
    throw DimensionError("forward", "parameter count", graph.params.size(),
                         params.size());
  }
  if (tape != nullptr) {
    tape->saved.clear();
    tape->saved.resize(graph.layers.size());
  }
  for (std::size_t li = 0; li < graph.layers.size(); ++li) {
    const LayerDesc& l = graph.layers[li];
    auto* saved = tape != nullptr ? &tape->saved[li] : nullptr;
    switch (l.kind) {
      case LayerKind::kConv: {
        BasicTensor<T> y = conv_forward(x, params[l.params[0]], params[l.params[1]], l.conv);
        if (saved) saved->push_back(std::move(x));
        x = std::move(y);
        break;
      }
      case LayerKind::kTransposedConv: {
        BasicTensor<T> y = transposed_conv_forward(x, params[l.params[0]],
                                                   params[l.params[1]], l.conv);
        if (saved) saved->push_back(std::move(x));
        x = std::move(y);
        break;
      }
      case LayerKind::kResidual: {
        BasicTensor<T> h1 = conv_forward(x, params[l.params[0]], params[l.params[1]], l.conv);
        BasicTensor<T> a1 = activation_forward(h1, Activation::relu());
        BasicTensor<T> h2 = conv_forward(a1, params[l.params[2]], params[l.params[3]], l.conv);
        BasicTensor<T> s = add(h2, x);
        BasicTensor<T> y = activation_forward(s, Activation::relu());
        if (saved) {
          saved->push_back(std::move(x));
          saved->push_back(std::move(h1));
          saved->push_back(std::move(a1));
          saved->push_back(std::move(s));
        }
        x = std::move(y);
        break;
      }
      case LayerKind::kAvgPool:
        x = avgpool2d_forward(x);
        break;
      case LayerKind::kUpsample:
        x = upsample_nearest2d_forward(x);
        break;
      case LayerKind::kActivation: {
        BasicTensor<T> y = activation_forward(x, l.activation);
        if (saved && l.activation.kind != ActivationKind::kIdentity) {
          saved->push_back(std::move(x));
          saved->push_back(y);
        }
        x = std::move(y);
        break;
      }
    }
  }
  return x;
}

template <typename T>
BasicTensor<T> backward(const LayerGraph& graph,
                        std::span<const BasicTensor<T>> params,
                        const Tape<T>& tape, BasicTensor<T> g,
                        std::span<BasicTensor<T>> param_grads) {
  if (tape.saved.size() != graph.layers.size()) {
    throw Error("backward: tape does not belong to this graph");
  }
  if (param_grads.size() != graph.params.size()) {
    throw DimensionError("backward", "parameter count", graph.params.size(),
                         param_grads.size());
  }
  for (std::size_t li = graph.layers.size(); li-- > 0;) {
    const LayerDesc& l = graph.layers[li];
    const auto& saved = tape.saved[li];
    switch (l.kind) {
      case LayerKind::kConv: {
        auto grads = conv_backward(saved[0], params[l.params[0]], l.conv, g);
        accumulate(param_grads[l.params[0]], grads.weight);
        accumulate(param_grads[l.params[1]], grads.bias);
        g = std::move(grads.input);
        break;
      }
      case LayerKind::kTransposedConv: {
        auto grads = transposed_conv_backward(saved[0], params[l.params[0]], l.conv, g);
        accumulate(param_grads[l.params[0]], grads.weight);
        accumulate(param_grads[l.params[1]], grads.bias);
        g = std::move(grads.input);
        break;
      }
      case LayerKind::kResidual: {
        const auto& x = saved[0];
        const auto& h1 = saved[1];
        const auto& a1 = saved[2];
        const auto& s = saved[3];
        BasicTensor<T> gs = relu_mask(s, std::move(g));
        auto g2 = conv_backward(a1, params[l.params[2]], l.conv, gs);
        accumulate(param_grads[l.params[2]], g2.weight);
        accumulate(param_grads[l.params[3]], g2.bias);
        BasicTensor<T> gh1 = relu_mask(h1, std::move(g2.input));
        auto g1 = conv_backward(x, params[l.params[0]], l.conv, gh1);
        accumulate(param_grads[l.params[0]], g1.weight);
        accumulate(param_grads[l.params[1]], g1.bias);
        g = add(g1.input, gs);
        break;
      }
      case LayerKind::kAvgPool:
        g = avgpool2d_backward(g);
        break;
      case LayerKind::kUpsample:
        g = upsample_nearest2d_backward(g);
        break;
      case LayerKind::kActivation:
        if (l.activation.kind != ActivationKind::kIdentity) {
          g = activation_backward(saved[0], saved[1], g, l.activation);
        }
        break;
    }
  }
  return g;
}

std::optional<std::string> first_nonfinite_layer(const LayerGraph& graph,
                                                 std::span<const Tensor> params,
                                                 Tensor x) {
  if (!all_finite(x)) return std::string("input");
  for (std::size_t li = 0; li < graph.layers.size(); ++li) {
    LayerGraph single;
    single.params = graph.params;
    single.layers.push_back(graph.layers[li]);
    x = forward<float>(single, params, std::move(x));
    if (!all_finite(x)) {
      return graph.layers[li].name + " (" + to_string(graph.layers[li].kind) + ")";
    }
  }
  return std::nullopt;
}

#define BCAE_INSTANTIATE_GRAPH(T)                                            \
  template BasicTensor<T> forward(const LayerGraph&,                         \
                                  std::span<const BasicTensor<T>>,           \
                                  BasicTensor<T>, Tape<T>*);                 \
  template BasicTensor<T> backward(const LayerGraph&,                        \
                                   std::span<const BasicTensor<T>>,          \
                                   const Tape<T>&, BasicTensor<T>,           \
                                   std::span<BasicTensor<T>>);

BCAE_INSTANTIATE_GRAPH(float)
BCAE_INSTANTIATE_GRAPH(double)
BCAE_INSTANTIATE_GRAPH(Half)

#undef BCAE_INSTANTIATE_GRAPH

}  // namespace bcae
