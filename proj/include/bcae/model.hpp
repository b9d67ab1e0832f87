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

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bcae/graph.hpp"
#include "bcae/model_spec.hpp"
#include "bcae/wedge.hpp"

namespace bcae {

/// 2D encoder: k=7 input conv, m stages of (optional 2x2 average
/// pool for the first d) + two residual blocks, then a 1x1 conv to the code.
LayerGraph build_encoder_2d(std::size_t m, std::size_t d,
                            std::size_t trunk_width, std::size_t code_channels,
                            std::size_t in_channels = 16);

/// 2D decoder: n stages of (optional nearest x2 upsample for the
/// first d) + two residual blocks, 1x1 conv to `out_channels`, activation.
LayerGraph build_decoder_2d(std::size_t n, std::size_t d,
                            std::size_t trunk_width, std::size_t code_channels,
                            const Activation& output,
                            std::size_t out_channels = 16);

/// Four stride-(1,2,2) stages of 3D conv + residual block, then 1x1x1 to
/// the code channels. Radial extent is preserved.
LayerGraph build_encoder_3d(const ModelSpec& spec);
/// Mirror of build_encoder_3d with transposed convolutions.
LayerGraph build_decoder_3d(const ModelSpec& spec, const Activation& output);

/// A single residual block (two k-convs at constant width).
LayerGraph residual_block(std::size_t width, std::size_t spatial_rank = 2,
                          std::size_t kernel = 3, std::size_t padding = 1);

enum class Head : std::size_t { kEncoder = 0, kSegmentation = 1, kRegression = 2 };

/// Encoder plus segmentation and regression decoders with their parameters.
/// Parameters are stored contiguously: encoder, then segmentation, then
/// regression decoder.
class BcaeModel {
 public:
  explicit BcaeModel(ModelSpec spec);

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every tensor, seeded.
  void initialize(std::uint64_t seed);

  const ModelSpec& spec() const noexcept { return spec_; }
  const LayerGraph& graph(Head head) const {
    return graphs_[static_cast<std::size_t>(head)];
  }

  std::span<const Tensor> params(Head head) const;
  std::span<Tensor> params(Head head);
  std::vector<Tensor>& all_params() noexcept { return params_; }
  const std::vector<Tensor>& all_params() const noexcept { return params_; }
  /// Qualified names ("encoder.in.weight", ...), aligned with all_params().
  std::vector<std::string> param_names() const;

  std::size_t parameter_count(Head head) const {
    return count_parameters(graph(head));
  }

  /// Hex digest of the spec and every parameter bit; codes carry it.
  std::string model_id() const;

 private:
  ModelSpec spec_;
  std::array<LayerGraph, 3> graphs_;
  std::array<std::size_t, 4> offsets_{};
  std::vector<Tensor> params_;
};

/// Compressed latent of one wedge.
struct Code {
  Shape shape;
  std::vector<Half> payload;
  std::string model_id;
  Shape original_extents;
};

struct Reconstruction {
  Tensor seg;     // sigmoid head output
  Tensor reg;     // T(regression head output), every value > a
  Tensor values;  // reg where seg > h, else 0
};

/// Lays a padded wedge out as the network input ([R,A,H] or [1,R,A,H]).
Tensor network_input(const ModelSpec& spec, const LogWedge& wedge);

/// v~ = reg where seg > h, 0 elsewhere.
Tensor masked_prediction(const Tensor& seg, const Tensor& reg, double threshold);

/// Encoder with weights prepared once in the requested precision.
class EncoderSession {
 public:
  EncoderSession(const BcaeModel& model, Precision precision);

  Precision precision() const noexcept { return precision_; }
  /// Code payload is binary16 regardless of compute precision.
  Code encode(const LogWedge& wedge) const;
  /// Encoder forward on an already-laid-out input, result widened to float.
  Tensor run(const Tensor& input) const;

 private:
  const BcaeModel* model_;
  Precision precision_;
  std::vector<HalfTensor> half_params_;
};

Code encode(const BcaeModel& model, const LogWedge& wedge,
            Precision precision = Precision::kFull32);

/// Runs both decoders; outputs are clipped to the code's original extents.
/// `threshold` overrides the spec's segmentation threshold.
Reconstruction decode(const BcaeModel& model, const Code& code,
                      std::optional<double> threshold = std::nullopt);

}  // namespace bcae
