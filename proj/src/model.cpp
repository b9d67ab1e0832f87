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

#include "bcae/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "bcae/digest.hpp"

namespace bcae {
namespace {

ConvParams conv3d(std::size_t in, std::size_t out,
                  std::vector<std::size_t> kernel,
                  std::vector<std::size_t> stride,
                  std::vector<std::size_t> padding) {
  ConvParams p;
  p.kernel = std::move(kernel);
  p.stride = std::move(stride);
  p.padding = std::move(padding);
  p.in_channels = in;
  p.out_channels = out;
  return p;
}

// Downsampling geometry shared by the 3D encoders and decoders.
ConvParams resample3d(std::size_t in, std::size_t out) {
  return conv3d(in, out, {3, 4, 4}, {1, 2, 2}, {1, 1, 1});
}

void check_3d(const ModelSpec& spec) {
  if (spec.variant == Variant::kBcae2d) {
    throw ConfigError("build_*_3d needs variant bcaepp or bcaeht");
  }
  if (spec.widths.size() != 4 || spec.decoder_widths.size() != 4) {
    throw ConfigError("3D variants need four encoder and four decoder widths");
  }
}

}  // namespace

LayerGraph residual_block(std::size_t width, std::size_t spatial_rank,
                          std::size_t kernel, std::size_t padding) {
  LayerGraph g;
  g.add_residual("res", ConvParams::uniform(spatial_rank, width, width, kernel, 1, padding));
  return g;
}

LayerGraph build_encoder_2d(std::size_t m, std::size_t d,
                            std::size_t trunk_width, std::size_t code_channels,
                            std::size_t in_channels) {
  if (d > m) {
    throw ConfigError("encoder: d=" + std::to_string(d) + " exceeds m=" + std::to_string(m));
  }
  LayerGraph g;
  g.add_conv("in", ConvParams::uniform(2, in_channels, trunk_width, 7, 1, 3));
  const auto res = ConvParams::uniform(2, trunk_width, trunk_width, 3, 1, 1);
  for (std::size_t i = 1; i <= m; ++i) {
    const std::string stage = "stage" + std::to_string(i);
    if (i <= d) g.add_avgpool(stage + ".pool");
    g.add_residual(stage + ".res1", res);
    g.add_residual(stage + ".res2", res);
  }
  g.add_conv("out", ConvParams::uniform(2, trunk_width, code_channels, 1));
  return g;
}

LayerGraph build_decoder_2d(std::size_t n, std::size_t d,
                            std::size_t trunk_width, std::size_t code_channels,
                            const Activation& output, std::size_t out_channels) {
  if (d > n) {
    throw ConfigError("decoder: d=" + std::to_string(d) + " exceeds n=" + std::to_string(n));
  }
  if (code_channels != trunk_width) {
    throw ConfigError("decoder: code has " + std::to_string(code_channels) +
                      " channels but the trunk expects " + std::to_string(trunk_width));
  }
  LayerGraph g;
  const auto res = ConvParams::uniform(2, trunk_width, trunk_width, 3, 1, 1);
  for (std::size_t i = 1; i <= n; ++i) {
    const std::string stage = "stage" + std::to_string(i);
    if (i <= d) g.add_upsample(stage + ".up");
    g.add_residual(stage + ".res1", res);
    g.add_residual(stage + ".res2", res);
  }
  g.add_conv("out", ConvParams::uniform(2, trunk_width, out_channels, 1));
  g.add_activation("act", output);
  return g;
}

LayerGraph build_encoder_3d(const ModelSpec& spec) {
  check_3d(spec);
  LayerGraph g;
  std::size_t channels = 1;
  for (std::size_t i = 0; i < 4; ++i) {
    const std::string stage = "stage" + std::to_string(i + 1);
    const std::size_t w = spec.widths[i];
    g.add_conv(stage + ".down", resample3d(channels, w));
    g.add_residual(stage + ".res", ConvParams::uniform(3, w, w, 3, 1, 1));
    channels = w;
  }
  g.add_conv("out", ConvParams::uniform(3, channels, spec.code_channels, 1));
  return g;
}

LayerGraph build_decoder_3d(const ModelSpec& spec, const Activation& output) {
  check_3d(spec);
  const auto& w = spec.decoder_widths;
  LayerGraph g;
  g.add_conv("in", ConvParams::uniform(3, spec.code_channels, w[3], 1));
  for (std::size_t i = 4; i-- > 0;) {
    const std::string stage = "stage" + std::to_string(4 - i);
    g.add_residual(stage + ".res", ConvParams::uniform(3, w[i], w[i], 3, 1, 1));
    g.add_transposed_conv(stage + ".up", resample3d(w[i], i > 0 ? w[i - 1] : w[0]));
  }
  g.add_conv("out", ConvParams::uniform(3, w[0], 1, 1));
  g.add_activation("act", output);
  return g;
}

BcaeModel::BcaeModel(ModelSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  const auto sigmoid = Activation::sigmoid();
  const auto identity = Activation::identity();
  if (spec_.variant == Variant::kBcae2d) {
    const std::size_t radial = spec_.wedge_extents[0];
    graphs_[0] = build_encoder_2d(spec_.m, spec_.d, spec_.trunk_width,
                                  spec_.code_channels, radial);
    graphs_[1] = build_decoder_2d(spec_.n, spec_.d, spec_.trunk_width,
                                  spec_.code_channels, sigmoid, radial);
    graphs_[2] = build_decoder_2d(spec_.n, spec_.d, spec_.trunk_width,
                                  spec_.code_channels, identity, radial);
  } else {
    graphs_[0] = build_encoder_3d(spec_);
    graphs_[1] = build_decoder_3d(spec_, sigmoid);
    graphs_[2] = build_decoder_3d(spec_, identity);
  }
  const Shape code = graphs_[0].output_shape(spec_.input_shape());
  if (code != spec_.code_shape()) {
    throw ConfigError("encoder produces " + to_string(code) + " but the spec declares " +
                      to_string(spec_.code_shape()));
  }
  Shape out = graphs_[1].output_shape(code);
  if (out != spec_.input_shape()) {
    throw ConfigError("decoder produces " + to_string(out) + " instead of " +
                      to_string(spec_.input_shape()));
  }
  offsets_[0] = 0;
  for (std::size_t h = 0; h < 3; ++h) {
    offsets_[h + 1] = offsets_[h] + graphs_[h].params.size();
    for (const auto& decl : graphs_[h].params) params_.emplace_back(decl.shape);
  }
}

void BcaeModel::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::size_t k = 0;
  for (const auto& g : graphs_) {
    for (const auto& decl : g.params) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(decl.fan_in));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (auto& v : params_[k].data()) v = static_cast<float>(dist(rng));
      ++k;
    }
  }
}

std::span<const Tensor> BcaeModel::params(Head head) const {
  const auto h = static_cast<std::size_t>(head);
  return std::span<const Tensor>(params_).subspan(offsets_[h], offsets_[h + 1] - offsets_[h]);
}

std::span<Tensor> BcaeModel::params(Head head) {
  const auto h = static_cast<std::size_t>(head);
  return std::span<Tensor>(params_).subspan(offsets_[h], offsets_[h + 1] - offsets_[h]);
}

std::vector<std::string> BcaeModel::param_names() const {
  static constexpr const char* kPrefix[] = {"encoder.", "seg_decoder.", "reg_decoder."};
  std::vector<std::string> names;
  for (std::size_t h = 0; h < 3; ++h) {
    for (const auto& decl : graphs_[h].params) names.push_back(kPrefix[h] + decl.name);
  }
  return names;
}

std::string BcaeModel::model_id() const {
  Fnv1a h;
  h.update(spec_.to_json().dump());
  for (const auto& p : params_) h.update(std::as_bytes(p.data()));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h.value()));
  return buf;
}

Tensor network_input(const ModelSpec& spec, const LogWedge& wedge) {
  if (!wedge.padded) {
    throw ConfigError("wedge is not horizontally padded; call pad_horizontal first");
  }
  if (wedge.original_extents() != spec.wedge_extents) {
    throw ConfigError("wedge extents " + to_string(wedge.original_extents()) +
                      " do not match the model's " + to_string(spec.wedge_extents));
  }
  if (wedge.extents() != spec.padded_extents()) {
    throw ConfigError("padded wedge extents " + to_string(wedge.extents()) +
                      " do not match the model's " + to_string(spec.padded_extents()));
  }
  return wedge.values.reshaped(spec.input_shape());
}

Tensor masked_prediction(const Tensor& seg, const Tensor& reg, double threshold) {
  if (seg.shape() != reg.shape()) {
    throw DimensionError("masked_prediction", "shape", seg.size(), reg.size());
  }
  Tensor out(seg.shape());
  for (std::size_t i = 0; i < seg.size(); ++i) {
    out[i] = static_cast<double>(seg[i]) > threshold ? reg[i] : 0.0f;
  }
  return out;
}

EncoderSession::EncoderSession(const BcaeModel& model, Precision precision)
    : model_(&model), precision_(precision) {
  if (precision_ == Precision::kHalf16) {
    for (const auto& p : model.params(Head::kEncoder)) {
      half_params_.push_back(cast_precision<Half>(p));
    }
  }
}

Tensor EncoderSession::run(const Tensor& input) const {
  const auto& g = model_->graph(Head::kEncoder);
  if (precision_ == Precision::kHalf16) {
    const HalfTensor out = forward<Half>(g, std::span<const HalfTensor>(half_params_),
                                         cast_precision<Half>(input));
    return cast_precision<float>(out);
  }
  return forward<float>(g, model_->params(Head::kEncoder), input);
}

Code EncoderSession::encode(const LogWedge& wedge) const {
  const ModelSpec& spec = model_->spec();
  const Tensor latent = run(network_input(spec, wedge));
  Code code;
  code.shape = latent.shape();
  code.payload = cast_precision<Half>(latent).values();
  code.model_id = model_->model_id();
  code.original_extents = wedge.original_extents();
  return code;
}

Code encode(const BcaeModel& model, const LogWedge& wedge, Precision precision) {
  return EncoderSession(model, precision).encode(wedge);
}

Reconstruction decode(const BcaeModel& model, const Code& code,
                      std::optional<double> threshold) {
  const ModelSpec& spec = model.spec();
  if (code.model_id != model.model_id()) {
    throw FormatError("code was produced by model " + code.model_id +
                      ", refusing to decode with model " + model.model_id());
  }
  if (code.shape != spec.code_shape()) {
    throw DimensionError("decode", "code shape", element_count(spec.code_shape()),
                         element_count(code.shape));
  }
  if (code.payload.size() != element_count(code.shape)) {
    throw DimensionError("decode", "code payload", element_count(code.shape),
                         code.payload.size());
  }
  const double h = threshold.value_or(spec.seg_threshold);
  const Tensor latent = cast_precision<float>(HalfTensor(code.shape, code.payload));
  const Shape padded = spec.padded_extents();
  const std::size_t horizontal = code.original_extents.at(2);

  Tensor seg = forward<float>(model.graph(Head::kSegmentation),
                              model.params(Head::kSegmentation), latent);
  Tensor raw = forward<float>(model.graph(Head::kRegression),
                              model.params(Head::kRegression), latent);
  Tensor reg = activation_forward(
      raw, Activation::exp_affine(spec.transform_a, spec.transform_b));
  // a + b*exp(x) rounds to exactly a in float once exp(x) is below half an
  // ulp of a; keep the strict lower bound.
  const float floor_value =
      std::nextafter(static_cast<float>(spec.transform_a), INFINITY);
  for (auto& v : reg.data()) v = std::max(v, floor_value);

  Reconstruction r;
  r.seg = clip_columns(std::move(seg).reshaped(padded), horizontal);
  r.reg = clip_columns(std::move(reg).reshaped(padded), horizontal);
  r.values = masked_prediction(r.seg, r.reg, h);
  return r;
}

}  // namespace bcae
