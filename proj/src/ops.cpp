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

#include "bcae/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>
#include <type_traits>

namespace bcae {
namespace {

template <typename A>
using Mat = Eigen::Matrix<A, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename A>
using MatMap = Eigen::Map<Mat<A>, 0, Eigen::OuterStride<>>;
template <typename A>
using ConstMatMap = Eigen::Map<const Mat<A>, 0, Eigen::OuterStride<>>;

// Upper bound on im2col scratch elements per chunk.
constexpr std::size_t kColumnBudget = std::size_t{1} << 22;

// Sliding-window geometry normalized to three spatial axes. The "image" is
// the side that is read through padding (conv input, transposed-conv
// output); the "grid" has one column per window position.
struct Geometry {
  std::size_t channels = 1;
  std::array<std::size_t, 3> image{1, 1, 1};
  std::array<std::size_t, 3> grid{1, 1, 1};
  std::array<std::size_t, 3> kernel{1, 1, 1};
  std::array<std::size_t, 3> stride{1, 1, 1};
  std::array<std::size_t, 3> pad{0, 0, 0};

  std::size_t image_volume() const { return image[0] * image[1] * image[2]; }
  std::size_t grid_volume() const { return grid[0] * grid[1] * grid[2]; }
  std::size_t kernel_volume() const {
    return kernel[0] * kernel[1] * kernel[2];
  }
  std::size_t grid_rows() const { return grid[0] * grid[1]; }
  std::size_t columns() const { return channels * kernel_volume(); }
  bool pointwise() const {
    return kernel_volume() == 1 && stride == std::array<std::size_t, 3>{1, 1, 1} &&
           pad == std::array<std::size_t, 3>{0, 0, 0};
  }
  std::size_t rows_per_chunk() const {
    return std::clamp<std::size_t>(kColumnBudget / (columns() * grid[2]), 1,
                                   std::max<std::size_t>(1, grid_rows()));
  }
};

Geometry make_geometry(std::size_t channels, const Shape& image_extents,
                       const Shape& grid_extents, const ConvParams& params) {
  Geometry g;
  g.channels = channels;
  const std::size_t offset = 3 - params.spatial_rank();
  for (std::size_t i = 0; i < params.spatial_rank(); ++i) {
    g.image[offset + i] = image_extents[i];
    g.grid[offset + i] = grid_extents[i];
    g.kernel[offset + i] = params.kernel[i];
    g.stride[offset + i] = params.stride[i];
    g.pad[offset + i] = params.padding[i];
  }
  return g;
}

Shape spatial_of(const Shape& shape) { return Shape(shape.begin() + 1, shape.end()); }

// Rows of `col` are (channel, kd, kh, kw); columns are grid positions in
// [row_begin, row_end) x grid[2].
template <typename A>
void im2col(const A* image, const Geometry& g, std::size_t row_begin,
            std::size_t row_end, A* col) {
  const std::size_t width = g.grid[2];
  const std::size_t n = (row_end - row_begin) * width;
  std::size_t r = 0;
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t kd = 0; kd < g.kernel[0]; ++kd) {
      for (std::size_t kh = 0; kh < g.kernel[1]; ++kh) {
        for (std::size_t kw = 0; kw < g.kernel[2]; ++kw, ++r) {
          A* dst = col + r * n;
          for (std::size_t row = row_begin; row < row_end; ++row) {
            const std::size_t od = row / g.grid[1];
            const std::size_t oh = row % g.grid[1];
            const auto id = static_cast<std::ptrdiff_t>(od * g.stride[0] + kd) -
                            static_cast<std::ptrdiff_t>(g.pad[0]);
            const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride[1] + kh) -
                            static_cast<std::ptrdiff_t>(g.pad[1]);
            if (id < 0 || ih < 0 || id >= static_cast<std::ptrdiff_t>(g.image[0]) ||
                ih >= static_cast<std::ptrdiff_t>(g.image[1])) {
              std::fill(dst, dst + width, A{0});
              dst += width;
              continue;
            }
            const A* src =
                image + ((c * g.image[0] + static_cast<std::size_t>(id)) * g.image[1] +
                         static_cast<std::size_t>(ih)) *
                            g.image[2];
            for (std::size_t ow = 0; ow < width; ++ow) {
              const auto iw = static_cast<std::ptrdiff_t>(ow * g.stride[2] + kw) -
                              static_cast<std::ptrdiff_t>(g.pad[2]);
              *dst++ = (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.image[2]))
                           ? A{0}
                           : src[iw];
            }
          }
        }
      }
    }
  }
}

// Scatter-add inverse of im2col.
template <typename A>
void col2im(const A* col, const Geometry& g, std::size_t row_begin,
            std::size_t row_end, A* image) {
  const std::size_t width = g.grid[2];
  const std::size_t n = (row_end - row_begin) * width;
  std::size_t r = 0;
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t kd = 0; kd < g.kernel[0]; ++kd) {
      for (std::size_t kh = 0; kh < g.kernel[1]; ++kh) {
        for (std::size_t kw = 0; kw < g.kernel[2]; ++kw, ++r) {
          const A* src = col + r * n;
          for (std::size_t row = row_begin; row < row_end; ++row, src += width) {
            const std::size_t od = row / g.grid[1];
            const std::size_t oh = row % g.grid[1];
            const auto id = static_cast<std::ptrdiff_t>(od * g.stride[0] + kd) -
                            static_cast<std::ptrdiff_t>(g.pad[0]);
            const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride[1] + kh) -
                            static_cast<std::ptrdiff_t>(g.pad[1]);
            if (id < 0 || ih < 0 || id >= static_cast<std::ptrdiff_t>(g.image[0]) ||
                ih >= static_cast<std::ptrdiff_t>(g.image[1])) {
              continue;
            }
            A* dst = image + ((c * g.image[0] + static_cast<std::size_t>(id)) * g.image[1] +
                              static_cast<std::size_t>(ih)) *
                                 g.image[2];
            for (std::size_t ow = 0; ow < width; ++ow) {
              const auto iw = static_cast<std::ptrdiff_t>(ow * g.stride[2] + kw) -
                              static_cast<std::ptrdiff_t>(g.pad[2]);
              if (iw >= 0 && iw < static_cast<std::ptrdiff_t>(g.image[2])) {
                dst[iw] += src[ow];
              }
            }
          }
        }
      }
    }
  }
}

// Pointer to the payload in accumulator precision; converts into `storage`
// only when T differs from its accumulator type.
template <typename T>
const accum_t<T>* widened(const BasicTensor<T>& t,
                          std::vector<accum_t<T>>& storage) {
  if constexpr (std::is_same_v<T, accum_t<T>>) {
    return t.data().data();
  } else {
    storage.resize(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) storage[i] = widen(t[i]);
    return storage.data();
  }
}

template <typename T>
BasicTensor<T> narrowed(Shape shape, const std::vector<accum_t<T>>& values) {
  if constexpr (std::is_same_v<T, accum_t<T>>) {
    return BasicTensor<T>(std::move(shape), values);
  } else {
    std::vector<T> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = narrow<T>(values[i]);
    return BasicTensor<T>(std::move(shape), std::move(out));
  }
}

void check_shape(const char* op, const char* what, const Shape& expected,
                 const Shape& actual) {
  if (expected.size() != actual.size()) {
    throw DimensionError(op, std::string(what) + " rank", expected.size(),
                         actual.size());
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (expected[i] != actual[i]) {
      throw DimensionError(op, std::string(what) + "[" + std::to_string(i) + "]",
                           expected[i], actual[i]);
    }
  }
}

void check_input(const char* op, const Shape& input, std::size_t channels,
                 const ConvParams& params) {
  params.validate();
  if (input.size() != params.spatial_rank() + 1) {
    throw DimensionError(op, "input rank", params.spatial_rank() + 1, input.size());
  }
  if (input[0] != channels) {
    throw DimensionError(op, "channels", channels, input[0]);
  }
}

void check_bias(const char* op, const Shape& bias, std::size_t channels) {
  if (element_count(bias) != channels) {
    throw DimensionError(op, "bias", channels, element_count(bias));
  }
}

template <typename A>
std::vector<A> channel_sums(const A* values, std::size_t channels,
                            std::size_t volume) {
  std::vector<A> sums(channels, A{0});
  for (std::size_t c = 0; c < channels; ++c) {
    A acc{0};
    const A* row = values + c * volume;
    for (std::size_t p = 0; p < volume; ++p) acc += row[p];
    sums[c] = acc;
  }
  return sums;
}

template <typename A>
void add_bias(std::vector<A>& out, const A* bias, std::size_t channels,
              std::size_t volume) {
  for (std::size_t c = 0; c < channels; ++c) {
    A* row = out.data() + c * volume;
    for (std::size_t p = 0; p < volume; ++p) row[p] += bias[c];
  }
}

}  // namespace

ConvParams ConvParams::uniform(std::size_t spatial_rank,
                               std::size_t in_channels,
                               std::size_t out_channels, std::size_t kernel,
                               std::size_t stride, std::size_t padding) {
  ConvParams p;
  p.kernel.assign(spatial_rank, kernel);
  p.stride.assign(spatial_rank, stride);
  p.padding.assign(spatial_rank, padding);
  p.in_channels = in_channels;
  p.out_channels = out_channels;
  return p;
}

std::size_t ConvParams::kernel_volume() const noexcept {
  std::size_t v = 1;
  for (auto k : kernel) v *= k;
  return v;
}

void ConvParams::validate() const {
  if (kernel.empty() || kernel.size() > 3) {
    throw ConfigError("convolution must have 1 to 3 spatial axes");
  }
  if (stride.size() != kernel.size() || padding.size() != kernel.size()) {
    throw ConfigError("kernel/stride/padding ranks differ");
  }
  for (std::size_t i = 0; i < kernel.size(); ++i) {
    if (kernel[i] == 0 || stride[i] == 0) {
      throw ConfigError("kernel and stride extents must be positive");
    }
  }
  if (in_channels == 0 || out_channels == 0) {
    throw ConfigError("channel counts must be positive");
  }
}

std::size_t ConvParams::output_extent(std::size_t axis, std::size_t in) const {
  const std::size_t padded = in + 2 * padding.at(axis);
  if (padded < kernel.at(axis)) {
    throw DimensionError("conv", "spatial[" + std::to_string(axis) + "]",
                         kernel[axis], padded,
                         "padded extent smaller than the kernel");
  }
  return (padded - kernel[axis]) / stride[axis] + 1;
}

std::size_t ConvParams::transposed_extent(std::size_t axis,
                                          std::size_t in) const {
  const std::size_t grown = (in - 1) * stride.at(axis) + kernel.at(axis);
  if (in == 0 || grown <= 2 * padding.at(axis)) {
    throw DimensionError("transposed_conv", "spatial[" + std::to_string(axis) + "]",
                         2 * padding[axis] + 1, grown,
                         "output extent would be empty");
  }
  return grown - 2 * padding[axis];
}

Shape ConvParams::output_shape(const Shape& input) const {
  Shape out{out_channels};
  for (std::size_t i = 0; i < spatial_rank(); ++i) {
    out.push_back(output_extent(i, input.at(i + 1)));
  }
  return out;
}

Shape ConvParams::transposed_output_shape(const Shape& input) const {
  Shape out{out_channels};
  for (std::size_t i = 0; i < spatial_rank(); ++i) {
    out.push_back(transposed_extent(i, input.at(i + 1)));
  }
  return out;
}

Shape ConvParams::weight_shape() const {
  Shape s{out_channels, in_channels};
  s.insert(s.end(), kernel.begin(), kernel.end());
  return s;
}

Shape ConvParams::transposed_weight_shape() const {
  Shape s{in_channels, out_channels};
  s.insert(s.end(), kernel.begin(), kernel.end());
  return s;
}

template <typename T>
BasicTensor<T> conv_forward(const BasicTensor<T>& input,
                            const BasicTensor<T>& weight,
                            const BasicTensor<T>& bias,
                            const ConvParams& params) {
  using A = accum_t<T>;
  check_input("conv_forward", input.shape(), params.in_channels, params);
  check_shape("conv_forward", "weight", params.weight_shape(), weight.shape());
  check_bias("conv_forward", bias.shape(), params.out_channels);

  const Shape out_shape = params.output_shape(input.shape());
  const Geometry g = make_geometry(params.in_channels, spatial_of(input.shape()),
                                   spatial_of(out_shape), params);
  const std::size_t outs = params.out_channels;
  const std::size_t positions = g.grid_volume();

  std::vector<A> in_store, w_store, b_store;
  const A* x = widened(input, in_store);
  const A* w_ptr = widened(weight, w_store);
  const A* b = widened(bias, b_store);
  Eigen::Map<const Mat<A>> w(w_ptr, outs, g.columns());

  std::vector<A> out(outs * positions, A{0});
  if (g.pointwise()) {
    Eigen::Map<const Mat<A>> xm(x, g.channels, positions);
    Eigen::Map<Mat<A>> om(out.data(), outs, positions);
    om.noalias() = w * xm;
  } else {
    const std::size_t chunk = g.rows_per_chunk();
    std::vector<A> col(g.columns() * chunk * g.grid[2]);
    for (std::size_t r0 = 0; r0 < g.grid_rows(); r0 += chunk) {
      const std::size_t r1 = std::min(g.grid_rows(), r0 + chunk);
      const std::size_t n = (r1 - r0) * g.grid[2];
      im2col(x, g, r0, r1, col.data());
      Eigen::Map<const Mat<A>> cm(col.data(), g.columns(), n);
      MatMap<A> om(out.data() + r0 * g.grid[2], outs, n,
                   Eigen::OuterStride<>(positions));
      om.noalias() = w * cm;
    }
  }
  add_bias(out, b, outs, positions);
  return narrowed<T>(out_shape, out);
}

template <typename T>
ConvGrads<T> conv_backward(const BasicTensor<T>& input,
                           const BasicTensor<T>& weight,
                           const ConvParams& params,
                           const BasicTensor<T>& grad_output) {
  using A = accum_t<T>;
  check_input("conv_backward", input.shape(), params.in_channels, params);
  check_shape("conv_backward", "weight", params.weight_shape(), weight.shape());
  const Shape out_shape = params.output_shape(input.shape());
  check_shape("conv_backward", "grad_output", out_shape, grad_output.shape());

  const Geometry g = make_geometry(params.in_channels, spatial_of(input.shape()),
                                   spatial_of(out_shape), params);
  const std::size_t outs = params.out_channels;
  const std::size_t positions = g.grid_volume();

  std::vector<A> in_store, w_store, go_store;
  const A* x = widened(input, in_store);
  const A* w_ptr = widened(weight, w_store);
  const A* go = widened(grad_output, go_store);
  Eigen::Map<const Mat<A>> w(w_ptr, outs, g.columns());

  Mat<A> gw = Mat<A>::Zero(outs, g.columns());
  std::vector<A> gx(input.size(), A{0});
  if (g.pointwise()) {
    Eigen::Map<const Mat<A>> xm(x, g.channels, positions);
    Eigen::Map<const Mat<A>> gom(go, outs, positions);
    Eigen::Map<Mat<A>> gxm(gx.data(), g.channels, positions);
    gw.noalias() = gom * xm.transpose();
    gxm.noalias() = w.transpose() * gom;
  } else {
    const std::size_t chunk = g.rows_per_chunk();
    std::vector<A> col(g.columns() * chunk * g.grid[2]);
    std::vector<A> gcol(col.size());
    for (std::size_t r0 = 0; r0 < g.grid_rows(); r0 += chunk) {
      const std::size_t r1 = std::min(g.grid_rows(), r0 + chunk);
      const std::size_t n = (r1 - r0) * g.grid[2];
      im2col(x, g, r0, r1, col.data());
      Eigen::Map<const Mat<A>> cm(col.data(), g.columns(), n);
      ConstMatMap<A> gom(go + r0 * g.grid[2], outs, n,
                         Eigen::OuterStride<>(positions));
      gw.noalias() += gom * cm.transpose();
      Eigen::Map<Mat<A>> gcm(gcol.data(), g.columns(), n);
      gcm.noalias() = w.transpose() * gom;
      col2im(gcol.data(), g, r0, r1, gx.data());
    }
  }
  const std::vector<A> gb = channel_sums(go, outs, positions);
  return ConvGrads<T>{
      narrowed<T>(input.shape(), gx),
      narrowed<T>(weight.shape(), std::vector<A>(gw.data(), gw.data() + gw.size())),
      narrowed<T>(Shape{outs}, gb)};
}

template <typename T>
BasicTensor<T> transposed_conv_forward(const BasicTensor<T>& input,
                                       const BasicTensor<T>& weight,
                                       const BasicTensor<T>& bias,
                                       const ConvParams& params) {
  using A = accum_t<T>;
  check_input("transposed_conv_forward", input.shape(), params.in_channels, params);
  check_shape("transposed_conv_forward", "weight", params.transposed_weight_shape(),
              weight.shape());
  check_bias("transposed_conv_forward", bias.shape(), params.out_channels);

  const Shape out_shape = params.transposed_output_shape(input.shape());
  const Geometry g = make_geometry(params.out_channels, spatial_of(out_shape),
                                   spatial_of(input.shape()), params);
  const std::size_t ins = params.in_channels;
  const std::size_t positions = g.grid_volume();

  std::vector<A> in_store, w_store, b_store;
  const A* x = widened(input, in_store);
  const A* w_ptr = widened(weight, w_store);
  const A* b = widened(bias, b_store);
  Eigen::Map<const Mat<A>> w(w_ptr, ins, g.columns());

  std::vector<A> out(element_count(out_shape), A{0});
  const std::size_t chunk = g.rows_per_chunk();
  std::vector<A> col(g.columns() * chunk * g.grid[2]);
  for (std::size_t r0 = 0; r0 < g.grid_rows(); r0 += chunk) {
    const std::size_t r1 = std::min(g.grid_rows(), r0 + chunk);
    const std::size_t n = (r1 - r0) * g.grid[2];
    ConstMatMap<A> xm(x + r0 * g.grid[2], ins, n, Eigen::OuterStride<>(positions));
    Eigen::Map<Mat<A>> cm(col.data(), g.columns(), n);
    cm.noalias() = w.transpose() * xm;
    col2im(col.data(), g, r0, r1, out.data());
  }
  add_bias(out, b, params.out_channels, g.image_volume());
  return narrowed<T>(out_shape, out);
}

template <typename T>
ConvGrads<T> transposed_conv_backward(const BasicTensor<T>& input,
                                      const BasicTensor<T>& weight,
                                      const ConvParams& params,
                                      const BasicTensor<T>& grad_output) {
  using A = accum_t<T>;
  check_input("transposed_conv_backward", input.shape(), params.in_channels, params);
  check_shape("transposed_conv_backward", "weight", params.transposed_weight_shape(),
              weight.shape());
  const Shape out_shape = params.transposed_output_shape(input.shape());
  check_shape("transposed_conv_backward", "grad_output", out_shape,
              grad_output.shape());

  const Geometry g = make_geometry(params.out_channels, spatial_of(out_shape),
                                   spatial_of(input.shape()), params);
  const std::size_t ins = params.in_channels;
  const std::size_t positions = g.grid_volume();

  std::vector<A> in_store, w_store, go_store;
  const A* x = widened(input, in_store);
  const A* w_ptr = widened(weight, w_store);
  const A* go = widened(grad_output, go_store);
  Eigen::Map<const Mat<A>> w(w_ptr, ins, g.columns());

  Mat<A> gw = Mat<A>::Zero(ins, g.columns());
  std::vector<A> gx(input.size(), A{0});
  const std::size_t chunk = g.rows_per_chunk();
  std::vector<A> gcol(g.columns() * chunk * g.grid[2]);
  for (std::size_t r0 = 0; r0 < g.grid_rows(); r0 += chunk) {
    const std::size_t r1 = std::min(g.grid_rows(), r0 + chunk);
    const std::size_t n = (r1 - r0) * g.grid[2];
    im2col(go, g, r0, r1, gcol.data());
    Eigen::Map<const Mat<A>> gcm(gcol.data(), g.columns(), n);
    ConstMatMap<A> xm(x + r0 * g.grid[2], ins, n, Eigen::OuterStride<>(positions));
    MatMap<A> gxm(gx.data() + r0 * g.grid[2], ins, n, Eigen::OuterStride<>(positions));
    gxm.noalias() = w * gcm;
    gw.noalias() += xm * gcm.transpose();
  }
  const std::vector<A> gb = channel_sums(go, params.out_channels, g.image_volume());
  return ConvGrads<T>{
      narrowed<T>(input.shape(), gx),
      narrowed<T>(weight.shape(), std::vector<A>(gw.data(), gw.data() + gw.size())),
      narrowed<T>(Shape{params.out_channels}, gb)};
}

namespace {

struct Planes {
  std::size_t count;
  std::size_t height;
  std::size_t width;
};

Planes planes_of(const char* op, const Shape& shape) {
  if (shape.size() < 2) throw DimensionError(op, "rank", 3, shape.size());
  const std::size_t h = shape[shape.size() - 2];
  const std::size_t w = shape[shape.size() - 1];
  return {element_count(shape) / std::max<std::size_t>(1, h * w), h, w};
}

}  // namespace

template <typename T>
BasicTensor<T> avgpool2d_forward(const BasicTensor<T>& input) {
  using A = accum_t<T>;
  const Planes p = planes_of("avgpool2d", input.shape());
  if (p.height % 2 != 0) {
    throw DimensionError("avgpool2d", "spatial[0]", p.height + 1, p.height,
                         "odd extent; pad the input to an even size first");
  }
  if (p.width % 2 != 0) {
    throw DimensionError("avgpool2d", "spatial[1]", p.width + 1, p.width,
                         "odd extent; pad the input (pad_horizontal) first");
  }
  Shape out_shape = input.shape();
  out_shape[out_shape.size() - 2] /= 2;
  out_shape[out_shape.size() - 1] /= 2;
  const std::size_t oh = p.height / 2, ow = p.width / 2;
  BasicTensor<T> out(out_shape);
  for (std::size_t c = 0; c < p.count; ++c) {
    const T* src = input.data().data() + c * p.height * p.width;
    T* dst = out.data().data() + c * oh * ow;
    for (std::size_t y = 0; y < oh; ++y) {
      const T* r0 = src + 2 * y * p.width;
      const T* r1 = r0 + p.width;
      for (std::size_t x = 0; x < ow; ++x) {
        const A s = widen(r0[2 * x]) + widen(r0[2 * x + 1]) + widen(r1[2 * x]) +
                    widen(r1[2 * x + 1]);
        dst[y * ow + x] = narrow<T>(s / A{4});
      }
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> avgpool2d_backward(const BasicTensor<T>& grad_output) {
  using A = accum_t<T>;
  const Planes p = planes_of("avgpool2d_backward", grad_output.shape());
  Shape in_shape = grad_output.shape();
  in_shape[in_shape.size() - 2] *= 2;
  in_shape[in_shape.size() - 1] *= 2;
  const std::size_t iw = 2 * p.width;
  BasicTensor<T> grad(in_shape);
  for (std::size_t c = 0; c < p.count; ++c) {
    const T* src = grad_output.data().data() + c * p.height * p.width;
    T* dst = grad.data().data() + c * 4 * p.height * p.width;
    for (std::size_t y = 0; y < 2 * p.height; ++y) {
      for (std::size_t x = 0; x < iw; ++x) {
        dst[y * iw + x] = narrow<T>(widen(src[(y / 2) * p.width + x / 2]) / A{4});
      }
    }
  }
  return grad;
}

template <typename T>
BasicTensor<T> upsample_nearest2d_forward(const BasicTensor<T>& input) {
  const Planes p = planes_of("upsample_nearest2d", input.shape());
  Shape out_shape = input.shape();
  out_shape[out_shape.size() - 2] *= 2;
  out_shape[out_shape.size() - 1] *= 2;
  const std::size_t ow = 2 * p.width;
  BasicTensor<T> out(out_shape);
  for (std::size_t c = 0; c < p.count; ++c) {
    const T* src = input.data().data() + c * p.height * p.width;
    T* dst = out.data().data() + c * 4 * p.height * p.width;
    for (std::size_t y = 0; y < 2 * p.height; ++y) {
      const T* row = src + (y / 2) * p.width;
      for (std::size_t x = 0; x < ow; ++x) dst[y * ow + x] = row[x / 2];
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> upsample_nearest2d_backward(const BasicTensor<T>& grad_output) {
  using A = accum_t<T>;
  const Planes p = planes_of("upsample_nearest2d_backward", grad_output.shape());
  if (p.height % 2 != 0 || p.width % 2 != 0) {
    throw DimensionError("upsample_nearest2d_backward", "spatial",
                         p.height + p.height % 2, p.height);
  }
  Shape in_shape = grad_output.shape();
  in_shape[in_shape.size() - 2] /= 2;
  in_shape[in_shape.size() - 1] /= 2;
  const std::size_t ih = p.height / 2, iw = p.width / 2;
  BasicTensor<T> grad(in_shape);
  for (std::size_t c = 0; c < p.count; ++c) {
    const T* src = grad_output.data().data() + c * p.height * p.width;
    T* dst = grad.data().data() + c * ih * iw;
    for (std::size_t y = 0; y < ih; ++y) {
      const T* r0 = src + 2 * y * p.width;
      const T* r1 = r0 + p.width;
      for (std::size_t x = 0; x < iw; ++x) {
        const A s = widen(r0[2 * x]) + widen(r0[2 * x + 1]) + widen(r1[2 * x]) +
                    widen(r1[2 * x + 1]);
        dst[y * iw + x] = narrow<T>(s);
      }
    }
  }
  return grad;
}

std::string to_string(const Activation& activation) {
  switch (activation.kind) {
    case ActivationKind::kIdentity:
      return "identity";
    case ActivationKind::kRelu:
      return "relu";
    case ActivationKind::kSigmoid:
      return "sigmoid";
    case ActivationKind::kExpAffine:
      return "exp_affine";
  }
  return "unknown";
}

namespace {

template <typename A>
A sigmoid(A x) {
  if (x >= A{0}) return A{1} / (A{1} + std::exp(-x));
  const A e = std::exp(x);
  return e / (A{1} + e);
}

}  // namespace

template <typename T>
BasicTensor<T> activation_forward(const BasicTensor<T>& input,
                                  const Activation& activation) {
  using A = accum_t<T>;
  if (activation.kind == ActivationKind::kIdentity) return input;
  BasicTensor<T> out(input.shape());
  const A a = static_cast<A>(activation.a);
  const A b = static_cast<A>(activation.b);
  const A knee = static_cast<A>(kExpAffineKnee);
  const A knee_x = std::log(knee / b);
  for (std::size_t i = 0; i < input.size(); ++i) {
    const A x = widen(input[i]);
    A y{};
    switch (activation.kind) {
      case ActivationKind::kRelu:
        y = (x > A{0} || x != x) ? x : A{0};  // NaN passes through
        break;
      case ActivationKind::kSigmoid:
        y = sigmoid(x);
        break;
      case ActivationKind::kExpAffine:
        y = x <= knee_x ? a + b * std::exp(x) : a + knee * (A{1} + x - knee_x);
        break;
      case ActivationKind::kIdentity:
        y = x;
        break;
    }
    out[i] = narrow<T>(y);
  }
  return out;
}

template <typename T>
BasicTensor<T> activation_backward(const BasicTensor<T>& input,
                                   const BasicTensor<T>& output,
                                   const BasicTensor<T>& grad_output,
                                   const Activation& activation) {
  using A = accum_t<T>;
  check_shape("activation_backward", "grad_output", input.shape(),
              grad_output.shape());
  if (activation.kind == ActivationKind::kIdentity) return grad_output;
  check_shape("activation_backward", "output", input.shape(), output.shape());
  BasicTensor<T> grad(input.shape());
  const A a = static_cast<A>(activation.a);
  const A knee = static_cast<A>(kExpAffineKnee);
  const A knee_x = std::log(knee / static_cast<A>(activation.b));
  for (std::size_t i = 0; i < input.size(); ++i) {
    const A g = widen(grad_output[i]);
    A d{};
    switch (activation.kind) {
      case ActivationKind::kRelu:
        d = widen(input[i]) > A{0} ? g : A{0};
        break;
      case ActivationKind::kSigmoid: {
        const A y = widen(output[i]);
        d = g * y * (A{1} - y);
        break;
      }
      case ActivationKind::kExpAffine:
        // d/dx (a + b e^x) = b e^x = y - a; constant slope past the knee
        d = widen(input[i]) <= knee_x ? g * (widen(output[i]) - a) : g * knee;
        break;
      case ActivationKind::kIdentity:
        d = g;
        break;
    }
    grad[i] = narrow<T>(d);
  }
  return grad;
}

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  check_shape("add", "rhs", a.shape(), b.shape());
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out[i] = narrow<T>(widen(a[i]) + widen(b[i]));
  }
  return out;
}

#define BCAE_INSTANTIATE_OPS(T)                                               \
  template BasicTensor<T> conv_forward(const BasicTensor<T>&,                 \
                                       const BasicTensor<T>&,                 \
                                       const BasicTensor<T>&, const ConvParams&); \
  template ConvGrads<T> conv_backward(const BasicTensor<T>&,                  \
                                      const BasicTensor<T>&, const ConvParams&, \
                                      const BasicTensor<T>&);                 \
  template BasicTensor<T> transposed_conv_forward(                            \
      const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,    \
      const ConvParams&);                                                     \
  template ConvGrads<T> transposed_conv_backward(                             \
      const BasicTensor<T>&, const BasicTensor<T>&, const ConvParams&,        \
      const BasicTensor<T>&);                                                 \
  template BasicTensor<T> avgpool2d_forward(const BasicTensor<T>&);           \
  template BasicTensor<T> avgpool2d_backward(const BasicTensor<T>&);          \
  template BasicTensor<T> upsample_nearest2d_forward(const BasicTensor<T>&);  \
  template BasicTensor<T> upsample_nearest2d_backward(const BasicTensor<T>&); \
  template BasicTensor<T> activation_forward(const BasicTensor<T>&,           \
                                             const Activation&);              \
  template BasicTensor<T> activation_backward(                                \
      const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,    \
      const Activation&);                                                     \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);

BCAE_INSTANTIATE_OPS(float)
BCAE_INSTANTIATE_OPS(double)
BCAE_INSTANTIATE_OPS(Half)

#undef BCAE_INSTANTIATE_OPS

}  // namespace bcae
