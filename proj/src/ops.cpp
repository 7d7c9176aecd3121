// Copyright 2026 The EMT-Net Authors
// SPDX-License-Identifier: Apache-2.0

#include "emtnet/ops.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "emtnet/kernels.hpp"

namespace emtnet {

namespace {

using index_t = std::int64_t;

struct ConvDims {
  std::size_t batch, in_c, in_h, in_w;
  std::size_t out_c, out_h, out_w;
  std::size_t kernel_h, kernel_w;
};

void require_kernel_extent(const Shape& kernel, const ConvSpec& spec) {
  if (kernel.size() != 4 || kernel[2] != spec.kernel_h || kernel[3] != spec.kernel_w) {
    throw ShapeError("kernel shape " + to_string(kernel) + " does not match " + std::to_string(spec.kernel_h) + "x" +
                     std::to_string(spec.kernel_w) + " " + to_string(spec.mode) + " spec");
  }
}

ConvDims conv_dims(const Shape& in, const Shape& kernel, const ConvSpec& spec) {
  spec.validate();
  if (in.size() != 4) throw ShapeError("convolution input must be N x C x H x W, got " + to_string(in));
  require_kernel_extent(kernel, spec);
  ConvDims d{in[0], in[1], in[2], in[3], 0, 0, 0, spec.kernel_h, spec.kernel_w};
  switch (spec.mode) {
    case ConvMode::standard:
    case ConvMode::pointwise:
      if (kernel[1] != in[1]) {
        throw ShapeError("input channels " + std::to_string(in[1]) + " != kernel in-channels " +
                         std::to_string(kernel[1]) + " (input " + to_string(in) + ", kernel " + to_string(kernel) +
                         ")");
      }
      d.out_c = kernel[0];
      d.out_h = spec.output_extent(in[2], spec.kernel_h);
      d.out_w = spec.output_extent(in[3], spec.kernel_w);
      break;
    case ConvMode::depthwise:
      if (kernel[0] != in[1] || kernel[1] != 1) {
        throw ShapeError("depthwise kernel " + to_string(kernel) + " does not match input channels " +
                         std::to_string(in[1]));
      }
      d.out_c = in[1];
      d.out_h = spec.output_extent(in[2], spec.kernel_h);
      d.out_w = spec.output_extent(in[3], spec.kernel_w);
      break;
    case ConvMode::transposed:
      if (kernel[0] != in[1]) {
        throw ShapeError("input channels " + std::to_string(in[1]) + " != transposed kernel in-channels " +
                         std::to_string(kernel[0]) + " (kernel " + to_string(kernel) + ")");
      }
      spec.output_padding(in[2], spec.kernel_h);
      spec.output_padding(in[3], spec.kernel_w);
      d.out_c = kernel[1];
      d.out_h = spec.transposed_extent(in[2]);
      d.out_w = spec.transposed_extent(in[3]);
      break;
  }
  return d;
}

kernels::PatchGeometry forward_patches(const ConvDims& d, const ConvSpec& spec) {
  return {d.in_c, d.in_h, d.in_w, d.kernel_h, d.kernel_w, spec.stride, spec.padding, d.out_h, d.out_w};
}

// The transposed conv is the adjoint of a conv over its *output* image.
kernels::PatchGeometry transposed_patches(const ConvDims& d, const ConvSpec& spec) {
  return {d.out_c, d.out_h, d.out_w, d.kernel_h, d.kernel_w, spec.stride, spec.padding, d.in_h, d.in_w};
}

kernels::DepthwiseGeometry depthwise_geometry(const ConvDims& d, const ConvSpec& spec) {
  return {d.batch, d.in_c, d.in_h, d.in_w, d.kernel_h, d.kernel_w, spec.stride, spec.padding, d.out_h, d.out_w};
}

bool is_direct(const ConvDims& d, const ConvSpec& spec) {
  return d.kernel_h == 1 && d.kernel_w == 1 && spec.stride == 1 && spec.padding == 0;
}

template <typename T>
void add_bias(BasicTensor<T>& out, const BasicTensor<T>* bias) {
  if (bias == nullptr) return;
  const std::size_t channels = out.dim(1);
  if (bias->size() != channels) {
    throw ShapeError("bias length " + std::to_string(bias->size()) + " != output channels " +
                     std::to_string(channels));
  }
  const std::size_t plane = out.dim(2) * out.dim(3);
  const index_t planes = static_cast<index_t>(out.dim(0) * channels);
  T* o = out.data();
#pragma omp parallel for schedule(static)
  for (index_t nc = 0; nc < planes; ++nc) {
    const T b = (*bias)[static_cast<std::size_t>(nc) % channels];
    T* p = o + static_cast<std::size_t>(nc) * plane;
    for (std::size_t i = 0; i < plane; ++i) p[i] += b;
  }
}

template <typename T>
BasicTensor<T> bias_gradient(const BasicTensor<T>& grad_out) {
  const std::size_t channels = grad_out.dim(1);
  const std::size_t plane = grad_out.dim(2) * grad_out.dim(3);
  BasicTensor<T> gb(Shape{channels});
  for (std::size_t c = 0; c < channels; ++c) {
    double acc = 0.0;
    for (std::size_t n = 0; n < grad_out.dim(0); ++n) {
      const T* p = grad_out.data() + (n * channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) acc += static_cast<double>(p[i]);
    }
    gb[c] = static_cast<T>(acc);
  }
  return gb;
}

template <typename T>
void require_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

template <typename T>
BasicTensor<T> conv_im2col(const BasicTensor<T>& input, const BasicTensor<T>& kernel, const ConvDims& d,
                           const ConvSpec& spec) {
  BasicTensor<T> out(Shape{d.batch, d.out_c, d.out_h, d.out_w});
  const auto g = forward_patches(d, spec);
  const std::size_t reduce = d.in_c * d.kernel_h * d.kernel_w;
  const std::size_t cells = d.out_h * d.out_w;
  const bool direct = is_direct(d, spec);
  std::vector<T> col(direct ? 0 : reduce * cells);
  for (std::size_t n = 0; n < d.batch; ++n) {
    const T* image = input.data() + n * d.in_c * d.in_h * d.in_w;
    const T* src = image;
    if (!direct) {
      kernels::im2col(image, g, col.data());
      src = col.data();
    }
    kernels::gemm<T>(d.out_c, cells, reduce, {kernel.data(), reduce, 1}, src, cells, out.data() + n * d.out_c * cells,
                     cells, false);
  }
  return out;
}

template <typename T>
ConvGrads<T> conv_im2col_backward(const BasicTensor<T>& input, const BasicTensor<T>& kernel, const ConvDims& d,
                                  const ConvSpec& spec, const BasicTensor<T>& grad_out) {
  ConvGrads<T> grads{BasicTensor<T>(input.shape()), BasicTensor<T>(kernel.shape()), {}};
  const auto g = forward_patches(d, spec);
  const std::size_t reduce = d.in_c * d.kernel_h * d.kernel_w;
  const std::size_t cells = d.out_h * d.out_w;
  const std::size_t in_size = d.in_c * d.in_h * d.in_w;
  const bool direct = is_direct(d, spec);
  std::vector<T> col(direct ? 0 : reduce * cells);
  std::vector<T> grad_col(direct ? 0 : reduce * cells);
  for (std::size_t n = 0; n < d.batch; ++n) {
    const T* image = input.data() + n * in_size;
    const T* gy = grad_out.data() + n * d.out_c * cells;
    const T* src = image;
    if (!direct) {
      kernels::im2col(image, g, col.data());
      src = col.data();
    }
    kernels::gemm_nt<T>(d.out_c, reduce, cells, gy, cells, src, cells, grads.kernel.data(), reduce, n > 0);
    T* gx = grads.input.data() + n * in_size;
    T* dst = direct ? gx : grad_col.data();
    kernels::gemm<T>(reduce, cells, d.out_c, {kernel.data(), 1, reduce}, gy, cells, dst, cells, false);
    if (!direct) kernels::col2im(grad_col.data(), g, gx);
  }
  return grads;
}

template <typename T>
BasicTensor<T> conv_transposed(const BasicTensor<T>& input, const BasicTensor<T>& kernel, const ConvDims& d,
                               const ConvSpec& spec) {
  BasicTensor<T> out(Shape{d.batch, d.out_c, d.out_h, d.out_w});
  const auto g = transposed_patches(d, spec);
  const std::size_t rows = d.out_c * d.kernel_h * d.kernel_w;
  const std::size_t cells = d.in_h * d.in_w;
  std::vector<T> col(rows * cells);
  for (std::size_t n = 0; n < d.batch; ++n) {
    const T* x = input.data() + n * d.in_c * cells;
    kernels::gemm<T>(rows, cells, d.in_c, {kernel.data(), 1, rows}, x, cells, col.data(), cells, false);
    kernels::col2im(col.data(), g, out.data() + n * d.out_c * d.out_h * d.out_w);
  }
  return out;
}

template <typename T>
ConvGrads<T> conv_transposed_backward(const BasicTensor<T>& input, const BasicTensor<T>& kernel, const ConvDims& d,
                                      const ConvSpec& spec, const BasicTensor<T>& grad_out) {
  ConvGrads<T> grads{BasicTensor<T>(input.shape()), BasicTensor<T>(kernel.shape()), {}};
  const auto g = transposed_patches(d, spec);
  const std::size_t rows = d.out_c * d.kernel_h * d.kernel_w;
  const std::size_t cells = d.in_h * d.in_w;
  std::vector<T> col(rows * cells);
  for (std::size_t n = 0; n < d.batch; ++n) {
    kernels::im2col(grad_out.data() + n * d.out_c * d.out_h * d.out_w, g, col.data());
    const T* x = input.data() + n * d.in_c * cells;
    kernels::gemm<T>(d.in_c, cells, rows, {kernel.data(), rows, 1}, col.data(), cells,
                     grads.input.data() + n * d.in_c * cells, cells, false);
    kernels::gemm_nt<T>(d.in_c, rows, cells, x, cells, col.data(), cells, grads.kernel.data(), rows, n > 0);
  }
  return grads;
}

template <typename T>
BasicTensor<T> conv_depthwise(const BasicTensor<T>& input, const BasicTensor<T>& kernel, const ConvDims& d,
                              const ConvSpec& spec) {
  BasicTensor<T> out(Shape{d.batch, d.out_c, d.out_h, d.out_w});
  kernels::depthwise_forward(input.data(), kernel.data(), depthwise_geometry(d, spec), out.data());
  return out;
}

}  // namespace

Shape conv_output_shape(const Shape& input_shape, const Shape& kernel_shape, const ConvSpec& spec) {
  const ConvDims d = conv_dims(input_shape, kernel_shape, spec);
  return {d.batch, d.out_c, d.out_h, d.out_w};
}

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernel, const BasicTensor<T>* bias,
                      const ConvSpec& spec) {
  const ConvDims d = conv_dims(input.shape(), kernel.shape(), spec);
  BasicTensor<T> out;
  switch (spec.mode) {
    case ConvMode::standard:
    case ConvMode::pointwise:
      out = conv_im2col(input, kernel, d, spec);
      break;
    case ConvMode::depthwise:
      out = conv_depthwise(input, kernel, d, spec);
      break;
    case ConvMode::transposed:
      out = conv_transposed(input, kernel, d, spec);
      break;
  }
  add_bias(out, bias);
  return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& kernel, bool has_bias,
                             const ConvSpec& spec, const BasicTensor<T>& grad_out) {
  const ConvDims d = conv_dims(input.shape(), kernel.shape(), spec);
  const Shape expected{d.batch, d.out_c, d.out_h, d.out_w};
  if (grad_out.shape() != expected) {
    throw ShapeError("upstream gradient " + to_string(grad_out.shape()) + " does not match conv output " +
                     to_string(expected));
  }
  ConvGrads<T> grads;
  switch (spec.mode) {
    case ConvMode::standard:
    case ConvMode::pointwise:
      grads = conv_im2col_backward(input, kernel, d, spec, grad_out);
      break;
    case ConvMode::depthwise: {
      grads.input = BasicTensor<T>(input.shape());
      grads.kernel = BasicTensor<T>(kernel.shape());
      const auto g = depthwise_geometry(d, spec);
      kernels::depthwise_backward_input(grad_out.data(), kernel.data(), g, grads.input.data());
      kernels::depthwise_backward_kernel(grad_out.data(), input.data(), g, grads.kernel.data());
      break;
    }
    case ConvMode::transposed:
      grads = conv_transposed_backward(input, kernel, d, spec, grad_out);
      break;
  }
  if (has_bias) grads.bias = bias_gradient(grad_out);
  return grads;
}

template <typename T>
BasicTensor<T> depthwise_conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernel, const ConvSpec& spec) {
  if (spec.mode != ConvMode::depthwise) throw std::invalid_argument("depthwise_conv2d requires a depthwise spec");
  return conv2d<T>(input, kernel, nullptr, spec);
}

template <typename T>
BasicTensor<T> transposed_conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernel, const ConvSpec& spec) {
  if (spec.mode != ConvMode::transposed) {
    throw std::invalid_argument("transposed_conv2d requires a transposed spec, got " + to_string(spec.mode));
  }
  return conv2d<T>(input, kernel, nullptr, spec);
}

template <typename T>
BatchNormState<T> BatchNormState<T>::identity(std::size_t channels) {
  BatchNormState s;
  s.gamma = BasicTensor<T>(Shape{channels}, T(1));
  s.beta = BasicTensor<T>(Shape{channels}, T(0));
  s.running_mean = BasicTensor<T>(Shape{channels}, T(0));
  s.running_var = BasicTensor<T>(Shape{channels}, T(1));
  return s;
}

namespace {

struct ChannelLayout {
  std::size_t batch, channels, plane;
};

ChannelLayout channel_layout(const Shape& s) {
  if (s.size() == 4) return {s[0], s[1], s[2] * s[3]};
  if (s.size() == 2) return {s[0], s[1], 1};
  throw ShapeError("batch_norm expects N x C or N x C x H x W input, got " + to_string(s));
}

}  // namespace

template <typename T>
BasicTensor<T> batch_norm(const BasicTensor<T>& input, BatchNormState<T>& state, BatchNormCache<T>* cache) {
  if (!(state.epsilon > 0.0)) throw std::invalid_argument("batch_norm epsilon must be positive");
  if (!(state.momentum > 0.0 && state.momentum < 1.0)) {
    throw std::invalid_argument("batch_norm momentum must lie in (0, 1)");
  }
  const ChannelLayout L = channel_layout(input.shape());
  if (state.gamma.size() != L.channels || state.beta.size() != L.channels ||
      state.running_mean.size() != L.channels || state.running_var.size() != L.channels) {
    throw ShapeError("batch_norm parameters of length " + std::to_string(state.gamma.size()) +
                     " do not match input channels " + std::to_string(L.channels));
  }
  BasicTensor<T> out(input.shape());
  BasicTensor<T> normalized(input.shape());
  std::vector<double> inv_std(L.channels);
  const double count = static_cast<double>(L.batch * L.plane);
  const index_t channels = static_cast<index_t>(L.channels);

#pragma omp parallel for schedule(static)
  for (index_t ci = 0; ci < channels; ++ci) {
    const std::size_t c = static_cast<std::size_t>(ci);
    double mean = 0.0;
    double var = 0.0;
    if (state.mode == Mode::train) {
      for (std::size_t n = 0; n < L.batch; ++n) {
        const T* p = input.data() + (n * L.channels + c) * L.plane;
        for (std::size_t i = 0; i < L.plane; ++i) mean += static_cast<double>(p[i]);
      }
      mean /= count;
      for (std::size_t n = 0; n < L.batch; ++n) {
        const T* p = input.data() + (n * L.channels + c) * L.plane;
        for (std::size_t i = 0; i < L.plane; ++i) {
          const double dv = static_cast<double>(p[i]) - mean;
          var += dv * dv;
        }
      }
      var /= count;
      const double unbiased = count > 1.0 ? var * count / (count - 1.0) : var;
      state.running_mean[c] =
          static_cast<T>(state.momentum * static_cast<double>(state.running_mean[c]) + (1.0 - state.momentum) * mean);
      state.running_var[c] = static_cast<T>(state.momentum * static_cast<double>(state.running_var[c]) +
                                            (1.0 - state.momentum) * unbiased);
    } else {
      mean = static_cast<double>(state.running_mean[c]);
      var = static_cast<double>(state.running_var[c]);
    }
    const double istd = 1.0 / std::sqrt(var + state.epsilon);
    inv_std[c] = istd;
    const double g = static_cast<double>(state.gamma[c]);
    const double b = static_cast<double>(state.beta[c]);
    for (std::size_t n = 0; n < L.batch; ++n) {
      const std::size_t off = (n * L.channels + c) * L.plane;
      for (std::size_t i = 0; i < L.plane; ++i) {
        const double xh = (static_cast<double>(input[off + i]) - mean) * istd;
        normalized[off + i] = static_cast<T>(xh);
        out[off + i] = static_cast<T>(g * xh + b);
      }
    }
  }
  if (cache != nullptr) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
    cache->mode = state.mode;
  }
  return out;
}

template <typename T>
BatchNormGrads<T> batch_norm_backward(const BatchNormCache<T>& cache, const BasicTensor<T>& gamma,
                                      const BasicTensor<T>& grad_out) {
  require_same_shape(cache.normalized, grad_out, "batch_norm_backward");
  const ChannelLayout L = channel_layout(grad_out.shape());
  BatchNormGrads<T> grads{BasicTensor<T>(grad_out.shape()), BasicTensor<T>(Shape{L.channels}),
                          BasicTensor<T>(Shape{L.channels})};
  const double count = static_cast<double>(L.batch * L.plane);
  const index_t channels = static_cast<index_t>(L.channels);

#pragma omp parallel for schedule(static)
  for (index_t ci = 0; ci < channels; ++ci) {
    const std::size_t c = static_cast<std::size_t>(ci);
    double sum_gy = 0.0;
    double sum_gy_xh = 0.0;
    for (std::size_t n = 0; n < L.batch; ++n) {
      const std::size_t off = (n * L.channels + c) * L.plane;
      for (std::size_t i = 0; i < L.plane; ++i) {
        const double gy = static_cast<double>(grad_out[off + i]);
        sum_gy += gy;
        sum_gy_xh += gy * static_cast<double>(cache.normalized[off + i]);
      }
    }
    grads.beta[c] = static_cast<T>(sum_gy);
    grads.gamma[c] = static_cast<T>(sum_gy_xh);
    const double scale = static_cast<double>(gamma[c]) * cache.inv_std[c];
    for (std::size_t n = 0; n < L.batch; ++n) {
      const std::size_t off = (n * L.channels + c) * L.plane;
      for (std::size_t i = 0; i < L.plane; ++i) {
        const double gy = static_cast<double>(grad_out[off + i]);
        double gx = scale * gy;
        if (cache.mode == Mode::train) {
          const double xh = static_cast<double>(cache.normalized[off + i]);
          gx = scale * (gy - sum_gy / count - xh * sum_gy_xh / count);
        }
        grads.input[off + i] = static_cast<T>(gx);
      }
    }
  }
  return grads;
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input) {
  BasicTensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > T(0) ? input[i] : T(0);
  return out;
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_out) {
  require_same_shape(input, grad_out, "relu_backward");
  BasicTensor<T> gx(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) gx[i] = input[i] > T(0) ? grad_out[i] : T(0);
  return gx;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& input) {
  BasicTensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = static_cast<T>(sigmoid(static_cast<double>(input[i])));
  return out;
}

template <typename T>
BasicTensor<T> sigmoid_backward(const BasicTensor<T>& output, const BasicTensor<T>& grad_out) {
  require_same_shape(output, grad_out, "sigmoid_backward");
  BasicTensor<T> gx(output.shape());
  for (std::size_t i = 0; i < output.size(); ++i) {
    const double s = static_cast<double>(output[i]);
    gx[i] = static_cast<T>(static_cast<double>(grad_out[i]) * s * (1.0 - s));
  }
  return gx;
}

template <typename T>
BasicTensor<T> global_avg_pool(const BasicTensor<T>& input) {
  require_rank(input, 4, "global_avg_pool");
  const std::size_t rows = input.dim(0) * input.dim(1);
  const std::size_t plane = input.dim(2) * input.dim(3);
  BasicTensor<T> out(Shape{input.dim(0), input.dim(1)});
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    const T* p = input.data() + r * plane;
    for (std::size_t i = 0; i < plane; ++i) acc += static_cast<double>(p[i]);
    out[r] = static_cast<T>(acc / static_cast<double>(plane));
  }
  return out;
}

template <typename T>
BasicTensor<T> global_avg_pool_backward(const Shape& input_shape, const BasicTensor<T>& grad_out) {
  if (input_shape.size() != 4 || grad_out.shape() != Shape{input_shape[0], input_shape[1]}) {
    throw ShapeError("global_avg_pool_backward: gradient " + to_string(grad_out.shape()) + " vs input " +
                     to_string(input_shape));
  }
  const std::size_t plane = input_shape[2] * input_shape[3];
  BasicTensor<T> gx(input_shape);
  for (std::size_t r = 0; r < grad_out.size(); ++r) {
    const T v = static_cast<T>(static_cast<double>(grad_out[r]) / static_cast<double>(plane));
    std::fill(gx.data() + r * plane, gx.data() + (r + 1) * plane, v);
  }
  return gx;
}

template <typename T>
BasicTensor<T> dense(const BasicTensor<T>& input, const BasicTensor<T>& weights, const BasicTensor<T>& bias) {
  require_rank(input, 2, "dense input");
  require_rank(weights, 2, "dense weights");
  const std::size_t n = input.dim(0), f = input.dim(1), g = weights.dim(1);
  if (weights.dim(0) != f) {
    throw ShapeError("dense: input features " + std::to_string(f) + " != weight rows " +
                     std::to_string(weights.dim(0)) + " (weights " + to_string(weights.shape()) + ")");
  }
  if (bias.size() != g) {
    throw ShapeError("dense: bias length " + std::to_string(bias.size()) + " != output features " + std::to_string(g));
  }
  BasicTensor<T> out(Shape{n, g});
  kernels::gemm<T>(n, g, f, {input.data(), f, 1}, weights.data(), g, out.data(), g, false);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < g; ++j) out[i * g + j] += bias[j];
  }
  return out;
}

template <typename T>
DenseGrads<T> dense_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                             const BasicTensor<T>& grad_out) {
  const std::size_t n = input.dim(0), f = input.dim(1), g = weights.dim(1);
  if (grad_out.shape() != Shape{n, g}) {
    throw ShapeError("dense_backward: gradient " + to_string(grad_out.shape()) + " does not match output " +
                     to_string(Shape{n, g}));
  }
  DenseGrads<T> grads{BasicTensor<T>(input.shape()), BasicTensor<T>(weights.shape()), BasicTensor<T>(Shape{g})};
  kernels::gemm_nt<T>(n, f, g, grad_out.data(), g, weights.data(), g, grads.input.data(), f, false);
  kernels::gemm<T>(f, g, n, {input.data(), 1, f}, grad_out.data(), g, grads.weights.data(), g, false);
  for (std::size_t j = 0; j < g; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(grad_out[i * g + j]);
    grads.bias[j] = static_cast<T>(acc);
  }
  return grads;
}

template <typename T>
BasicTensor<T> dropout(const BasicTensor<T>& input, double rate, std::uint64_t seed, Mode mode, BasicTensor<T>* mask) {
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("dropout rate must lie in [0, 1)");
  if (mode == Mode::infer || rate == 0.0) {
    if (mask != nullptr) *mask = BasicTensor<T>(input.shape(), T(1));
    return input;
  }
  std::mt19937_64 engine(seed);
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  BasicTensor<T> scale(input.shape());
  BasicTensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    // 53 random bits -> uniform in [0, 1); portable across standard libraries.
    const double u = static_cast<double>(engine() >> 11) * 0x1.0p-53;
    scale[i] = u < rate ? T(0) : keep_scale;
    out[i] = input[i] * scale[i];
  }
  if (mask != nullptr) *mask = std::move(scale);
  return out;
}

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a, b, "add");
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

template <typename T>
BasicTensor<T> multiply(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a, b, "multiply");
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

template <typename T>
double dot(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a, b, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return acc;
}

#define EMTNET_INSTANTIATE_OPS(T)                                                                                   \
  template BasicTensor<T> conv2d<T>(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>*,            \
                                    const ConvSpec&);                                                               \
  template ConvGrads<T> conv2d_backward<T>(const BasicTensor<T>&, const BasicTensor<T>&, bool, const ConvSpec&,     \
                                           const BasicTensor<T>&);                                                  \
  template BasicTensor<T> depthwise_conv2d<T>(const BasicTensor<T>&, const BasicTensor<T>&, const ConvSpec&);       \
  template BasicTensor<T> transposed_conv2d<T>(const BasicTensor<T>&, const BasicTensor<T>&, const ConvSpec&);      \
  template struct BatchNormState<T>;                                                                                \
  template BasicTensor<T> batch_norm<T>(const BasicTensor<T>&, BatchNormState<T>&, BatchNormCache<T>*);             \
  template BatchNormGrads<T> batch_norm_backward<T>(const BatchNormCache<T>&, const BasicTensor<T>&,                \
                                                    const BasicTensor<T>&);                                         \
  template BasicTensor<T> relu<T>(const BasicTensor<T>&);                                                           \
  template BasicTensor<T> relu_backward<T>(const BasicTensor<T>&, const BasicTensor<T>&);                           \
  template BasicTensor<T> sigmoid<T>(const BasicTensor<T>&);                                                        \
  template BasicTensor<T> sigmoid_backward<T>(const BasicTensor<T>&, const BasicTensor<T>&);                        \
  template BasicTensor<T> global_avg_pool<T>(const BasicTensor<T>&);                                                \
  template BasicTensor<T> global_avg_pool_backward<T>(const Shape&, const BasicTensor<T>&);                         \
  template BasicTensor<T> dense<T>(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&);            \
  template DenseGrads<T> dense_backward<T>(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&);    \
  template BasicTensor<T> dropout<T>(const BasicTensor<T>&, double, std::uint64_t, Mode, BasicTensor<T>*);          \
  template BasicTensor<T> add<T>(const BasicTensor<T>&, const BasicTensor<T>&);                                     \
  template BasicTensor<T> multiply<T>(const BasicTensor<T>&, const BasicTensor<T>&);                                \
  template double dot<T>(const BasicTensor<T>&, const BasicTensor<T>&);

EMTNET_INSTANTIATE_OPS(float)
EMTNET_INSTANTIATE_OPS(double)

}  // namespace emtnet
