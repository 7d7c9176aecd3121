// Copyright 2026 The EMT-Net Authors
// SPDX-License-Identifier: Apache-2.0

// Neural-network primitives as pure functions: each forward has a matching
// backward that takes the forward operands plus the upstream gradient.

#pragma once

#include <cstdint>

#include "emtnet/conv_spec.hpp"
#include "emtnet/tensor.hpp"

namespace emtnet {

enum class Mode { train, infer };

template <typename T>
struct ConvGrads {
  BasicTensor<T> input;
  BasicTensor<T> kernel;
  BasicTensor<T> bias;  // empty when the forward had no bias
};

/// Convolution dispatching on spec.mode. Standard and pointwise kernels are
/// (out, in, kh, kw); depthwise kernels are (channels, 1, kh, kw);
/// transposed kernels are (in, out, kh, kw) so that the same tensor serves a
/// strided conv2d and its adjoint. `bias` may be null.
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernel, const BasicTensor<T>* bias,
                      const ConvSpec& spec);

template <typename T>
ConvGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& kernel, bool has_bias,
                             const ConvSpec& spec, const BasicTensor<T>& grad_out);

template <typename T>
BasicTensor<T> depthwise_conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernel, const ConvSpec& spec);

/// Upsampling convolution; output spatial size is exactly stride x input.
template <typename T>
BasicTensor<T> transposed_conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernel, const ConvSpec& spec);

/// Spatial output shape of `spec` applied to `input_shape` with a kernel of
/// shape `kernel_shape`, validating channel agreement.
Shape conv_output_shape(const Shape& input_shape, const Shape& kernel_shape, const ConvSpec& spec);

template <typename T>
struct BatchNormState {
  BasicTensor<T> gamma;
  BasicTensor<T> beta;
  BasicTensor<T> running_mean;
  BasicTensor<T> running_var;
  double momentum = 0.99;  // running = momentum * running + (1 - momentum) * batch
  double epsilon = 1e-5;
  Mode mode = Mode::train;

  static BatchNormState identity(std::size_t channels);
};

template <typename T>
struct BatchNormCache {
  BasicTensor<T> normalized;       // x_hat
  std::vector<double> inv_std;     // per channel
  Mode mode = Mode::train;
};

template <typename T>
struct BatchNormGrads {
  BasicTensor<T> input;
  BasicTensor<T> gamma;
  BasicTensor<T> beta;
};

/// Per-channel normalization over N, H, W (4-D) or N (2-D input).
/// Train mode uses batch statistics and updates the running estimates
/// (unbiased variance); infer mode reads the running estimates only.
template <typename T>
BasicTensor<T> batch_norm(const BasicTensor<T>& input, BatchNormState<T>& state, BatchNormCache<T>* cache = nullptr);

template <typename T>
BatchNormGrads<T> batch_norm_backward(const BatchNormCache<T>& cache, const BasicTensor<T>& gamma,
                                      const BasicTensor<T>& grad_out);

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input);
template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_out);

/// Branch-stable logistic function.
double sigmoid(double x);
template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& input);
template <typename T>
BasicTensor<T> sigmoid_backward(const BasicTensor<T>& output, const BasicTensor<T>& grad_out);

template <typename T>
BasicTensor<T> global_avg_pool(const BasicTensor<T>& input);
template <typename T>
BasicTensor<T> global_avg_pool_backward(const Shape& input_shape, const BasicTensor<T>& grad_out);

/// input N x F, weights F x G, bias G.
template <typename T>
BasicTensor<T> dense(const BasicTensor<T>& input, const BasicTensor<T>& weights, const BasicTensor<T>& bias);

template <typename T>
struct DenseGrads {
  BasicTensor<T> input;
  BasicTensor<T> weights;
  BasicTensor<T> bias;
};

template <typename T>
DenseGrads<T> dense_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                             const BasicTensor<T>& grad_out);

/// Inverted dropout. `mask` receives the per-element scale (0 or 1/(1-rate))
/// when non-null; infer mode and rate 0 are identity.
template <typename T>
BasicTensor<T> dropout(const BasicTensor<T>& input, double rate, std::uint64_t seed, Mode mode,
                       BasicTensor<T>* mask = nullptr);

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> multiply(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
double dot(const BasicTensor<T>& a, const BasicTensor<T>& b);

}  // namespace emtnet
