// Copyright 2026 The EMT-Net Authors
// SPDX-License-Identifier: Apache-2.0

#include "emtnet/tensor.hpp"

#include <stdexcept>

#include "emtnet/conv_spec.hpp"

namespace emtnet {

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return shape.empty() ? 0 : n;
}

std::string to_string(ConvMode mode) {
  switch (mode) {
    case ConvMode::standard:
      return "standard";
    case ConvMode::depthwise:
      return "depthwise";
    case ConvMode::pointwise:
      return "pointwise";
    case ConvMode::transposed:
      return "transposed";
  }
  return "unknown";
}

void ConvSpec::validate() const {
  if (kernel_h == 0 || kernel_w == 0) throw std::invalid_argument("convolution kernel extent must be positive");
  if (stride == 0) throw std::invalid_argument("convolution stride must be positive");
  if (mode == ConvMode::pointwise && (kernel_h != 1 || kernel_w != 1 || stride != 1 || padding != 0)) {
    throw std::invalid_argument("pointwise convolution must be 1x1, stride 1, padding 0");
  }
}

std::size_t ConvSpec::output_extent(std::size_t in, std::size_t kernel) const {
  if (in + 2 * padding < kernel) {
    throw ShapeError("padded input extent " + std::to_string(in + 2 * padding) + " is smaller than kernel extent " +
                     std::to_string(kernel));
  }
  return (in + 2 * padding - kernel) / stride + 1;
}

std::size_t ConvSpec::output_padding(std::size_t in, std::size_t kernel) const {
  // (in - 1) * stride - 2 * padding + kernel + output_padding == stride * in
  const long long natural = static_cast<long long>((in - 1) * stride + kernel) - 2 * static_cast<long long>(padding);
  const long long pad = static_cast<long long>(stride * in) - natural;
  if (pad < 0 || pad >= static_cast<long long>(stride)) {
    throw std::invalid_argument("transposed convolution with kernel " + std::to_string(kernel) + ", stride " +
                                std::to_string(stride) + ", padding " + std::to_string(padding) +
                                " cannot produce exactly stride x input");
  }
  return static_cast<std::size_t>(pad);
}

}  // namespace emtnet
