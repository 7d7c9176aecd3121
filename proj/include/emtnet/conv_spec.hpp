// Copyright 2026 The EMT-Net Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>

namespace emtnet {

enum class ConvMode { standard, depthwise, pointwise, transposed };

std::string to_string(ConvMode mode);

/// Geometry of a 2-D convolution. Padding is symmetric zero padding.
struct ConvSpec {
  std::size_t kernel_h = 3;
  std::size_t kernel_w = 3;
  std::size_t stride = 1;
  std::size_t padding = 0;
  ConvMode mode = ConvMode::standard;

  static ConvSpec standard(std::size_t kernel, std::size_t stride, std::size_t padding) {
    return {kernel, kernel, stride, padding, ConvMode::standard};
  }
  static ConvSpec depthwise(std::size_t kernel, std::size_t stride, std::size_t padding) {
    return {kernel, kernel, stride, padding, ConvMode::depthwise};
  }
  static ConvSpec pointwise() { return {1, 1, 1, 0, ConvMode::pointwise}; }
  static ConvSpec transposed(std::size_t kernel, std::size_t stride, std::size_t padding) {
    return {kernel, kernel, stride, padding, ConvMode::transposed};
  }

  /// Throws std::invalid_argument on a zero kernel/stride or a pointwise
  /// spec that is not 1x1, stride 1, pad 0.
  void validate() const;

  /// Output extent of a forward convolution along one axis.
  /// Throws ShapeError when the padded input is smaller than the kernel.
  std::size_t output_extent(std::size_t in, std::size_t kernel) const;

  /// Output extent of a transposed convolution: always stride * in.
  std::size_t transposed_extent(std::size_t in) const { return stride * in; }

  /// Output padding needed so that a transposed convolution yields exactly
  /// stride * in. Throws std::invalid_argument if no padding in
  /// [0, stride) achieves that.
  std::size_t output_padding(std::size_t in, std::size_t kernel) const;
};

}  // namespace emtnet
