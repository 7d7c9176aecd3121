// Copyright 2026 The EMT-Net Authors
// SPDX-License-Identifier: Apache-2.0

// Serial nested-loop implementations kept as correctness oracles for the
// parallel kernels and as the baseline in the kernel benchmark. Written
// straight from the definitions; no im2col, no blocking.

#pragma once

#include "emtnet/conv_spec.hpp"
#include "emtnet/tensor.hpp"

namespace emtnet::reference {

/// Same contract as emtnet::conv2d for every ConvMode.
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernel, const BasicTensor<T>* bias,
                      const ConvSpec& spec);

/// input N x F, weights F x G.
template <typename T>
BasicTensor<T> dense(const BasicTensor<T>& input, const BasicTensor<T>& weights, const BasicTensor<T>& bias);

}  // namespace emtnet::reference
