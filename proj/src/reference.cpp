// Copyright 2026 The EMT-Net Authors
// SPDX-License-Identifier: Apache-2.0

#include "emtnet/reference.hpp"

#include <stdexcept>
#include <vector>

namespace emtnet::reference {

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernel, const BasicTensor<T>* bias,
                      const ConvSpec& spec) {
  spec.validate();
  require_rank(input, 4, "reference conv2d input");
  require_rank(kernel, 4, "reference conv2d kernel");
  const long N = static_cast<long>(input.dim(0)), C = static_cast<long>(input.dim(1));
  const long H = static_cast<long>(input.dim(2)), W = static_cast<long>(input.dim(3));
  const long KH = static_cast<long>(kernel.dim(2)), KW = static_cast<long>(kernel.dim(3));
  const long S = static_cast<long>(spec.stride), P = static_cast<long>(spec.padding);

  if (spec.mode == ConvMode::transposed) {
    if (kernel.dim(0) != input.dim(1)) throw ShapeError("reference transposed conv: channel mismatch");
    spec.output_padding(input.dim(2), kernel.dim(2));
    spec.output_padding(input.dim(3), kernel.dim(3));
    const long CO = static_cast<long>(kernel.dim(1));
    const long OH = S * H, OW = S * W;
    std::vector<double> acc(static_cast<std::size_t>(N * CO * OH * OW), 0.0);
    for (long n = 0; n < N; ++n)
      for (long ci = 0; ci < C; ++ci)
        for (long iy = 0; iy < H; ++iy)
          for (long ix = 0; ix < W; ++ix)
            for (long co = 0; co < CO; ++co)
              for (long ky = 0; ky < KH; ++ky)
                for (long kx = 0; kx < KW; ++kx) {
                  const long oy = iy * S - P + ky;
                  const long ox = ix * S - P + kx;
                  if (oy < 0 || oy >= OH || ox < 0 || ox >= OW) continue;
                  acc[static_cast<std::size_t>(((n * CO + co) * OH + oy) * OW + ox)] +=
                      static_cast<double>(input.at(n, ci, iy, ix)) * static_cast<double>(kernel.at(ci, co, ky, kx));
                }
    BasicTensor<T> out(Shape{input.dim(0), kernel.dim(1), static_cast<std::size_t>(OH), static_cast<std::size_t>(OW)});
    for (std::size_t i = 0; i < out.size(); ++i) {
      const std::size_t co = (i / static_cast<std::size_t>(OH * OW)) % static_cast<std::size_t>(CO);
      out[i] = static_cast<T>(acc[i] + (bias ? static_cast<double>((*bias)[co]) : 0.0));
    }
    return out;
  }

  const bool depthwise = spec.mode == ConvMode::depthwise;
  const long CO = depthwise ? C : static_cast<long>(kernel.dim(0));
  if (depthwise ? (kernel.dim(0) != input.dim(1) || kernel.dim(1) != 1) : kernel.dim(1) != input.dim(1)) {
    throw ShapeError("reference conv2d: channel mismatch between input " + to_string(input.shape()) + " and kernel " +
                     to_string(kernel.shape()));
  }
  const long OH = static_cast<long>(spec.output_extent(input.dim(2), kernel.dim(2)));
  const long OW = static_cast<long>(spec.output_extent(input.dim(3), kernel.dim(3)));
  BasicTensor<T> out(Shape{input.dim(0), static_cast<std::size_t>(CO), static_cast<std::size_t>(OH),
                           static_cast<std::size_t>(OW)});
  for (long n = 0; n < N; ++n)
    for (long co = 0; co < CO; ++co)
      for (long oy = 0; oy < OH; ++oy)
        for (long ox = 0; ox < OW; ++ox) {
          double acc = bias ? static_cast<double>((*bias)[static_cast<std::size_t>(co)]) : 0.0;
          const long c_begin = depthwise ? co : 0;
          const long c_end = depthwise ? co + 1 : C;
          for (long ci = c_begin; ci < c_end; ++ci)
            for (long ky = 0; ky < KH; ++ky)
              for (long kx = 0; kx < KW; ++kx) {
                const long iy = oy * S - P + ky;
                const long ix = ox * S - P + kx;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                const double w = depthwise ? kernel.at(co, 0, ky, kx) : kernel.at(co, ci, ky, kx);
                acc += w * static_cast<double>(input.at(n, ci, iy, ix));
              }
          out.at(n, co, oy, ox) = static_cast<T>(acc);
        }
  return out;
}

template <typename T>
BasicTensor<T> dense(const BasicTensor<T>& input, const BasicTensor<T>& weights, const BasicTensor<T>& bias) {
  const std::size_t n = input.dim(0), f = input.dim(1), g = weights.dim(1);
  if (weights.dim(0) != f) throw ShapeError("reference dense: dimension mismatch");
  BasicTensor<T> out(Shape{n, g});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < g; ++j) {
      double acc = static_cast<double>(bias[j]);
      for (std::size_t k = 0; k < f; ++k)
        acc += static_cast<double>(input[i * f + k]) * static_cast<double>(weights[k * g + j]);
      out[i * g + j] = static_cast<T>(acc);
    }
  return out;
}

template BasicTensor<float> conv2d<float>(const BasicTensor<float>&, const BasicTensor<float>&,
                                          const BasicTensor<float>*, const ConvSpec&);
template BasicTensor<double> conv2d<double>(const BasicTensor<double>&, const BasicTensor<double>&,
                                            const BasicTensor<double>*, const ConvSpec&);
template BasicTensor<float> dense<float>(const BasicTensor<float>&, const BasicTensor<float>&,
                                         const BasicTensor<float>&);
template BasicTensor<double> dense<double>(const BasicTensor<double>&, const BasicTensor<double>&,
                                           const BasicTensor<double>&);

}  // namespace emtnet::reference
