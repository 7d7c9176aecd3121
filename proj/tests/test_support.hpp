// Copyright 2026 The EMT-Net Authors
// SPDX-License-Identifier: Apache-2.0
//
// Helpers shared by the unit and acceptance tests.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

#include "emtnet/tensor.hpp"

namespace emtnet::testing {

template <typename T = double>
BasicTensor<T> random_tensor(const Shape& shape, std::mt19937_64& engine, double lo = -1.0, double hi = 1.0) {
  BasicTensor<T> t(shape);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& v : t.values()) v = static_cast<T>(dist(engine));
  return t;
}

/// |a - n| / max(|a|, |n|, floor).
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Worst relative error between `analytic` and central differences of
/// `loss` over `probes` random coordinates of `x` (all when probes == 0).
template <typename F>
double fd_check(TensorD& x, const TensorD& analytic, F&& loss, std::mt19937_64& engine, std::size_t probes = 0,
                double h = 1e-4) {
  double worst = 0.0;
  const std::size_t count = probes == 0 ? x.size() : probes;
  for (std::size_t t = 0; t < count; ++t) {
    const std::size_t i = probes == 0 ? t : engine() % x.size();
    const double orig = x[i];
    x[i] = orig + h;
    const double plus = loss();
    x[i] = orig - h;
    const double minus = loss();
    x[i] = orig;
    worst = std::max(worst, relative_error(analytic[i], (plus - minus) / (2.0 * h)));
  }
  return worst;
}

}  // namespace emtnet::testing
