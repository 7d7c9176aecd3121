// Copyright 2026 The EMT-Net Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "emtnet/layers.hpp"

namespace emtnet {

/// A non-finite gradient reached the optimizer.
class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OptimizerConfig {
  enum class Kind { adam, sgd };

  Kind kind = Kind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;  // adam
  double momentum = 0.0;                               // sgd

  void validate() const;
};

std::string to_string(OptimizerConfig::Kind kind);
OptimizerConfig::Kind parse_optimizer(const std::string& text);

/// Updates the learnable parameters from their .grad tensors. State is keyed
/// by position, so every step must see the same parameter list.
template <typename T>
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config);

  /// Checks every gradient first; a NaN or Inf throws NonFiniteGradient
  /// naming the parameter and leaves all values untouched.
  void step(std::span<Parameter<T>* const> params);

  std::size_t steps() const { return steps_; }
  const OptimizerConfig& config() const { return config_; }

 private:
  OptimizerConfig config_;
  std::size_t steps_ = 0;
  std::vector<std::vector<double>> first_, second_;
};

}  // namespace emtnet
