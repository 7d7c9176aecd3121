// Copyright 2026 The EMT-Net Authors
// SPDX-License-Identifier: Apache-2.0

#include "emtnet/optimizer.hpp"

#include <cmath>

namespace emtnet {

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (kind == Kind::adam) {
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
      throw std::invalid_argument("adam betas must lie in [0, 1)");
    }
    if (!(epsilon > 0.0)) throw std::invalid_argument("adam epsilon must be positive");
  } else if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw std::invalid_argument("sgd momentum must lie in [0, 1)");
  }
}

std::string to_string(OptimizerConfig::Kind kind) { return kind == OptimizerConfig::Kind::adam ? "adam" : "sgd"; }

OptimizerConfig::Kind parse_optimizer(const std::string& text) {
  if (text == "adam") return OptimizerConfig::Kind::adam;
  if (text == "sgd") return OptimizerConfig::Kind::sgd;
  throw std::invalid_argument("unknown optimizer '" + text + "' (expected adam or sgd)");
}

template <typename T>
Optimizer<T>::Optimizer(OptimizerConfig config) : config_(config) {
  config_.validate();
}

template <typename T>
void Optimizer<T>::step(std::span<Parameter<T>* const> params) {
  for (const Parameter<T>* p : params) {
    if (!p->learnable) continue;
    if (p->grad.shape() != p->value.shape()) {
      throw ShapeError("optimizer: gradient of '" + p->name + "' has shape " + to_string(p->grad.shape()) +
                       ", value has " + to_string(p->value.shape()));
    }
    for (std::size_t i = 0; i < p->grad.size(); ++i) {
      if (!std::isfinite(static_cast<double>(p->grad[i]))) {
        throw NonFiniteGradient("non-finite gradient in layer parameter '" + p->name + "' at element " +
                                std::to_string(i));
      }
    }
  }
  if (first_.empty()) {
    first_.resize(params.size());
    if (config_.kind == OptimizerConfig::Kind::adam) second_.resize(params.size());
  }
  if (first_.size() != params.size()) throw std::logic_error("optimizer: parameter list changed between steps");
  ++steps_;
  const double lr = config_.learning_rate;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter<T>& p = *params[k];
    if (!p.learnable) continue;
    auto& m = first_[k];
    if (m.empty()) m.assign(p.value.size(), 0.0);
    if (config_.kind == OptimizerConfig::Kind::sgd) {
      for (std::size_t i = 0; i < m.size(); ++i) {
        m[i] = config_.momentum * m[i] + static_cast<double>(p.grad[i]);
        p.value[i] = static_cast<T>(static_cast<double>(p.value[i]) - lr * m[i]);
      }
      continue;
    }
    auto& v = second_[k];
    if (v.empty()) v.assign(p.value.size(), 0.0);
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double g = static_cast<double>(p.grad[i]);
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
      const double update = lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.epsilon);
      p.value[i] = static_cast<T>(static_cast<double>(p.value[i]) - update);
    }
  }
}

template class Optimizer<float>;
template class Optimizer<double>;

}  // namespace emtnet
