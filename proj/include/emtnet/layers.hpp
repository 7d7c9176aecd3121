// Copyright 2026 The EMT-Net Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "emtnet/ops.hpp"

namespace emtnet {

/// Raised when backward() is called on a layer with no recorded forward pass.
class BackwardBeforeForward : public std::logic_error {
 public:
  explicit BackwardBeforeForward(const std::string& layer)
      : std::logic_error("backward called before forward on layer '" + layer + "'") {}
};

template <typename T>
struct Parameter {
  std::string name;
  BasicTensor<T> value;
  BasicTensor<T> grad;
  bool learnable = true;  // false for batch-norm running statistics
};

/// A differentiable stage. forward() records what backward() needs;
/// backward() returns the input gradient and overwrites parameter gradients.
template <typename T>
class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;
  Layer(const Layer&) = delete;
  Layer& operator=(const Layer&) = delete;

  const std::string& name() const { return name_; }

  virtual BasicTensor<T> forward(const BasicTensor<T>& input, Mode mode) = 0;
  virtual BasicTensor<T> backward(const BasicTensor<T>& grad_out) = 0;
  virtual Shape output_shape(const Shape& input) const = 0;
  virtual std::vector<Parameter<T>*> parameters() { return {}; }
  virtual std::vector<const Parameter<T>*> parameters() const { return {}; }

  /// Drops cached activations.
  virtual void release() { recorded_ = false; }

 protected:
  void mark_recorded() { recorded_ = true; }
  void require_recorded() const {
    if (!recorded_) throw BackwardBeforeForward(name_);
  }

 private:
  std::string name_;
  bool recorded_ = false;
};

/// Convolution of any ConvMode with optional bias.
template <typename T>
class Conv final : public Layer<T> {
 public:
  Conv(std::string name, std::size_t in_channels, std::size_t out_channels, ConvSpec spec, bool with_bias);

  BasicTensor<T> forward(const BasicTensor<T>& input, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;
  Shape output_shape(const Shape& input) const override;
  std::vector<Parameter<T>*> parameters() override;
  std::vector<const Parameter<T>*> parameters() const override;
  void release() override;

  const ConvSpec& spec() const { return spec_; }

 private:
  ConvSpec spec_;
  Parameter<T> kernel_;
  std::unique_ptr<Parameter<T>> bias_;
  BasicTensor<T> input_;
};

template <typename T>
class BatchNorm final : public Layer<T> {
 public:
  BatchNorm(std::string name, std::size_t channels, double momentum, double epsilon);

  BasicTensor<T> forward(const BasicTensor<T>& input, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;
  Shape output_shape(const Shape& input) const override { return input; }
  std::vector<Parameter<T>*> parameters() override;
  std::vector<const Parameter<T>*> parameters() const override;
  void release() override;

 private:
  void sync_in();
  void sync_out();

  Parameter<T> gamma_, beta_, running_mean_, running_var_;
  BatchNormState<T> state_;
  BatchNormCache<T> cache_;
};

template <typename T>
class ReLU final : public Layer<T> {
 public:
  using Layer<T>::Layer;
  BasicTensor<T> forward(const BasicTensor<T>& input, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;
  Shape output_shape(const Shape& input) const override { return input; }
  void release() override;

 private:
  BasicTensor<T> input_;
};

template <typename T>
class Sigmoid final : public Layer<T> {
 public:
  using Layer<T>::Layer;
  BasicTensor<T> forward(const BasicTensor<T>& input, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;
  Shape output_shape(const Shape& input) const override { return input; }
  void release() override;

 private:
  BasicTensor<T> output_;
};

template <typename T>
class GlobalAvgPool final : public Layer<T> {
 public:
  using Layer<T>::Layer;
  BasicTensor<T> forward(const BasicTensor<T>& input, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;
  Shape output_shape(const Shape& input) const override;

 private:
  Shape input_shape_;
};

template <typename T>
class Dense final : public Layer<T> {
 public:
  Dense(std::string name, std::size_t in_features, std::size_t out_features);
  BasicTensor<T> forward(const BasicTensor<T>& input, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;
  Shape output_shape(const Shape& input) const override;
  std::vector<Parameter<T>*> parameters() override { return {&weights_, &bias_}; }
  std::vector<const Parameter<T>*> parameters() const override { return {&weights_, &bias_}; }
  void release() override;

 private:
  Parameter<T> weights_, bias_;
  BasicTensor<T> input_;
};

/// Inverted dropout. Each train-mode forward draws a fresh mask from
/// (seed, call index); set_seed() rewinds the sequence.
template <typename T>
class Dropout final : public Layer<T> {
 public:
  Dropout(std::string name, double rate);
  BasicTensor<T> forward(const BasicTensor<T>& input, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;
  Shape output_shape(const Shape& input) const override { return input; }
  void release() override;

  void set_seed(std::uint64_t seed) {
    seed_ = seed;
    calls_ = 0;
  }
  double rate() const { return rate_; }

 private:
  double rate_;
  std::uint64_t seed_ = 0;
  std::uint64_t calls_ = 0;
  BasicTensor<T> mask_;
};

/// Ordered chain of layers.
template <typename T>
class Sequential final : public Layer<T> {
 public:
  using Layer<T>::Layer;

  template <typename L, typename... Args>
  L& emplace(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }

  BasicTensor<T> forward(const BasicTensor<T>& input, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;
  Shape output_shape(const Shape& input) const override;
  std::vector<Parameter<T>*> parameters() override;
  std::vector<const Parameter<T>*> parameters() const override;
  void release() override;

  std::size_t size() const { return layers_.size(); }
  Layer<T>& at(std::size_t i) { return *layers_.at(i); }
  const Layer<T>& at(std::size_t i) const { return *layers_.at(i); }

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

}  // namespace emtnet
