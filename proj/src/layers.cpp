// Copyright 2026 The EMT-Net Authors
// SPDX-License-Identifier: Apache-2.0

#include "emtnet/layers.hpp"

namespace emtnet {

namespace {

Shape conv_kernel_shape(std::size_t in_channels, std::size_t out_channels, const ConvSpec& spec) {
  switch (spec.mode) {
    case ConvMode::depthwise:
      if (in_channels != out_channels) {
        throw std::invalid_argument("depthwise convolution must preserve the channel count");
      }
      return {in_channels, 1, spec.kernel_h, spec.kernel_w};
    case ConvMode::transposed:
      return {in_channels, out_channels, spec.kernel_h, spec.kernel_w};
    default:
      return {out_channels, in_channels, spec.kernel_h, spec.kernel_w};
  }
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t call) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (call + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

template <typename T>
Conv<T>::Conv(std::string name, std::size_t in_channels, std::size_t out_channels, ConvSpec spec, bool with_bias)
    : Layer<T>(std::move(name)), spec_(spec) {
  spec_.validate();
  const Shape kshape = conv_kernel_shape(in_channels, out_channels, spec_);
  kernel_ = {this->name() + ".weight", BasicTensor<T>(kshape), BasicTensor<T>(kshape), true};
  if (with_bias) {
    bias_ = std::make_unique<Parameter<T>>(Parameter<T>{this->name() + ".bias", BasicTensor<T>(Shape{out_channels}),
                                                         BasicTensor<T>(Shape{out_channels}), true});
  }
}

template <typename T>
BasicTensor<T> Conv<T>::forward(const BasicTensor<T>& input, Mode) {
  BasicTensor<T> out = conv2d(input, kernel_.value, bias_ ? &bias_->value : nullptr, spec_);
  input_ = input;
  this->mark_recorded();
  return out;
}

template <typename T>
BasicTensor<T> Conv<T>::backward(const BasicTensor<T>& grad_out) {
  this->require_recorded();
  ConvGrads<T> g = conv2d_backward(input_, kernel_.value, bias_ != nullptr, spec_, grad_out);
  kernel_.grad = std::move(g.kernel);
  if (bias_) bias_->grad = std::move(g.bias);
  return std::move(g.input);
}

template <typename T>
Shape Conv<T>::output_shape(const Shape& input) const {
  return conv_output_shape(input, kernel_.value.shape(), spec_);
}

template <typename T>
std::vector<Parameter<T>*> Conv<T>::parameters() {
  if (bias_) return {&kernel_, bias_.get()};
  return {&kernel_};
}

template <typename T>
std::vector<const Parameter<T>*> Conv<T>::parameters() const {
  if (bias_) return {&kernel_, bias_.get()};
  return {&kernel_};
}

template <typename T>
void Conv<T>::release() {
  Layer<T>::release();
  input_ = {};
}

template <typename T>
BatchNorm<T>::BatchNorm(std::string name, std::size_t channels, double momentum, double epsilon)
    : Layer<T>(std::move(name)) {
  const Shape s{channels};
  gamma_ = {this->name() + ".gamma", BasicTensor<T>(s, T(1)), BasicTensor<T>(s), true};
  beta_ = {this->name() + ".beta", BasicTensor<T>(s, T(0)), BasicTensor<T>(s), true};
  running_mean_ = {this->name() + ".running_mean", BasicTensor<T>(s, T(0)), BasicTensor<T>(s), false};
  running_var_ = {this->name() + ".running_var", BasicTensor<T>(s, T(1)), BasicTensor<T>(s), false};
  state_.momentum = momentum;
  state_.epsilon = epsilon;
}

// The state object owns copies so the pure batch_norm() can run on it; the
// Parameter records remain the canonical storage.
template <typename T>
void BatchNorm<T>::sync_in() {
  state_.gamma = gamma_.value;
  state_.beta = beta_.value;
  state_.running_mean = running_mean_.value;
  state_.running_var = running_var_.value;
}

template <typename T>
void BatchNorm<T>::sync_out() {
  running_mean_.value = state_.running_mean;
  running_var_.value = state_.running_var;
}

template <typename T>
BasicTensor<T> BatchNorm<T>::forward(const BasicTensor<T>& input, Mode mode) {
  sync_in();
  state_.mode = mode;
  BasicTensor<T> out = batch_norm(input, state_, &cache_);
  if (mode == Mode::train) sync_out();
  this->mark_recorded();
  return out;
}

template <typename T>
BasicTensor<T> BatchNorm<T>::backward(const BasicTensor<T>& grad_out) {
  this->require_recorded();
  BatchNormGrads<T> g = batch_norm_backward(cache_, gamma_.value, grad_out);
  gamma_.grad = std::move(g.gamma);
  beta_.grad = std::move(g.beta);
  return std::move(g.input);
}

template <typename T>
std::vector<Parameter<T>*> BatchNorm<T>::parameters() {
  return {&gamma_, &beta_, &running_mean_, &running_var_};
}

template <typename T>
std::vector<const Parameter<T>*> BatchNorm<T>::parameters() const {
  return {&gamma_, &beta_, &running_mean_, &running_var_};
}

template <typename T>
void BatchNorm<T>::release() {
  Layer<T>::release();
  cache_ = {};
}

template <typename T>
BasicTensor<T> ReLU<T>::forward(const BasicTensor<T>& input, Mode) {
  input_ = input;
  this->mark_recorded();
  return relu(input);
}

template <typename T>
BasicTensor<T> ReLU<T>::backward(const BasicTensor<T>& grad_out) {
  this->require_recorded();
  return relu_backward(input_, grad_out);
}

template <typename T>
void ReLU<T>::release() {
  Layer<T>::release();
  input_ = {};
}

template <typename T>
BasicTensor<T> Sigmoid<T>::forward(const BasicTensor<T>& input, Mode) {
  output_ = sigmoid(input);
  this->mark_recorded();
  return output_;
}

template <typename T>
BasicTensor<T> Sigmoid<T>::backward(const BasicTensor<T>& grad_out) {
  this->require_recorded();
  return sigmoid_backward(output_, grad_out);
}

template <typename T>
void Sigmoid<T>::release() {
  Layer<T>::release();
  output_ = {};
}

template <typename T>
BasicTensor<T> GlobalAvgPool<T>::forward(const BasicTensor<T>& input, Mode) {
  input_shape_ = input.shape();
  this->mark_recorded();
  return global_avg_pool(input);
}

template <typename T>
BasicTensor<T> GlobalAvgPool<T>::backward(const BasicTensor<T>& grad_out) {
  this->require_recorded();
  return global_avg_pool_backward(input_shape_, grad_out);
}

template <typename T>
Shape GlobalAvgPool<T>::output_shape(const Shape& input) const {
  if (input.size() != 4) throw ShapeError("global_avg_pool expects N x C x H x W, got " + to_string(input));
  return {input[0], input[1]};
}

template <typename T>
Dense<T>::Dense(std::string name, std::size_t in_features, std::size_t out_features) : Layer<T>(std::move(name)) {
  const Shape ws{in_features, out_features};
  const Shape bs{out_features};
  weights_ = {this->name() + ".weight", BasicTensor<T>(ws), BasicTensor<T>(ws), true};
  bias_ = {this->name() + ".bias", BasicTensor<T>(bs), BasicTensor<T>(bs), true};
}

template <typename T>
BasicTensor<T> Dense<T>::forward(const BasicTensor<T>& input, Mode) {
  BasicTensor<T> out = dense(input, weights_.value, bias_.value);
  input_ = input;
  this->mark_recorded();
  return out;
}

template <typename T>
BasicTensor<T> Dense<T>::backward(const BasicTensor<T>& grad_out) {
  this->require_recorded();
  DenseGrads<T> g = dense_backward(input_, weights_.value, grad_out);
  weights_.grad = std::move(g.weights);
  bias_.grad = std::move(g.bias);
  return std::move(g.input);
}

template <typename T>
Shape Dense<T>::output_shape(const Shape& input) const {
  if (input.size() != 2 || input[1] != weights_.value.dim(0)) {
    throw ShapeError("dense layer '" + this->name() + "' expects N x " + std::to_string(weights_.value.dim(0)) +
                     ", got " + to_string(input));
  }
  return {input[0], weights_.value.dim(1)};
}

template <typename T>
void Dense<T>::release() {
  Layer<T>::release();
  input_ = {};
}

template <typename T>
Dropout<T>::Dropout(std::string name, double rate) : Layer<T>(std::move(name)), rate_(rate) {
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("dropout rate must lie in [0, 1)");
}

template <typename T>
BasicTensor<T> Dropout<T>::forward(const BasicTensor<T>& input, Mode mode) {
  const std::uint64_t seed = mix_seed(seed_, calls_);
  if (mode == Mode::train) ++calls_;
  BasicTensor<T> out = dropout(input, rate_, seed, mode, &mask_);
  this->mark_recorded();
  return out;
}

template <typename T>
BasicTensor<T> Dropout<T>::backward(const BasicTensor<T>& grad_out) {
  this->require_recorded();
  return multiply(grad_out, mask_);
}

template <typename T>
void Dropout<T>::release() {
  Layer<T>::release();
  mask_ = {};
}

template <typename T>
BasicTensor<T> Sequential<T>::forward(const BasicTensor<T>& input, Mode mode) {
  BasicTensor<T> x = input;
  for (auto& layer : layers_) x = layer->forward(x, mode);
  this->mark_recorded();
  return x;
}

template <typename T>
BasicTensor<T> Sequential<T>::backward(const BasicTensor<T>& grad_out) {
  this->require_recorded();
  BasicTensor<T> g = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

template <typename T>
Shape Sequential<T>::output_shape(const Shape& input) const {
  Shape s = input;
  for (const auto& layer : layers_) s = layer->output_shape(s);
  return s;
}

template <typename T>
std::vector<Parameter<T>*> Sequential<T>::parameters() {
  std::vector<Parameter<T>*> out;
  for (auto& layer : layers_) {
    auto p = layer->parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

template <typename T>
std::vector<const Parameter<T>*> Sequential<T>::parameters() const {
  std::vector<const Parameter<T>*> out;
  for (const auto& layer : layers_) {
    const Layer<T>& l = *layer;
    auto p = l.parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

template <typename T>
void Sequential<T>::release() {
  Layer<T>::release();
  for (auto& layer : layers_) layer->release();
}

#define EMTNET_INSTANTIATE_LAYERS(T) \
  template class Conv<T>;            \
  template class BatchNorm<T>;       \
  template class ReLU<T>;            \
  template class Sigmoid<T>;         \
  template class GlobalAvgPool<T>;   \
  template class Dense<T>;           \
  template class Dropout<T>;         \
  template class Sequential<T>;

EMTNET_INSTANTIATE_LAYERS(float)
EMTNET_INSTANTIATE_LAYERS(double)

}  // namespace emtnet
