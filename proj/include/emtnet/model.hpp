// Copyright 2026 The EMT-Net Authors
// SPDX-License-Identifier: Apache-2.0

// The multitask network: a MobileNet-V1 style depthwise-separable encoder
// shared by a classification head and a LinkNet-style decoder with three
// additive skip connections.

#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "emtnet/layers.hpp"
#include "emtnet/weights.hpp"

namespace emtnet {

enum class Variant { emt_net, single_clf, single_sgm };
enum class Width { full, toy };

std::string to_string(Variant v);
std::string to_string(Width w);
/// Accepts "emt-net", "single-clf", "single-sgm". Throws std::invalid_argument.
Variant parse_variant(std::string_view text);
Width parse_width(std::string_view text);

struct ModelConfig {
  Variant variant = Variant::emt_net;
  Width width = Width::full;
  std::size_t input_size = 224;  // must be divisible by 32
  double dropout_rate = 0.5;
  double bn_momentum = 0.99;
  double bn_epsilon = 1e-5;

  /// Full width at 224x224, or the toy config: channels / 8 at 64x64.
  static ModelConfig make(Variant variant, Width width);

  std::size_t channels(std::size_t full_width_channels) const {
    return width == Width::full ? full_width_channels : full_width_channels / 8;
  }
  bool has_classifier() const { return variant != Variant::single_sgm; }
  bool has_segmenter() const { return variant != Variant::single_clf; }
};

/// Per-sample C x H x W shape of a named intermediate.
struct TapShape {
  std::string name;
  Shape shape;

  friend bool operator==(const TapShape&, const TapShape&) = default;
};

/// Shapes the encoder must produce for `config`: tap112, tap56, tap28 and
/// the bottleneck (names refer to the full-size 224 input).
std::vector<TapShape> expected_taps(const ModelConfig& config);

/// Stem conv plus thirteen depthwise-separable blocks.
template <typename T>
class Encoder {
 public:
  static constexpr std::size_t kTaps = 3;

  explicit Encoder(const ModelConfig& config);

  /// Returns the bottleneck; fills `taps` with the three skip sources.
  BasicTensor<T> forward(const BasicTensor<T>& input, Mode mode, std::array<BasicTensor<T>, kTaps>& taps);
  BasicTensor<T> backward(const BasicTensor<T>& grad_bottleneck,
                          const std::array<BasicTensor<T>, kTaps>* grad_taps);

  /// Static shape walk: the three taps followed by the bottleneck.
  std::vector<TapShape> shapes(std::size_t input_size) const;
  std::vector<Parameter<T>*> parameters();
  std::vector<const Parameter<T>*> parameters() const;
  std::vector<std::string> layer_names() const;
  void release();

 private:
  std::vector<std::unique_ptr<Sequential<T>>> blocks_;
  std::array<std::size_t, kTaps> tap_blocks_{};
};

/// GAP -> FC 512 + ReLU -> dropout -> FC 128 + ReLU -> FC 1. Emits the
/// pre-sigmoid logit, N x 1.
template <typename T>
std::unique_ptr<Sequential<T>> build_classification_head(const ModelConfig& config);

/// Four decoder blocks with skip additions, then an upsampling head and a
/// sigmoid, producing an N x 1 x S x S probability map.
template <typename T>
class SegmentationBranch {
 public:
  explicit SegmentationBranch(const ModelConfig& config);

  BasicTensor<T> forward(const BasicTensor<T>& bottleneck, std::span<const BasicTensor<T>> taps, Mode mode);

  struct Grads {
    BasicTensor<T> bottleneck;
    std::array<BasicTensor<T>, Encoder<T>::kTaps> taps;
  };
  Grads backward(const BasicTensor<T>& grad_mask_prob);

  Shape output_shape(const Shape& bottleneck) const;
  std::vector<Parameter<T>*> parameters();
  std::vector<const Parameter<T>*> parameters() const;
  std::vector<std::string> layer_names() const;
  void release();

 private:
  std::vector<std::unique_ptr<Sequential<T>>> decoders_;  // D1..D4
  std::unique_ptr<Sequential<T>> head_;
  Sigmoid<T> sigmoid_{"seg.sigmoid"};
};

template <typename T>
struct NetworkOutput {
  std::optional<BasicTensor<T>> class_logit;  // N
  std::optional<BasicTensor<T>> class_prob;   // N
  std::optional<BasicTensor<T>> mask_prob;    // N x 1 x S x S
};

template <typename T>
class Network {
 public:
  /// Builds the graph and asserts the tap/bottleneck shapes against
  /// expected_taps(); throws std::logic_error on a mismatch.
  explicit Network(ModelConfig config);

  const ModelConfig& config() const { return config_; }

  /// One shared-encoder pass evaluating every head the variant has.
  NetworkOutput<T> forward(const BasicTensor<T>& batch, Mode mode);

  /// Back-propagates dL/d(class logit) and dL/d(mask probability); either may
  /// be null when the variant lacks that head or the loss ignores it.
  void backward(const BasicTensor<T>* grad_class_logit, const BasicTensor<T>* grad_mask_prob);

  /// Every parameter including batch-norm running statistics.
  std::vector<Parameter<T>*> parameters();
  std::vector<const Parameter<T>*> parameters() const;
  std::vector<std::string> layer_names() const;
  std::vector<TapShape> tap_shapes() const;

  /// He-normal kernels, zero biases, unit gamma, zero beta, reset statistics.
  void init_weights(std::uint64_t seed);
  void set_dropout_seed(std::uint64_t seed);

  WeightStore export_weights() const;
  /// Throws WeightMismatchError naming the first layer that is missing,
  /// unexpected, or of the wrong shape.
  void import_weights(const WeightStore& store);

  /// Frees cached activations (inference-only callers).
  void release();

 private:
  ModelConfig config_;
  Encoder<T> encoder_;
  std::unique_ptr<Sequential<T>> classifier_;
  std::unique_ptr<SegmentationBranch<T>> segmenter_;
  Sigmoid<T> class_sigmoid_{"cls.sigmoid"};
  bool recorded_ = false;
};

/// Learnable element count: kernels, biases, dense weights, BN gamma/beta.
template <typename T>
std::size_t count_params(const std::vector<const Parameter<T>*>& params);
template <typename T>
std::size_t count_params(const Network<T>& net) {
  return count_params<T>(net.parameters());
}
std::size_t count_params(const ModelConfig& config);

/// Builds `config`, initializes it with `seed`, and returns the weights.
WeightStore init_weights(const ModelConfig& config, std::uint64_t seed);

/// Network configuration recorded in a checkpoint's metadata.
ModelConfig config_from_weights(const WeightStore& store);

}  // namespace emtnet
