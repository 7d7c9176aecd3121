// Copyright 2026 The EMT-Net Authors
// SPDX-License-Identifier: Apache-2.0

#include "emtnet/model.hpp"

#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

namespace emtnet {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::emt_net:
      return "emt-net";
    case Variant::single_clf:
      return "single-clf";
    case Variant::single_sgm:
      return "single-sgm";
  }
  return "unknown";
}

std::string to_string(Width w) { return w == Width::full ? "full" : "toy"; }

Variant parse_variant(std::string_view text) {
  if (text == "emt-net") return Variant::emt_net;
  if (text == "single-clf") return Variant::single_clf;
  if (text == "single-sgm") return Variant::single_sgm;
  throw std::invalid_argument("unknown variant '" + std::string(text) + "' (expected emt-net, single-clf, single-sgm)");
}

Width parse_width(std::string_view text) {
  if (text == "full") return Width::full;
  if (text == "toy") return Width::toy;
  throw std::invalid_argument("unknown width '" + std::string(text) + "' (expected full or toy)");
}

ModelConfig ModelConfig::make(Variant variant, Width width) {
  ModelConfig c;
  c.variant = variant;
  c.width = width;
  c.input_size = width == Width::full ? 224 : 64;
  return c;
}

std::vector<TapShape> expected_taps(const ModelConfig& c) {
  const std::size_t s = c.input_size;
  return {{"tap112", {c.channels(64), s / 2, s / 2}},
          {"tap56", {c.channels(128), s / 4, s / 4}},
          {"tap28", {c.channels(256), s / 8, s / 8}},
          {"bottleneck", {c.channels(1024), s / 32, s / 32}}};
}

namespace {

struct DsBlockSpec {
  std::size_t in, out, stride;
};

// MobileNet V1 body after the 32-channel stem.
constexpr DsBlockSpec kMobileNetBody[] = {
    {32, 64, 1},   {64, 128, 2},  {128, 128, 1}, {128, 256, 2}, {256, 256, 1},
    {256, 512, 2}, {512, 512, 1}, {512, 512, 1}, {512, 512, 1}, {512, 512, 1},
    {512, 512, 1}, {512, 1024, 2}, {1024, 1024, 1},
};

// Encoder block indices (stem = 0) whose outputs feed the decoder skips.
constexpr std::array<std::size_t, 3> kTapBlocks = {1, 3, 5};

template <typename T>
void append_conv_bn_relu(Sequential<T>& seq, const std::string& name, std::size_t in, std::size_t out, ConvSpec spec,
                         const ModelConfig& c) {
  seq.template emplace<Conv<T>>(name, in, out, spec, false);
  seq.template emplace<BatchNorm<T>>(name + "_bn", out, c.bn_momentum, c.bn_epsilon);
  seq.template emplace<ReLU<T>>(name + "_relu");
}

template <typename T>
std::unique_ptr<Sequential<T>> make_ds_block(const std::string& name, const DsBlockSpec& b, const ModelConfig& c) {
  auto seq = std::make_unique<Sequential<T>>(name);
  const std::size_t in = c.channels(b.in), out = c.channels(b.out);
  append_conv_bn_relu(*seq, name + ".dw", in, in, ConvSpec::depthwise(3, b.stride, 1), c);
  append_conv_bn_relu(*seq, name + ".pw", in, out, ConvSpec::pointwise(), c);
  return seq;
}

template <typename T>
std::unique_ptr<Sequential<T>> make_decoder_block(const std::string& name, std::size_t m, std::size_t n,
                                                  const ModelConfig& c) {
  if (m % 4 != 0) throw std::invalid_argument("decoder block input channels must be divisible by 4");
  auto seq = std::make_unique<Sequential<T>>(name);
  append_conv_bn_relu(*seq, name + ".reduce", m, m / 4, ConvSpec::pointwise(), c);
  append_conv_bn_relu(*seq, name + ".up", m / 4, m / 4, ConvSpec::transposed(3, 2, 1), c);
  append_conv_bn_relu(*seq, name + ".expand", m / 4, n, ConvSpec::pointwise(), c);
  return seq;
}

template <typename T>
void collect_names(const Layer<T>& layer, std::vector<std::string>& out) {
  if (const auto* seq = dynamic_cast<const Sequential<T>*>(&layer)) {
    for (std::size_t i = 0; i < seq->size(); ++i) collect_names(seq->at(i), out);
  } else {
    out.push_back(layer.name());
  }
}

template <typename T>
void append(std::vector<T>& dst, std::vector<T> src) {
  dst.insert(dst.end(), src.begin(), src.end());
}

Shape per_sample(const Shape& s) { return Shape(s.begin() + 1, s.end()); }

}  // namespace

template <typename T>
Encoder<T>::Encoder(const ModelConfig& c) : tap_blocks_(kTapBlocks) {
  if (c.input_size == 0 || c.input_size % 32 != 0) {
    throw std::invalid_argument("encoder input size " + std::to_string(c.input_size) + " is not divisible by 32");
  }
  auto stem = std::make_unique<Sequential<T>>("enc.stem");
  append_conv_bn_relu(*stem, "enc.stem.conv", 3, c.channels(32), ConvSpec::standard(3, 2, 1), c);
  blocks_.push_back(std::move(stem));
  std::size_t i = 1;
  for (const auto& b : kMobileNetBody) blocks_.push_back(make_ds_block<T>("enc.ds" + std::to_string(i++), b, c));
}

template <typename T>
BasicTensor<T> Encoder<T>::forward(const BasicTensor<T>& input, Mode mode, std::array<BasicTensor<T>, kTaps>& taps) {
  BasicTensor<T> x = input;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    x = blocks_[i]->forward(x, mode);
    for (std::size_t t = 0; t < kTaps; ++t) {
      if (tap_blocks_[t] == i) taps[t] = x;
    }
  }
  return x;
}

template <typename T>
BasicTensor<T> Encoder<T>::backward(const BasicTensor<T>& grad_bottleneck,
                                    const std::array<BasicTensor<T>, kTaps>* grad_taps) {
  BasicTensor<T> g = grad_bottleneck;
  for (std::size_t i = blocks_.size(); i-- > 0;) {
    if (grad_taps != nullptr) {
      for (std::size_t t = 0; t < kTaps; ++t) {
        if (tap_blocks_[t] == i) g = add(g, (*grad_taps)[t]);
      }
    }
    g = blocks_[i]->backward(g);
  }
  return g;
}

template <typename T>
std::vector<TapShape> Encoder<T>::shapes(std::size_t input_size) const {
  static const char* kNames[kTaps] = {"tap112", "tap56", "tap28"};
  std::vector<TapShape> out;
  Shape s{1, 3, input_size, input_size};
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    s = blocks_[i]->output_shape(s);
    for (std::size_t t = 0; t < kTaps; ++t) {
      if (tap_blocks_[t] == i) out.push_back({kNames[t], per_sample(s)});
    }
  }
  out.push_back({"bottleneck", per_sample(s)});
  return out;
}

template <typename T>
std::vector<Parameter<T>*> Encoder<T>::parameters() {
  std::vector<Parameter<T>*> out;
  for (auto& b : blocks_) append(out, b->parameters());
  return out;
}

template <typename T>
std::vector<const Parameter<T>*> Encoder<T>::parameters() const {
  std::vector<const Parameter<T>*> out;
  for (const auto& b : blocks_) append(out, static_cast<const Sequential<T>&>(*b).parameters());
  return out;
}

template <typename T>
std::vector<std::string> Encoder<T>::layer_names() const {
  std::vector<std::string> out;
  for (const auto& b : blocks_) collect_names<T>(*b, out);
  return out;
}

template <typename T>
void Encoder<T>::release() {
  for (auto& b : blocks_) b->release();
}

template <typename T>
std::unique_ptr<Sequential<T>> build_classification_head(const ModelConfig& c) {
  auto head = std::make_unique<Sequential<T>>("cls");
  head->template emplace<GlobalAvgPool<T>>("cls.gap");
  head->template emplace<Dense<T>>("cls.fc1", c.channels(1024), c.channels(512));
  head->template emplace<ReLU<T>>("cls.fc1_relu");
  head->template emplace<Dropout<T>>("cls.dropout", c.dropout_rate);
  head->template emplace<Dense<T>>("cls.fc2", c.channels(512), c.channels(128));
  head->template emplace<ReLU<T>>("cls.fc2_relu");
  head->template emplace<Dense<T>>("cls.out", c.channels(128), 1);
  return head;
}

template <typename T>
SegmentationBranch<T>::SegmentationBranch(const ModelConfig& c) {
  decoders_.push_back(make_decoder_block<T>("dec.d1", c.channels(1024), c.channels(512), c));
  decoders_.push_back(make_decoder_block<T>("dec.d2", c.channels(512), c.channels(256), c));
  decoders_.push_back(make_decoder_block<T>("dec.d3", c.channels(256), c.channels(128), c));
  decoders_.push_back(make_decoder_block<T>("dec.d4", c.channels(128), c.channels(64), c));
  head_ = std::make_unique<Sequential<T>>("seg");
  append_conv_bn_relu(*head_, "seg.up", c.channels(64), c.channels(32), ConvSpec::transposed(3, 2, 1), c);
  head_->template emplace<Conv<T>>("seg.out", c.channels(32), 1, ConvSpec::pointwise(), true);
}

// D1 output has no skip; D2, D3, D4 outputs receive tap28, tap56, tap112.
template <typename T>
BasicTensor<T> SegmentationBranch<T>::forward(const BasicTensor<T>& bottleneck, std::span<const BasicTensor<T>> taps,
                                              Mode mode) {
  if (taps.size() != Encoder<T>::kTaps) {
    throw std::invalid_argument("segmentation branch needs 3 encoder taps, got " + std::to_string(taps.size()));
  }
  for (const auto& t : taps) {
    if (t.empty()) throw std::invalid_argument("segmentation branch: missing encoder tap");
  }
  BasicTensor<T> x = decoders_[0]->forward(bottleneck, mode);
  for (std::size_t d = 1; d < decoders_.size(); ++d) {
    x = decoders_[d]->forward(x, mode);
    const BasicTensor<T>& skip = taps[Encoder<T>::kTaps - d];
    if (skip.shape() != x.shape()) {
      throw ShapeError("skip into " + decoders_[d]->name() + ": tap " + to_string(skip.shape()) +
                       " does not match decoder output " + to_string(x.shape()));
    }
    x = add(x, skip);
  }
  return sigmoid_.forward(head_->forward(x, mode), mode);
}

template <typename T>
typename SegmentationBranch<T>::Grads SegmentationBranch<T>::backward(const BasicTensor<T>& grad_mask_prob) {
  Grads grads;
  BasicTensor<T> g = head_->backward(sigmoid_.backward(grad_mask_prob));
  for (std::size_t d = decoders_.size(); d-- > 1;) {
    grads.taps[Encoder<T>::kTaps - d] = g;
    g = decoders_[d]->backward(g);
  }
  grads.bottleneck = decoders_[0]->backward(g);
  return grads;
}

template <typename T>
Shape SegmentationBranch<T>::output_shape(const Shape& bottleneck) const {
  Shape s = bottleneck;
  for (const auto& d : decoders_) s = d->output_shape(s);
  return head_->output_shape(s);
}

template <typename T>
std::vector<Parameter<T>*> SegmentationBranch<T>::parameters() {
  std::vector<Parameter<T>*> out;
  for (auto& d : decoders_) append(out, d->parameters());
  append(out, head_->parameters());
  return out;
}

template <typename T>
std::vector<const Parameter<T>*> SegmentationBranch<T>::parameters() const {
  std::vector<const Parameter<T>*> out;
  for (const auto& d : decoders_) append(out, static_cast<const Sequential<T>&>(*d).parameters());
  append(out, static_cast<const Sequential<T>&>(*head_).parameters());
  return out;
}

template <typename T>
std::vector<std::string> SegmentationBranch<T>::layer_names() const {
  std::vector<std::string> out;
  for (const auto& d : decoders_) collect_names<T>(*d, out);
  collect_names<T>(*head_, out);
  out.push_back(sigmoid_.name());
  return out;
}

template <typename T>
void SegmentationBranch<T>::release() {
  for (auto& d : decoders_) d->release();
  head_->release();
  sigmoid_.release();
}

template <typename T>
Network<T>::Network(ModelConfig config) : config_(config), encoder_(config_) {
  if (config_.has_classifier()) classifier_ = build_classification_head<T>(config_);
  if (config_.has_segmenter()) segmenter_ = std::make_unique<SegmentationBranch<T>>(config_);

  const auto actual = encoder_.shapes(config_.input_size);
  const auto expected = expected_taps(config_);
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (!(actual[i] == expected[i])) {
      throw std::logic_error("encoder " + expected[i].name + " has shape " + to_string(actual[i].shape) +
                             ", expected " + to_string(expected[i].shape));
    }
  }
  if (segmenter_) {
    const Shape bottleneck{1, expected.back().shape[0], expected.back().shape[1], expected.back().shape[2]};
    const Shape mask = segmenter_->output_shape(bottleneck);
    if (mask != Shape{1, 1, config_.input_size, config_.input_size}) {
      throw std::logic_error("segmentation output " + to_string(mask) + " does not match the input resolution");
    }
  }
}

template <typename T>
NetworkOutput<T> Network<T>::forward(const BasicTensor<T>& batch, Mode mode) {
  const std::size_t s = config_.input_size;
  if (batch.rank() != 4 || batch.dim(1) != 3 || batch.dim(2) != s || batch.dim(3) != s) {
    throw ShapeError("network input must be N x 3 x " + std::to_string(s) + " x " + std::to_string(s) + ", got " +
                     to_string(batch.shape()));
  }
  std::array<BasicTensor<T>, Encoder<T>::kTaps> taps;
  BasicTensor<T> bottleneck = encoder_.forward(batch, mode, taps);
  NetworkOutput<T> out;
  if (classifier_) {
    BasicTensor<T> logit = classifier_->forward(bottleneck, mode).reshaped(Shape{batch.dim(0)});
    out.class_prob = class_sigmoid_.forward(logit, mode);
    out.class_logit = std::move(logit);
  }
  if (segmenter_) out.mask_prob = segmenter_->forward(bottleneck, taps, mode);
  recorded_ = true;
  return out;
}

template <typename T>
void Network<T>::backward(const BasicTensor<T>* grad_class_logit, const BasicTensor<T>* grad_mask_prob) {
  if (!recorded_) throw BackwardBeforeForward("network");
  BasicTensor<T> g_bottleneck;
  std::optional<typename SegmentationBranch<T>::Grads> seg;
  if (grad_class_logit != nullptr) {
    if (!classifier_) throw std::invalid_argument(to_string(config_.variant) + " has no classification head");
    const std::size_t n = grad_class_logit->size();
    g_bottleneck = classifier_->backward(grad_class_logit->reshaped(Shape{n, 1}));
  }
  if (grad_mask_prob != nullptr) {
    if (!segmenter_) throw std::invalid_argument(to_string(config_.variant) + " has no segmentation branch");
    seg = segmenter_->backward(*grad_mask_prob);
    g_bottleneck = g_bottleneck.empty() ? seg->bottleneck : add(g_bottleneck, seg->bottleneck);
  }
  if (g_bottleneck.empty()) return;
  encoder_.backward(g_bottleneck, seg ? &seg->taps : nullptr);
}

template <typename T>
std::vector<Parameter<T>*> Network<T>::parameters() {
  std::vector<Parameter<T>*> out = encoder_.parameters();
  if (classifier_) append(out, classifier_->parameters());
  if (segmenter_) append(out, segmenter_->parameters());
  return out;
}

template <typename T>
std::vector<const Parameter<T>*> Network<T>::parameters() const {
  std::vector<const Parameter<T>*> out = encoder_.parameters();
  if (classifier_) append(out, static_cast<const Sequential<T>&>(*classifier_).parameters());
  if (segmenter_) append(out, static_cast<const SegmentationBranch<T>&>(*segmenter_).parameters());
  return out;
}

template <typename T>
std::vector<std::string> Network<T>::layer_names() const {
  std::vector<std::string> out = encoder_.layer_names();
  if (classifier_) {
    collect_names<T>(*classifier_, out);
    out.push_back(class_sigmoid_.name());
  }
  if (segmenter_) append(out, segmenter_->layer_names());
  return out;
}

template <typename T>
std::vector<TapShape> Network<T>::tap_shapes() const {
  return encoder_.shapes(config_.input_size);
}

template <typename T>
void Network<T>::init_weights(std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  for (Parameter<T>* p : parameters()) {
    const std::string& n = p->name;
    const auto ends_with = [&](std::string_view suffix) {
      return n.size() >= suffix.size() && n.compare(n.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    if (ends_with(".weight")) {
      const Shape& s = p->value.shape();
      const std::size_t fan_in = s.size() == 4 ? s[1] * s[2] * s[3] : s[0];
      std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
      for (auto& v : p->value.values()) v = static_cast<T>(normal(engine));
    } else if (ends_with(".gamma") || ends_with(".running_var")) {
      p->value.fill(T(1));
    } else {
      p->value.fill(T(0));
    }
  }
}

template <typename T>
void Network<T>::set_dropout_seed(std::uint64_t seed) {
  if (!classifier_) return;
  for (std::size_t i = 0; i < classifier_->size(); ++i) {
    if (auto* d = dynamic_cast<Dropout<T>*>(&classifier_->at(i))) d->set_seed(seed);
  }
}

template <typename T>
WeightStore Network<T>::export_weights() const {
  WeightStore store;
  store.metadata["variant"] = to_string(config_.variant);
  store.metadata["width"] = to_string(config_.width);
  store.metadata["input_size"] = std::to_string(config_.input_size);
  for (const Parameter<T>* p : parameters()) store.entries.push_back({p->name, p->value.template cast<float>()});
  return store;
}

template <typename T>
void Network<T>::import_weights(const WeightStore& store) {
  const auto layer_of = [](const std::string& param) { return param.substr(0, param.rfind('.')); };
  std::set<std::string> expected;
  for (Parameter<T>* p : parameters()) {
    expected.insert(p->name);
    const Tensor* t = store.find(p->name);
    if (t == nullptr) {
      throw WeightMismatchError("layer '" + layer_of(p->name) + "': parameter " + p->name +
                                " missing from weights (network is " + to_string(config_.variant) + ")");
    }
    if (t->shape() != p->value.shape()) {
      throw WeightMismatchError("layer '" + layer_of(p->name) + "': shape mismatch for " + p->name + ", weights " +
                                to_string(t->shape()) + " vs network " + to_string(p->value.shape()));
    }
  }
  for (const auto& e : store.entries) {
    if (!expected.count(e.name)) {
      throw WeightMismatchError("layer '" + layer_of(e.name) + "': weights contain " + e.name + " which " +
                                to_string(config_.variant) + " does not have");
    }
  }
  for (Parameter<T>* p : parameters()) p->value = store.find(p->name)->template cast<T>();
}

template <typename T>
void Network<T>::release() {
  encoder_.release();
  if (classifier_) classifier_->release();
  if (segmenter_) segmenter_->release();
  class_sigmoid_.release();
  recorded_ = false;
}

template <typename T>
std::size_t count_params(const std::vector<const Parameter<T>*>& params) {
  std::size_t n = 0;
  for (const auto* p : params) {
    if (p->learnable) n += p->value.size();
  }
  return n;
}

std::size_t count_params(const ModelConfig& config) { return count_params(Network<float>(config)); }

WeightStore init_weights(const ModelConfig& config, std::uint64_t seed) {
  Network<float> net(config);
  net.init_weights(seed);
  return net.export_weights();
}

ModelConfig config_from_weights(const WeightStore& store) {
  const auto get = [&](const std::string& key) {
    auto it = store.metadata.find(key);
    if (it == store.metadata.end()) throw WeightFormatError("weights carry no '" + key + "' metadata");
    return it->second;
  };
  ModelConfig c = ModelConfig::make(parse_variant(get("variant")), parse_width(get("width")));
  c.input_size = std::stoul(get("input_size"));
  return c;
}

template class Encoder<float>;
template class Encoder<double>;
template class SegmentationBranch<float>;
template class SegmentationBranch<double>;
template class Network<float>;
template class Network<double>;
template std::unique_ptr<Sequential<float>> build_classification_head<float>(const ModelConfig&);
template std::unique_ptr<Sequential<double>> build_classification_head<double>(const ModelConfig&);
template std::size_t count_params<float>(const std::vector<const Parameter<float>*>&);
template std::size_t count_params<double>(const std::vector<const Parameter<double>*>&);

}  // namespace emtnet
