// Copyright 2026 The EMT-Net Authors
// SPDX-License-Identifier: Apache-2.0

#include "emtnet/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

namespace emtnet {

namespace {

std::uint64_t mix(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void shuffle(std::vector<std::size_t>& v, std::mt19937_64& engine) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const double u = static_cast<double>(engine() >> 11) * 0x1.0p-53;
    std::swap(v[i - 1], v[std::min(static_cast<std::size_t>(u * static_cast<double>(i)), i - 1)]);
  }
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

struct Batch {
  Tensor images;
  std::vector<double> labels;
  std::vector<double> masks;
};

Batch make_batch(std::span<const PreparedSample> samples, std::span<const std::size_t> idx) {
  const Shape& s = samples[idx[0]].image.shape();
  Batch b{Tensor({idx.size(), s[0], s[1], s[2]}), {}, {}};
  const std::size_t per = samples[idx[0]].image.size();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const PreparedSample& p = samples[idx[i]];
    if (p.image.shape() != s) throw ShapeError("samples in a batch differ in shape");
    std::copy_n(p.image.data(), per, b.images.data() + i * per);
    b.labels.push_back(static_cast<double>(p.label));
    b.masks.insert(b.masks.end(), p.mask.begin(), p.mask.end());
  }
  return b;
}

std::vector<double> to_double(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

Tensor to_float(const std::vector<double>& v, const Shape& shape) {
  Tensor t(shape);
  for (std::size_t i = 0; i < v.size(); ++i) t[i] = static_cast<float>(v[i]);
  return t;
}

struct BatchLoss {
  double value = 0.0;
  std::optional<Tensor> grad_logit, grad_mask;
};

/// The variant's objective: w_clf * ns_wbce + dice, or either term alone.
BatchLoss objective(Variant variant, const NetworkOutput<float>& out, const Batch& b, const LossWeights& w) {
  BatchLoss r;
  const bool both = variant == Variant::emt_net;
  if (out.class_logit) {
    const auto cls = ns_wbce(to_double(*out.class_logit), b.labels, w.w_p);
    const double scale = both ? w.w_clf : 1.0;
    r.value += scale * cls.value;
    std::vector<double> g = cls.grad;
    for (auto& v : g) v *= scale;
    r.grad_logit = to_float(g, out.class_logit->shape());
  }
  if (out.mask_prob) {
    const std::size_t pixels = out.mask_prob->dim(2) * out.mask_prob->dim(3);
    const auto seg = dice_loss(to_double(*out.mask_prob), b.masks, pixels);
    r.value += seg.value;
    r.grad_mask = to_float(seg.grad, out.mask_prob->shape());
  }
  return r;
}

struct PassResult {
  Evaluation eval;
  double loss = 0.0;
};

PassResult infer_pass(Network<float>& net, std::span<const PreparedSample> samples,
                      std::span<const std::size_t> indices, double threshold, const LossWeights* weights) {
  const std::vector<std::size_t> all = indices.empty() ? all_indices(samples.size()) : std::vector<std::size_t>{};
  if (indices.empty()) indices = all;
  if (indices.empty()) throw std::invalid_argument("evaluate: no samples");
  constexpr std::size_t kChunk = 16;
  const Variant variant = net.config().variant;
  PassResult r;
  std::vector<int> labels;
  double dsc = 0.0, iou = 0.0, loss = 0.0;
  for (std::size_t start = 0; start < indices.size(); start += kChunk) {
    const auto idx = indices.subspan(start, std::min(kChunk, indices.size() - start));
    const Batch b = make_batch(samples, idx);
    const auto out = net.forward(b.images, Mode::infer);
    if (weights != nullptr) loss += objective(variant, out, b, *weights).value * static_cast<double>(idx.size());
    if (out.class_prob) {
      for (float p : out.class_prob->values()) r.eval.class_probs.push_back(p);
    }
    if (out.mask_prob) {
      const std::size_t pixels = out.mask_prob->dim(2) * out.mask_prob->dim(3);
      const auto probs = to_double(*out.mask_prob);
      for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto s = seg_scores(std::span(probs).subspan(i * pixels, pixels),
                                  std::span(b.masks).subspan(i * pixels, pixels), threshold);
        dsc += s.dsc;
        iou += s.iou;
      }
    }
    for (double y : b.labels) labels.push_back(static_cast<int>(y));
  }
  net.release();
  const double n = static_cast<double>(indices.size());
  if (net.config().has_classifier()) {
    r.eval.report = classification_report(classify_confusion(r.eval.class_probs, labels, threshold));
  }
  r.eval.report.n_samples = indices.size();
  if (net.config().has_segmenter()) {
    r.eval.report.dsc = dsc / n;
    r.eval.report.iou = iou / n;
  }
  r.loss = loss / n;
  return r;
}

/// Larger is better.
double selection_score(Variant variant, const MetricsReport& val, double val_loss) {
  switch (variant) {
    case Variant::single_clf:
      return val.acc.value_or(0.0) - 1e-6 * val_loss;
    case Variant::single_sgm:
      return val.dsc.value_or(0.0) - 1e-6 * val_loss;
    default:
      return -val_loss;
  }
}

}  // namespace

ModelConfig TrainConfig::model_config() const {
  ModelConfig mc = ModelConfig::make(variant, toy ? Width::toy : Width::full);
  if (input_size != 0) mc.input_size = input_size;
  if (bn_momentum) mc.bn_momentum = *bn_momentum;
  if (dropout_rate) mc.dropout_rate = *dropout_rate;
  return mc;
}

void TrainConfig::validate() const {
  if (epochs == 0) throw std::invalid_argument("epochs must be positive");
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (input_size != 0 && (input_size % 32 != 0)) throw std::invalid_argument("input size must be a multiple of 32");
  optimizer.validate();
  loss_weights.validate();
  split.validate();
  if (split.kind == SplitSpec::Kind::kfold && fold >= split.k) {
    throw std::invalid_argument("fold " + std::to_string(fold) + " out of range for K = " + std::to_string(split.k));
  }
}

std::vector<PreparedSample> prepare_all(const DatasetManifest& manifest, std::size_t input_size) {
  std::vector<PreparedSample> out(manifest.samples.size());
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = prepare(manifest.samples[i], input_size);
  return out;
}

TrainResult train(const TrainConfig& config, const DatasetManifest& manifest, const EpochCallback& on_epoch) {
  config.validate();
  if (manifest.samples.empty()) throw std::invalid_argument("train: manifest is empty");
  const auto samples = prepare_all(manifest, config.model_config().input_size);
  const auto folds = split(samples.size(), config.split);
  return train(config, samples, folds.at(config.split.kind == SplitSpec::Kind::kfold ? config.fold : 0), on_epoch);
}

TrainResult train(const TrainConfig& config, std::span<const PreparedSample> samples, const Fold& fold,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (fold.train.empty()) throw std::invalid_argument("train: the training split is empty");
  const auto started = std::chrono::steady_clock::now();
  const ModelConfig mc = config.model_config();
  Network<float> net(mc);
  net.init_weights(config.seed);
  Optimizer<float> opt(config.optimizer);
  const auto params = net.parameters();
  const LossWeights& lw = config.loss_weights;

  TrainResult result;
  RunRecord& rec = result.record;
  rec.config = config;
  rec.train_samples = fold.train.size();
  rec.val_samples = fold.val.size();
  rec.test_samples = fold.test.size();
  result.weights = net.export_weights();
  double best = -std::numeric_limits<double>::infinity();

  std::mt19937_64 engine(mix(config.seed, 0x5u));
  std::uint64_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<std::size_t> order = fold.train;
    shuffle(order, engine);
    double sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const auto idx = std::span(order).subspan(start, std::min(config.batch_size, order.size() - start));
      const Batch b = make_batch(samples, idx);
      net.set_dropout_seed(mix(config.seed, 1000 + step++));
      const auto out = net.forward(b.images, Mode::train);
      const BatchLoss loss = objective(mc.variant, out, b, lw);
      if (!std::isfinite(loss.value)) {
        throw TrainingDiverged("training loss became non-finite at epoch " + std::to_string(epoch),
                               std::move(result.weights));
      }
      net.backward(loss.grad_logit ? &*loss.grad_logit : nullptr, loss.grad_mask ? &*loss.grad_mask : nullptr);
      try {
        opt.step(params);
      } catch (const NonFiniteGradient& e) {
        throw TrainingDiverged(std::string(e.what()) + " at epoch " + std::to_string(epoch),
                               std::move(result.weights));
      }
      sum += loss.value * static_cast<double>(idx.size());
    }
    net.release();
    EpochRecord er;
    er.epoch = epoch;
    er.train_loss = sum / static_cast<double>(order.size());
    double score = -er.train_loss;
    if (!fold.val.empty()) {
      const PassResult v = infer_pass(net, samples, fold.val, 0.5, &lw);
      er.val = v.eval.report;
      er.val_loss = v.loss;
      score = selection_score(mc.variant, er.val, v.loss);
    }
    if (!std::isfinite(score)) {
      throw TrainingDiverged("validation loss became non-finite at epoch " + std::to_string(epoch),
                             std::move(result.weights));
    }
    if (score > best) {
      best = score;
      rec.best_epoch = epoch;
      result.weights = net.export_weights();
    }
    rec.epochs.push_back(er);
    if (on_epoch) on_epoch(er);
  }
  if (!fold.test.empty()) {
    net.import_weights(result.weights);
    rec.test = infer_pass(net, samples, fold.test, 0.5, nullptr).eval.report;
  }
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

Evaluation evaluate(const WeightStore& weights, std::span<const PreparedSample> samples,
                    std::span<const std::size_t> indices, double threshold) {
  Network<float> net(config_from_weights(weights));
  net.import_weights(weights);
  return evaluate(net, samples, indices, threshold);
}

Evaluation evaluate(Network<float>& net, std::span<const PreparedSample> samples, std::span<const std::size_t> indices,
                    double threshold) {
  return infer_pass(net, samples, indices, threshold, nullptr).eval;
}

double mean_loss(Network<float>& net, std::span<const PreparedSample> samples, std::span<const std::size_t> indices,
                 const LossWeights& weights) {
  return infer_pass(net, samples, indices, 0.5, &weights).loss;
}

std::vector<double> default_wp_values() { return {1, 1.5, 2, 2.5, 3, 3.5, 4, 4.5, 5, 6, 7, 8, 9, 10}; }

std::vector<double> grid_axis_values() { return {1, 1.5, 2, 2.5, 3}; }

std::vector<SweepRow> sweep_wp(const TrainConfig& base, const DatasetManifest& manifest,
                               std::span<const double> values, const CellCallback& on_cell) {
  if (base.variant == Variant::single_sgm) throw std::invalid_argument("sweep-wp needs a classification variant");
  if (base.split.kind != SplitSpec::Kind::kfold) throw std::invalid_argument("sweep-wp needs a k-fold split");
  base.validate();
  const auto samples = prepare_all(manifest, base.model_config().input_size);
  const auto folds = split(samples.size(), base.split);
  std::vector<SweepRow> rows;
  for (double wp : values) {
    TrainConfig cfg = base;
    cfg.loss_weights.w_p = wp;
    std::vector<MetricsReport> reports;
    for (std::size_t f = 0; f < folds.size(); ++f) {
      cfg.fold = f;
      reports.push_back(train(cfg, samples, folds[f]).record.test);
    }
    SweepRow row{wp, std::nullopt, kfold_aggregate(reports)};
    if (base.variant == Variant::emt_net) row.w_clf = base.loss_weights.w_clf;
    if (on_cell) on_cell(row);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<SweepRow> sweep_grid(const TrainConfig& base, const DatasetManifest& manifest,
                                 std::span<const double> w_clf_values, std::span<const double> w_p_values,
                                 const CellCallback& on_cell) {
  if (base.variant != Variant::emt_net) throw std::invalid_argument("sweep-grid needs the emt-net variant");
  if (base.split.kind != SplitSpec::Kind::holdout) throw std::invalid_argument("sweep-grid needs a holdout split");
  base.validate();
  const auto samples = prepare_all(manifest, base.model_config().input_size);
  const Fold fold = split(samples.size(), base.split).front();
  std::vector<SweepRow> rows;
  for (double wclf : w_clf_values) {
    for (double wp : w_p_values) {
      TrainConfig cfg = base;
      cfg.loss_weights = {wp, wclf};
      SweepRow row{wp, wclf, train(cfg, samples, fold).record.test};
      if (on_cell) on_cell(row);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<AblationRow> ablation(const TrainConfig& base, const DatasetManifest& manifest,
                                  const std::function<void(const AblationRow&)>& on_row) {
  TrainConfig cfg = base;
  cfg.split = SplitSpec::holdout(70, 15, 15, base.split.seed);
  cfg.validate();
  const auto samples = prepare_all(manifest, cfg.model_config().input_size);
  const Fold fold = split(samples.size(), cfg.split).front();
  std::vector<AblationRow> rows;
  for (Variant v : {Variant::emt_net, Variant::single_clf, Variant::single_sgm}) {
    cfg.variant = v;
    const TrainResult r = train(cfg, samples, fold);
    AblationRow row{v, r.record.test, count_params(cfg.model_config()), serialized_size(r.weights)};
    if (on_row) on_row(row);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::size_t serialized_size(const WeightStore& store) {
  std::ostringstream out(std::ios::binary);
  write_weights(store, out);
  return out.str().size();
}

}  // namespace emtnet
