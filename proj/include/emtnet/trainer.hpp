// Copyright 2026 The EMT-Net Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "emtnet/data.hpp"
#include "emtnet/loss.hpp"
#include "emtnet/metrics.hpp"
#include "emtnet/model.hpp"
#include "emtnet/optimizer.hpp"
#include "emtnet/weights.hpp"

namespace emtnet {

struct TrainConfig {
  Variant variant = Variant::emt_net;
  std::size_t epochs = 30;
  std::size_t batch_size = 8;
  OptimizerConfig optimizer;
  LossWeights loss_weights;  // w_clf is ignored by single-task variants
  std::uint64_t seed = 42;
  SplitSpec split = SplitSpec::holdout();
  std::size_t fold = 0;  // which k-fold assignment to use
  bool toy = false;
  std::size_t input_size = 0;              // 0: the width's default
  std::optional<double> bn_momentum;       // overrides the model default
  std::optional<double> dropout_rate;

  ModelConfig model_config() const;
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  std::optional<double> val_loss;
  MetricsReport val;
};

struct RunRecord {
  TrainConfig config;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 0: the initial weights were kept
  MetricsReport test;
  std::size_t train_samples = 0, val_samples = 0, test_samples = 0;
  double wall_seconds = 0.0;
};

struct TrainResult {
  RunRecord record;
  WeightStore weights;  // best-validation checkpoint
};

/// A loss or gradient became non-finite. `last_good` holds the best
/// checkpoint seen before the failure.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, WeightStore last_good)
      : std::runtime_error(what), last_good(std::move(last_good)) {}
  WeightStore last_good;
};

/// Called after each epoch; diagnostics only.
using EpochCallback = std::function<void(const EpochRecord&)>;

/// Preprocesses every manifest sample to `input_size`.
std::vector<PreparedSample> prepare_all(const DatasetManifest& manifest, std::size_t input_size);

/// Trains on config.split's fold and reports test metrics for the best
/// validation checkpoint.
TrainResult train(const TrainConfig& config, const DatasetManifest& manifest, const EpochCallback& on_epoch = {});
TrainResult train(const TrainConfig& config, std::span<const PreparedSample> samples, const Fold& fold,
                  const EpochCallback& on_epoch = {});

struct Evaluation {
  MetricsReport report;
  std::vector<double> class_probs;  // empty for SingleSGM
};

/// Infer-mode forward over `indices` (all samples when empty). Throws
/// WeightMismatchError when the store does not fit its recorded variant.
Evaluation evaluate(const WeightStore& weights, std::span<const PreparedSample> samples,
                    std::span<const std::size_t> indices = {}, double threshold = 0.5);
Evaluation evaluate(Network<float>& net, std::span<const PreparedSample> samples,
                    std::span<const std::size_t> indices = {}, double threshold = 0.5);

/// Mean objective of `net` on `indices` in infer mode.
double mean_loss(Network<float>& net, std::span<const PreparedSample> samples, std::span<const std::size_t> indices,
                 const LossWeights& weights);

struct SweepRow {
  double w_p = 0.0;
  std::optional<double> w_clf;
  MetricsReport report;
};

using CellCallback = std::function<void(const SweepRow&)>;

/// 1 to 5 in steps of 0.5, then 6 to 10 in steps of 1.
std::vector<double> default_wp_values();
/// 1 to 3 in steps of 0.5.
std::vector<double> grid_axis_values();

/// K-fold cross-validation (base.split must be kfold) per w_p value, test
/// metrics averaged over the folds.
std::vector<SweepRow> sweep_wp(const TrainConfig& base, const DatasetManifest& manifest,
                               std::span<const double> values, const CellCallback& on_cell = {});

/// One holdout run per (w_clf, w_p) cell, w_clf major.
std::vector<SweepRow> sweep_grid(const TrainConfig& base, const DatasetManifest& manifest,
                                 std::span<const double> w_clf_values, std::span<const double> w_p_values,
                                 const CellCallback& on_cell = {});

struct AblationRow {
  Variant variant = Variant::emt_net;
  MetricsReport report;
  std::size_t parameters = 0;
  std::size_t serialized_bytes = 0;
};

/// Trains the three variants on the same holdout split.
std::vector<AblationRow> ablation(const TrainConfig& base, const DatasetManifest& manifest,
                                  const std::function<void(const AblationRow&)>& on_row = {});

/// Size in bytes of `store` as written by save_weights.
std::size_t serialized_size(const WeightStore& store);

}  // namespace emtnet
