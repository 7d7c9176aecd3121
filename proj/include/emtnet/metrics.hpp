// Copyright 2026 The EMT-Net Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace emtnet {

/// Malignant (label 1) is the positive class.
struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Metrics with an undefined denominator are std::nullopt, never 0 or 1.
struct MetricsReport {
  std::optional<double> acc, sen, spe;
  std::optional<double> dsc, iou;
  std::size_t n_samples = 0;
};

/// prob >= threshold counts as a positive prediction.
ConfusionCounts classify_confusion(std::span<const double> probs, std::span<const int> labels,
                                   double threshold = 0.5);

/// Fills acc/sen/spe from the counts; dsc/iou stay empty.
MetricsReport classification_report(const ConfusionCounts& counts);

struct SegScores {
  double dsc = 0.0;
  double iou = 0.0;
};

/// Binarizes `pred` at `threshold` and compares it with the binary
/// `truth`. Two empty masks score (1, 1).
SegScores seg_scores(std::span<const double> pred, std::span<const double> truth, double threshold = 0.5);

/// Unweighted per-metric mean over folds. A metric undefined in some folds
/// is averaged over the folds that define it. Throws on an empty list.
MetricsReport kfold_aggregate(std::span<const MetricsReport> folds);

/// "0.812500" or "NA".
std::string format_metric(const std::optional<double>& value);

}  // namespace emtnet
