// Copyright 2026 The EMT-Net Authors
// SPDX-License-Identifier: Apache-2.0

#include "emtnet/metrics.hpp"

#include <cstdio>
#include <stdexcept>

namespace emtnet {

namespace {

std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

ConfusionCounts classify_confusion(std::span<const double> probs, std::span<const int> labels, double threshold) {
  if (probs.size() != labels.size()) {
    throw std::invalid_argument("classify_confusion: " + std::to_string(probs.size()) + " probabilities vs " +
                                std::to_string(labels.size()) + " labels");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) {
      throw std::invalid_argument("classify_confusion: label " + std::to_string(i) + " is not 0 or 1");
    }
    const bool predicted = probs[i] >= threshold;
    const bool actual = labels[i] == 1;
    if (predicted && actual) ++c.tp;
    else if (predicted) ++c.fp;
    else if (actual) ++c.fn;
    else ++c.tn;
  }
  return c;
}

MetricsReport classification_report(const ConfusionCounts& c) {
  MetricsReport r;
  r.n_samples = c.total();
  r.acc = ratio(c.tp + c.tn, c.total());
  r.sen = ratio(c.tp, c.tp + c.fn);
  r.spe = ratio(c.tn, c.tn + c.fp);
  return r;
}

SegScores seg_scores(std::span<const double> pred, std::span<const double> truth, double threshold) {
  if (pred.size() != truth.size()) {
    throw std::invalid_argument("seg_scores: mask sizes differ (" + std::to_string(pred.size()) + " vs " +
                                std::to_string(truth.size()) + ")");
  }
  std::size_t a = 0, b = 0, both = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (truth[i] != 0.0 && truth[i] != 1.0) throw std::invalid_argument("seg_scores: true mask is not binary");
    const bool p = pred[i] >= threshold;
    const bool t = truth[i] == 1.0;
    a += p;
    b += t;
    both += p && t;
  }
  if (a + b == 0) return {1.0, 1.0};
  return {2.0 * static_cast<double>(both) / static_cast<double>(a + b),
          static_cast<double>(both) / static_cast<double>(a + b - both)};
}

MetricsReport kfold_aggregate(std::span<const MetricsReport> folds) {
  if (folds.empty()) throw std::invalid_argument("kfold_aggregate: no folds");
  const auto mean = [&](std::optional<double> MetricsReport::*field) -> std::optional<double> {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& f : folds) {
      if (const auto& v = f.*field) {
        sum += *v;
        ++n;
      }
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
  };
  MetricsReport r;
  r.acc = mean(&MetricsReport::acc);
  r.sen = mean(&MetricsReport::sen);
  r.spe = mean(&MetricsReport::spe);
  r.dsc = mean(&MetricsReport::dsc);
  r.iou = mean(&MetricsReport::iou);
  for (const auto& f : folds) r.n_samples += f.n_samples;
  return r;
}

std::string format_metric(const std::optional<double>& value) {
  if (!value) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *value);
  return buf;
}

}  // namespace emtnet
