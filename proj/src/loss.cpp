// Copyright 2026 The EMT-Net Authors
// SPDX-License-Identifier: Apache-2.0

#include "emtnet/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "emtnet/ops.hpp"

namespace emtnet {

namespace {

void require_binary(std::span<const double> y, const char* what) {
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 0.0 && y[i] != 1.0) {
      throw std::invalid_argument(std::string(what) + ": target " + std::to_string(i) + " is " +
                                  std::to_string(y[i]) + ", expected 0 or 1");
    }
  }
}

void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw std::invalid_argument(std::string(what) + ": prediction length " + std::to_string(a) +
                                " != target length " + std::to_string(b));
  }
  if (a == 0) throw std::invalid_argument(std::string(what) + ": empty input");
}

}  // namespace

void LossWeights::validate() const {
  if (!(w_p >= 1.0)) throw std::invalid_argument("w_p must be >= 1, got " + std::to_string(w_p));
  if (!(w_clf > 0.0)) throw std::invalid_argument("w_clf must be > 0, got " + std::to_string(w_clf));
}

double wbce(std::span<const double> h, std::span<const double> y, double w_p) {
  require_same_length(h.size(), y.size(), "wbce");
  require_binary(y, "wbce");
  double sum = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (!(h[i] > 0.0 && h[i] < 1.0)) {
      throw LossDomainError("wbce: prediction " + std::to_string(i) + " = " + std::to_string(h[i]) +
                            " is outside (0, 1); use the logit form");
    }
    sum += w_p * y[i] * std::log(h[i]) + (1.0 - y[i]) * std::log1p(-h[i]);
  }
  return -sum / static_cast<double>(h.size());
}

double logit(double h) {
  if (!(h > 0.0 && h < 1.0)) throw LossDomainError("logit: " + std::to_string(h) + " is outside (0, 1)");
  return std::log(h) - std::log1p(-h);
}

double positive_term_coefficient(double y, double w_p) { return 1.0 + y * (w_p - 1.0); }

double softplus(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }

LossWithGrad ns_wbce(std::span<const double> z, std::span<const double> y, double w_p) {
  require_same_length(z.size(), y.size(), "ns_wbce");
  require_binary(y, "ns_wbce");
  const double m = static_cast<double>(z.size());
  LossWithGrad out;
  out.grad.resize(z.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double k = positive_term_coefficient(y[i], w_p);
    sum += (1.0 - y[i]) * z[i] + k * softplus(-z[i]);
    // 1 - sigmoid(z) == sigmoid(-z), which stays accurate for large z.
    out.grad[i] = ((1.0 - y[i]) - k * sigmoid(-z[i])) / m;
  }
  out.value = sum / m;
  return out;
}

LossWithGrad dice_loss(std::span<const double> h, std::span<const double> y, std::size_t pixels_per_image) {
  require_same_length(h.size(), y.size(), "dice_loss");
  require_binary(y, "dice_loss");
  if (pixels_per_image == 0 || h.size() % pixels_per_image != 0) {
    throw std::invalid_argument("dice_loss: " + std::to_string(h.size()) + " values do not split into images of " +
                                std::to_string(pixels_per_image) + " pixels");
  }
  const std::size_t images = h.size() / pixels_per_image;
  LossWithGrad out;
  out.grad.resize(h.size());
  double total = 0.0;
  for (std::size_t n = 0; n < images; ++n) {
    const std::size_t off = n * pixels_per_image;
    double inter = 0.0, sum_y = 0.0, sum_h = 0.0;
    for (std::size_t i = 0; i < pixels_per_image; ++i) {
      inter += y[off + i] * h[off + i];
      sum_y += y[off + i];
      sum_h += h[off + i];
    }
    const double num = 2.0 * inter + kDiceEpsilon;
    const double den = sum_y + sum_h + kDiceEpsilon;
    total += 1.0 - num / den;
    for (std::size_t i = 0; i < pixels_per_image; ++i) {
      out.grad[off + i] = -(2.0 * y[off + i] * den - num) / (den * den) / static_cast<double>(images);
    }
  }
  out.value = total / static_cast<double>(images);
  return out;
}

double multitask_loss(double classification, double segmentation, double w_clf) {
  return w_clf * classification + segmentation;
}

}  // namespace emtnet
