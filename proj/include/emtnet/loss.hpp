// Copyright 2026 The EMT-Net Authors
// SPDX-License-Identifier: Apache-2.0

// Classification and segmentation losses, evaluated in 64-bit.
//
// The weighted binary cross-entropy comes in two algebraically equal forms:
// the probability form  -mean(w_p*y*log h + (1-y)*log(1-h))  and the logit
// form  mean((1-y)*z + K*softplus(-z))  with K = 1 + y*(w_p - 1). Only the
// logit form is total; it is the one used for training.

#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace emtnet {

/// Input outside a loss function's mathematical domain.
class LossDomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct LossWeights {
  double w_p = 3.0;    // positive-class coefficient, >= 1
  double w_clf = 1.5;  // classification-loss weight, > 0

  /// Throws std::invalid_argument when w_p < 1 or w_clf <= 0.
  void validate() const;
};

struct LossWithGrad {
  double value = 0.0;
  std::vector<double> grad;  // d value / d input, one entry per element
};

/// Probability-form weighted BCE. Throws LossDomainError if any h is
/// outside the open interval (0, 1).
double wbce(std::span<const double> h, std::span<const double> y, double w_p);

/// log(h / (1 - h)). Throws LossDomainError unless 0 < h < 1.
double logit(double h);

/// K = 1 + y * (w_p - 1).
double positive_term_coefficient(double y, double w_p);

/// log(1 + e^t) as max(t, 0) + log1p(e^-|t|).
double softplus(double t);

/// Logit-form weighted BCE and its gradient with respect to z.
/// dL/dz_i = ((1 - y_i) - K_i * (1 - sigmoid(z_i))) / M.
LossWithGrad ns_wbce(std::span<const double> z, std::span<const double> y, double w_p);

inline constexpr double kDiceEpsilon = 1e-7;

/// Soft Dice loss computed per image over its `pixels_per_image` pixels and
/// averaged over the images: 1 - (2*sum(y*h) + eps) / (sum(y) + sum(h) + eps).
/// Both-empty images score 0. Gradient is with respect to h.
LossWithGrad dice_loss(std::span<const double> h, std::span<const double> y, std::size_t pixels_per_image);

/// w_clf * classification + segmentation.
double multitask_loss(double classification, double segmentation, double w_clf);

}  // namespace emtnet
