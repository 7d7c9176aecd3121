// Copyright 2026 The EMT-Net Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "emtnet/loss.hpp"
#include "emtnet/ops.hpp"
#include "test_support.hpp"

using namespace emtnet;
using emtnet::testing::relative_error;

namespace {

double one(std::span<const double> h, std::span<const double> y, double w_p) { return wbce(h, y, w_p); }

}  // namespace

TEST_SUITE("loss") {
  TEST_CASE("probability-form weighted BCE") {
    const std::vector<double> half{0.5}, pos{1.0}, neg{0.0}, nine{0.9};
    CHECK(one(half, pos, 1.0) == doctest::Approx(std::numbers::ln2));
    CHECK(one(half, pos, 3.0) == doctest::Approx(3.0 * std::numbers::ln2));
    for (double w : {1.0, 2.0, 7.5}) CHECK(one(nine, neg, w) == doctest::Approx(-std::log(0.1)));
    CHECK_THROWS_AS(one(std::vector<double>{0.0}, pos, 1.0), LossDomainError);
    CHECK_THROWS_AS(one(std::vector<double>{1.0}, neg, 1.0), LossDomainError);
  }

  TEST_CASE("logit inverts the sigmoid") {
    CHECK(logit(0.5) == 0.0);
    CHECK(logit(0.9) == doctest::Approx(std::log(9.0)));
    std::mt19937_64 g(1);
    std::uniform_real_distribution<double> u(1e-9, 1.0 - 1e-9);
    for (int i = 0; i < 1000; ++i) {
      const double h = u(g);
      REQUIRE(std::abs(sigmoid(logit(h)) - h) <= 1e-12);
    }
    CHECK_THROWS_AS(logit(0.0), LossDomainError);
    CHECK_THROWS_AS(logit(1.0), LossDomainError);
  }

  TEST_CASE("positive-term coefficient") {
    CHECK(positive_term_coefficient(1.0, 3.0) == 3.0);
    for (double w : {1.0, 4.0, 10.0}) CHECK(positive_term_coefficient(0.0, w) == 1.0);
    CHECK(positive_term_coefficient(1.0, 1.0) == 1.0);
  }

  TEST_CASE("stable form equals the probability form") {
    std::mt19937_64 g(2);
    std::uniform_real_distribution<double> uh(1e-6, 1.0 - 1e-6), uw(1.0, 10.0);
    for (int i = 0; i < 1000; ++i) {
      const double h = uh(g), y = static_cast<double>(g() & 1u), w = uw(g);
      const std::vector<double> z{logit(h)}, yy{y}, hh{h};
      REQUIRE(std::abs(ns_wbce(z, yy, w).value - wbce(hh, yy, w)) <= 1e-9);
    }
  }

  TEST_CASE("stable form at saturated logits") {
    const auto a = ns_wbce(std::vector<double>{-800.0}, std::vector<double>{0.0}, 1.0);
    CHECK(std::isfinite(a.value));
    CHECK(a.value == doctest::Approx(0.0));
    const auto b = ns_wbce(std::vector<double>{-800.0}, std::vector<double>{1.0}, 2.0);
    CHECK(std::isfinite(b.value));
    CHECK(b.value == doctest::Approx(1600.0));
    CHECK(softplus(800.0) == 800.0);
    CHECK(softplus(-800.0) >= 0.0);
  }

  TEST_CASE("stable-form gradient closed form") {
    CHECK(ns_wbce(std::vector<double>{0.0}, std::vector<double>{1.0}, 3.0).grad[0] == doctest::Approx(-1.5));
    CHECK(ns_wbce(std::vector<double>{0.0}, std::vector<double>{0.0}, 3.0).grad[0] == doctest::Approx(0.5));
  }

  TEST_CASE("stable form is total on [-1e4, 1e4]") {
    for (double z = -1e4; z <= 1e4; z += 37.5)
      for (double y : {0.0, 1.0})
        for (double w : {1.0, 3.0, 10.0}) {
          const auto r = ns_wbce(std::vector<double>{z}, std::vector<double>{y}, w);
          REQUIRE(std::isfinite(r.value));
          REQUIRE(std::isfinite(r.grad[0]));
        }
  }

  TEST_CASE("positive gradient scales linearly in w_p") {
    std::mt19937_64 g(3);
    std::uniform_real_distribution<double> uz(-20.0, 20.0), uw(1.0, 10.0);
    for (int i = 0; i < 200; ++i) {
      const double z = uz(g), w = uw(g);
      const std::vector<double> zz{z}, one_label{1.0};
      const double g1 = ns_wbce(zz, one_label, w).grad[0];
      CHECK(g1 == doctest::Approx(-w * (1.0 - sigmoid(z))).epsilon(1e-12));
      CHECK(ns_wbce(zz, one_label, 2.0 * w).grad[0] == doctest::Approx(2.0 * g1).epsilon(1e-12));
      CHECK(ns_wbce(zz, one_label, w + 0.5).value > ns_wbce(zz, one_label, w).value);
    }
  }

  TEST_CASE("w_p = 1 is unweighted BCE with logits") {
    std::mt19937_64 g(4);
    std::uniform_real_distribution<double> uz(-30.0, 30.0);
    std::vector<double> z(50), y(50);
    for (std::size_t i = 0; i < 50; ++i) {
      z[i] = uz(g);
      y[i] = static_cast<double>(g() & 1u);
    }
    double expected = 0.0;
    for (std::size_t i = 0; i < 50; ++i) expected += std::max(z[i], 0.0) - z[i] * y[i] + std::log1p(std::exp(-std::abs(z[i])));
    CHECK(ns_wbce(z, y, 1.0).value == doctest::Approx(expected / 50.0).epsilon(1e-12));
  }

  TEST_CASE("ns_wbce gradient matches finite differences") {
    std::mt19937_64 g(5);
    std::uniform_real_distribution<double> uz(-6.0, 6.0);
    std::vector<double> z(12), y(12);
    for (std::size_t i = 0; i < 12; ++i) {
      z[i] = uz(g);
      y[i] = static_cast<double>(i % 2);
    }
    const auto r = ns_wbce(z, y, 4.0);
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double orig = z[i], h = 1e-5;
      z[i] = orig + h;
      const double plus = ns_wbce(z, y, 4.0).value;
      z[i] = orig - h;
      const double minus = ns_wbce(z, y, 4.0).value;
      z[i] = orig;
      CHECK(relative_error(r.grad[i], (plus - minus) / (2.0 * h)) <= 1e-4);
    }
  }

  TEST_CASE("dice examples") {
    const std::vector<double> y{1, 1, 0, 0};
    CHECK(dice_loss(y, y, 4).value == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(dice_loss(std::vector<double>{0, 0, 1, 1}, y, 4).value == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(dice_loss(std::vector<double>{1, 0, 0, 0}, y, 4).value == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
    CHECK(dice_loss(std::vector<double>{0, 0, 0, 0}, std::vector<double>{0, 0, 0, 0}, 4).value == 0.0);
  }

  TEST_CASE("dice is a per-image mean and stays in [0, 1]") {
    std::mt19937_64 g(6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> h(72), y(72);
    for (int trial = 0; trial < 50; ++trial) {
      for (std::size_t i = 0; i < 72; ++i) {
        h[i] = u(g);
        y[i] = u(g) < 0.3 ? 1.0 : 0.0;
      }
      const double both = dice_loss(h, y, 36).value;
      const double first = dice_loss(std::span(h).first(36), std::span(y).first(36), 36).value;
      const double second = dice_loss(std::span(h).last(36), std::span(y).last(36), 36).value;
      CHECK(both == doctest::Approx(0.5 * (first + second)).epsilon(1e-12));
      CHECK(both >= 0.0);
      CHECK(both <= 1.0);
    }
  }

  TEST_CASE("dice gradient matches finite differences on soft 6x6 masks") {
    std::mt19937_64 g(7);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    std::vector<double> h(72), y(72);
    for (std::size_t i = 0; i < 72; ++i) {
      h[i] = u(g);
      y[i] = u(g) < 0.4 ? 1.0 : 0.0;
    }
    const auto r = dice_loss(h, y, 36);
    for (std::size_t i = 0; i < h.size(); ++i) {
      const double orig = h[i], step = 1e-5;
      h[i] = orig + step;
      const double plus = dice_loss(h, y, 36).value;
      h[i] = orig - step;
      const double minus = dice_loss(h, y, 36).value;
      h[i] = orig;
      CHECK(relative_error(r.grad[i], (plus - minus) / (2.0 * step)) <= 1e-4);
    }
  }

  TEST_CASE("multitask sum and weight validation") {
    CHECK(multitask_loss(0.2, 0.4, 1.5) == doctest::Approx(0.7));
    CHECK(multitask_loss(0.2, 0.4, 1.0) == doctest::Approx(0.6));
    const LossWeights defaults;
    CHECK(defaults.w_p == 3.0);
    CHECK(defaults.w_clf == 1.5);
    CHECK_THROWS_AS((LossWeights{0.5, 1.0}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((LossWeights{2.0, 0.0}.validate()), std::invalid_argument);
  }

  TEST_CASE("length mismatch and non-binary targets are rejected") {
    CHECK_THROWS_AS(ns_wbce(std::vector<double>{0.0, 1.0}, std::vector<double>{1.0}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(ns_wbce(std::vector<double>{0.0}, std::vector<double>{0.5}, 1.0), std::invalid_argument);
  }
}
