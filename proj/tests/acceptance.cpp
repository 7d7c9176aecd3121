// Copyright 2026 The EMT-Net Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "emtnet/kernels.hpp"
#include "emtnet/loss.hpp"
#include "emtnet/model.hpp"
#include "emtnet/ops.hpp"
#include "emtnet/reference.hpp"
#include "emtnet/trainer.hpp"
#include "test_support.hpp"

using namespace emtnet;
using emtnet::testing::fd_check;
using emtnet::testing::random_tensor;
using emtnet::testing::relative_error;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double probe(const TensorD& y, const TensorD& r) { return dot(y, r); }

DatasetManifest synth(std::size_t n, std::uint64_t seed, double fraction) {
  SynthOptions o;
  o.n = n;
  o.seed = seed;
  o.image_size = 64;
  o.malignant_fraction = fraction;
  DatasetManifest m;
  m.samples = synth_samples(o);
  m.provenance = "synthetic";
  return m;
}

// 1
Outcome loss_equivalence() {
  const auto start = Clock::now();
  std::mt19937_64 g(1);
  std::uniform_real_distribution<double> uh(1e-6, 1.0 - 1e-6), uw(1.0, 10.0);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double h = uh(g), y = static_cast<double>(g() & 1u), w = uw(g);
    const std::vector<double> hh{h}, yy{y}, zz{logit(h)};
    worst = std::max(worst, std::abs(wbce(hh, yy, w) - ns_wbce(zz, yy, w).value));
  }
  const double t = seconds_since(start);
  return {worst <= 1e-9 && t < 1.0, fmt("max |diff| %.3g over 10000 triples in %.3f s", worst, t)};
}

// 2
Outcome stability() {
  bool ok = true;
  for (double z : {50.0, -50.0, 800.0, -800.0, 1e4, -1e4})
    for (double y : {0.0, 1.0})
      for (double w : {1.0, 3.0, 10.0}) {
        const auto r = ns_wbce(std::vector<double>{z}, std::vector<double>{y}, w);
        ok = ok && std::isfinite(r.value) && std::isfinite(r.grad[0]);
      }
  volatile double z = -800.0;
  const double naive = std::log(1.0 + std::exp(-z));
  const bool overflows = std::isinf(naive);
  return {ok && overflows, std::string("stable form finite on 36 points: ") + (ok ? "yes" : "no") +
                               "; naive log(1+exp(-Z)) at Z=-800 = " + std::to_string(naive)};
}

// 3
double primitive_gradients() {
  std::mt19937_64 g(3);
  double worst = 0.0;
  struct Case {
    Shape input, kernel;
    ConvSpec spec;
    std::size_t bias;
  };
  const Case cases[] = {{{2, 3, 7, 7}, {4, 3, 3, 3}, ConvSpec::standard(3, 2, 1), 4},
                        {{2, 4, 6, 6}, {4, 1, 3, 3}, ConvSpec::depthwise(3, 1, 1), 4},
                        {{2, 4, 8, 8}, {4, 1, 3, 3}, ConvSpec::depthwise(3, 2, 1), 4},
                        {{2, 4, 5, 5}, {6, 4, 1, 1}, ConvSpec::pointwise(), 6},
                        {{2, 4, 4, 4}, {4, 3, 3, 3}, ConvSpec::transposed(3, 2, 1), 3}};
  for (const auto& c : cases) {
    TensorD x = random_tensor(c.input, g), k = random_tensor(c.kernel, g), b = random_tensor({c.bias}, g);
    const TensorD r = random_tensor(conv2d(x, k, &b, c.spec).shape(), g);
    const auto grads = conv2d_backward(x, k, true, c.spec, r);
    auto loss = [&] { return probe(conv2d(x, k, &b, c.spec), r); };
    worst = std::max({worst, fd_check(x, grads.input, loss, g), fd_check(k, grads.kernel, loss, g),
                      fd_check(b, grads.bias, loss, g)});
  }

  TensorD x = random_tensor({3, 2, 3, 3}, g, -2.0, 2.0);
  auto state = BatchNormState<double>::identity(2);
  state.gamma = random_tensor({2}, g, 0.5, 1.5);
  state.beta = random_tensor({2}, g);
  BatchNormCache<double> cache;
  const TensorD rb = random_tensor(x.shape(), g);
  batch_norm(x, state, &cache);
  const auto bg = batch_norm_backward(cache, state.gamma, rb);
  auto bl = [&] {
    auto s = state;
    return probe(batch_norm(x, s), rb);
  };
  worst = std::max({worst, fd_check(x, bg.input, bl, g), fd_check(state.gamma, bg.gamma, bl, g),
                    fd_check(state.beta, bg.beta, bl, g)});

  TensorD e = random_tensor({2, 3, 4, 4}, g, 0.05, 1.0);
  for (std::size_t i = 0; i < e.size(); i += 2) e[i] = -e[i];
  const TensorD re = random_tensor(e.shape(), g), rp = random_tensor({2, 3}, g);
  worst = std::max(worst, fd_check(e, relu_backward(e, re), [&] { return probe(relu(e), re); }, g));
  worst = std::max(worst, fd_check(e, sigmoid_backward(sigmoid(e), re), [&] { return probe(sigmoid(e), re); }, g));
  worst = std::max(worst, fd_check(e, global_avg_pool_backward(e.shape(), rp),
                                   [&] { return probe(global_avg_pool(e), rp); }, g));
  TensorD mask;
  dropout(e, 0.3, 5, Mode::train, &mask);
  worst = std::max(worst, fd_check(e, multiply(mask, re), [&] { return probe(dropout(e, 0.3, 5, Mode::train), re); }, g));
  const TensorD other = random_tensor(e.shape(), g);
  worst = std::max(worst, fd_check(e, re, [&] { return probe(add(e, other), re); }, g));

  TensorD d = random_tensor({3, 5}, g), w = random_tensor({5, 4}, g), b = random_tensor({4}, g);
  const TensorD rd = random_tensor({3, 4}, g);
  const auto dg = dense_backward(d, w, rd);
  auto dl = [&] { return probe(dense(d, w, b), rd); };
  worst = std::max({worst, fd_check(d, dg.input, dl, g), fd_check(w, dg.weights, dl, g), fd_check(b, dg.bias, dl, g)});
  return worst;
}

double loss_gradients() {
  std::mt19937_64 g(4);
  std::uniform_real_distribution<double> uz(-6.0, 6.0), uh(0.05, 0.95);
  std::vector<double> z(16), y(16), h(72), m(72);
  for (std::size_t i = 0; i < z.size(); ++i) {
    z[i] = uz(g);
    y[i] = static_cast<double>(i % 2);
  }
  for (std::size_t i = 0; i < h.size(); ++i) {
    h[i] = uh(g);
    m[i] = uh(g) < 0.4 ? 1.0 : 0.0;
  }
  double worst = 0.0;
  auto check = [&](std::vector<double>& v, const std::vector<double>& analytic, const std::function<double()>& f) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double orig = v[i], step = 1e-5;
      v[i] = orig + step;
      const double plus = f();
      v[i] = orig - step;
      const double minus = f();
      v[i] = orig;
      worst = std::max(worst, relative_error(analytic[i], (plus - minus) / (2.0 * step)));
    }
  };
  const auto ce = ns_wbce(z, y, 4.0);
  check(z, ce.grad, [&] { return ns_wbce(z, y, 4.0).value; });
  const auto dc = dice_loss(h, m, 36);
  check(h, dc.grad, [&] { return dice_loss(h, m, 36).value; });
  return worst;
}

double end_to_end_gradients(std::size_t probes) {
  Network<double> net(ModelConfig::make(Variant::emt_net, Width::toy));
  net.init_weights(5);
  std::mt19937_64 g(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  TensorD x({2, 3, 64, 64});
  for (auto& v : x.values()) v = u(g);
  const std::vector<double> y{1.0, 0.0};
  std::vector<double> m(2 * 64 * 64);
  for (auto& v : m) v = u(g) < 0.2 ? 1.0 : 0.0;
  auto loss = [&](bool back) {
    net.set_dropout_seed(9);
    const auto o = net.forward(x, Mode::train);
    const std::vector<double> z(o.class_logit->values().begin(), o.class_logit->values().end());
    const std::vector<double> hm(o.mask_prob->values().begin(), o.mask_prob->values().end());
    const auto a = ns_wbce(z, y, 3.0);
    const auto b = dice_loss(hm, m, 64 * 64);
    if (back) {
      TensorD gz(o.class_logit->shape());
      for (std::size_t i = 0; i < z.size(); ++i) gz[i] = 1.5 * a.grad[i];
      const TensorD gh(o.mask_prob->shape(), b.grad);
      net.backward(&gz, &gh);
    }
    return 1.5 * a.value + b.value;
  };
  loss(true);
  std::vector<std::pair<Parameter<double>*, std::vector<double>>> grads;
  for (auto* p : net.parameters())
    if (p->learnable) grads.emplace_back(p, std::vector<double>(p->grad.values().begin(), p->grad.values().end()));
  std::mt19937_64 pick(3);
  double worst = 0.0;
  for (std::size_t t = 0; t < probes; ++t) {
    auto& [p, grad] = grads[pick() % grads.size()];
    const std::size_t i = pick() % p->value.size();
    const double orig = p->value[i], h = 1e-7;
    p->value[i] = orig + h;
    const double plus = loss(false);
    p->value[i] = orig - h;
    const double minus = loss(false);
    p->value[i] = orig;
    worst = std::max(worst, relative_error(grad[i], (plus - minus) / (2.0 * h), 1e-3));
  }
  return worst;
}

Outcome gradient_suite() {
  const auto start = Clock::now();
  const double prim = primitive_gradients(), loss = loss_gradients(), e2e = end_to_end_gradients(60);
  const double t = seconds_since(start);
  return {prim <= 1e-4 && loss <= 1e-4 && e2e <= 1e-3 && t < 300.0,
          fmt("primitives %.2e, losses %.2e, end-to-end (60 params) %.2e, %.1f s", prim, loss, e2e, t)};
}

// 4
Outcome shape_contract() {
  const ModelConfig mc = ModelConfig::make(Variant::emt_net, Width::full);
  Network<float> net(mc);
  const std::vector<Shape> want{{64, 112, 112}, {128, 56, 56}, {256, 28, 28}, {1024, 7, 7}};
  const auto taps = net.tap_shapes();
  bool ok = taps.size() == want.size();
  for (std::size_t i = 0; ok && i < want.size(); ++i) ok = taps[i].shape == want[i];
  net.init_weights(42);
  std::mt19937_64 g(4);
  const Tensor x = random_tensor<float>({1, 3, 224, 224}, g, 0.0, 1.0);
  const auto out = net.forward(x, Mode::infer);
  const float p = (*out.class_prob)[0];
  bool open = p > 0.0f && p < 1.0f;
  const bool map_shape = out.mask_prob->shape() == Shape{1, 1, 224, 224};
  for (float v : out.mask_prob->values()) open = open && v > 0.0f && v < 1.0f;
  return {ok && open && map_shape, fmt("taps match: %.0f, class prob %.4f, mask 224x224: %.0f", ok, p, map_shape)};
}

// 5
Outcome parameter_counts() {
  const double emt = static_cast<double>(count_params(ModelConfig::make(Variant::emt_net, Width::full)));
  const double clf = static_cast<double>(count_params(ModelConfig::make(Variant::single_clf, Width::full)));
  const double sgm = static_cast<double>(count_params(ModelConfig::make(Variant::single_sgm, Width::full)));
  auto near = [](double v, double target) { return std::abs(v - target) <= 0.05 * target; };
  const double ratio = emt / (clf + sgm);
  return {near(emt, 5.1e6) && near(clf, 3.8e6) && near(sgm, 4.5e6) && ratio <= 0.65,
          fmt("emt-net %.0f, single-clf %.0f, single-sgm %.0f, ratio %.3f", emt, clf, sgm, ratio)};
}

// 6
Outcome convolution_oracle() {
  const auto start = Clock::now();
  std::mt19937_64 g(6);
  auto pick = [&](std::size_t lo, std::size_t hi) { return lo + static_cast<std::size_t>(g() % (hi - lo + 1)); };
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = pick(1, 3), c = pick(1, 16), h = pick(3, 20), w = pick(3, 20);
    ConvSpec spec;
    Shape kernel;
    std::size_t bias = 0;
    switch (i % 4) {
      case 0: {
        const std::size_t k = pick(0, 1) ? 3 : 1, o = pick(1, 16);
        spec = ConvSpec::standard(k, pick(1, 2), k == 3 ? pick(0, 1) : 0);
        kernel = {o, c, k, k};
        bias = o;
        break;
      }
      case 1:
        spec = ConvSpec::depthwise(3, pick(1, 2), pick(0, 1));
        kernel = {c, 1, 3, 3};
        bias = c;
        break;
      case 2: {
        const std::size_t o = pick(1, 16);
        spec = ConvSpec::pointwise();
        kernel = {o, c, 1, 1};
        bias = o;
        break;
      }
      default: {
        const std::size_t o = pick(1, 16);
        spec = ConvSpec::transposed(3, pick(1, 2), 1);
        kernel = {c, o, 3, 3};
        bias = o;
        break;
      }
    }
    const Tensor x = random_tensor<float>({n, c, h, w}, g), k = random_tensor<float>(kernel, g);
    const Tensor b = random_tensor<float>({bias}, g);
    const Tensor fast = conv2d(x, k, &b, spec);
    const TensorD xd = x.cast<double>(), kd = k.cast<double>(), bd = b.cast<double>();
    const TensorD slow = reference::conv2d(xd, kd, &bd, spec);
    if (fast.shape() != slow.shape()) return {false, "shape mismatch in configuration " + std::to_string(i)};
    for (std::size_t j = 0; j < fast.size(); ++j) worst = std::max(worst, std::abs(fast[j] - slow[j]));
  }
  const double t = seconds_since(start);
  return {worst <= 1e-5 && t < 120.0, fmt("max |diff| %.3g over 200 configurations in %.2f s", worst, t)};
}

// 7
Outcome wp_mechanism() {
  std::mt19937_64 g(7);
  std::uniform_real_distribution<double> uz(-20.0, 20.0), uw(1.0, 10.0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double z = uz(g), w = uw(g);
    const double symbolic = w * (1.0 - sigmoid(z));
    const double analytic = std::abs(ns_wbce(std::vector<double>{z}, std::vector<double>{1.0}, w).grad[0]);
    const double h = 1e-6;
    const double numeric = std::abs((ns_wbce(std::vector<double>{z + h}, std::vector<double>{1.0}, w).value -
                                     ns_wbce(std::vector<double>{z - h}, std::vector<double>{1.0}, w).value) /
                                    (2.0 * h));
    worst = std::max({worst, relative_error(analytic, symbolic, 1e-12), relative_error(numeric, symbolic, 1e-9)});
  }
  return {worst <= 1e-6, fmt("worst relative error %.2e at 100 points", worst)};
}

// 8
Outcome synthetic_end_to_end() {
  const auto start = Clock::now();
  TrainConfig c;
  c.toy = true;
  const TrainResult r = train(c, synth(256, 42, 0.4));
  const double t = seconds_since(start);
  const double acc = r.record.test.acc.value_or(0.0), dsc = r.record.test.dsc.value_or(0.0);
  return {acc >= 0.85 && dsc >= 0.70 && r.record.epochs.size() <= 30 && t <= 900.0,
          fmt("test ACC %.3f, DSC %.3f after %.0f epochs in %.0f s", acc, dsc,
              static_cast<double>(r.record.epochs.size()), t)};
}

// 9
Outcome sweep_protocol() {
  const std::vector<double> wp{1, 1.5, 2, 2.5, 3, 3.5, 4, 4.5, 5, 6, 7, 8, 9, 10};
  const std::vector<double> axis{1, 1.5, 2, 2.5, 3};
  bool lists = default_wp_values() == wp && grid_axis_values() == axis;
  bool has_default = false;
  std::size_t cells = 0;
  for (double clf : grid_axis_values())
    for (double p : grid_axis_values()) {
      ++cells;
      has_default = has_default || (clf == 1.5 && p == 3.0);
    }
  lists = lists && cells == 25 && has_default;

  double low = 0.0, high = 0.0;
  const std::vector<double> values{1.0, 10.0};
  for (std::uint64_t seed : {42u, 43u, 44u}) {
    TrainConfig c;
    c.toy = true;
    c.variant = Variant::single_clf;
    c.seed = seed;
    c.split = SplitSpec::kfold(4, seed);
    const auto rows = sweep_wp(c, synth(256, seed, 0.25), values);
    low += rows[0].report.sen.value_or(0.0) / 3.0;
    high += rows[1].report.sen.value_or(0.0) / 3.0;
  }
  return {lists && high >= low,
          fmt("14 w_p values and 25 cells: %.0f; mean SEN w_p=1 %.3f, w_p=10 %.3f", lists, low, high)};
}

// 10
Outcome inference_bench() {
  const int previous = kernels::max_threads();
  kernels::set_threads(1);
  Network<float> net(ModelConfig::make(Variant::emt_net, Width::full));
  net.init_weights(42);
  std::mt19937_64 g(10);
  const Tensor x = random_tensor<float>({1, 3, 224, 224}, g, 0.0, 1.0);
  for (int i = 0; i < 3; ++i) net.forward(x, Mode::infer);
  std::vector<double> ms;
  for (int i = 0; i < 20; ++i) {
    const auto start = Clock::now();
    net.forward(x, Mode::infer);
    ms.push_back(seconds_since(start) * 1e3);
  }
  kernels::set_threads(previous);
  double mean = 0.0;
  for (double v : ms) mean += v / static_cast<double>(ms.size());
  std::sort(ms.begin(), ms.end());
  const double median = 0.5 * (ms[9] + ms[10]);
  return {mean <= 2000.0 && median <= 2000.0,
          fmt("single-thread full-width forward: mean %.1f ms, median %.1f ms over 20 runs", mean, median)};
}

// 11
Outcome determinism() {
  const int previous = kernels::max_threads();
  kernels::set_threads(1);
  TrainConfig c;
  c.toy = true;
  c.epochs = 3;
  const DatasetManifest m = synth(64, 11, 0.4);
  std::ostringstream a, b;
  write_weights(train(c, m).weights, a);
  write_weights(train(c, m).weights, b);
  kernels::set_threads(previous);
  const bool same = a.str() == b.str();
  return {same, fmt("two single-thread runs, checkpoints of %.0f bytes, identical: %.0f",
                    static_cast<double>(a.str().size()), same)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    Outcome (*run)();
  };
  const Criterion criteria[] = {{"loss equivalence", loss_equivalence},
                                {"numerical stability", stability},
                                {"gradient suite", gradient_suite},
                                {"shape contract", shape_contract},
                                {"parameter counts", parameter_counts},
                                {"convolution oracle", convolution_oracle},
                                {"w_p gradient mechanism", wp_mechanism},
                                {"synthetic end-to-end", synthetic_end_to_end},
                                {"sweep protocol", sweep_protocol},
                                {"inference bench", inference_bench},
                                {"determinism", determinism}};
  int failures = 0;
  int index = 0;
  for (const auto& c : criteria) {
    ++index;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", index, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
