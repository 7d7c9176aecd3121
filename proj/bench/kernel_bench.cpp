// Copyright 2026 The EMT-Net Authors
// SPDX-License-Identifier: Apache-2.0
//
// Serial reference loops versus the OpenMP kernels on encoder-sized layers.
// Threads are the last benchmark argument for the parallel path.

#include <benchmark/benchmark.h>

#include <random>

#include "emtnet/conv_spec.hpp"
#include "emtnet/kernels.hpp"
#include "emtnet/ops.hpp"
#include "emtnet/reference.hpp"

namespace {

using emtnet::ConvSpec;
using emtnet::Tensor;

Tensor random_tensor(emtnet::Shape shape, std::uint64_t seed) {
  Tensor t(std::move(shape));
  std::mt19937_64 engine(seed);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  for (auto& v : t.values()) v = dist(engine);
  return t;
}

struct Layer {
  std::size_t in_c, out_c, side;
  ConvSpec spec;
};

// Args: layer kind, side. 0 standard stem, 1 depthwise, 2 pointwise.
Layer make_layer(int kind, std::size_t side) {
  switch (kind) {
    case 0: return {3, 32, side, ConvSpec::standard(3, 2, 1)};
    case 1: return {128, 128, side, ConvSpec::depthwise(3, 1, 1)};
    default: return {128, 256, side, ConvSpec::pointwise()};
  }
}

Tensor layer_kernel(const Layer& l) {
  const std::size_t in = l.spec.mode == emtnet::ConvMode::depthwise ? 1 : l.in_c;
  return random_tensor({l.out_c, in, l.spec.kernel_h, l.spec.kernel_w}, 2);
}

void set_label(benchmark::State& state, int kind) {
  static const char* names[] = {"standard3x3s2", "depthwise3x3", "pointwise"};
  state.SetLabel(names[kind]);
}

void BM_ReferenceConv(benchmark::State& state) {
  const int kind = static_cast<int>(state.range(0));
  const Layer l = make_layer(kind, static_cast<std::size_t>(state.range(1)));
  const Tensor x = random_tensor({1, l.in_c, l.side, l.side}, 1);
  const Tensor k = layer_kernel(l);
  for (auto _ : state) benchmark::DoNotOptimize(emtnet::reference::conv2d<float>(x, k, nullptr, l.spec));
  set_label(state, kind);
}

void BM_ParallelConv(benchmark::State& state) {
  const int kind = static_cast<int>(state.range(0));
  const Layer l = make_layer(kind, static_cast<std::size_t>(state.range(1)));
  const Tensor x = random_tensor({1, l.in_c, l.side, l.side}, 1);
  const Tensor k = layer_kernel(l);
  const int previous = emtnet::kernels::max_threads();
  emtnet::kernels::set_threads(static_cast<int>(state.range(2)));
  for (auto _ : state) benchmark::DoNotOptimize(emtnet::conv2d<float>(x, k, nullptr, l.spec));
  emtnet::kernels::set_threads(previous);
  set_label(state, kind);
}

void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = random_tensor({n, n}, 3), b = random_tensor({n, n}, 4);
  Tensor c({n, n});
  const int previous = emtnet::kernels::max_threads();
  emtnet::kernels::set_threads(static_cast<int>(state.range(1)));
  for (auto _ : state) {
    emtnet::kernels::gemm<float>(n, n, n, {a.data(), n, 1}, b.data(), n, c.data(), n, false);
    benchmark::ClobberMemory();
  }
  emtnet::kernels::set_threads(previous);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}

void reference_args(benchmark::internal::Benchmark* b) {
  for (int kind = 0; kind < 3; ++kind) b->Args({kind, kind == 0 ? 224 : 28});
}

void parallel_args(benchmark::internal::Benchmark* b) {
  const int hw = emtnet::kernels::max_threads();
  for (int kind = 0; kind < 3; ++kind) {
    for (int t : {1, hw}) {
      b->Args({kind, kind == 0 ? 224 : 28, t});
      if (hw == 1) break;
    }
  }
}

void gemm_args(benchmark::internal::Benchmark* b) {
  const int hw = emtnet::kernels::max_threads();
  for (int n : {128, 256}) {
    b->Args({n, 1});
    if (hw > 1) b->Args({n, hw});
  }
}

BENCHMARK(BM_ReferenceConv)->Apply(reference_args)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ParallelConv)->Apply(parallel_args)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_Gemm)->Apply(gemm_args)->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
