// Copyright 2026 The EMT-Net Authors
// SPDX-License-Identifier: Apache-2.0

#include "emtnet/kernels.hpp"

#include <algorithm>
#include <cstdint>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace emtnet::kernels {

namespace {

using index_t = std::int64_t;

// Column tile of B kept hot in cache while sweeping rows of A.
constexpr std::size_t kTileCols = 256;

inline bool in_range(index_t v, std::size_t extent) { return v >= 0 && v < static_cast<index_t>(extent); }

}  // namespace

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
  omp_set_num_threads(std::max(1, n));
#else
  (void)n;
#endif
}

template <typename T>
void gemm(std::size_t M, std::size_t N, std::size_t K, MatrixView<T> A, const T* B, std::size_t ldb, T* C,
          std::size_t ldc, bool accumulate) {
  const index_t tiles = static_cast<index_t>((N + kTileCols - 1) / kTileCols);
  const index_t rows = static_cast<index_t>(M);

#pragma omp parallel for collapse(2) schedule(static)
  for (index_t t = 0; t < tiles; ++t) {
    for (index_t i = 0; i < rows; ++i) {
      const std::size_t j0 = static_cast<std::size_t>(t) * kTileCols;
      const std::size_t w = std::min(kTileCols, N - j0);
      double acc[kTileCols];
      std::fill(acc, acc + w, 0.0);
      std::size_t k = 0;
      // Four rows of B per pass; the grouping is fixed so the sum order is too.
      for (; k + 4 <= K; k += 4) {
        const double a0 = A(i, k), a1 = A(i, k + 1), a2 = A(i, k + 2), a3 = A(i, k + 3);
        const T* b0 = B + k * ldb + j0;
        const T* b1 = b0 + ldb;
        const T* b2 = b1 + ldb;
        const T* b3 = b2 + ldb;
        for (std::size_t j = 0; j < w; ++j) {
          acc[j] += a0 * static_cast<double>(b0[j]) + a1 * static_cast<double>(b1[j]) +
                    a2 * static_cast<double>(b2[j]) + a3 * static_cast<double>(b3[j]);
        }
      }
      for (; k < K; ++k) {
        const double a = A(i, k);
        const T* b = B + k * ldb + j0;
        for (std::size_t j = 0; j < w; ++j) acc[j] += a * static_cast<double>(b[j]);
      }
      T* c = C + static_cast<std::size_t>(i) * ldc + j0;
      if (accumulate) {
        for (std::size_t j = 0; j < w; ++j) c[j] = static_cast<T>(static_cast<double>(c[j]) + acc[j]);
      } else {
        for (std::size_t j = 0; j < w; ++j) c[j] = static_cast<T>(acc[j]);
      }
    }
  }
}

template <typename T>
void gemm_nt(std::size_t M, std::size_t N, std::size_t K, const T* A, std::size_t lda, const T* B, std::size_t ldb,
             T* C, std::size_t ldc, bool accumulate) {
  const index_t rows = static_cast<index_t>(M);
  const index_t cols = static_cast<index_t>(N);

#pragma omp parallel for collapse(2) schedule(static)
  for (index_t i = 0; i < rows; ++i) {
    for (index_t j = 0; j < cols; ++j) {
      const T* a = A + static_cast<std::size_t>(i) * lda;
      const T* b = B + static_cast<std::size_t>(j) * ldb;
      double lanes[8] = {0, 0, 0, 0, 0, 0, 0, 0};
      std::size_t k = 0;
      for (; k + 8 <= K; k += 8) {
        for (std::size_t l = 0; l < 8; ++l) lanes[l] += static_cast<double>(a[k + l]) * static_cast<double>(b[k + l]);
      }
      double s = ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) + ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]));
      for (; k < K; ++k) s += static_cast<double>(a[k]) * static_cast<double>(b[k]);
      T& c = C[static_cast<std::size_t>(i) * ldc + static_cast<std::size_t>(j)];
      c = accumulate ? static_cast<T>(static_cast<double>(c) + s) : static_cast<T>(s);
    }
  }
}

template <typename T>
void im2col(const T* image, const PatchGeometry& g, T* col) {
  const std::size_t plane = g.height * g.width;
  const std::size_t cells = g.out_h * g.out_w;
  const index_t channels = static_cast<index_t>(g.channels);

#pragma omp parallel for schedule(static)
  for (index_t c = 0; c < channels; ++c) {
    const T* src = image + static_cast<std::size_t>(c) * plane;
    for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
        T* dst = col + ((static_cast<std::size_t>(c) * g.kernel_h + ky) * g.kernel_w + kx) * cells;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const index_t iy = static_cast<index_t>(oy * g.stride + ky) - static_cast<index_t>(g.padding);
          T* row = dst + oy * g.out_w;
          if (!in_range(iy, g.height)) {
            std::fill(row, row + g.out_w, T(0));
            continue;
          }
          const T* src_row = src + static_cast<std::size_t>(iy) * g.width;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const index_t ix = static_cast<index_t>(ox * g.stride + kx) - static_cast<index_t>(g.padding);
            row[ox] = in_range(ix, g.width) ? src_row[ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* col, const PatchGeometry& g, T* image) {
  const std::size_t plane = g.height * g.width;
  const std::size_t cells = g.out_h * g.out_w;
  const index_t channels = static_cast<index_t>(g.channels);

#pragma omp parallel
  {
    std::vector<double> acc(plane);
#pragma omp for schedule(static)
    for (index_t c = 0; c < channels; ++c) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
        for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
          const T* src = col + ((static_cast<std::size_t>(c) * g.kernel_h + ky) * g.kernel_w + kx) * cells;
          for (std::size_t oy = 0; oy < g.out_h; ++oy) {
            const index_t iy = static_cast<index_t>(oy * g.stride + ky) - static_cast<index_t>(g.padding);
            if (!in_range(iy, g.height)) continue;
            double* dst_row = acc.data() + static_cast<std::size_t>(iy) * g.width;
            const T* src_row = src + oy * g.out_w;
            for (std::size_t ox = 0; ox < g.out_w; ++ox) {
              const index_t ix = static_cast<index_t>(ox * g.stride + kx) - static_cast<index_t>(g.padding);
              if (in_range(ix, g.width)) dst_row[ix] += static_cast<double>(src_row[ox]);
            }
          }
        }
      }
      T* dst = image + static_cast<std::size_t>(c) * plane;
      for (std::size_t p = 0; p < plane; ++p) dst[p] = static_cast<T>(acc[p]);
    }
  }
}

template <typename T>
void depthwise_forward(const T* input, const T* kernel, const DepthwiseGeometry& g, T* output) {
  const std::size_t in_plane = g.height * g.width;
  const std::size_t out_plane = g.out_h * g.out_w;
  const std::size_t taps = g.kernel_h * g.kernel_w;
  const index_t planes = static_cast<index_t>(g.batch * g.channels);

#pragma omp parallel for schedule(static)
  for (index_t nc = 0; nc < planes; ++nc) {
    const std::size_t c = static_cast<std::size_t>(nc) % g.channels;
    const T* src = input + static_cast<std::size_t>(nc) * in_plane;
    const T* w = kernel + c * taps;
    T* dst = output + static_cast<std::size_t>(nc) * out_plane;
    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
      for (std::size_t ox = 0; ox < g.out_w; ++ox) {
        double acc = 0.0;
        for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
          const index_t iy = static_cast<index_t>(oy * g.stride + ky) - static_cast<index_t>(g.padding);
          if (!in_range(iy, g.height)) continue;
          for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
            const index_t ix = static_cast<index_t>(ox * g.stride + kx) - static_cast<index_t>(g.padding);
            if (!in_range(ix, g.width)) continue;
            acc += static_cast<double>(w[ky * g.kernel_w + kx]) *
                   static_cast<double>(src[static_cast<std::size_t>(iy) * g.width + static_cast<std::size_t>(ix)]);
          }
        }
        dst[oy * g.out_w + ox] = static_cast<T>(acc);
      }
    }
  }
}

template <typename T>
void depthwise_backward_input(const T* grad_out, const T* kernel, const DepthwiseGeometry& g, T* grad_in) {
  const std::size_t in_plane = g.height * g.width;
  const std::size_t out_plane = g.out_h * g.out_w;
  const std::size_t taps = g.kernel_h * g.kernel_w;
  const index_t planes = static_cast<index_t>(g.batch * g.channels);

#pragma omp parallel
  {
    std::vector<double> acc(in_plane);
#pragma omp for schedule(static)
    for (index_t nc = 0; nc < planes; ++nc) {
      const std::size_t c = static_cast<std::size_t>(nc) % g.channels;
      const T* gy = grad_out + static_cast<std::size_t>(nc) * out_plane;
      const T* w = kernel + c * taps;
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t oy = 0; oy < g.out_h; ++oy) {
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
          const double up = static_cast<double>(gy[oy * g.out_w + ox]);
          for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
            const index_t iy = static_cast<index_t>(oy * g.stride + ky) - static_cast<index_t>(g.padding);
            if (!in_range(iy, g.height)) continue;
            for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
              const index_t ix = static_cast<index_t>(ox * g.stride + kx) - static_cast<index_t>(g.padding);
              if (!in_range(ix, g.width)) continue;
              acc[static_cast<std::size_t>(iy) * g.width + static_cast<std::size_t>(ix)] +=
                  up * static_cast<double>(w[ky * g.kernel_w + kx]);
            }
          }
        }
      }
      T* dst = grad_in + static_cast<std::size_t>(nc) * in_plane;
      for (std::size_t p = 0; p < in_plane; ++p) dst[p] = static_cast<T>(acc[p]);
    }
  }
}

template <typename T>
void depthwise_backward_kernel(const T* grad_out, const T* input, const DepthwiseGeometry& g, T* grad_kernel) {
  const std::size_t in_plane = g.height * g.width;
  const std::size_t out_plane = g.out_h * g.out_w;
  const std::size_t taps = g.kernel_h * g.kernel_w;
  const index_t channels = static_cast<index_t>(g.channels);

#pragma omp parallel for schedule(static)
  for (index_t c = 0; c < channels; ++c) {
    for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
        double acc = 0.0;
        for (std::size_t n = 0; n < g.batch; ++n) {
          const std::size_t nc = n * g.channels + static_cast<std::size_t>(c);
          const T* gy = grad_out + nc * out_plane;
          const T* src = input + nc * in_plane;
          for (std::size_t oy = 0; oy < g.out_h; ++oy) {
            const index_t iy = static_cast<index_t>(oy * g.stride + ky) - static_cast<index_t>(g.padding);
            if (!in_range(iy, g.height)) continue;
            for (std::size_t ox = 0; ox < g.out_w; ++ox) {
              const index_t ix = static_cast<index_t>(ox * g.stride + kx) - static_cast<index_t>(g.padding);
              if (!in_range(ix, g.width)) continue;
              acc += static_cast<double>(gy[oy * g.out_w + ox]) *
                     static_cast<double>(src[static_cast<std::size_t>(iy) * g.width + static_cast<std::size_t>(ix)]);
            }
          }
        }
        grad_kernel[static_cast<std::size_t>(c) * taps + ky * g.kernel_w + kx] = static_cast<T>(acc);
      }
    }
  }
}

#define EMTNET_INSTANTIATE_KERNELS(T)                                                                              \
  template void gemm<T>(std::size_t, std::size_t, std::size_t, MatrixView<T>, const T*, std::size_t, T*,          \
                        std::size_t, bool);                                                                        \
  template void gemm_nt<T>(std::size_t, std::size_t, std::size_t, const T*, std::size_t, const T*, std::size_t, T*, \
                           std::size_t, bool);                                                                     \
  template void im2col<T>(const T*, const PatchGeometry&, T*);                                                     \
  template void col2im<T>(const T*, const PatchGeometry&, T*);                                                     \
  template void depthwise_forward<T>(const T*, const T*, const DepthwiseGeometry&, T*);                            \
  template void depthwise_backward_input<T>(const T*, const T*, const DepthwiseGeometry&, T*);                     \
  template void depthwise_backward_kernel<T>(const T*, const T*, const DepthwiseGeometry&, T*);

EMTNET_INSTANTIATE_KERNELS(float)
EMTNET_INSTANTIATE_KERNELS(double)

}  // namespace emtnet::kernels
