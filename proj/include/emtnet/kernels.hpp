// Copyright 2026 The EMT-Net Authors
// SPDX-License-Identifier: Apache-2.0

// OpenMP-parallel compute kernels. Every output element is produced by a
// single thread with a fixed summation order, so results are bitwise
// identical for any thread count. Accumulation is always 64-bit.

#pragma once

#include <cstddef>

namespace emtnet::kernels {

/// Strided read-only matrix: element (i, k) lives at ptr[i * row_stride + k * col_stride].
template <typename T>
struct MatrixView {
  const T* ptr;
  std::size_t row_stride;
  std::size_t col_stride;

  const T& operator()(std::size_t i, std::size_t k) const { return ptr[i * row_stride + k * col_stride]; }
};

/// C[M x N] (+)= A[M x K] * B[K x N]. B and C are row-major with leading
/// dimensions ldb / ldc.
template <typename T>
void gemm(std::size_t M, std::size_t N, std::size_t K, MatrixView<T> A, const T* B, std::size_t ldb, T* C,
          std::size_t ldc, bool accumulate);

/// C[M x N] (+)= A[M x K] * B[N x K]^T, both operands row-major.
template <typename T>
void gemm_nt(std::size_t M, std::size_t N, std::size_t K, const T* A, std::size_t lda, const T* B, std::size_t ldb,
             T* C, std::size_t ldc, bool accumulate);

struct PatchGeometry {
  std::size_t channels, height, width;  // image side
  std::size_t kernel_h, kernel_w, stride, padding;
  std::size_t out_h, out_w;             // patch grid
};

/// Unfolds one C x H x W image into a (C*kh*kw) x (out_h*out_w) column matrix.
template <typename T>
void im2col(const T* image, const PatchGeometry& g, T* col);

/// Adjoint of im2col: folds columns back into an image, summing overlaps.
/// Overwrites `image`.
template <typename T>
void col2im(const T* col, const PatchGeometry& g, T* image);

struct DepthwiseGeometry {
  std::size_t batch, channels, height, width;
  std::size_t kernel_h, kernel_w, stride, padding;
  std::size_t out_h, out_w;
};

template <typename T>
void depthwise_forward(const T* input, const T* kernel, const DepthwiseGeometry& g, T* output);

template <typename T>
void depthwise_backward_input(const T* grad_out, const T* kernel, const DepthwiseGeometry& g, T* grad_in);

template <typename T>
void depthwise_backward_kernel(const T* grad_out, const T* input, const DepthwiseGeometry& g, T* grad_kernel);

/// Number of threads the parallel kernels will use.
int max_threads();
void set_threads(int n);

}  // namespace emtnet::kernels
