#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "compgen/grad/tape.hpp"

namespace compgen::grad {

// Elementwise arithmetic. Binary ops require identical shapes.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var add_scalar(const Var& a, double offset);

Var square(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
/// max(x, slope * x) for slope in (0, 1).
Var leaky_relu(const Var& a, double slope);
/// Gradient passes only where lo <= x <= hi.
Var clamp(const Var& a, double lo, double hi);

Var sum(const Var& a);
Var mean(const Var& a);

/// a[N x K] * b[K x M].
Var matmul(const Var& a, const Var& b);
/// Dense layer y = x W^T + b with W[out x in], b[out]; x is [in] or [N x in].
Var linear(const Var& x, const Var& weight, const Var& bias);
/// Adds bias[M] to every row of x[N x M].
Var add_bias(const Var& x, const Var& bias);
Var transpose(const Var& a);
Var reshape(const Var& a, Shape shape);

/// Rows of table[V x E] selected by index, as [N x E].
Var gather_rows(const Var& table, std::span<const std::size_t> indices);
/// Columns [begin, end) of a[N x M].
Var slice_cols(const Var& a, std::size_t begin, std::size_t end);
Var concat_cols(const Var& a, const Var& b);

/// Each row of a[N x M] divided by its L2 norm.
Var l2_normalize_rows(const Var& a);
/// Mean over rows of -log softmax(logits[r])[targets[r]].
Var cross_entropy_rows(const Var& logits, std::span<const std::size_t> targets);

/// Direct correlation. x[N x C x H x W], weight[Co x C x k x k], bias[Co].
Var conv2d(const Var& x, const Var& weight, const Var& bias, std::size_t stride, std::size_t padding);
/// Adjoint of conv2d. x[N x C x H x W], weight[C x Co x k x k], bias[Co];
/// output extent (H - 1) * stride - 2 * padding + k.
Var conv_transpose2d(const Var& x, const Var& weight, const Var& bias, std::size_t stride, std::size_t padding);

namespace kernels {

/// C[M x N] (+)= A[M x K] * B[K x N]; row-major, no aliasing.
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c,
             bool accumulate);
/// C[M x N] (+)= A[K x M]^T * B[K x N].
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c,
             bool accumulate);
/// C[M x N] (+)= A[M x K] * B[N x K]^T.
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c,
             bool accumulate);

}  // namespace kernels

}  // namespace compgen::grad
