#pragma once

#include "nllab/matrix.hpp"

#include <vector>

namespace nllab {

// Dense-layer compute kernels. The default entry points are OpenMP-parallel;
// nllab::ref holds serial twins used by the tests and the benchmark target.
//
// Parallelization contract: work is split over independent output elements
// only, and every floating-point sum is accumulated sequentially by the one
// thread that owns its element. Serial and parallel paths therefore produce
// bit-identical results for any thread count, which is what the run-level
// reproducibility guarantees rest on.

// out = x (n×in) * w^T (out_dim×in) + b, giving n×out_dim.
void dense_forward(const Matrix& x, const Matrix& w, const std::vector<double>& b, Matrix& out);

void relu_inplace(Matrix& m);

// Row-wise softmax with max-shift; every output row sums to 1.
void softmax_rows(Matrix& m);

// grad *= 1[post > 0], where post is the stored post-activation output.
void relu_backward(const Matrix& post, Matrix& grad);

// dw[o][i] = sum_n delta[n][o] * x[n][i]; the n-sum runs in index order.
void dense_grad_weights(const Matrix& delta, const Matrix& x, Matrix& dw);

// db[o] = sum_n delta[n][o].
void dense_grad_bias(const Matrix& delta, std::vector<double>& db);

// dx = delta (n×out_dim) * w (out_dim×in), giving n×in.
void dense_grad_inputs(const Matrix& delta, const Matrix& w, Matrix& dx);

// Serial reference implementations, kept for equivalence tests and the
// kernel benchmark.
namespace ref {
void dense_forward(const Matrix& x, const Matrix& w, const std::vector<double>& b, Matrix& out);
void relu_inplace(Matrix& m);
void softmax_rows(Matrix& m);
void relu_backward(const Matrix& post, Matrix& grad);
void dense_grad_weights(const Matrix& delta, const Matrix& x, Matrix& dw);
void dense_grad_bias(const Matrix& delta, std::vector<double>& db);
void dense_grad_inputs(const Matrix& delta, const Matrix& w, Matrix& dx);
} // namespace ref

// Caps OpenMP worker threads for every kernel above; no-op without OpenMP.
void set_thread_cap(int n);

// Reads the NLLAB_THREADS env var and applies it; returns the cap or 0.
int apply_thread_cap_from_env();

} // namespace nllab
