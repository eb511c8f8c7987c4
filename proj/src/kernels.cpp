#include "nllab/kernels.hpp"

#include "nllab/errors.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace nllab {

namespace {

// Work below this many multiply-adds is not worth a parallel region: the
// fork/join costs more than the loop until roughly this size on commodity
// 2-4 core boxes (see bench_kernels).
constexpr std::size_t kParallelCutoff = 768 * 1024;

void check_dims(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("shape mismatch in ") + what);
}

} // namespace

// ---------------------------------------------------------------------------
// serial reference kernels
// ---------------------------------------------------------------------------

namespace ref {

void dense_forward(const Matrix& x, const Matrix& w, const std::vector<double>& b, Matrix& out) {
    check_dims(x.cols == w.cols && b.size() == w.rows, "dense_forward");
    out = Matrix(x.rows, w.rows);
    for (std::size_t n = 0; n < x.rows; ++n) {
        const double* xr = x.data.data() + n * x.cols;
        double* or_ = out.data.data() + n * out.cols;
        for (std::size_t o = 0; o < w.rows; ++o) {
            const double* wr = w.data.data() + o * w.cols;
            double acc = b[o];
            for (std::size_t i = 0; i < x.cols; ++i) acc += xr[i] * wr[i];
            or_[o] = acc;
        }
    }
}

void relu_inplace(Matrix& m) {
    for (double& v : m.data)
        if (v < 0.0) v = 0.0;
}

void softmax_rows(Matrix& m) {
    for (std::size_t n = 0; n < m.rows; ++n) {
        double* r = m.data.data() + n * m.cols;
        double mx = r[0];
        for (std::size_t j = 1; j < m.cols; ++j)
            if (r[j] > mx) mx = r[j];
        double sum = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) {
            r[j] = std::exp(r[j] - mx);
            sum += r[j];
        }
        for (std::size_t j = 0; j < m.cols; ++j) r[j] /= sum;
    }
}

void relu_backward(const Matrix& post, Matrix& grad) {
    check_dims(post.rows == grad.rows && post.cols == grad.cols, "relu_backward");
    for (std::size_t k = 0; k < grad.data.size(); ++k)
        if (post.data[k] <= 0.0) grad.data[k] = 0.0;
}

void dense_grad_weights(const Matrix& delta, const Matrix& x, Matrix& dw) {
    check_dims(delta.rows == x.rows && dw.rows == delta.cols && dw.cols == x.cols,
               "dense_grad_weights");
    for (std::size_t o = 0; o < dw.rows; ++o) {
        double* dwr = dw.data.data() + o * dw.cols;
        for (std::size_t n = 0; n < delta.rows; ++n) {
            const double d = delta.data[n * delta.cols + o];
            if (d == 0.0) continue;
            const double* xr = x.data.data() + n * x.cols;
            for (std::size_t i = 0; i < dw.cols; ++i) dwr[i] += d * xr[i];
        }
    }
}

void dense_grad_bias(const Matrix& delta, std::vector<double>& db) {
    check_dims(db.size() == delta.cols, "dense_grad_bias");
    for (std::size_t o = 0; o < delta.cols; ++o) {
        double acc = 0.0;
        for (std::size_t n = 0; n < delta.rows; ++n) acc += delta.data[n * delta.cols + o];
        db[o] += acc;
    }
}

void dense_grad_inputs(const Matrix& delta, const Matrix& w, Matrix& dx) {
    check_dims(delta.cols == w.rows, "dense_grad_inputs");
    dx = Matrix(delta.rows, w.cols);
    for (std::size_t n = 0; n < delta.rows; ++n) {
        const double* dr = delta.data.data() + n * delta.cols;
        double* dxr = dx.data.data() + n * dx.cols;
        for (std::size_t o = 0; o < w.rows; ++o) {
            const double d = dr[o];
            if (d == 0.0) continue;
            const double* wr = w.data.data() + o * w.cols;
            for (std::size_t i = 0; i < w.cols; ++i) dxr[i] += d * wr[i];
        }
    }
}

} // namespace ref

// ---------------------------------------------------------------------------
// OpenMP kernels: one thread per output row / output element, inner sums
// always sequential in index order
// ---------------------------------------------------------------------------

void dense_forward(const Matrix& x, const Matrix& w, const std::vector<double>& b, Matrix& out) {
    check_dims(x.cols == w.cols && b.size() == w.rows, "dense_forward");
    out = Matrix(x.rows, w.rows);
    const std::ptrdiff_t n_rows = static_cast<std::ptrdiff_t>(x.rows);
    const bool par = x.rows * w.rows * x.cols > kParallelCutoff;
#pragma omp parallel for schedule(static) if (par)
    for (std::ptrdiff_t n = 0; n < n_rows; ++n) {
        const double* xr = x.data.data() + static_cast<std::size_t>(n) * x.cols;
        double* or_ = out.data.data() + static_cast<std::size_t>(n) * out.cols;
        for (std::size_t o = 0; o < w.rows; ++o) {
            const double* wr = w.data.data() + o * w.cols;
            double acc = b[o];
            for (std::size_t i = 0; i < x.cols; ++i) acc += xr[i] * wr[i];
            or_[o] = acc;
        }
    }
}

void relu_inplace(Matrix& m) {
    const std::ptrdiff_t sz = static_cast<std::ptrdiff_t>(m.data.size());
#pragma omp parallel for schedule(static) if (m.data.size() > kParallelCutoff)
    for (std::ptrdiff_t k = 0; k < sz; ++k)
        if (m.data[static_cast<std::size_t>(k)] < 0.0) m.data[static_cast<std::size_t>(k)] = 0.0;
}

void softmax_rows(Matrix& m) {
    const std::ptrdiff_t n_rows = static_cast<std::ptrdiff_t>(m.rows);
#pragma omp parallel for schedule(static) if (m.data.size() > kParallelCutoff)
    for (std::ptrdiff_t n = 0; n < n_rows; ++n) {
        double* r = m.data.data() + static_cast<std::size_t>(n) * m.cols;
        double mx = r[0];
        for (std::size_t j = 1; j < m.cols; ++j)
            if (r[j] > mx) mx = r[j];
        double sum = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) {
            r[j] = std::exp(r[j] - mx);
            sum += r[j];
        }
        for (std::size_t j = 0; j < m.cols; ++j) r[j] /= sum;
    }
}

void relu_backward(const Matrix& post, Matrix& grad) {
    check_dims(post.rows == grad.rows && post.cols == grad.cols, "relu_backward");
    const std::ptrdiff_t sz = static_cast<std::ptrdiff_t>(grad.data.size());
#pragma omp parallel for schedule(static) if (grad.data.size() > kParallelCutoff)
    for (std::ptrdiff_t k = 0; k < sz; ++k)
        if (post.data[static_cast<std::size_t>(k)] <= 0.0)
            grad.data[static_cast<std::size_t>(k)] = 0.0;
}

void dense_grad_weights(const Matrix& delta, const Matrix& x, Matrix& dw) {
    check_dims(delta.rows == x.rows && dw.rows == delta.cols && dw.cols == x.cols,
               "dense_grad_weights");
    const std::ptrdiff_t n_out = static_cast<std::ptrdiff_t>(dw.rows);
    const bool par = delta.rows * dw.rows * dw.cols > kParallelCutoff;
    // Parallel over output units: each thread owns whole dw rows, so the
    // batch reduction stays in sample order.
#pragma omp parallel for schedule(static) if (par)
    for (std::ptrdiff_t o = 0; o < n_out; ++o) {
        double* dwr = dw.data.data() + static_cast<std::size_t>(o) * dw.cols;
        for (std::size_t n = 0; n < delta.rows; ++n) {
            const double d = delta.data[n * delta.cols + static_cast<std::size_t>(o)];
            if (d == 0.0) continue;
            const double* xr = x.data.data() + n * x.cols;
            for (std::size_t i = 0; i < dw.cols; ++i) dwr[i] += d * xr[i];
        }
    }
}

void dense_grad_bias(const Matrix& delta, std::vector<double>& db) {
    check_dims(db.size() == delta.cols, "dense_grad_bias");
    const std::ptrdiff_t n_out = static_cast<std::ptrdiff_t>(delta.cols);
#pragma omp parallel for schedule(static) if (delta.data.size() > kParallelCutoff)
    for (std::ptrdiff_t o = 0; o < n_out; ++o) {
        double acc = 0.0;
        for (std::size_t n = 0; n < delta.rows; ++n)
            acc += delta.data[n * delta.cols + static_cast<std::size_t>(o)];
        db[static_cast<std::size_t>(o)] += acc;
    }
}

void dense_grad_inputs(const Matrix& delta, const Matrix& w, Matrix& dx) {
    check_dims(delta.cols == w.rows, "dense_grad_inputs");
    dx = Matrix(delta.rows, w.cols);
    const std::ptrdiff_t n_rows = static_cast<std::ptrdiff_t>(delta.rows);
    const bool par = delta.rows * w.rows * w.cols > kParallelCutoff;
#pragma omp parallel for schedule(static) if (par)
    for (std::ptrdiff_t n = 0; n < n_rows; ++n) {
        const double* dr = delta.data.data() + static_cast<std::size_t>(n) * delta.cols;
        double* dxr = dx.data.data() + static_cast<std::size_t>(n) * dx.cols;
        for (std::size_t o = 0; o < w.rows; ++o) {
            const double d = dr[o];
            if (d == 0.0) continue;
            const double* wr = w.data.data() + o * w.cols;
            for (std::size_t i = 0; i < w.cols; ++i) dxr[i] += d * wr[i];
        }
    }
}

void set_thread_cap(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

int apply_thread_cap_from_env() {
    const char* env = std::getenv("NLLAB_THREADS");
    if (env == nullptr) return 0;
    const int n = std::atoi(env);
    if (n <= 0) throw ConfigError("NLLAB_THREADS", "NLLAB_THREADS must be a positive integer");
    set_thread_cap(n);
    return n;
}

} // namespace nllab
