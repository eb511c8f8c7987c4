// Serial-reference vs OpenMP kernel comparison on the shapes this project
// actually runs: classifier batches, full-set snapshots and corrector
// batches. Prints time per call, speedup and the max abs deviation (which
// must be exactly zero: both paths reduce in the same order).

#include "nllab/kernels.hpp"
#include "nllab/rng.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace nllab;

namespace {

using Clock = std::chrono::steady_clock;

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
    Matrix m(r, c);
    for (double& v : m.data) v = rng.normal();
    return m;
}

template <typename F>
double time_per_call(F&& fn, int reps) {
    fn(); // warm up
    const auto t0 = Clock::now();
    for (int i = 0; i < reps; ++i) fn();
    return std::chrono::duration<double>(Clock::now() - t0).count() / reps;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    double mx = 0.0;
    for (std::size_t k = 0; k < a.data.size(); ++k)
        mx = std::max(mx, std::abs(a.data[k] - b.data[k]));
    return mx;
}

struct Shape {
    const char* name;
    std::size_t n, in, out;
    int reps;
};

void bench_shape(const Shape& s) {
    Rng rng(42);
    const Matrix x = random_matrix(s.n, s.in, rng);
    const Matrix w = random_matrix(s.out, s.in, rng);
    const std::vector<double> b(s.out, 0.1);
    const Matrix delta = random_matrix(s.n, s.out, rng);

    Matrix out_ref, out_omp;
    const double fwd_ref = time_per_call([&] { ref::dense_forward(x, w, b, out_ref); }, s.reps);
    const double fwd_omp = time_per_call([&] { dense_forward(x, w, b, out_omp); }, s.reps);
    const double fwd_diff = max_abs_diff(out_ref, out_omp);

    Matrix dw_ref(s.out, s.in), dw_omp(s.out, s.in);
    const double gw_ref = time_per_call(
        [&] {
            std::fill(dw_ref.data.begin(), dw_ref.data.end(), 0.0);
            ref::dense_grad_weights(delta, x, dw_ref);
        },
        s.reps);
    const double gw_omp = time_per_call(
        [&] {
            std::fill(dw_omp.data.begin(), dw_omp.data.end(), 0.0);
            dense_grad_weights(delta, x, dw_omp);
        },
        s.reps);
    const double gw_diff = max_abs_diff(dw_ref, dw_omp);

    Matrix dx_ref, dx_omp;
    const double gx_ref =
        time_per_call([&] { ref::dense_grad_inputs(delta, w, dx_ref); }, s.reps);
    const double gx_omp = time_per_call([&] { dense_grad_inputs(delta, w, dx_omp); }, s.reps);
    const double gx_diff = max_abs_diff(dx_ref, dx_omp);

    const double gflops_fwd = 2.0 * s.n * s.in * s.out / fwd_omp / 1e9;
    std::printf("%-22s fwd %8.1fus -> %8.1fus (x%.2f, %4.1f GF/s)  gradW x%.2f  gradX x%.2f  "
                "maxdiff %g/%g/%g\n",
                s.name, fwd_ref * 1e6, fwd_omp * 1e6, fwd_ref / fwd_omp, gflops_fwd,
                gw_ref / gw_omp, gx_ref / gx_omp, fwd_diff, gw_diff, gx_diff);
}

} // namespace

int main() {
#ifdef _OPENMP
    std::printf("OpenMP enabled, max threads %d\n", omp_get_max_threads());
#else
    std::printf("OpenMP disabled, serial build\n");
#endif

    const Shape shapes[] = {
        {"classifier batch L1", 128, 20, 128, 200},
        {"classifier batch L2", 128, 128, 64, 200},
        {"snapshot full-set L1", 4500, 20, 128, 20},
        {"snapshot full-set L2", 4500, 128, 64, 20},
        {"corrector batch", 32, 68, 256, 200},
        {"corrector apply", 4500, 68, 256, 10},
    };
    for (const Shape& s : shapes) bench_shape(s);

    std::puts("maxdiff columns must be exactly 0: serial and parallel paths share "
              "one reduction order.");
    return 0;
}
