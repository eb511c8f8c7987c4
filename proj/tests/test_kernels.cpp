#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nllab/kernels.hpp"
#include "nllab/rng.hpp"

#include <vector>

using namespace nllab;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
    Matrix m(r, c);
    for (double& v : m.data) v = scale * rng.normal();
    return m;
}

} // namespace

TEST_CASE("parallel kernels match the serial reference bit for bit") {
    Rng rng(1234);
    // Shapes straddling the parallel cutoff, including the real ones.
    const std::size_t shapes[][3] = {
        {3, 5, 7}, {128, 20, 128}, {128, 128, 64}, {900, 68, 256}, {1, 64, 4}, {257, 33, 9}};
    for (const auto& s : shapes) {
        const Matrix x = random_matrix(s[0], s[1], rng);
        const Matrix w = random_matrix(s[2], s[1], rng);
        std::vector<double> b(s[2]);
        for (double& v : b) v = rng.normal();
        const Matrix delta = random_matrix(s[0], s[2], rng);

        Matrix out_par, out_ser;
        dense_forward(x, w, b, out_par);
        ref::dense_forward(x, w, b, out_ser);
        REQUIRE(out_par.data == out_ser.data);

        Matrix dw_par(s[2], s[1]), dw_ser(s[2], s[1]);
        dense_grad_weights(delta, x, dw_par);
        ref::dense_grad_weights(delta, x, dw_ser);
        REQUIRE(dw_par.data == dw_ser.data);

        std::vector<double> db_par(s[2], 0.0), db_ser(s[2], 0.0);
        dense_grad_bias(delta, db_par);
        ref::dense_grad_bias(delta, db_ser);
        REQUIRE(db_par == db_ser);

        Matrix dx_par, dx_ser;
        dense_grad_inputs(delta, w, dx_par);
        ref::dense_grad_inputs(delta, w, dx_ser);
        REQUIRE(dx_par.data == dx_ser.data);

        Matrix sm_par = out_par, sm_ser = out_ser;
        softmax_rows(sm_par);
        ref::softmax_rows(sm_ser);
        REQUIRE(sm_par.data == sm_ser.data);

        Matrix relu_par = out_par, relu_ser = out_ser;
        relu_inplace(relu_par);
        ref::relu_inplace(relu_ser);
        REQUIRE(relu_par.data == relu_ser.data);

        Matrix g_par = delta, g_ser = delta;
        relu_backward(relu_par, g_par);
        ref::relu_backward(relu_ser, g_ser);
        REQUIRE(g_par.data == g_ser.data);
    }
}

TEST_CASE("results are independent of the thread cap") {
    Rng rng(99);
    const Matrix x = random_matrix(700, 50, rng);
    const Matrix w = random_matrix(120, 50, rng);
    const std::vector<double> b(120, 0.25);

    set_thread_cap(1);
    Matrix out1;
    dense_forward(x, w, b, out1);
    set_thread_cap(2);
    Matrix out2;
    dense_forward(x, w, b, out2);
    REQUIRE(out1.data == out2.data);
}

TEST_CASE("softmax rows sum to one and stay positive") {
    Rng rng(7);
    Matrix m = random_matrix(40, 11, rng, 30.0); // large logits stress the shift
    softmax_rows(m);
    for (std::size_t r = 0; r < m.rows; ++r) {
        double sum = 0.0;
        for (double v : m.row(r)) {
            CHECK(v >= 0.0);
            sum += v;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("shape mismatches are rejected") {
    Matrix x(2, 3), w(4, 5), out;
    std::vector<double> b(4);
    CHECK_THROWS_AS(dense_forward(x, w, b, out), std::invalid_argument);

    Matrix delta(2, 4), dw(4, 5);
    CHECK_THROWS_AS(dense_grad_weights(delta, x, dw), std::invalid_argument);
}
