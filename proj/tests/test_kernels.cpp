#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "mmfuse/kernels.hpp"
#include "mmfuse/rng.hpp"

using namespace mmfuse;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
    Matrix m(r, c);
    for (auto& v : m.data) v = rng.uniform(-2.0, 2.0);
    return m;
}

// Naive reference used as an independent oracle for the serial kernels.
Matrix naive_linear_forward(const Matrix& X, const Matrix& W, const Vec& b) {
    Matrix Z(X.rows, W.rows);
    for (std::size_t s = 0; s < X.rows; ++s)
        for (std::size_t j = 0; j < W.rows; ++j) {
            double acc = b[j];
            for (std::size_t i = 0; i < X.cols; ++i) acc += X(s, i) * W(j, i);
            Z(s, j) = acc;
        }
    return Z;
}

}  // namespace

TEST_CASE("linear_forward matches the naive oracle") {
    Rng rng(11);
    for (int iter = 0; iter < 20; ++iter) {
        std::size_t n = 1 + rng.below(8), in = 1 + rng.below(9), out = 1 + rng.below(7);
        Matrix X = random_matrix(n, in, rng);
        Matrix W = random_matrix(out, in, rng);
        Vec b(out);
        for (auto& v : b) v = rng.uniform(-1.0, 1.0);
        Matrix Z;
        kernels::serial::linear_forward(X, W, b, Z);
        Matrix ref = naive_linear_forward(X, W, b);
        REQUIRE(Z.same_shape(ref));
        for (std::size_t i = 0; i < Z.data.size(); ++i)
            CHECK(Z.data[i] == doctest::Approx(ref.data[i]).epsilon(1e-12));
    }
}

TEST_CASE("parallel backend is bit-identical to the serial reference") {
    Rng rng(29);
    kernels::set_threads(4);
    for (int iter = 0; iter < 25; ++iter) {
        std::size_t n = 1 + rng.below(40), in = 1 + rng.below(33), out = 1 + rng.below(17);
        Matrix X = random_matrix(n, in, rng);
        Matrix W = random_matrix(out, in, rng);
        Vec b(out);
        for (auto& v : b) v = rng.uniform(-1.0, 1.0);

        Matrix Zs, Zp;
        kernels::serial::linear_forward(X, W, b, Zs);
        kernels::par::linear_forward(X, W, b, Zp);
        CHECK(Zs.data == Zp.data);

        Matrix dZ = random_matrix(n, out, rng);
        Matrix dXs, dXp;
        kernels::serial::linear_backward_input(dZ, W, dXs);
        kernels::par::linear_backward_input(dZ, W, dXp);
        CHECK(dXs.data == dXp.data);

        Matrix dWs, dWp;
        Vec dbs, dbp;
        kernels::serial::linear_backward_params(dZ, X, dWs, dbs);
        kernels::par::linear_backward_params(dZ, X, dWp, dbp);
        CHECK(dWs.data == dWp.data);
        CHECK(dbs == dbp);

        Matrix As, Ap;
        kernels::serial::relu_forward(Zs, As);
        kernels::par::relu_forward(Zs, Ap);
        CHECK(As.data == Ap.data);

        Matrix dZs2, dZp2;
        kernels::serial::relu_backward(Zs, dZ, dZs2);
        kernels::par::relu_backward(Zs, dZ, dZp2);
        CHECK(dZs2.data == dZp2.data);

        Matrix Ys, Yp;
        kernels::serial::softmax_rows(Zs, 1.7, Ys);
        kernels::par::softmax_rows(Zs, 1.7, Yp);
        CHECK(Ys.data == Yp.data);
    }
    kernels::set_threads(1);
}

TEST_CASE("backward_params equals transpose-product oracle") {
    Rng rng(5);
    Matrix X = random_matrix(6, 4, rng);
    Matrix dZ = random_matrix(6, 3, rng);
    Matrix dW;
    Vec db;
    kernels::serial::linear_backward_params(dZ, X, dW, db);
    for (std::size_t j = 0; j < 3; ++j) {
        double bsum = 0.0;
        for (std::size_t s = 0; s < 6; ++s) bsum += dZ(s, j);
        CHECK(db[j] == doctest::Approx(bsum).epsilon(1e-13));
        for (std::size_t i = 0; i < 4; ++i) {
            double acc = 0.0;
            for (std::size_t s = 0; s < 6; ++s) acc += dZ(s, j) * X(s, i);
            CHECK(dW(j, i) == doctest::Approx(acc).epsilon(1e-13));
        }
    }
}

TEST_CASE("kernel shape errors") {
    Matrix X(2, 3), W(4, 5);
    Vec b(4, 0.0);
    Matrix Z;
    CHECK_THROWS_AS(kernels::serial::linear_forward(X, W, b, Z), std::invalid_argument);
    Matrix Y;
    CHECK_THROWS_AS(kernels::serial::softmax_rows(X, 0.0, Y), std::invalid_argument);
    CHECK_THROWS_AS(kernels::serial::softmax_rows(X, -1.0, Y), std::invalid_argument);
}
