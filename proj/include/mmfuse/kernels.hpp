#pragma once

#include "mmfuse/matrix.hpp"

namespace mmfuse::kernels {

/// Number of worker threads used by the parallel backend. 1 selects the
/// serial reference path. Every kernel computes each output element with the
/// same serial inner loop, so the two backends are bit-identical and results
/// do not depend on the thread count.
void set_threads(int n);
int threads();

namespace serial {
// Z = X * W^T + b.  X: n x in, W: out x in, b: out, Z: n x out.
void linear_forward(const Matrix& X, const Matrix& W, const Vec& b, Matrix& Z);
// dX = dZ * W.  dZ: n x out, W: out x in, dX: n x in.
void linear_backward_input(const Matrix& dZ, const Matrix& W, Matrix& dX);
// dW = dZ^T * X, db = column sums of dZ.
void linear_backward_params(const Matrix& dZ, const Matrix& X, Matrix& dW, Vec& db);
void relu_forward(const Matrix& Z, Matrix& A);
// dZ = dA where Z > 0, else 0.
void relu_backward(const Matrix& Z, const Matrix& dA, Matrix& dZ);
// Row-wise tempered softmax with max subtraction.
void softmax_rows(const Matrix& Z, double k, Matrix& Y);
}  // namespace serial

namespace par {
void linear_forward(const Matrix& X, const Matrix& W, const Vec& b, Matrix& Z);
void linear_backward_input(const Matrix& dZ, const Matrix& W, Matrix& dX);
void linear_backward_params(const Matrix& dZ, const Matrix& X, Matrix& dW, Vec& db);
void relu_forward(const Matrix& Z, Matrix& A);
void relu_backward(const Matrix& Z, const Matrix& dA, Matrix& dZ);
void softmax_rows(const Matrix& Z, double k, Matrix& Y);
}  // namespace par

// Dispatchers: parallel backend when threads() > 1, serial otherwise.
void linear_forward(const Matrix& X, const Matrix& W, const Vec& b, Matrix& Z);
void linear_backward_input(const Matrix& dZ, const Matrix& W, Matrix& dX);
void linear_backward_params(const Matrix& dZ, const Matrix& X, Matrix& dW, Vec& db);
void relu_forward(const Matrix& Z, Matrix& A);
void relu_backward(const Matrix& Z, const Matrix& dA, Matrix& dZ);
void softmax_rows(const Matrix& Z, double k, Matrix& Y);

}  // namespace mmfuse::kernels
