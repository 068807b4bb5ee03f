#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmfuse {

using Vec = std::vector<double>;

/// Dense row-major matrix of doubles. The workhorse container for
/// activations, weights and feature tables.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // row-major, data.size() == rows*cols

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    const double& operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    double* row_ptr(std::size_t i) { return data.data() + i * cols; }
    const double* row_ptr(std::size_t i) const { return data.data() + i * cols; }

    Vec row(std::size_t i) const {
        return Vec(row_ptr(i), row_ptr(i) + cols);
    }
    void set_row(std::size_t i, const Vec& v) {
        if (v.size() != cols) throw std::invalid_argument("Matrix::set_row: length mismatch");
        for (std::size_t j = 0; j < cols; ++j) (*this)(i, j) = v[j];
    }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
    bool empty() const { return rows == 0 || cols == 0; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

inline Matrix submatrix_rows(const Matrix& m, const std::vector<std::size_t>& row_ids) {
    Matrix out(row_ids.size(), m.cols);
    for (std::size_t i = 0; i < row_ids.size(); ++i) {
        if (row_ids[i] >= m.rows) throw std::out_of_range("submatrix_rows: row index out of range");
        for (std::size_t j = 0; j < m.cols; ++j) out(i, j) = m(row_ids[i], j);
    }
    return out;
}

inline std::size_t argmax(const Vec& v) {
    if (v.empty()) throw std::invalid_argument("argmax: empty vector");
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;  // ties keep the lowest index
    return best;
}

}  // namespace mmfuse
