#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace cubesim {

// Dense row-major double matrix, just enough for the desk-scale correctness
// checks. Accumulation order in matmul is fixed (k ascending) so summation
// order is reproducible.
struct Matrix {
    long long rows = 0, cols = 0;
    std::vector<double> v;

    Matrix() = default;
    Matrix(long long r, long long c) : rows(r), cols(c), v((size_t)(r * c), 0.0) {}

    double& operator()(long long i, long long j) { return v[(size_t)(i * cols + j)]; }
    double operator()(long long i, long long j) const { return v[(size_t)(i * cols + j)]; }

    Matrix block(long long r0, long long r1, long long c0, long long c1) const {
        if (r0 < 0 || r1 > rows || c0 < 0 || c1 > cols || r0 > r1 || c0 > c1)
            throw std::out_of_range("Matrix::block: bad range");
        Matrix b(r1 - r0, c1 - c0);
        for (long long i = r0; i < r1; ++i)
            for (long long j = c0; j < c1; ++j) b(i - r0, j - c0) = (*this)(i, j);
        return b;
    }
};

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) throw std::invalid_argument("matmul: shape mismatch");
    Matrix c(a.rows, b.cols);
    for (long long i = 0; i < a.rows; ++i)
        for (long long j = 0; j < b.cols; ++j) {
            double s = 0;
            for (long long k = 0; k < a.cols; ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    return c;
}

inline Matrix transpose(const Matrix& a) {
    Matrix t(a.cols, a.rows);
    for (long long i = 0; i < a.rows; ++i)
        for (long long j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
    return t;
}

inline void add_into(Matrix& dst, const Matrix& src) {
    if (dst.rows != src.rows || dst.cols != src.cols)
        throw std::invalid_argument("add_into: shape mismatch");
    for (size_t i = 0; i < dst.v.size(); ++i) dst.v[i] += src.v[i];
}

inline double max_abs(const Matrix& m) {
    double r = 0;
    for (double x : m.v) r = std::max(r, std::abs(x));
    return r;
}

// Largest element-wise |a-b| relative to the magnitude of b.
inline double max_rel_err(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows || a.cols != b.cols)
        throw std::invalid_argument("max_rel_err: shape mismatch");
    const double scale = std::max(max_abs(b), 1e-300);
    double r = 0;
    for (size_t i = 0; i < a.v.size(); ++i) r = std::max(r, std::abs(a.v[i] - b.v[i]));
    return r / scale;
}

}  // namespace cubesim
