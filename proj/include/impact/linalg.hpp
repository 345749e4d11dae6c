#pragma once

// Small dense matrix helpers for the J x J volatility systems (J is tiny,
// typically 1-3, so everything is direct and allocation-light).

#include <cmath>
#include <cstddef>
#include <vector>

#include "impact/errors.hpp"

namespace impact {

struct Matrix {
    std::size_t n = 0;
    std::vector<double> a;  // row-major n x n

    Matrix() = default;
    explicit Matrix(std::size_t n_) : n(n_), a(n_ * n_, 0.0) {}

    double& operator()(std::size_t i, std::size_t j) { return a[i * n + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a[i * n + j]; }

    static Matrix identity(std::size_t n_) {
        Matrix m(n_);
        for (std::size_t i = 0; i < n_; ++i) m(i, i) = 1.0;
        return m;
    }

    Matrix transposed() const {
        Matrix t(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) t(j, i) = (*this)(i, j);
        return t;
    }
};

/// Solve A x = rhs by Gaussian elimination with partial pivoting.
inline std::vector<double> solve_linear(Matrix A, std::vector<double> rhs) {
    const std::size_t n = A.n;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(A(r, col)) > std::abs(A(piv, col))) piv = r;
        if (A(piv, col) == 0.0) throw NumericsError("singular linear system");
        if (piv != col) {
            for (std::size_t c = 0; c < n; ++c) std::swap(A(piv, c), A(col, c));
            std::swap(rhs[piv], rhs[col]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = A(r, col) / A(col, col);
            if (f == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) A(r, c) -= f * A(col, c);
            rhs[r] -= f * rhs[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = rhs[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= A(i, j) * x[j];
        x[i] = s / A(i, i);
    }
    return x;
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi sweeps.
inline std::vector<double> symmetric_eigenvalues(Matrix s) {
    const std::size_t n = s.n;
    if (n == 1) return {s(0, 0)};
    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += s(p, q) * s(p, q);
        if (off < 1e-30) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (s(p, q) == 0.0) continue;
                const double theta = (s(q, q) - s(p, p)) / (2.0 * s(p, q));
                const double t = std::copysign(1.0, theta) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double skp = s(k, p), skq = s(k, q);
                    s(k, p) = c * skp - sn * skq;
                    s(k, q) = sn * skp + c * skq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double spk = s(p, k), sqk = s(q, k);
                    s(p, k) = c * spk - sn * sqk;
                    s(q, k) = sn * spk + c * sqk;
                }
            }
        }
    }
    std::vector<double> ev(n);
    for (std::size_t i = 0; i < n; ++i) ev[i] = s(i, i);
    return ev;
}

/// Smallest singular value, via the smallest eigenvalue of M^T M.
inline double min_singular_value(const Matrix& m) {
    const std::size_t n = m.n;
    if (n == 1) return std::abs(m(0, 0));
    Matrix g(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += m(k, i) * m(k, j);
            g(i, j) = s;
        }
    double lo = 0.0;
    bool first = true;
    for (double ev : symmetric_eigenvalues(g)) {
        if (first || ev < lo) lo = ev;
        first = false;
    }
    return std::sqrt(std::max(0.0, lo));
}

}  // namespace impact
