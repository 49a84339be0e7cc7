#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace fgb {

// Row-major square matrix helpers, sized for desk-scale problems.

// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
// Throws if the factorization breaks down (non-SPD input).
inline std::vector<double> cholesky_lower(std::span<const double> a, std::size_t p) {
    if (a.size() != p * p) throw std::invalid_argument("cholesky_lower: size mismatch");
    std::vector<double> L(p * p, 0.0);
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a[i * p + j];
            for (std::size_t k = 0; k < j; ++k) s -= L[i * p + k] * L[j * p + k];
            if (i == j) {
                if (!(s > 0.0)) throw std::invalid_argument("cholesky_lower: matrix is not SPD");
                L[i * p + i] = std::sqrt(s);
            } else {
                L[i * p + j] = s / L[j * p + j];
            }
        }
    }
    return L;
}

// Solve L y = b for lower-triangular L.
inline void solve_lower(std::span<const double> L, std::size_t p, std::span<const double> b,
                        std::span<double> y) {
    for (std::size_t i = 0; i < p; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= L[i * p + k] * y[k];
        y[i] = s / L[i * p + i];
    }
}

// Solve L^T x = b for lower-triangular L.
inline void solve_lower_transpose(std::span<const double> L, std::size_t p,
                                  std::span<const double> b, std::span<double> x) {
    for (std::size_t ii = p; ii-- > 0;) {
        double s = b[ii];
        for (std::size_t k = ii + 1; k < p; ++k) s -= L[k * p + ii] * x[k];
        x[ii] = s / L[ii * p + ii];
    }
}

inline double log_det_from_cholesky(std::span<const double> L, std::size_t p) {
    double s = 0.0;
    for (std::size_t i = 0; i < p; ++i) s += std::log(L[i * p + i]);
    return 2.0 * s;
}

}  // namespace fgb
