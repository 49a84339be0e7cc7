#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

#include "fgb/math_utils.hpp"

namespace fgb {

using Fn1d = std::function<double(double)>;
using Fn2d = std::function<double(double, double)>;

// Composite trapezoid on [a,b] with n+1 nodes, summed pairwise.
inline double trapezoid_1d(const Fn1d& f, double a, double b, std::size_t n) {
    if (n < 2) throw std::invalid_argument("trapezoid_1d: need at least 2 panels");
    const double h = (b - a) / static_cast<double>(n);
    std::vector<double> terms(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
        const double w = (i == 0 || i == n) ? 0.5 : 1.0;
        terms[i] = w * f(a + h * static_cast<double>(i));
    }
    return h * pairwise_sum(terms);
}

// Refine until two consecutive grid doublings agree to rel_tol.
inline double integrate_1d(const Fn1d& f, double a, double b, double rel_tol = 1e-7,
                           std::size_t n0 = 256, std::size_t n_max = 1 << 21) {
    double prev = trapezoid_1d(f, a, b, n0);
    for (std::size_t n = n0 * 2; n <= n_max; n *= 2) {
        const double cur = trapezoid_1d(f, a, b, n);
        const double scale = std::max({std::abs(cur), std::abs(prev), 1e-300});
        if (std::abs(cur - prev) <= rel_tol * scale) return cur;
        prev = cur;
    }
    return prev;
}

// Tensor-product trapezoid over [ax,bx] x [ay,by].
inline double trapezoid_2d(const Fn2d& f, double ax, double bx, double ay, double by,
                           std::size_t n) {
    if (n < 2) throw std::invalid_argument("trapezoid_2d: need at least 2 panels");
    const double hx = (bx - ax) / static_cast<double>(n);
    const double hy = (by - ay) / static_cast<double>(n);
    std::vector<double> rows(n + 1);
    std::vector<double> terms(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
        const double x = ax + hx * static_cast<double>(i);
        const double wx = (i == 0 || i == n) ? 0.5 : 1.0;
        for (std::size_t j = 0; j <= n; ++j) {
            const double wy = (j == 0 || j == n) ? 0.5 : 1.0;
            terms[j] = wy * f(x, ay + hy * static_cast<double>(j));
        }
        rows[i] = wx * pairwise_sum(terms);
    }
    return hx * hy * pairwise_sum(rows);
}

inline double integrate_2d(const Fn2d& f, double ax, double bx, double ay, double by,
                           double rel_tol = 1e-6, std::size_t n0 = 128,
                           std::size_t n_max = 4096) {
    double prev = trapezoid_2d(f, ax, bx, ay, by, n0);
    for (std::size_t n = n0 * 2; n <= n_max; n *= 2) {
        const double cur = trapezoid_2d(f, ax, bx, ay, by, n);
        const double scale = std::max({std::abs(cur), std::abs(prev), 1e-300});
        if (std::abs(cur - prev) <= rel_tol * scale) return cur;
        prev = cur;
    }
    return prev;
}

// Heavy-tail 1-d quadrature: trapezoid on a symmetric grid that is linear on
// [-x0,x0] and log-spaced out to x_max on both sides. Suits Cauchy-type tails
// where a uniform grid over [-1e5,1e5] is hopeless.
inline double integrate_1d_heavy_tail(const Fn1d& f, double x0 = 1.0, double x_max = 1e5,
                                      std::size_t n_linear = 4096,
                                      std::size_t n_log = 4096) {
    std::vector<double> nodes;
    nodes.reserve(2 * n_log + n_linear + 3);
    const double log_lo = std::log(x0);
    const double log_hi = std::log(x_max);
    for (std::size_t i = n_log; i-- > 0;) {
        const double t = log_lo + (log_hi - log_lo) * static_cast<double>(i + 1) /
                                      static_cast<double>(n_log);
        nodes.push_back(-std::exp(t));
    }
    for (std::size_t i = 0; i <= n_linear; ++i)
        nodes.push_back(-x0 + 2.0 * x0 * static_cast<double>(i) / static_cast<double>(n_linear));
    for (std::size_t i = 0; i < n_log; ++i) {
        const double t = log_lo + (log_hi - log_lo) * static_cast<double>(i + 1) /
                                      static_cast<double>(n_log);
        nodes.push_back(std::exp(t));
    }
    std::vector<double> terms(nodes.size() - 1);
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i)
        terms[i] = 0.5 * (nodes[i + 1] - nodes[i]) * (f(nodes[i]) + f(nodes[i + 1]));
    return pairwise_sum(terms);
}

}  // namespace fgb
