#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace fgb {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Deterministic pairwise reduction; order depends only on the element count.
inline double pairwise_sum(std::span<const double> xs) {
    const std::size_t n = xs.size();
    if (n <= 8) {
        double s = 0.0;
        for (double x : xs) s += x;
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(xs.subspan(0, half)) + pairwise_sum(xs.subspan(half));
}

// log(sum_i exp(xs[i])) with max subtraction; tolerates -inf entries.
inline double log_sum_exp(std::span<const double> xs) {
    if (xs.empty()) throw std::invalid_argument("log_sum_exp: empty input");
    const double m = *std::max_element(xs.begin(), xs.end());
    if (!std::isfinite(m)) return m;  // all -inf (or a nan propagates)
    std::vector<double> shifted(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) shifted[i] = std::exp(xs[i] - m);
    return m + std::log(pairwise_sum(shifted));
}

inline double log_sum_exp(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    const double m = std::max(a, b);
    return m + std::log1p(std::exp(std::min(a, b) - m));
}

// log(1 - exp(x)) for x < 0.
inline double log1m_exp(double x) {
    if (x >= 0.0) throw std::invalid_argument("log1m_exp: argument must be negative");
    return (x > -M_LN2) ? std::log(-std::expm1(x)) : std::log1p(-std::exp(x));
}

// log(|exp(a) - exp(b)|) and the sign of the difference.
inline std::pair<double, int> log_abs_diff_exp(double a, double b) {
    if (a == b) return {kNegInf, 0};
    const double hi = std::max(a, b);
    const double lo = std::min(a, b);
    const int sign = (a > b) ? 1 : -1;
    return {hi + log1m_exp(lo - hi), sign};
}

inline double softplus(double x) {
    return (x > 0.0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
    return (x >= 0.0) ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

inline double log_sigmoid(double x) { return -softplus(-x); }

// Standard normal CDF and its log; erfc keeps the lower tail accurate.
inline double norm_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

inline double log_norm_cdf(double x) {
    return std::log(0.5) + std::log(std::erfc(-x * M_SQRT1_2));
}

// Maximize a unimodal scalar function: coarse grid, then golden section
// inside the bracketing cells. Returns (argmax, max value).
struct ScalarMaximum {
    double arg = 0.0;
    double value = kNegInf;
    bool at_boundary = false;
};

inline ScalarMaximum maximize_scalar(const std::function<double(double)>& f, double lo,
                                     double hi, int grid_points = 64, double tol = 1e-6) {
    if (!(lo < hi)) throw std::invalid_argument("maximize_scalar: need lo < hi");
    if (grid_points < 3) grid_points = 3;
    int best = 0;
    double best_val = kNegInf;
    std::vector<double> grid(static_cast<std::size_t>(grid_points));
    for (int i = 0; i < grid_points; ++i) {
        const double x = lo + (hi - lo) * static_cast<double>(i) / (grid_points - 1);
        grid[static_cast<std::size_t>(i)] = x;
        const double v = f(x);
        if (v > best_val) {
            best_val = v;
            best = i;
        }
    }
    double a = grid[static_cast<std::size_t>(std::max(0, best - 1))];
    double b = grid[static_cast<std::size_t>(std::min(grid_points - 1, best + 1))];
    // Golden-section search for the maximum on [a, b].
    constexpr double invphi = 0.6180339887498949;
    double x1 = b - invphi * (b - a);
    double x2 = a + invphi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    while (b - a > tol) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + invphi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - invphi * (b - a);
            f1 = f(x1);
        }
    }
    ScalarMaximum out;
    out.arg = 0.5 * (a + b);
    out.value = f(out.arg);
    if (out.value < best_val) {  // grid point was better (flat or rough objective)
        out.arg = grid[static_cast<std::size_t>(best)];
        out.value = best_val;
    }
    out.at_boundary = (best == 0 || best == grid_points - 1);
    return out;
}

inline double median(std::vector<double> xs) {
    if (xs.empty()) throw std::invalid_argument("median: empty input");
    const std::size_t mid = xs.size() / 2;
    std::nth_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(mid), xs.end());
    double hi = xs[mid];
    if (xs.size() % 2 == 1) return hi;
    double lo = *std::max_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

}  // namespace fgb
