// Test-side oracles, independent of the estimator implementations they check.
#pragma once

#include <cmath>
#include <functional>
#include <span>

#include "fgb/density.hpp"
#include "fgb/generator.hpp"
#include "fgb/quadrature.hpp"

namespace oracle {

// Population version of the variational objective,
//   G_f(r~) = E_q1 f'(q1~/(q2~ r~)) - E_q2 f*of'(q1~/(q2~ r~)),
// evaluated by quadrature on normalized dim<=2 targets.
inline double quadrature_gbar(const fgb::GeneratorFunction& gen, const fgb::TargetDensity& q1,
                              const fgb::TargetDensity& q2, double log_r_tilde,
                              double half_width = 40.0) {
    const double z1 = *q1.exact_log_z, z2 = *q2.exact_log_z;
    auto term = [&](std::span<const double> p) {
        const double l1 = q1.log_unnorm(p), l2 = q2.log_unnorm(p);
        const double lu = l1 - l2 - log_r_tilde;  // log of the unnormalized ratio arg
        const double d1 = std::exp(l1 - z1), d2 = std::exp(l2 - z2);
        return d1 * gen.fprime_from_log(lu) - d2 * gen.conj_fprime_from_log(lu);
    };
    if (q1.dim == 1) {
        return fgb::integrate_1d(
            [&](double x) {
                const double p[1] = {x};
                return term(std::span<const double>(p, 1));
            },
            -half_width, half_width, 1e-9, 1024);
    }
    return fgb::integrate_2d(
        [&](double x, double y) {
            const double p[2] = {x, y};
            return term(std::span<const double>(p, 2));
        },
        -half_width, half_width, -half_width, half_width, 1e-7, 256, 2048);
}

// Closed forms for N(0, v1) vs N(0, v2).
inline double gaussian_kl(double v1, double v2) {
    return 0.5 * (v1 / v2 + std::log(v2 / v1) - 1.0);
}

inline double gaussian_bhattacharyya(double v1, double v2) {
    return std::sqrt(std::sqrt(v1 * v2) / (0.5 * (v1 + v2)));
}

inline double gaussian_sq_hellinger(double v1, double v2) {
    return 2.0 - 2.0 * gaussian_bhattacharyya(v1, v2);
}

// First-order RE^2 of the geometric-bridge estimator for normalized overlap
// BC = integral sqrt(q1 q2): (1/n1 + 1/n2)(BC^-2 - 1).
inline double geometric_bridge_re2(double bc, int n1, int n2) {
    return (1.0 / n1 + 1.0 / n2) * (1.0 / (bc * bc) - 1.0);
}

}  // namespace oracle
