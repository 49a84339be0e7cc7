#pragma once

#include <functional>
#include <optional>
#include <span>
#include <utility>

#include "fgb/density.hpp"
#include "fgb/generator.hpp"

namespace fgb {

using LogDensityFn = std::function<double(std::span<const double>)>;

struct DivergenceEstimate {
    double value = 0.0;              // G-hat at the maximizer
    double log_one_minus_value = 0.0;  // exact log(1 - value), harmonic path
    double maximizer_log_r = 0.0;
    int n1 = 0, n2 = 0;
    bool at_boundary = false;  // maximizer hit the search bracket
};

// Empirical variational bound G-hat_f(r~) of Nguyen et al. applied with the
// scalar variational family V_r~; all ratio arguments handled in log space.
double variational_objective(const GeneratorFunction& gen, const LogDensityFn& log_q1,
                             const LogDensityFn& log_q2, double log_r_tilde,
                             const SampleBatch& s1, const SampleBatch& s2);

// Exact log(1 - G-hat_pi(r~)) for the harmonic generator, from precomputed
// per-sample log-density differences d_i = log q1~ - log q2~.
double harmonic_log_one_minus_g(double pi, std::span<const double> diff1,
                                std::span<const double> diff2, double log_r_tilde);

// Maximize G-hat_pi over log r~ (coarse grid + golden section). The default
// bracket is median(pooled log q1~ - log q2~) +- 30.
DivergenceEstimate estimate_harmonic_divergence(
    double pi, const LogDensityFn& log_q1, const LogDensityFn& log_q2,
    const SampleBatch& s1, const SampleBatch& s2,
    std::optional<std::pair<double, double>> log_r_bracket = std::nullopt);

// Same maximization on precomputed log-density differences.
DivergenceEstimate estimate_harmonic_divergence_from_diffs(
    double pi, std::span<const double> diff1, std::span<const double> diff2,
    std::optional<std::pair<double, double>> log_r_bracket = std::nullopt);

// Plug-in first-order RE^2 / MSE(log r_opt) estimate; +inf when the
// divergence estimate saturates (value > 1 - 1e-12).
double estimate_re2(double pi, int n_total, const DivergenceEstimate& divergence);

constexpr double kSaturationLevel = 1e-12;

inline bool re2_saturated(const DivergenceEstimate& d) {
    return d.log_one_minus_value < -27.631021115928547;  // log(1e-12)
}

// Independent test oracle: D_f(q1, q2) by trapezoid quadrature of the
// normalized densities. Requires exact_log_z on both targets and dim <= 2.
double quadrature_divergence_oracle(const GeneratorFunction& gen, const TargetDensity& q1,
                                    const TargetDensity& q2, double box_half_width = 40.0);

}  // namespace fgb
