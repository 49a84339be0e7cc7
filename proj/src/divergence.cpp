#include "fgb/divergence.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "fgb/math_utils.hpp"
#include "fgb/quadrature.hpp"

namespace fgb {

namespace {

std::vector<double> log_density_diffs(const LogDensityFn& log_q1, const LogDensityFn& log_q2,
                                      const SampleBatch& batch, const char* which) {
    std::vector<double> out(static_cast<std::size_t>(batch.size()));
    for (int i = 0; i < batch.size(); ++i) {
        const double a = log_q1(batch.row(i));
        const double b = log_q2(batch.row(i));
        if (std::isnan(a) || std::isnan(b) || a == kInf || b == kInf)
            throw std::runtime_error(std::string("non-finite density at sample ") +
                                     std::to_string(i) + " of batch " + which);
        out[static_cast<std::size_t>(i)] = a - b;
    }
    return out;
}

}  // namespace

double variational_objective(const GeneratorFunction& gen, const LogDensityFn& log_q1,
                             const LogDensityFn& log_q2, double log_r_tilde,
                             const SampleBatch& s1, const SampleBatch& s2) {
    if (s1.size() < 1 || s2.size() < 1)
        throw std::invalid_argument("variational_objective: empty sample batch");
    const auto d1 = log_density_diffs(log_q1, log_q2, s1, "q1");
    const auto d2 = log_density_diffs(log_q1, log_q2, s2, "q2");
    std::vector<double> t1(d1.size()), t2(d2.size());
    for (std::size_t i = 0; i < d1.size(); ++i)
        t1[i] = gen.fprime_from_log(d1[i] - log_r_tilde);
    for (std::size_t i = 0; i < d2.size(); ++i)
        t2[i] = gen.conj_fprime_from_log(d2[i] - log_r_tilde);
    return pairwise_sum(t1) / static_cast<double>(d1.size()) -
           pairwise_sum(t2) / static_cast<double>(d2.size());
}

double harmonic_log_one_minus_g(double pi, std::span<const double> diff1,
                                std::span<const double> diff2, double log_r_tilde) {
    if (!(pi > 0.0 && pi < 1.0))
        throw std::invalid_argument("harmonic_log_one_minus_g: pi must lie in (0,1)");
    // 1 - G = (1/(pi n1)) sum sig(z1)^2 + (1/((1-pi) n2)) sum sig(z2)^2 with
    // z1 = log(pi/(1-pi)) + log q2~ - log q1~ + log r~ on q1 samples and
    // z2 = -log(pi/(1-pi)) + log q1~ - log q2~ - log r~ on q2 samples.
    const double c = std::log(pi) - std::log1p(-pi);
    std::vector<double> terms;
    terms.reserve(diff1.size() + diff2.size());
    const double l_n1 = std::log(pi) + std::log(static_cast<double>(diff1.size()));
    const double l_n2 = std::log1p(-pi) + std::log(static_cast<double>(diff2.size()));
    for (double d : diff1) terms.push_back(2.0 * log_sigmoid(c - d + log_r_tilde) - l_n1);
    for (double d : diff2) terms.push_back(2.0 * log_sigmoid(-c + d - log_r_tilde) - l_n2);
    return log_sum_exp(terms);
}

DivergenceEstimate estimate_harmonic_divergence_from_diffs(
    double pi, std::span<const double> diff1, std::span<const double> diff2,
    std::optional<std::pair<double, double>> log_r_bracket) {
    if (!(pi > 0.0 && pi < 1.0))
        throw std::invalid_argument("estimate_harmonic_divergence: pi must lie in (0,1)");
    if (diff1.empty() || diff2.empty())
        throw std::invalid_argument("estimate_harmonic_divergence: empty sample batch");

    double lo, hi;
    if (log_r_bracket) {
        lo = log_r_bracket->first;
        hi = log_r_bracket->second;
        if (!(lo < hi))
            throw std::invalid_argument("estimate_harmonic_divergence: need lo < hi");
    } else {
        std::vector<double> pooled(diff1.begin(), diff1.end());
        pooled.insert(pooled.end(), diff2.begin(), diff2.end());
        const double m = median(std::move(pooled));
        lo = m - 30.0;
        hi = m + 30.0;
    }

    // Maximizing G is minimizing log(1 - G).
    auto neg_log1m = [&](double log_r) {
        return -harmonic_log_one_minus_g(pi, diff1, diff2, log_r);
    };
    const ScalarMaximum mx = maximize_scalar(neg_log1m, lo, hi, 64, 1e-6);

    DivergenceEstimate est;
    est.maximizer_log_r = mx.arg;
    // The empirical maximum can dip a hair below 0 when the densities
    // coincide; the divergence it estimates is nonnegative.
    est.log_one_minus_value = std::min(-mx.value, 0.0);
    est.value = -std::expm1(est.log_one_minus_value);
    est.n1 = static_cast<int>(diff1.size());
    est.n2 = static_cast<int>(diff2.size());
    est.at_boundary = mx.at_boundary;
    return est;
}

DivergenceEstimate estimate_harmonic_divergence(
    double pi, const LogDensityFn& log_q1, const LogDensityFn& log_q2,
    const SampleBatch& s1, const SampleBatch& s2,
    std::optional<std::pair<double, double>> log_r_bracket) {
    const auto d1 = log_density_diffs(log_q1, log_q2, s1, "q1");
    const auto d2 = log_density_diffs(log_q1, log_q2, s2, "q2");
    return estimate_harmonic_divergence_from_diffs(pi, d1, d2, log_r_bracket);
}

double estimate_re2(double pi, int n_total, const DivergenceEstimate& divergence) {
    if (!(pi > 0.0 && pi < 1.0)) throw std::invalid_argument("estimate_re2: pi must lie in (0,1)");
    if (divergence.n1 + divergence.n2 != n_total)
        throw std::invalid_argument("estimate_re2: n_total inconsistent with divergence counts");
    if (re2_saturated(divergence)) return kInf;
    const double s1 = 1.0 - pi, s2 = pi;
    return std::expm1(-divergence.log_one_minus_value) / (s1 * s2 * static_cast<double>(n_total));
}

namespace {

// q2(x) * f(q1(x)/q2(x)) computed from normalized log densities; each
// generator gets an exact decomposition so huge ratios never overflow.
double integrand(const GeneratorFunction& gen, double l1, double l2) {
    if (l1 < -700.0 && l2 < -700.0) return 0.0;
    const double t = l1 - l2;
    switch (gen.kind) {
        case GeneratorKind::Kl:  // q2 u log u = q1 (l1 - l2)
            return std::exp(l1) * t;
        case GeneratorKind::ReverseKl:  // -q2 log u
            return -std::exp(l2) * t;
        case GeneratorKind::SqHellinger:  // q1 + q2 - 2 sqrt(q1 q2)
            return std::exp(l1) + std::exp(l2) - 2.0 * std::exp(0.5 * (l1 + l2));
        case GeneratorKind::Harmonic: {
            // pi (q2 - q1) q2 / ((1-pi) q1 + pi q2)
            const double lm = log_sum_exp(std::log1p(-gen.pi) + l1, std::log(gen.pi) + l2);
            const auto [lad, sign] = log_abs_diff_exp(l2, l1);
            return sign * gen.pi * std::exp(lad + l2 - lm);
        }
        case GeneratorKind::Js: {
            // pi q1 (t - A) - (1-pi) q2 A with A = log(1-pi+pi u)
            const double A = log_sum_exp(std::log1p(-gen.pi), std::log(gen.pi) + t);
            return gen.pi * std::exp(l1) * (t - A) - (1.0 - gen.pi) * std::exp(l2) * A;
        }
    }
    return 0.0;
}

}  // namespace

double quadrature_divergence_oracle(const GeneratorFunction& gen, const TargetDensity& q1,
                                    const TargetDensity& q2, double box_half_width) {
    if (!q1.exact_log_z || !q2.exact_log_z)
        throw std::invalid_argument("quadrature_divergence_oracle: needs exact_log_z on both targets");
    if (q1.dim != q2.dim)
        throw std::invalid_argument("quadrature_divergence_oracle: dimension mismatch");
    if (q1.dim > 2)
        throw std::invalid_argument("quadrature_divergence_oracle: unsupported for dim > 2");

    const double z1 = *q1.exact_log_z, z2 = *q2.exact_log_z;
    const double w = box_half_width;
    if (q1.dim == 1) {
        auto f = [&](double x) {
            const double p[1] = {x};
            return integrand(gen, q1.log_unnorm(std::span<const double>(p, 1)) - z1,
                             q2.log_unnorm(std::span<const double>(p, 1)) - z2);
        };
        return integrate_1d(f, -w, w, 1e-8, 1024);
    }
    auto f = [&](double x, double y) {
        const double p[2] = {x, y};
        return integrand(gen, q1.log_unnorm(std::span<const double>(p, 2)) - z1,
                         q2.log_unnorm(std::span<const double>(p, 2)) - z2);
    };
    return integrate_2d(f, -w, w, -w, w, 1e-7, 256, 4096);
}

}  // namespace fgb
