#include "fgb/bridge.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "fgb/math_utils.hpp"

namespace fgb {

namespace {

std::vector<double> eval_log_density(const LogDensityFn& f, const SampleBatch& batch,
                                     const char* who) {
    std::vector<double> out(static_cast<std::size_t>(batch.size()));
    for (int i = 0; i < batch.size(); ++i) {
        const double v = f(batch.row(i));
        if (std::isnan(v) || v == kInf)
            throw std::runtime_error(std::string(who) + ": non-finite density at sample " +
                                     std::to_string(i));
        out[static_cast<std::size_t>(i)] = v;
    }
    return out;
}

}  // namespace

BridgeResult optimal_bridge_from_values(std::span<const double> lq1_on_s1,
                                        std::span<const double> lq2_on_s1,
                                        std::span<const double> lq1_on_s2,
                                        std::span<const double> lq2_on_s2, double log_r0,
                                        double tol, int max_iter) {
    const std::size_t n1 = lq1_on_s1.size(), n2 = lq1_on_s2.size();
    if (n1 < 1 || n2 < 1) throw std::invalid_argument("optimal_bridge: empty sample batch");
    if (!(tol > 0.0)) throw std::invalid_argument("optimal_bridge: tol must be positive");
    const double n = static_cast<double>(n1 + n2);
    const double log_s1 = std::log(static_cast<double>(n1) / n);
    const double log_s2 = std::log(static_cast<double>(n2) / n);

    // Log-odds l_ij = log(s2/s1) + log q2~ - log q1~ + log r; then
    //   q1~/denominator = exp(-log s1 - softplus(l)) and
    //   q2~/denominator = exp(-log s2 - log r - softplus(-l)).
    std::vector<double> odds1(n1), odds2(n2), terms;
    for (std::size_t j = 0; j < n1; ++j)
        odds1[j] = log_s2 - log_s1 + lq2_on_s1[j] - lq1_on_s1[j];
    for (std::size_t j = 0; j < n2; ++j)
        odds2[j] = log_s2 - log_s1 + lq2_on_s2[j] - lq1_on_s2[j];

    BridgeResult res;
    res.trace.push_back(log_r0);
    double log_r = log_r0;
    for (int it = 0; it < max_iter; ++it) {
        terms.assign(n2, 0.0);
        for (std::size_t j = 0; j < n2; ++j) terms[j] = -softplus(odds2[j] + log_r);
        const double log_num =
            -std::log(static_cast<double>(n2)) - log_s1 + log_sum_exp(terms);
        terms.assign(n1, 0.0);
        for (std::size_t j = 0; j < n1; ++j) terms[j] = -softplus(-(odds1[j] + log_r));
        const double log_den =
            -std::log(static_cast<double>(n1)) - log_s2 - log_r + log_sum_exp(terms);
        const double next = log_num - log_den;
        res.trace.push_back(next);
        const double delta = std::abs(next - log_r);
        log_r = next;
        if (delta < tol) {
            res.converged = true;
            break;
        }
    }
    res.log_r_hat = log_r;
    res.iterations = static_cast<int>(res.trace.size()) - 1;
    return res;
}

BridgeResult optimal_bridge(const LogDensityFn& log_q1, const LogDensityFn& log_q2,
                            const SampleBatch& s1, const SampleBatch& s2, double log_r0,
                            double tol, int max_iter) {
    const auto a1 = eval_log_density(log_q1, s1, "optimal_bridge(q1 on s1)");
    const auto b1 = eval_log_density(log_q2, s1, "optimal_bridge(q2 on s1)");
    const auto a2 = eval_log_density(log_q1, s2, "optimal_bridge(q1 on s2)");
    const auto b2 = eval_log_density(log_q2, s2, "optimal_bridge(q2 on s2)");
    return optimal_bridge_from_values(a1, b1, a2, b2, log_r0, tol, max_iter);
}

double geometric_bridge_from_values(std::span<const double> lq1_on_s1,
                                    std::span<const double> lq2_on_s1,
                                    std::span<const double> lq1_on_s2,
                                    std::span<const double> lq2_on_s2) {
    const std::size_t n1 = lq1_on_s1.size(), n2 = lq1_on_s2.size();
    if (n1 < 1 || n2 < 1) throw std::invalid_argument("geometric_bridge: empty sample batch");
    std::vector<double> t2(n2), t1(n1);
    for (std::size_t j = 0; j < n2; ++j) t2[j] = 0.5 * (lq1_on_s2[j] - lq2_on_s2[j]);
    for (std::size_t j = 0; j < n1; ++j) t1[j] = 0.5 * (lq2_on_s1[j] - lq1_on_s1[j]);
    return (log_sum_exp(t2) - std::log(static_cast<double>(n2))) -
           (log_sum_exp(t1) - std::log(static_cast<double>(n1)));
}

BridgeResult geometric_bridge(const LogDensityFn& log_q1, const LogDensityFn& log_q2,
                              const SampleBatch& s1, const SampleBatch& s2) {
    const auto a1 = eval_log_density(log_q1, s1, "geometric_bridge(q1 on s1)");
    const auto b1 = eval_log_density(log_q2, s1, "geometric_bridge(q2 on s1)");
    const auto a2 = eval_log_density(log_q1, s2, "geometric_bridge(q1 on s2)");
    const auto b2 = eval_log_density(log_q2, s2, "geometric_bridge(q2 on s2)");
    BridgeResult res;
    res.log_r_hat = geometric_bridge_from_values(a1, b1, a2, b2);
    res.iterations = 0;
    res.converged = true;
    res.trace.push_back(res.log_r_hat);
    return res;
}

BridgeResult importance_sampling_bridge(IsDirection direction, const LogDensityFn& log_q1,
                                        const LogDensityFn& log_q2, const SampleBatch& batch) {
    const auto a = eval_log_density(log_q1, batch, "importance_sampling_bridge(q1)");
    const auto b = eval_log_density(log_q2, batch, "importance_sampling_bridge(q2)");
    const std::size_t n = a.size();
    if (n < 1) throw std::invalid_argument("importance_sampling_bridge: empty sample batch");
    std::vector<double> t(n);
    BridgeResult res;
    if (direction == IsDirection::Q2Proposal) {
        for (std::size_t j = 0; j < n; ++j) t[j] = a[j] - b[j];
        res.log_r_hat = log_sum_exp(t) - std::log(static_cast<double>(n));
    } else {
        for (std::size_t j = 0; j < n; ++j) t[j] = b[j] - a[j];
        res.log_r_hat = -(log_sum_exp(t) - std::log(static_cast<double>(n)));
    }
    res.iterations = 0;
    res.converged = true;
    res.trace.push_back(res.log_r_hat);
    return res;
}

BridgeResult general_f_bridge(const GeneratorFunction& gen, const LogDensityFn& log_q1,
                              const LogDensityFn& log_q2, const SampleBatch& s1,
                              const SampleBatch& s2, double log_r0, double tol, int max_iter) {
    const auto a1 = eval_log_density(log_q1, s1, "general_f_bridge(q1 on s1)");
    const auto b1 = eval_log_density(log_q2, s1, "general_f_bridge(q2 on s1)");
    const auto a2 = eval_log_density(log_q1, s2, "general_f_bridge(q1 on s2)");
    const auto b2 = eval_log_density(log_q2, s2, "general_f_bridge(q2 on s2)");
    const std::size_t n1 = a1.size(), n2 = a2.size();
    if (n1 < 1 || n2 < 1) throw std::invalid_argument("general_f_bridge: empty sample batch");
    if (!(tol > 0.0)) throw std::invalid_argument("general_f_bridge: tol must be positive");

    std::vector<double> d1(n1), d2(n2), terms;
    for (std::size_t j = 0; j < n1; ++j) d1[j] = a1[j] - b1[j];
    for (std::size_t j = 0; j < n2; ++j) d2[j] = a2[j] - b2[j];

    BridgeResult res;
    res.trace.push_back(log_r0);
    double log_r = log_r0;
    int flips = 0;
    double prev_delta = 0.0;
    bool damped = false;
    for (int it = 0; it < max_iter; ++it) {
        // log of numerator terms: log f''(u) + 2(log q1~ - log q2~) on s2;
        // denominator: log f''(u) + (log q1~ - log q2~) on s1.
        terms.assign(n2, 0.0);
        for (std::size_t j = 0; j < n2; ++j)
            terms[j] = gen.log_fpp_from_log(d2[j] - log_r) + 2.0 * d2[j];
        const double log_num = log_sum_exp(terms) - std::log(static_cast<double>(n2));
        terms.assign(n1, 0.0);
        for (std::size_t j = 0; j < n1; ++j)
            terms[j] = gen.log_fpp_from_log(d1[j] - log_r) + d1[j];
        const double log_den = log_sum_exp(terms) - std::log(static_cast<double>(n1));
        double next = log_num - log_den;
        if (damped) next = 0.5 * (log_r + next);
        const double delta = next - log_r;
        if (it > 0 && delta * prev_delta < 0.0) {
            if (++flips >= 3) damped = true;  // oscillating map: half steps
        }
        prev_delta = delta;
        res.trace.push_back(next);
        log_r = next;
        if (std::abs(delta) < tol) {
            res.converged = true;
            break;
        }
    }
    res.log_r_hat = log_r;
    res.iterations = static_cast<int>(res.trace.size()) - 1;
    return res;
}

std::pair<SampleBatch, SampleBatch> split_samples(const SampleBatch& batch, double fraction,
                                                  Rng& rng) {
    const int n = batch.size();
    if (!(fraction > 0.0 && fraction < 1.0))
        throw std::invalid_argument("split_samples: fraction must lie in (0,1)");
    const int n_train = static_cast<int>(std::floor(fraction * static_cast<double>(n)));
    if (n_train < 1 || n - n_train < 1)
        throw std::invalid_argument("split_samples: degenerate split sizes");

    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);

    SampleBatch train(batch.dim, n_train, batch.source_id);
    SampleBatch estimate(batch.dim, n - n_train, batch.source_id);
    for (int i = 0; i < n_train; ++i) {
        auto src = batch.row(perm[static_cast<std::size_t>(i)]);
        auto dst = train.row(i);
        for (int j = 0; j < batch.dim; ++j) dst[j] = src[j];
    }
    for (int i = n_train; i < n; ++i) {
        auto src = batch.row(perm[static_cast<std::size_t>(i)]);
        auto dst = estimate.row(i - n_train);
        for (int j = 0; j < batch.dim; ++j) dst[j] = src[j];
    }
    return {std::move(train), std::move(estimate)};
}

}  // namespace fgb
