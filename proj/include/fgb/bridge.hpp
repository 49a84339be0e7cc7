#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "fgb/density.hpp"
#include "fgb/divergence.hpp"
#include "fgb/generator.hpp"

namespace fgb {

struct BridgeResult {
    double log_r_hat = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> trace;  // per-iteration log r, starting at log_r0
    std::optional<double> re2_estimate;
    bool saturated = false;
};

enum class IsDirection { Q2Proposal, Q1Proposal };

// Iterative asymptotically-optimal Bridge estimator in log space. The
// per-term logistic weights keep far-apart densities from overflowing.
BridgeResult optimal_bridge(const LogDensityFn& log_q1, const LogDensityFn& log_q2,
                            const SampleBatch& s1, const SampleBatch& s2, double log_r0,
                            double tol = 1e-8, int max_iter = 500);

// Same iteration on precomputed log-density values (lq1_on_s* = log q1~ at
// the rows of batch *).
BridgeResult optimal_bridge_from_values(std::span<const double> lq1_on_s1,
                                        std::span<const double> lq2_on_s1,
                                        std::span<const double> lq1_on_s2,
                                        std::span<const double> lq2_on_s2, double log_r0,
                                        double tol = 1e-8, int max_iter = 500);

// Closed-form geometric Bridge estimator.
BridgeResult geometric_bridge(const LogDensityFn& log_q1, const LogDensityFn& log_q2,
                              const SampleBatch& s1, const SampleBatch& s2);

double geometric_bridge_from_values(std::span<const double> lq1_on_s1,
                                    std::span<const double> lq2_on_s1,
                                    std::span<const double> lq1_on_s2,
                                    std::span<const double> lq2_on_s2);

// Importance sampling (q2 proposal) or reciprocal IS (q1 proposal).
BridgeResult importance_sampling_bridge(IsDirection direction, const LogDensityFn& log_q1,
                                        const LogDensityFn& log_q2, const SampleBatch& batch);

// Fixed point of the f''-weighted ratio of sums; recovers the optimal bridge
// for js(s1), the geometric bridge for sq_hellinger and IS for kl.
BridgeResult general_f_bridge(const GeneratorFunction& gen, const LogDensityFn& log_q1,
                              const LogDensityFn& log_q2, const SampleBatch& s1,
                              const SampleBatch& s2, double log_r0, double tol = 1e-8,
                              int max_iter = 500);

// Disjoint random partition into (train, estimate); train gets
// floor(n * fraction) rows.
std::pair<SampleBatch, SampleBatch> split_samples(const SampleBatch& batch, double fraction,
                                                  Rng& rng);

}  // namespace fgb
