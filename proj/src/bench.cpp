#include "fgb/bench.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "fgb/bridge.hpp"
#include "fgb/math_utils.hpp"

namespace fgb {

std::string method_name(Method m) {
    switch (m) {
        case Method::Fgb: return "fgb";
        case Method::OptimalIdentity: return "optimal_identity";
        case Method::Geometric: return "geometric";
        case Method::Is: return "is";
        case Method::Ris: return "ris";
    }
    return "?";
}

Method method_from_name(const std::string& name) {
    if (name == "fgb") return Method::Fgb;
    if (name == "optimal_identity") return Method::OptimalIdentity;
    if (name == "geometric") return Method::Geometric;
    if (name == "is") return Method::Is;
    if (name == "ris") return Method::Ris;
    throw std::invalid_argument("unknown method id: " + name);
}

void parallel_for_indexed(int count, int threads, const std::function<void(int)>& fn) {
    threads = std::max(1, std::min(threads, count));
    if (threads == 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&]() {
            for (;;) {
                const int i = next.fetch_add(1);
                if (i >= count) return;
                fn(i);
            }
        });
    }
    for (auto& th : pool) th.join();
}

namespace {

struct MeanSe {
    double mean = 0.0, se = 0.0;
    int n = 0;
};

MeanSe mean_and_se(const std::vector<double>& xs) {
    std::vector<double> v;
    for (double x : xs)
        if (std::isfinite(x)) v.push_back(x);
    MeanSe out;
    out.n = static_cast<int>(v.size());
    if (v.empty()) {
        out.mean = out.se = std::nan("");
        return out;
    }
    out.mean = pairwise_sum(v) / static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - out.mean) * (x - out.mean);
        out.se = std::sqrt(ss / static_cast<double>(v.size() - 1) /
                           static_cast<double>(v.size()));
    }
    return out;
}

}  // namespace

RepetitionSummary run_repetitions(const ExperimentSpec& spec, Method method, int reps) {
    if (!spec.q1 || !spec.q2) throw std::invalid_argument("run_repetitions: missing targets");
    if (!spec.q1->exact_log_z || !spec.q2->exact_log_z)
        throw std::invalid_argument("run_repetitions: benchmarks require exact_log_z");
    if (!spec.q1->has_sampler() || !spec.q2->has_sampler())
        throw std::invalid_argument("run_repetitions: benchmarks require samplers");

    const double truth = *spec.q1->exact_log_z - *spec.q2->exact_log_z;
    RepetitionSummary sum;
    sum.method = method_name(method);
    sum.true_log_r = truth;
    sum.log_r_hats.assign(static_cast<std::size_t>(reps), std::nan(""));
    sum.re2_estimates.assign(static_cast<std::size_t>(reps), std::nan(""));
    std::vector<int> failed(static_cast<std::size_t>(reps), 0);

    auto lq1 = [q = spec.q1](std::span<const double> x) { return q->log_unnorm(x); };
    auto lq2 = [q = spec.q2](std::span<const double> x) { return q->log_unnorm(x); };

    parallel_for_indexed(reps, spec.threads, [&](int rep) {
        try {
            Rng rng = make_substream(spec.seed, static_cast<std::uint64_t>(rep));
            SampleBatch b1 = spec.q1->sampler(rng, spec.n1);
            SampleBatch b2 = spec.q2->sampler(rng, spec.n2);
            BridgeResult res;
            switch (method) {
                case Method::Fgb: {
                    TrainConfig cfg = spec.train;
                    cfg.seed = substream_seed(spec.seed, 0xbe9c000 + static_cast<std::uint64_t>(rep));
                    auto [r, rep_unused] = fgb_estimate(cfg, spec.flow, *spec.q1, *spec.q2, b1,
                                                        b2, spec.split_fraction);
                    res = std::move(r);
                    break;
                }
                case Method::OptimalIdentity: {
                    const double r0 = geometric_bridge(lq1, lq2, b1, b2).log_r_hat;
                    res = optimal_bridge(lq1, lq2, b1, b2, r0);
                    const double pi = static_cast<double>(spec.n2) /
                                      static_cast<double>(spec.n1 + spec.n2);
                    const DivergenceEstimate div =
                        estimate_harmonic_divergence(pi, lq1, lq2, b1, b2);
                    res.saturated = re2_saturated(div);
                    res.re2_estimate = estimate_re2(pi, spec.n1 + spec.n2, div);
                    break;
                }
                case Method::Geometric:
                    res = geometric_bridge(lq1, lq2, b1, b2);
                    break;
                case Method::Is:
                    res = importance_sampling_bridge(IsDirection::Q2Proposal, lq1, lq2, b2);
                    break;
                case Method::Ris:
                    res = importance_sampling_bridge(IsDirection::Q1Proposal, lq1, lq2, b1);
                    break;
            }
            sum.log_r_hats[static_cast<std::size_t>(rep)] = res.log_r_hat;
            if (res.re2_estimate)
                sum.re2_estimates[static_cast<std::size_t>(rep)] = *res.re2_estimate;
            if (!res.converged || !std::isfinite(res.log_r_hat))
                failed[static_cast<std::size_t>(rep)] = 1;
        } catch (const std::exception&) {
            failed[static_cast<std::size_t>(rep)] = 1;
        }
    });

    std::vector<double> sq_err;
    for (int i = 0; i < reps; ++i) {
        sum.failures += failed[static_cast<std::size_t>(i)];
        const double v = sum.log_r_hats[static_cast<std::size_t>(i)];
        if (std::isfinite(v)) sq_err.push_back((v - truth) * (v - truth));
    }
    const MeanSe mse = mean_and_se(sq_err);
    sum.mc_mse_log_r = mse.mean;
    sum.mc_mse_se = mse.se;
    const MeanSe re2 = mean_and_se(sum.re2_estimates);
    sum.mean_re2_estimate = re2.mean;
    sum.mean_re2_se = re2.se;
    return sum;
}

FixedFlowStudy fixed_flow_re2_study(const FlowModel& trained, const TargetDensity& base_q1,
                                    const TargetDensity& q2, int n_prime, int reps,
                                    std::uint64_t seed, int threads) {
    if (!base_q1.exact_log_z || !q2.exact_log_z)
        throw std::invalid_argument("fixed_flow_re2_study: targets need exact_log_z");
    if (!base_q1.has_sampler() || !q2.has_sampler())
        throw std::invalid_argument("fixed_flow_re2_study: targets need samplers");

    const double truth = *base_q1.exact_log_z - *q2.exact_log_z;
    FixedFlowStudy out;
    out.log_r_hats.assign(static_cast<std::size_t>(reps), std::nan(""));
    out.re2_estimates.assign(static_cast<std::size_t>(reps), std::nan(""));
    std::vector<int> failed(static_cast<std::size_t>(reps), 0);

    parallel_for_indexed(reps, threads, [&](int rep) {
        try {
            Rng rng = make_substream(seed, 0xff0 + static_cast<std::uint64_t>(rep));
            SampleBatch raw1 = base_q1.sampler(rng, n_prime);
            SampleBatch b2 = q2.sampler(rng, n_prime);
            SampleBatch b1;
            const std::vector<double> ld = flow_forward_batch(trained, raw1, b1);

            std::vector<double> lt1_s1(static_cast<std::size_t>(n_prime));
            std::vector<double> lq2_s1(static_cast<std::size_t>(n_prime));
            std::vector<double> lt1_s2(static_cast<std::size_t>(n_prime));
            std::vector<double> lq2_s2(static_cast<std::size_t>(n_prime));
            for (int j = 0; j < n_prime; ++j) {
                lt1_s1[static_cast<std::size_t>(j)] =
                    base_q1.log_unnorm(raw1.row(j)) - ld[static_cast<std::size_t>(j)];
                lq2_s1[static_cast<std::size_t>(j)] = q2.log_unnorm(b1.row(j));
                lt1_s2[static_cast<std::size_t>(j)] =
                    transformed_log_unnorm(trained, base_q1, b2.row(j));
                lq2_s2[static_cast<std::size_t>(j)] = q2.log_unnorm(b2.row(j));
            }
            const double r0 = geometric_bridge_from_values(lt1_s1, lq2_s1, lt1_s2, lq2_s2);
            BridgeResult res = optimal_bridge_from_values(lt1_s1, lq2_s1, lt1_s2, lq2_s2, r0);

            std::vector<double> d1(static_cast<std::size_t>(n_prime)),
                d2(static_cast<std::size_t>(n_prime));
            for (int j = 0; j < n_prime; ++j) {
                d1[static_cast<std::size_t>(j)] =
                    lt1_s1[static_cast<std::size_t>(j)] - lq2_s1[static_cast<std::size_t>(j)];
                d2[static_cast<std::size_t>(j)] =
                    lt1_s2[static_cast<std::size_t>(j)] - lq2_s2[static_cast<std::size_t>(j)];
            }
            const DivergenceEstimate div = estimate_harmonic_divergence_from_diffs(0.5, d1, d2);
            out.log_r_hats[static_cast<std::size_t>(rep)] = res.log_r_hat;
            out.re2_estimates[static_cast<std::size_t>(rep)] =
                estimate_re2(0.5, 2 * n_prime, div);
            if (!res.converged || re2_saturated(div)) failed[static_cast<std::size_t>(rep)] = 1;
        } catch (const std::exception&) {
            failed[static_cast<std::size_t>(rep)] = 1;
        }
    });

    std::vector<double> sq_err;
    for (int i = 0; i < reps; ++i) {
        out.failures += failed[static_cast<std::size_t>(i)];
        const double v = out.log_r_hats[static_cast<std::size_t>(i)];
        if (std::isfinite(v)) sq_err.push_back((v - truth) * (v - truth));
    }
    const MeanSe mse = mean_and_se(sq_err);
    out.mc_mse = mse.mean;
    out.se_mse = mse.se;
    const MeanSe re2 = mean_and_se(out.re2_estimates);
    out.mean_re2 = re2.mean;
    out.se_re2 = re2.se;
    return out;
}

}  // namespace fgb
