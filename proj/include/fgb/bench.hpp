#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fgb/density.hpp"
#include "fgb/flow.hpp"
#include "fgb/train.hpp"

namespace fgb {

enum class Method { Fgb, OptimalIdentity, Geometric, Is, Ris };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

// Everything one repeated-run experiment needs; both targets must carry
// exact_log_z (the benchmark scores against ground truth) and samplers.
struct ExperimentSpec {
    const TargetDensity* q1 = nullptr;
    const TargetDensity* q2 = nullptr;
    int n1 = 1000, n2 = 1000;  // fresh draws per repetition, per side
    double split_fraction = 0.5;
    TrainConfig train;
    FlowSpec flow;
    std::uint64_t seed = 1;
    int threads = 1;
};

struct RepetitionSummary {
    std::string method;
    std::vector<double> log_r_hats;       // per-rep estimates (nan on failure)
    std::vector<double> re2_estimates;    // per-rep RE^2 where defined
    double mc_mse_log_r = 0.0;            // against the exact log ratio
    double mc_mse_se = 0.0;
    double mean_re2_estimate = 0.0;       // nan when the method has none
    double mean_re2_se = 0.0;
    int failures = 0;
    double true_log_r = 0.0;
};

// The repeated-run protocol: fresh samples per rep, counter-split seeds,
// deterministic aggregation regardless of worker count.
RepetitionSummary run_repetitions(const ExperimentSpec& spec, Method method, int reps);

struct FixedFlowStudy {
    double mean_re2 = 0.0, se_re2 = 0.0;
    double mc_mse = 0.0, se_mse = 0.0;
    int failures = 0;
    std::vector<double> log_r_hats;
    std::vector<double> re2_estimates;
};

// Freeze a trained flow and only repeat the bridge step: per rep, draw
// n_prime fresh samples per side, push the q1 draws through T, estimate, and
// record both the RE^2 estimate and the realized error.
FixedFlowStudy fixed_flow_re2_study(const FlowModel& trained, const TargetDensity& base_q1,
                                    const TargetDensity& q2, int n_prime, int reps,
                                    std::uint64_t seed, int threads = 1);

// Internal worker pool used by the repetition loops; exposed for the CLI and
// acceptance harness. fn(i) must only touch slot i of any shared output.
void parallel_for_indexed(int count, int threads, const std::function<void(int)>& fn);

}  // namespace fgb
