#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "fgb/bench.hpp"
#include "fgb/density.hpp"
#include "fgb/train.hpp"

namespace fgb {

// Target description as it appears in a config file.
struct TargetSpec {
    std::string kind;  // gaussian | ring_mixture | t_mixture | augmented
    // gaussian
    std::vector<double> mean, cov_diag;
    // ring_mixture
    int dim = 0;
    double mu1[2] = {0, 0}, mu2[2] = {0, 0}, s = 1.0, sigma = 1.0;
    // t_mixture
    std::vector<double> weights;
    std::vector<std::vector<double>> means;
    std::vector<double> scale;  // row-major p x p
    double nu = 1.0;
    // augmented
    std::shared_ptr<TargetSpec> base;
    int extra_dims = 0;
};

struct BenchConfig {
    std::string mode = "repetitions";  // repetitions | fixed_flow
    std::vector<std::string> methods = {"fgb"};
    int reps = 100;
    int n_prime = 1000;
};

// One file fully specifies a run; parse/emit round-trips exactly.
struct RunConfig {
    TargetSpec q1, q2;
    int n1 = 2000, n2 = 2000;
    double split_fraction = 0.5;
    FlowSpec flow;
    TrainConfig train;
    std::string method = "fgb";
    std::string out_dir = "out";
    std::uint64_t seed = 1;
    BenchConfig bench;
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);
std::string emit_run_config(const RunConfig& config);

TargetDensity build_target(const TargetSpec& spec);

// FNV-1a over the canonical emitted form; stamped into every output record.
std::string config_hash(const RunConfig& config);

}  // namespace fgb
