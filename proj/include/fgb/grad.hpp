#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace fgb {

// Objective value plus exact gradients of the implemented computation graph
// with respect to the flattened flow parameters and the scalar log r~.
struct GradientRecord {
    double value = 0.0;
    std::vector<double> d_theta;
    double d_log_r = 0.0;
};

// Anything differentiable in (theta, log r~). Samples are constants of the
// graph; they never carry gradients.
class Objective {
  public:
    virtual ~Objective() = default;
    virtual std::size_t theta_size() const = 0;
    virtual GradientRecord eval(std::span<const double> theta, double log_r) const = 0;
};

// Bias-corrected adaptive-moment update state. Kept as plain data so a step
// can be written value-in, value-out and stays bit-reproducible.
struct OptimizerState {
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    long step_count = 0;
    double learning_rate = 1e-3;
    double beta1_hat = 0.9;
    double beta2_hat = 0.999;
    double epsilon_hat = 1e-8;

    static OptimizerState fresh(std::size_t n, double learning_rate);
};

// One descent step: returns updated parameters and state. Pass the negated
// gradient for an ascent step.
std::pair<std::vector<double>, OptimizerState> adam_step(const OptimizerState& state,
                                                         std::span<const double> grads,
                                                         std::span<const double> params);

// Max over coordinates (theta entries and log r~) of the relative mismatch
// between the analytic gradient and central finite differences with step h;
// absolute floor 1e-8 in the denominator.
double finite_difference_check(const Objective& objective, std::span<const double> theta,
                               double log_r, double h);

}  // namespace fgb
