#include "fgb/grad.hpp"

#include <cmath>
#include <stdexcept>

namespace fgb {

OptimizerState OptimizerState::fresh(std::size_t n, double learning_rate) {
    OptimizerState s;
    s.first_moment.assign(n, 0.0);
    s.second_moment.assign(n, 0.0);
    s.learning_rate = learning_rate;
    return s;
}

std::pair<std::vector<double>, OptimizerState> adam_step(const OptimizerState& state,
                                                         std::span<const double> grads,
                                                         std::span<const double> params) {
    const std::size_t n = params.size();
    if (grads.size() != n || state.first_moment.size() != n || state.second_moment.size() != n)
        throw std::invalid_argument("adam_step: shape mismatch");

    OptimizerState next = state;
    next.step_count = state.step_count + 1;
    const double t = static_cast<double>(next.step_count);
    const double c1 = 1.0 - std::pow(state.beta1_hat, t);
    const double c2 = 1.0 - std::pow(state.beta2_hat, t);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double g = grads[i];
        next.first_moment[i] = state.beta1_hat * state.first_moment[i] +
                               (1.0 - state.beta1_hat) * g;
        next.second_moment[i] = state.beta2_hat * state.second_moment[i] +
                                (1.0 - state.beta2_hat) * g * g;
        const double m_hat = next.first_moment[i] / c1;
        const double v_hat = next.second_moment[i] / c2;
        out[i] = params[i] - state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon_hat);
    }
    return {std::move(out), std::move(next)};
}

double finite_difference_check(const Objective& objective, std::span<const double> theta,
                               double log_r, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("finite_difference_check: h must be positive");
    const GradientRecord rec = objective.eval(theta, log_r);
    std::vector<double> work(theta.begin(), theta.end());

    double worst = 0.0;
    auto update = [&](double analytic, double numeric) {
        const double denom = std::max(std::abs(analytic), 1e-8);
        worst = std::max(worst, std::abs(analytic - numeric) / denom);
    };
    for (std::size_t i = 0; i < work.size(); ++i) {
        const double orig = work[i];
        work[i] = orig + h;
        const double up = objective.eval(work, log_r).value;
        work[i] = orig - h;
        const double dn = objective.eval(work, log_r).value;
        work[i] = orig;
        update(rec.d_theta[i], (up - dn) / (2.0 * h));
    }
    const double up = objective.eval(work, log_r + h).value;
    const double dn = objective.eval(work, log_r - h).value;
    update(rec.d_log_r, (up - dn) / (2.0 * h));
    return worst;
}

}  // namespace fgb
