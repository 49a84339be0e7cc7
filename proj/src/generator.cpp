#include "fgb/generator.hpp"

#include <cmath>
#include <stdexcept>

#include "fgb/math_utils.hpp"

namespace fgb {

namespace {

void check_weight(double pi, const char* who) {
    if (!(pi > 0.0 && pi < 1.0))
        throw std::invalid_argument(std::string(who) + ": weight must lie in (0,1)");
}

}  // namespace

// f(u) = 1 - u / (pi + (1-pi) u)
GeneratorFunction make_harmonic_generator(double pi) {
    check_weight(pi, "make_harmonic_generator");
    GeneratorFunction g;
    g.kind = GeneratorKind::Harmonic;
    g.name = "harmonic";
    g.pi = pi;
    const double lp = std::log(pi), lq = std::log1p(-pi);
    g.f = [pi](double u) { return 1.0 - u / (pi + (1.0 - pi) * u); };
    g.f_prime = [pi](double u) {
        const double d = pi + (1.0 - pi) * u;
        return -pi / (d * d);
    };
    g.f_double_prime = [pi](double u) {
        const double d = pi + (1.0 - pi) * u;
        return 2.0 * pi * (1.0 - pi) / (d * d * d);
    };
    g.conjugate_of_fprime = [pi](double u) {
        const double d = pi + (1.0 - pi) * u;
        const double b = (1.0 - pi) * u / d;
        return b * b / (1.0 - pi) - 1.0;
    };
    g.f_from_log = [lp, lq](double l) {
        return 1.0 - std::exp(l - log_sum_exp(lp, lq + l));
    };
    g.fprime_from_log = [lp, lq](double l) {
        return -std::exp(lp - 2.0 * log_sum_exp(lp, lq + l));
    };
    g.conj_fprime_from_log = [lp, lq](double l) {
        return std::expm1(lq + 2.0 * l - 2.0 * log_sum_exp(lp, lq + l));
    };
    g.log_fpp_from_log = [lp, lq](double l) {
        return M_LN2 + lp + lq - 3.0 * log_sum_exp(lp, lq + l);
    };
    return g;
}

// f(u) = u log u
GeneratorFunction make_kl_generator() {
    GeneratorFunction g;
    g.kind = GeneratorKind::Kl;
    g.name = "kl";
    g.f = [](double u) { return u == 0.0 ? 0.0 : u * std::log(u); };
    g.f_prime = [](double u) { return 1.0 + std::log(u); };
    g.f_double_prime = [](double u) { return 1.0 / u; };
    g.conjugate_of_fprime = [](double u) { return u; };
    g.f_from_log = [](double l) {
        const double u = std::exp(l);
        return u == 0.0 ? 0.0 : u * l;
    };
    g.fprime_from_log = [](double l) { return 1.0 + l; };
    g.conj_fprime_from_log = [](double l) { return std::exp(l); };
    g.log_fpp_from_log = [](double l) { return -l; };
    return g;
}

// f(u) = -log u
GeneratorFunction make_reverse_kl_generator() {
    GeneratorFunction g;
    g.kind = GeneratorKind::ReverseKl;
    g.name = "reverse_kl";
    g.f = [](double u) { return -std::log(u); };
    g.f_prime = [](double u) { return -1.0 / u; };
    g.f_double_prime = [](double u) { return 1.0 / (u * u); };
    g.conjugate_of_fprime = [](double u) { return -1.0 + std::log(u); };
    g.f_from_log = [](double l) { return -l; };
    g.fprime_from_log = [](double l) { return -std::exp(-l); };
    g.conj_fprime_from_log = [](double l) { return -1.0 + l; };
    g.log_fpp_from_log = [](double l) { return -2.0 * l; };
    return g;
}

// f(u) = pi u log u - (1-pi+pi u) log(1-pi+pi u)
GeneratorFunction make_js_generator(double pi) {
    check_weight(pi, "make_js_generator");
    GeneratorFunction g;
    g.kind = GeneratorKind::Js;
    g.name = "js";
    g.pi = pi;
    const double lp = std::log(pi), lq = std::log1p(-pi);
    g.f = [pi](double u) {
        const double a = 1.0 - pi + pi * u;
        return pi * u * std::log(u) - a * std::log(a);
    };
    g.f_prime = [pi](double u) { return pi * std::log(u / (1.0 - pi + pi * u)); };
    g.f_double_prime = [pi](double u) {
        return pi * (1.0 - pi) / (u * (1.0 - pi + pi * u));
    };
    g.conjugate_of_fprime = [pi](double u) {
        return (1.0 - pi) * std::log(1.0 - pi + pi * u);
    };
    g.f_from_log = [pi, lp, lq](double l) {
        const double A = log_sum_exp(lq, lp + l);  // log(1-pi+pi u)
        const double u = std::exp(l);
        return (u == 0.0 ? 0.0 : pi * u * (l - A)) - (1.0 - pi) * A;
    };
    g.fprime_from_log = [pi, lp, lq](double l) {
        return pi * (l - log_sum_exp(lq, lp + l));
    };
    g.conj_fprime_from_log = [pi, lp, lq](double l) {
        return (1.0 - pi) * log_sum_exp(lq, lp + l);
    };
    g.log_fpp_from_log = [lp, lq](double l) {
        return lp + lq - l - log_sum_exp(lq, lp + l);
    };
    return g;
}

// f(u) = (sqrt(u) - 1)^2
GeneratorFunction make_sq_hellinger_generator() {
    GeneratorFunction g;
    g.kind = GeneratorKind::SqHellinger;
    g.name = "sq_hellinger";
    g.f = [](double u) {
        const double s = std::sqrt(u) - 1.0;
        return s * s;
    };
    g.f_prime = [](double u) { return 1.0 - 1.0 / std::sqrt(u); };
    g.f_double_prime = [](double u) { return 0.5 * std::pow(u, -1.5); };
    g.conjugate_of_fprime = [](double u) { return std::sqrt(u) - 1.0; };
    g.f_from_log = [](double l) {
        const double s = std::expm1(0.5 * l);
        return s * s;
    };
    g.fprime_from_log = [](double l) { return -std::expm1(-0.5 * l); };
    g.conj_fprime_from_log = [](double l) { return std::expm1(0.5 * l); };
    g.log_fpp_from_log = [](double l) { return -M_LN2 - 1.5 * l; };
    return g;
}

}  // namespace fgb
