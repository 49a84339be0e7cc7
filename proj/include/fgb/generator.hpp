#pragma once

#include <functional>
#include <string>

namespace fgb {

enum class GeneratorKind { Harmonic, Kl, ReverseKl, Js, SqHellinger };

// A strictly convex generator f with f(1)=0, its derivatives, and the
// composition f* o f'(u) = u f'(u) - f(u). The *_from_log members take
// l = log u so ratios of far-apart densities never materialize as exp(+-700).
struct GeneratorFunction {
    GeneratorKind kind = GeneratorKind::Harmonic;
    std::string name;
    double pi = 0.5;  // weight for harmonic / js; unused otherwise

    std::function<double(double)> f;
    std::function<double(double)> f_prime;
    std::function<double(double)> f_double_prime;
    std::function<double(double)> conjugate_of_fprime;  // f* o f'

    std::function<double(double)> f_from_log;
    std::function<double(double)> fprime_from_log;
    std::function<double(double)> conj_fprime_from_log;
    std::function<double(double)> log_fpp_from_log;  // log f''(e^l), f'' > 0
};

GeneratorFunction make_harmonic_generator(double pi);
GeneratorFunction make_kl_generator();
GeneratorFunction make_reverse_kl_generator();
GeneratorFunction make_js_generator(double pi);
GeneratorFunction make_sq_hellinger_generator();

}  // namespace fgb
