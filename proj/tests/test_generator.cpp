#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "fgb/generator.hpp"

using namespace fgb;

namespace {

std::vector<GeneratorFunction> all_generators() {
    return {make_harmonic_generator(0.5), make_harmonic_generator(0.2), make_kl_generator(),
            make_reverse_kl_generator(), make_js_generator(0.5), make_js_generator(0.3),
            make_sq_hellinger_generator()};
}

std::vector<double> log_grid_100() {
    std::vector<double> us;
    for (int i = 0; i < 100; ++i) us.push_back(std::pow(10.0, -4.0 + 8.0 * i / 99.0));
    return us;
}

}  // namespace

TEST_CASE("spot values from direct substitution") {
    const auto harm = make_harmonic_generator(0.5);
    CHECK(harm.f(2.0) == doctest::Approx(-1.0 / 3.0).epsilon(1e-14));

    const auto kl = make_kl_generator();
    CHECK(kl.f(M_E) == doctest::Approx(M_E).epsilon(1e-14));
    CHECK(kl.f_prime(M_E) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(kl.conjugate_of_fprime(M_E) == doctest::Approx(M_E).epsilon(1e-14));

    const auto hel = make_sq_hellinger_generator();
    CHECK(hel.f_prime(4.0) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("weight validation") {
    CHECK_THROWS_AS(make_harmonic_generator(0.0), std::invalid_argument);
    CHECK_THROWS_AS(make_harmonic_generator(1.0), std::invalid_argument);
    CHECK_THROWS_AS(make_js_generator(-0.1), std::invalid_argument);
}

TEST_CASE("f(1) = 0 and strict convexity on the log grid") {
    for (const auto& gen : all_generators()) {
        CAPTURE(gen.name);
        CHECK(std::abs(gen.f(1.0)) <= 1e-12);
        for (double u : log_grid_100()) CHECK(gen.f_double_prime(u) > 0.0);
    }
}

TEST_CASE("conjugate identity f* o f'(u) = u f'(u) - f(u)") {
    for (const auto& gen : all_generators()) {
        CAPTURE(gen.name);
        for (double u : log_grid_100()) {
            const double lhs = gen.conjugate_of_fprime(u);
            const double rhs = u * gen.f_prime(u) - gen.f(u);
            CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
        }
    }
}

TEST_CASE("derivatives match central finite differences") {
    for (const auto& gen : all_generators()) {
        CAPTURE(gen.name);
        for (double u : log_grid_100()) {
            const double h = u * 1e-6;
            const double fd1 = (gen.f(u + h) - gen.f(u - h)) / (2.0 * h);
            CHECK(gen.f_prime(u) == doctest::Approx(fd1).epsilon(1e-5));
            const double fd2 = (gen.f_prime(u + h) - gen.f_prime(u - h)) / (2.0 * h);
            CHECK(gen.f_double_prime(u) == doctest::Approx(fd2).epsilon(1e-5));
        }
    }
}

TEST_CASE("log-argument forms agree with the plain forms") {
    for (const auto& gen : all_generators()) {
        CAPTURE(gen.name);
        for (double u : log_grid_100()) {
            const double l = std::log(u);
            CHECK(gen.f_from_log(l) == doctest::Approx(gen.f(u)).epsilon(1e-10));
            CHECK(gen.fprime_from_log(l) == doctest::Approx(gen.f_prime(u)).epsilon(1e-10));
            CHECK(gen.conj_fprime_from_log(l) ==
                  doctest::Approx(gen.conjugate_of_fprime(u)).epsilon(1e-10));
            CHECK(gen.log_fpp_from_log(l) ==
                  doctest::Approx(std::log(gen.f_double_prime(u))).epsilon(1e-10));
        }
        // The log forms stay finite where the plain forms would overflow.
        CHECK(std::isfinite(gen.log_fpp_from_log(720.0)));
        CHECK(std::isfinite(gen.log_fpp_from_log(-720.0)));
    }
}
