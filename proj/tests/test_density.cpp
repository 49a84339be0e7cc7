#include <doctest.h>

#include <cmath>
#include <vector>

#include "fgb/density.hpp"
#include "fgb/math_utils.hpp"
#include "fgb/quadrature.hpp"
#include "fgb/rng.hpp"

using namespace fgb;

namespace {

double quad_normalization_2d(const TargetDensity& t, double half_width) {
    auto f = [&](double x, double y) {
        const double p[2] = {x, y};
        return std::exp(t.log_unnorm(std::span<const double>(p, 2)));
    };
    return integrate_2d(f, -half_width, half_width, -half_width, half_width, 1e-7, 256, 2048);
}

double quad_normalization_1d(const TargetDensity& t, double half_width) {
    auto f = [&](double x) {
        const double p[1] = {x};
        return std::exp(t.log_unnorm(std::span<const double>(p, 1)));
    };
    return integrate_1d(f, -half_width, half_width, 1e-9, 1024);
}

}  // namespace

TEST_CASE("gaussian_target closed-form constants") {
    const TargetDensity g1 = gaussian_target({0.0}, {1.0});
    CHECK(*g1.exact_log_z == doctest::Approx(0.9189385332046727).epsilon(1e-15));

    const TargetDensity g2 = gaussian_target({0.0}, {2.0});
    CHECK(*g2.exact_log_z == doctest::Approx(1.2655121234846454).epsilon(1e-15));

    CHECK_THROWS_AS(gaussian_target({0.0}, {-1.0}), std::invalid_argument);
    CHECK_THROWS_AS(gaussian_target({0.0}, {0.0}), std::invalid_argument);
}

TEST_CASE("gaussian 2-d quadrature normalization equals 2 pi") {
    const TargetDensity g = gaussian_target({0.0, 0.0}, {1.0, 1.0});
    const double z = quad_normalization_2d(g, 8.0);
    CHECK(z == doctest::Approx(2.0 * M_PI).epsilon(1e-6));
    CHECK(std::exp(*g.exact_log_z) == doctest::Approx(2.0 * M_PI).epsilon(1e-12));
}

TEST_CASE("ring mixture: closed-form Z against 2-d quadrature") {
    RingMixtureParams p;
    p.dim = 2;
    p.mu1[0] = p.mu1[1] = 0.0;
    p.mu2[0] = p.mu2[1] = 0.0;
    p.s = 3.0;
    p.sigma = 1.0;
    const TargetDensity ring = ring_mixture_target(p);
    // Z = sqrt(2 pi^3 sigma^2) Phi(s/sigma) per 2-d block
    const double expected = 0.5 * std::log(2.0 * M_PI * M_PI * M_PI) + log_norm_cdf(3.0);
    CHECK(*ring.exact_log_z == doctest::Approx(expected).epsilon(1e-12));
    const double z = quad_normalization_2d(ring, 12.0);
    CHECK(z == doctest::Approx(std::exp(expected)).epsilon(1e-4));

    // Distinct centers: same Z by translation invariance of each kernel.
    RingMixtureParams q = p;
    q.mu1[0] = 2.0; q.mu1[1] = 2.0;
    q.mu2[0] = -2.0; q.mu2[1] = -2.0;
    const TargetDensity ring2 = ring_mixture_target(q);
    CHECK(*ring2.exact_log_z == doctest::Approx(expected).epsilon(1e-12));
    const double z2 = quad_normalization_2d(ring2, 12.0);
    CHECK(z2 == doctest::Approx(std::exp(expected)).epsilon(1e-4));
}

TEST_CASE("ring mixture: paper-scale p=12 constant and parameter errors") {
    RingMixtureParams p;
    p.dim = 12;
    p.mu1[0] = 2.0; p.mu1[1] = 2.0;
    p.mu2[0] = -2.0; p.mu2[1] = -2.0;
    p.s = 3.0;
    p.sigma = 1.0;
    const TargetDensity ring = ring_mixture_target(p);
    const double block = 0.5 * std::log(2.0 * M_PI * M_PI * M_PI) + log_norm_cdf(3.0);
    CHECK(*ring.exact_log_z == doctest::Approx(6.0 * block).epsilon(1e-12));

    RingMixtureParams bad = p;
    bad.dim = 3;
    CHECK_THROWS_AS(ring_mixture_target(bad), std::invalid_argument);
    bad.dim = 2;
    bad.s = -1.0;
    CHECK_THROWS_AS(ring_mixture_target(bad), std::invalid_argument);
}

TEST_CASE("ring sampler: squared radius matches the truncated normal law") {
    RingMixtureParams p;
    p.dim = 2;
    p.mu1[0] = p.mu1[1] = 1.0;
    p.mu2[0] = p.mu2[1] = 1.0;  // degenerate mixture: a single ring
    p.s = 3.0;
    p.sigma = 1.0;
    const TargetDensity ring = ring_mixture_target(p);
    Rng rng = make_rng(42);
    const int n = 100000;
    const SampleBatch b = ring.sampler(rng, n);
    double mean = 0.0, m2 = 0.0;
    for (int i = 0; i < n; ++i) {
        auto r = b.row(i);
        const double dx = r[0] - 1.0, dy = r[1] - 1.0;
        const double t = dx * dx + dy * dy;
        mean += t;
        m2 += t * t;
    }
    mean /= n;
    m2 /= n;
    const double se = std::sqrt((m2 - mean * mean) / n);
    // Truncated Normal(s, sigma^2) on (0, inf): mean = s + sigma phi(s)/Phi(s).
    const double phi3 = std::exp(-4.5) / std::sqrt(2.0 * M_PI);
    const double expected = 3.0 + phi3 / norm_cdf(3.0);
    CHECK(std::abs(mean - expected) < 3.0 * se);
}

TEST_CASE("ring sampler: angle is uniform (KS at the 1 percent level)") {
    RingMixtureParams p;
    p.dim = 2;
    p.mu1[0] = p.mu1[1] = 0.0;
    p.mu2[0] = p.mu2[1] = 0.0;
    p.s = 3.0;
    p.sigma = 1.0;
    const TargetDensity ring = ring_mixture_target(p);
    Rng rng = make_rng(7);
    const int n = 100000;
    const SampleBatch b = ring.sampler(rng, n);
    std::vector<double> u(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        auto r = b.row(i);
        double th = std::atan2(r[1], r[0]);
        if (th < 0.0) th += 2.0 * M_PI;
        u[static_cast<std::size_t>(i)] = th / (2.0 * M_PI);
    }
    std::sort(u.begin(), u.end());
    double ks = 0.0;
    for (int i = 0; i < n; ++i) {
        const double e_lo = static_cast<double>(i) / n;
        const double e_hi = static_cast<double>(i + 1) / n;
        ks = std::max({ks, std::abs(u[static_cast<std::size_t>(i)] - e_lo),
                       std::abs(u[static_cast<std::size_t>(i)] - e_hi)});
    }
    CHECK(ks < 1.628 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("t mixture: Cauchy normalization via heavy-tail quadrature") {
    const TargetDensity t = t_mixture_target({1.0}, {{0.0}}, {1.0}, 1.0);
    CHECK(*t.exact_log_z == doctest::Approx(-std::log(M_PI)).epsilon(1e-12));
    auto f = [&](double x) {
        const double p[1] = {x};
        return std::exp(t.log_unnorm(std::span<const double>(p, 1)));
    };
    const double z = integrate_1d_heavy_tail(f, 1.0, 1e5, 8192, 8192);
    CHECK(z == doctest::Approx(std::exp(*t.exact_log_z)).epsilon(1e-3));
}

TEST_CASE("t mixture: nu -> huge matches the Gaussian (MC KL oracle)") {
    const TargetDensity t = t_mixture_target({1.0}, {{0.0, 0.0}},
                                             {1.0, 0.0, 0.0, 1.0}, 1e6);
    const TargetDensity g = gaussian_target({0.0, 0.0}, {1.0, 1.0});
    Rng rng = make_rng(3);
    const int n = 100000;
    const SampleBatch b = t.sampler(rng, n);
    double kl = 0.0;
    for (int i = 0; i < n; ++i) {
        const double lt = t.log_unnorm(b.row(i)) - *t.exact_log_z;
        const double lg = g.log_unnorm(b.row(i)) - *g.exact_log_z;
        kl += lt - lg;
    }
    kl /= n;
    CHECK(std::abs(kl) < 1e-3);
}

TEST_CASE("t mixture: identical means collapse to one component") {
    const TargetDensity one = t_mixture_target({1.0}, {{0.5, -0.5}},
                                               {2.0, 0.3, 0.3, 1.0}, 4.0);
    const TargetDensity two = t_mixture_target({0.5, 0.5}, {{0.5, -0.5}, {0.5, -0.5}},
                                               {2.0, 0.3, 0.3, 1.0}, 4.0);
    Rng rng = make_rng(9);
    for (int i = 0; i < 50; ++i) {
        const double p[2] = {3.0 * draw_normal(rng), 3.0 * draw_normal(rng)};
        std::span<const double> x(p, 2);
        CHECK(one.log_unnorm(x) == doctest::Approx(two.log_unnorm(x)).epsilon(1e-12));
    }
}

TEST_CASE("t mixture: parameter validation") {
    CHECK_THROWS_AS(t_mixture_target({0.7, 0.7}, {{0.0}, {1.0}}, {1.0}, 1.0),
                    std::invalid_argument);
    // Non-SPD scale detected by the failed factorization.
    CHECK_THROWS_AS(t_mixture_target({1.0}, {{0.0, 0.0}}, {1.0, 2.0, 2.0, 1.0}, 2.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(t_mixture_target({1.0}, {{0.0}}, {1.0}, -1.0), std::invalid_argument);
}

TEST_CASE("t mixture: 2-d normalization at moderate nu") {
    const TargetDensity t = t_mixture_target({0.6, 0.4}, {{1.0, 0.0}, {-1.0, 0.5}},
                                             {1.5, 0.4, 0.4, 1.0}, 4.0);
    const double z = quad_normalization_2d(t, 60.0);
    CHECK(z == doctest::Approx(std::exp(*t.exact_log_z)).epsilon(1e-3));
}

TEST_CASE("augmentation keeps the constant bit-identical and factorizes") {
    const TargetDensity base = gaussian_target({0.0}, {1.0});
    const TargetDensity a1 = augment_with_standard_normal(base, 1);
    CHECK(a1.dim == 2);
    CHECK(*a1.exact_log_z == *base.exact_log_z);  // exact field copy

    const TargetDensity twice = augment_with_standard_normal(a1, 1);
    const TargetDensity once = augment_with_standard_normal(base, 2);
    Rng rng = make_rng(5);
    for (int i = 0; i < 50; ++i) {
        const double p[3] = {draw_normal(rng), draw_normal(rng), draw_normal(rng)};
        std::span<const double> x(p, 3);
        CHECK(twice.log_unnorm(x) == doctest::Approx(once.log_unnorm(x)).epsilon(1e-14));
    }
    CHECK_THROWS_AS(augment_with_standard_normal(base, 0), std::invalid_argument);

    const double qz = quad_normalization_2d(a1, 8.0);
    CHECK(qz == doctest::Approx(std::exp(*a1.exact_log_z)).epsilon(1e-3));
}

TEST_CASE("sampler-vs-quadrature kernel-free check on dim<=2 fixtures") {
    // E_sampler[exp(g(x))] must match the quadrature of exp(g) q for smooth g.
    auto check_target = [](const TargetDensity& t, double half_width) {
        auto g1 = [](std::span<const double> x) {
            double s = 0.0;
            for (double v : x) s += v;
            return std::sin(s);
        };
        auto g2 = [](std::span<const double> x) { return 0.5 * std::cos(x[0]); };
        for (int which = 0; which < 2; ++which) {
            auto g = which == 0 ? std::function<double(std::span<const double>)>(g1)
                                : std::function<double(std::span<const double>)>(g2);
            double quad = 0.0;
            if (t.dim == 1) {
                quad = integrate_1d(
                    [&](double x) {
                        const double p[1] = {x};
                        std::span<const double> sp(p, 1);
                        return std::exp(g(sp) + t.log_unnorm(sp) - *t.exact_log_z);
                    },
                    -half_width, half_width, 1e-9, 1024);
            } else {
                quad = integrate_2d(
                    [&](double x, double y) {
                        const double p[2] = {x, y};
                        std::span<const double> sp(p, 2);
                        return std::exp(g(sp) + t.log_unnorm(sp) - *t.exact_log_z);
                    },
                    -half_width, half_width, -half_width, half_width, 1e-7, 128, 1024);
            }
            Rng rng = make_rng(1234);
            const int n = 20000;
            const SampleBatch b = t.sampler(rng, n);
            double mean = 0.0, m2 = 0.0;
            for (int i = 0; i < n; ++i) {
                const double v = std::exp(g(b.row(i)));
                mean += v;
                m2 += v * v;
            }
            mean /= n;
            m2 /= n;
            const double se = std::sqrt((m2 - mean * mean) / n);
            CHECK(std::abs(mean - quad) < 4.0 * se);
        }
    };
    check_target(gaussian_target({0.3}, {1.5}), 12.0);
    check_target(gaussian_target({0.0, 1.0}, {1.0, 2.0}), 14.0);
    RingMixtureParams p;
    p.dim = 2;
    p.mu1[0] = 2.0; p.mu1[1] = 2.0;
    p.mu2[0] = -2.0; p.mu2[1] = -2.0;
    p.s = 3.0;
    p.sigma = 1.0;
    check_target(ring_mixture_target(p), 12.0);
}

TEST_CASE("density gradients match finite differences") {
    RingMixtureParams p;
    p.dim = 4;
    p.mu1[0] = 2.0; p.mu1[1] = 2.0;
    p.mu2[0] = -2.0; p.mu2[1] = -2.0;
    p.s = 3.0;
    p.sigma = 1.0;
    const std::vector<TargetDensity> fixtures = {
        gaussian_target({0.1, -0.4}, {1.0, 2.5}),
        ring_mixture_target(p),
        t_mixture_target({0.3, 0.7}, {{1.0, 0.0}, {0.0, 1.0}}, {1.5, 0.4, 0.4, 1.0}, 4.0),
        augment_with_standard_normal(gaussian_target({0.0}, {1.0}), 1),
    };
    Rng rng = make_rng(77);
    for (const auto& t : fixtures) {
        std::vector<double> x(static_cast<std::size_t>(t.dim));
        for (int rep = 0; rep < 5; ++rep) {
            for (auto& v : x) v = 2.0 * draw_normal(rng);
            std::vector<double> g(x.size());
            t.grad_log_unnorm(x, g);
            const double h = 1e-6;
            for (std::size_t j = 0; j < x.size(); ++j) {
                const double orig = x[j];
                x[j] = orig + h;
                const double up = t.log_unnorm(x);
                x[j] = orig - h;
                const double dn = t.log_unnorm(x);
                x[j] = orig;
                const double fd = (up - dn) / (2.0 * h);
                CHECK(g[j] == doctest::Approx(fd).epsilon(1e-5));
            }
        }
    }
}
