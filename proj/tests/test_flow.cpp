#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "fgb/density.hpp"
#include "fgb/flow.hpp"
#include "fgb/quadrature.hpp"
#include "fgb/rng.hpp"

using namespace fgb;

namespace {

// Determinant by Gaussian elimination with partial pivoting (test oracle).
double det_dense(std::vector<double> a, int n) {
    double det = 1.0;
    for (int c = 0; c < n; ++c) {
        int piv = c;
        for (int r = c + 1; r < n; ++r)
            if (std::abs(a[static_cast<std::size_t>(r * n + c)]) >
                std::abs(a[static_cast<std::size_t>(piv * n + c)]))
                piv = r;
        if (piv != c) {
            for (int k = 0; k < n; ++k)
                std::swap(a[static_cast<std::size_t>(c * n + k)],
                          a[static_cast<std::size_t>(piv * n + k)]);
            det = -det;
        }
        const double p = a[static_cast<std::size_t>(c * n + c)];
        det *= p;
        for (int r = c + 1; r < n; ++r) {
            const double f = a[static_cast<std::size_t>(r * n + c)] / p;
            for (int k = c; k < n; ++k)
                a[static_cast<std::size_t>(r * n + k)] -=
                    f * a[static_cast<std::size_t>(c * n + k)];
        }
    }
    return det;
}

FlowModel perturbed_flow(int dim, int layers, std::vector<int> hidden, double scale,
                         std::uint64_t seed) {
    Rng rng = make_rng(seed);
    FlowModel m = build_flow(dim, layers, hidden, rng);
    for (double& v : m.theta) v += scale * draw_normal(rng);
    return m;
}

}  // namespace

TEST_CASE("fresh flow is the exact identity with zero log-det") {
    Rng rng = make_rng(1);
    for (int K : {1, 4, 10}) {
        FlowModel m = build_flow(6, K, {64, 64}, rng);
        std::vector<double> x(6), y(6);
        for (int t = 0; t < 5; ++t) {
            for (auto& v : x) v = 3.0 * draw_normal(rng);
            const double ld = flow_forward(m, x, y);
            CHECK(ld == 0.0);
            for (int j = 0; j < 6; ++j) CHECK(y[static_cast<std::size_t>(j)] == x[static_cast<std::size_t>(j)]);
        }
    }
    CHECK_THROWS_WITH_AS(build_flow(1, 2, {8}, rng),
                         doctest::Contains("augment_with_standard_normal"),
                         std::invalid_argument);
    CHECK_THROWS_AS(build_flow(4, 0, {8}, rng), std::invalid_argument);
}

TEST_CASE("single layer with a forced-constant conditioner") {
    Rng rng = make_rng(2);
    FlowModel m = build_flow(2, 1, {4}, rng);
    for (double& v : m.theta) v = 0.0;
    // Stage layout for dims 1 -> 4 -> 2: W1(4), b1(4), W2(8), b2(2).
    const std::size_t b2_off = 4 + 4 + 8;
    m.theta[b2_off] = 1.0;  // shift head
    m.theta[b2_off + 1] = m.s_max * std::atanh(std::log(2.0) / m.s_max);  // raw log-scale

    const std::vector<double> x = {0.7, -1.3};
    std::vector<double> y(2);
    const double ld = flow_forward(m, x, y);
    CHECK(y[0] == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(y[1] == doctest::Approx(1.0 + 2.0 * (-1.3)).epsilon(1e-12));
    CHECK(ld == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("round trip and log-det antisymmetry at K=10") {
    FlowModel m = perturbed_flow(6, 10, {32, 32}, 0.05, 3);
    Rng rng = make_rng(4);
    std::vector<double> x(6), y(6), back(6);
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
        for (auto& v : x) v = 2.0 * draw_normal(rng);
        const double ld = flow_forward(m, x, y);
        const double ldi = flow_inverse(m, y, back);
        for (int j = 0; j < 6; ++j)
            worst = std::max(worst, std::abs(back[static_cast<std::size_t>(j)] -
                                             x[static_cast<std::size_t>(j)]));
        CHECK(std::abs(ld + ldi) < 1e-8);
    }
    CHECK(worst < 1e-8);
}

TEST_CASE("forward log-det matches the finite-difference Jacobian at K=4") {
    FlowModel m = perturbed_flow(4, 4, {16, 16}, 0.1, 5);
    Rng rng = make_rng(6);
    const int d = 4;
    std::vector<double> x(static_cast<std::size_t>(d));
    for (int t = 0; t < 10; ++t) {
        for (auto& v : x) v = draw_normal(rng);
        std::vector<double> y(static_cast<std::size_t>(d));
        const double ld = flow_forward(m, x, y);
        std::vector<double> jac(static_cast<std::size_t>(d * d));
        const double h = 1e-6;
        std::vector<double> up(static_cast<std::size_t>(d)), dn(static_cast<std::size_t>(d));
        for (int j = 0; j < d; ++j) {
            const double orig = x[static_cast<std::size_t>(j)];
            x[static_cast<std::size_t>(j)] = orig + h;
            flow_forward(m, x, up);
            x[static_cast<std::size_t>(j)] = orig - h;
            flow_forward(m, x, dn);
            x[static_cast<std::size_t>(j)] = orig;
            for (int i = 0; i < d; ++i)
                jac[static_cast<std::size_t>(i * d + j)] =
                    (up[static_cast<std::size_t>(i)] - dn[static_cast<std::size_t>(i)]) /
                    (2.0 * h);
        }
        const double fd_logdet = std::log(std::abs(det_dense(jac, d)));
        CHECK(ld == doctest::Approx(fd_logdet).epsilon(1e-5));
    }
}

TEST_CASE("batch forward equals the single-point form") {
    FlowModel m = perturbed_flow(4, 3, {8}, 0.2, 7);
    const TargetDensity g = gaussian_target({0, 0, 0, 0}, {1, 1, 1, 1});
    Rng rng = make_rng(8);
    const SampleBatch in = g.sampler(rng, 32);
    SampleBatch out;
    const std::vector<double> lds = flow_forward_batch(m, in, out);
    std::vector<double> y(4);
    for (int i = 0; i < 32; ++i) {
        const double ld = flow_forward(m, in.row(i), y);
        CHECK(ld == lds[static_cast<std::size_t>(i)]);
        for (int j = 0; j < 4; ++j) CHECK(out.row(i)[j] == y[static_cast<std::size_t>(j)]);
    }
}

TEST_CASE("transformed density: zero-init equals the base exactly") {
    Rng rng = make_rng(9);
    FlowModel m = build_flow(2, 4, {16}, rng);
    const TargetDensity base = gaussian_target({0.3, -0.2}, {1.0, 2.0});
    for (int t = 0; t < 20; ++t) {
        const double p[2] = {draw_normal(rng), draw_normal(rng)};
        std::span<const double> x(p, 2);
        CHECK(transformed_log_unnorm(m, base, x) == doctest::Approx(base.log_unnorm(x)).epsilon(1e-14));
    }
}

TEST_CASE("transformed density keeps the normalizing constant (quadrature)") {
    FlowModel m = perturbed_flow(2, 2, {8, 8}, 0.15, 10);
    const TargetDensity base = gaussian_target({0.0, 0.0}, {1.0, 1.5});
    const TargetDensity moved = make_transformed_target(m, base);
    CHECK(*moved.exact_log_z == *base.exact_log_z);
    auto f = [&](double x, double y) {
        const double p[2] = {x, y};
        return std::exp(moved.log_unnorm(std::span<const double>(p, 2)));
    };
    const double z = integrate_2d(f, -14.0, 14.0, -14.0, 14.0, 1e-6, 256, 1024);
    CHECK(z == doctest::Approx(std::exp(*base.exact_log_z)).epsilon(1e-3));
}

TEST_CASE("push-forward sampler agrees with the transformed density (chi-square)") {
    FlowModel m = perturbed_flow(2, 2, {8, 8}, 0.15, 11);
    const TargetDensity base = gaussian_target({0.0, 0.0}, {1.0, 1.0});
    const TargetDensity moved = make_transformed_target(m, base);

    const int cells = 4;
    const double lo = -3.0, hi = 3.0, step = (hi - lo) / cells;
    std::vector<double> prob(static_cast<std::size_t>(cells * cells + 1), 0.0);
    double inside = 0.0;
    for (int a = 0; a < cells; ++a)
        for (int b = 0; b < cells; ++b) {
            auto f = [&](double x, double y) {
                const double p[2] = {x, y};
                return std::exp(moved.log_unnorm(std::span<const double>(p, 2)) -
                                *moved.exact_log_z);
            };
            const double pr = trapezoid_2d(f, lo + a * step, lo + (a + 1) * step,
                                           lo + b * step, lo + (b + 1) * step, 64);
            prob[static_cast<std::size_t>(a * cells + b)] = pr;
            inside += pr;
        }
    prob[static_cast<std::size_t>(cells * cells)] = 1.0 - inside;  // everything else

    Rng rng = make_rng(12);
    const int n = 20000;
    const SampleBatch draws = moved.sampler(rng, n);
    std::vector<int> count(prob.size(), 0);
    for (int i = 0; i < n; ++i) {
        const double x = draws.row(i)[0], y = draws.row(i)[1];
        if (x >= lo && x < hi && y >= lo && y < hi) {
            const int a = static_cast<int>((x - lo) / step);
            const int b = static_cast<int>((y - lo) / step);
            count[static_cast<std::size_t>(a * cells + b)]++;
        } else {
            count[static_cast<std::size_t>(cells * cells)]++;
        }
    }
    double chi2 = 0.0;
    for (std::size_t c = 0; c < prob.size(); ++c) {
        const double expect = n * prob[c];
        if (expect < 1e-9) continue;
        const double diff = count[c] - expect;
        chi2 += diff * diff / expect;
    }
    // 16 full cells + the outside cell: chi^2_{16} at the 1% level.
    CHECK(chi2 < 32.0);
}

TEST_CASE("save/load round-trips the parameters exactly") {
    FlowModel m = perturbed_flow(5, 3, {8, 8}, 0.5, 13);
    const std::string path = "flow_roundtrip.tmp";
    save_flow(m, path);
    const FlowModel back = load_flow(path);
    CHECK(back.dim == m.dim);
    CHECK(back.layer_count() == m.layer_count());
    CHECK(back.s_max == m.s_max);
    REQUIRE(back.theta.size() == m.theta.size());
    for (std::size_t i = 0; i < m.theta.size(); ++i) CHECK(back.theta[i] == m.theta[i]);
    std::filesystem::remove(path);
}

TEST_CASE("corrupted model header is rejected with a named error") {
    FlowModel m = perturbed_flow(4, 2, {8}, 0.1, 14);
    const std::string path = "flow_corrupt.tmp";
    save_flow(m, path);
    {
        std::FILE* f = std::fopen(path.c_str(), "r+");
        REQUIRE(f != nullptr);
        std::fputs("xxx-bad", f);
        std::fclose(f);
    }
    CHECK_THROWS_WITH_AS(load_flow(path), doctest::Contains("header"), std::runtime_error);
    std::filesystem::remove(path);
}
