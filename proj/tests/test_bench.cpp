#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "fgb/bench.hpp"
#include "fgb/density.hpp"
#include "fgb/rng.hpp"
#include "oracle_support.hpp"

using namespace fgb;

namespace {

ExperimentSpec gaussian_spec(const TargetDensity& q1, const TargetDensity& q2, int n) {
    ExperimentSpec spec;
    spec.q1 = &q1;
    spec.q2 = &q2;
    spec.n1 = spec.n2 = n;
    spec.seed = 21;
    return spec;
}

}  // namespace

TEST_CASE("method names round-trip and unknown ids are rejected") {
    for (Method m : {Method::Fgb, Method::OptimalIdentity, Method::Geometric, Method::Is,
                     Method::Ris})
        CHECK(method_from_name(method_name(m)) == m);
    CHECK_THROWS_WITH_AS(method_from_name("warp3"), doctest::Contains("warp3"),
                         std::invalid_argument);
}

TEST_CASE("identical targets: every closed-form method has tiny mse at N=2000") {
    const TargetDensity q1 = gaussian_target({0.0}, {1.0});
    const TargetDensity q2 = gaussian_target({0.0}, {1.0});
    ExperimentSpec spec = gaussian_spec(q1, q2, 2000);
    for (Method m : {Method::OptimalIdentity, Method::Geometric, Method::Is, Method::Ris}) {
        const RepetitionSummary sum = run_repetitions(spec, m, 20);
        CAPTURE(sum.method);
        CHECK(sum.failures == 0);
        CHECK(sum.mc_mse_log_r < 1e-3);
        CHECK(sum.true_log_r == 0.0);
    }
}

TEST_CASE("geometric bridge mc mse matches the quadrature-predicted variance") {
    const TargetDensity q1 = gaussian_target({0.0}, {1.0});
    const TargetDensity q2 = gaussian_target({0.0}, {2.0});
    ExperimentSpec spec = gaussian_spec(q1, q2, 2000);
    const RepetitionSummary sum = run_repetitions(spec, Method::Geometric, 100);
    CHECK(sum.failures == 0);
    const double bc = oracle::gaussian_bhattacharyya(1.0, 2.0);
    const double predicted = oracle::geometric_bridge_re2(bc, 2000, 2000);
    CHECK(sum.mc_mse_log_r < 2.0 * predicted);
    CHECK(sum.mc_mse_log_r > 0.5 * predicted);
}

TEST_CASE("summaries are bit-identical across seeds and worker counts") {
    const TargetDensity q1 = gaussian_target({0.0}, {1.0});
    const TargetDensity q2 = gaussian_target({0.3}, {1.5});
    ExperimentSpec spec = gaussian_spec(q1, q2, 500);

    const RepetitionSummary a = run_repetitions(spec, Method::OptimalIdentity, 10);
    const RepetitionSummary b = run_repetitions(spec, Method::OptimalIdentity, 10);
    spec.threads = 4;
    const RepetitionSummary c = run_repetitions(spec, Method::OptimalIdentity, 10);
    CHECK(a.mc_mse_log_r == b.mc_mse_log_r);
    CHECK(a.mc_mse_log_r == c.mc_mse_log_r);
    CHECK(a.log_r_hats == b.log_r_hats);
    CHECK(a.log_r_hats == c.log_r_hats);

    spec.seed = 22;
    const RepetitionSummary d = run_repetitions(spec, Method::OptimalIdentity, 10);
    CHECK(a.mc_mse_log_r != d.mc_mse_log_r);
}

TEST_CASE("run_repetitions validates preconditions") {
    const TargetDensity q1 = gaussian_target({0.0}, {1.0});
    TargetDensity no_z = q1;
    no_z.exact_log_z.reset();
    ExperimentSpec spec = gaussian_spec(q1, no_z, 100);
    CHECK_THROWS_AS(run_repetitions(spec, Method::Geometric, 2), std::invalid_argument);
}

TEST_CASE("fixed-flow study with identity flow on identical targets") {
    const TargetDensity q = gaussian_target({0.0, 0.0}, {1.0, 1.0});
    Rng rng = make_rng(31);
    const FlowModel identity = build_flow(2, 2, {8}, rng);
    const FixedFlowStudy st = fixed_flow_re2_study(identity, q, q, 1000, 30, 5, 1);
    CHECK(st.failures == 0);
    // G ~ 0 so re2 ~ (s1 s2 n')^{-1} ((1-G)^{-1}-1) stays near zero.
    CHECK(st.mean_re2 < 10.0 / 2000.0);
    CHECK(st.mc_mse < 10.0 / 2000.0);
    CHECK(st.mean_re2 >= 0.0);
}

TEST_CASE("fgb repetitions on a small Gaussian problem count no failures") {
    const TargetDensity q1 = augment_with_standard_normal(gaussian_target({0.0}, {1.0}), 1);
    const TargetDensity q2 = augment_with_standard_normal(gaussian_target({0.0}, {2.0}), 1);
    ExperimentSpec spec;
    spec.q1 = &q1;
    spec.q2 = &q2;
    spec.n1 = spec.n2 = 600;
    spec.seed = 33;
    spec.train.max_epochs = 30;
    spec.flow.layer_count = 2;
    spec.flow.hidden = {8, 8};
    const RepetitionSummary sum = run_repetitions(spec, Method::Fgb, 3);
    CHECK(sum.failures == 0);
    CHECK(std::isfinite(sum.mean_re2_estimate));
    CHECK(sum.mc_mse_log_r < 0.05);
}
