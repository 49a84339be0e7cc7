// Command-line front end: single estimates, benchmark protocols and the fast
// invariant check suite. All numeric output is in natural log unless --log10
// is given, which converts the console display only.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "fgb/bench.hpp"
#include "fgb/bridge.hpp"
#include "fgb/config.hpp"
#include "fgb/divergence.hpp"
#include "fgb/flow.hpp"
#include "fgb/generator.hpp"
#include "fgb/grad.hpp"
#include "fgb/math_utils.hpp"
#include "fgb/train.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumeric = 2;

struct GlobalOpts {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;
    bool log10_display = false;
};

int resolve_threads(int flag_value) {
    if (flag_value > 0) return flag_value;
    if (const char* env = std::getenv("FGB_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

double display(double natural_log_value, bool log10_display) {
    return log10_display ? natural_log_value / M_LN10 : natural_log_value;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    f << text;
}

void write_scatter(const std::filesystem::path& path, const fgb::SampleBatch& batch) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    f.precision(9);
    for (int i = 0; i < batch.size(); ++i) {
        auto r = batch.row(i);
        f << r[0] << "\t" << r[1] << "\n";
    }
}

std::string fmt6(double v) {
    if (std::isnan(v)) return "-";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

fgb::RunConfig load_config_or_die(const GlobalOpts& g) {
    if (g.config_path.empty())
        throw std::invalid_argument("config: --config PATH is required");
    fgb::RunConfig cfg = fgb::load_run_config(g.config_path);
    if (g.seed_set) {
        cfg.seed = g.seed;
        cfg.train.seed = g.seed;
    }
    if (!g.out_dir.empty()) cfg.out_dir = g.out_dir;
    return cfg;
}

int cmd_estimate(const GlobalOpts& g) {
    fgb::RunConfig cfg = load_config_or_die(g);
    const fgb::TargetDensity q1 = fgb::build_target(cfg.q1);
    const fgb::TargetDensity q2 = fgb::build_target(cfg.q2);
    if (!q1.has_sampler() || !q2.has_sampler())
        throw std::invalid_argument("config: estimate needs targets with samplers");

    fgb::Rng rng = fgb::make_substream(cfg.seed, 0xd4aa);
    const fgb::SampleBatch b1 = q1.sampler(rng, cfg.n1);
    const fgb::SampleBatch b2 = q2.sampler(rng, cfg.n2);

    fgb::FgbArtifacts art;
    auto [res, rep] = fgb::fgb_estimate(cfg.train, cfg.flow, q1, q2, b1, b2,
                                        cfg.split_fraction, &art);

    std::filesystem::create_directories(cfg.out_dir);
    json out;
    out["config_hash"] = fgb::config_hash(cfg);
    out["seed"] = cfg.seed;
    out["log_r_hat"] = res.log_r_hat;
    out["re2_estimate"] = res.re2_estimate ? json(*res.re2_estimate) : json();
    out["saturated"] = res.saturated;
    out["bridge_converged"] = res.converged;
    out["bridge_iterations"] = res.iterations;
    out["train"] = {{"epochs_run", rep.epochs_run},
                    {"stopped_by", rep.stopped_by == fgb::StopReason::ObjectiveAndRStable
                                       ? "objective_and_r_stable"
                                       : "max_epochs"},
                    {"final_log_r_tilde", rep.final_log_r_tilde},
                    {"objective_trace", rep.objective_trace},
                    {"r_trace", rep.r_trace}};
    if (q1.exact_log_z && q2.exact_log_z)
        out["true_log_r"] = *q1.exact_log_z - *q2.exact_log_z;
    write_text(std::filesystem::path(cfg.out_dir) / "result.json", out.dump(2) + "\n");

    fgb::save_flow(art.model, (std::filesystem::path(cfg.out_dir) / "flow.model").string());
    if (q1.dim >= 2) {
        write_scatter(std::filesystem::path(cfg.out_dir) / "scatter_q1.tsv", art.estimate1);
        write_scatter(std::filesystem::path(cfg.out_dir) / "scatter_q1_transformed.tsv",
                      art.estimate1_transformed);
        write_scatter(std::filesystem::path(cfg.out_dir) / "scatter_q2.tsv", art.estimate2);
    }

    std::cout << "log_r_hat" << (g.log10_display ? " (log10)" : "") << " = "
              << fmt6(display(res.log_r_hat, g.log10_display))
              << "  re2_estimate = " << fmt6(res.re2_estimate ? *res.re2_estimate : std::nan(""))
              << "  saturated = " << (res.saturated ? "yes" : "no")
              << "  bridge_converged = " << (res.converged ? "yes" : "no") << "\n";
    std::cout << "wrote " << (std::filesystem::path(cfg.out_dir) / "result.json").string() << "\n";
    return (res.converged && !res.saturated) ? kExitOk : kExitNumeric;
}

int cmd_bench(const GlobalOpts& g) {
    fgb::RunConfig cfg = load_config_or_die(g);
    const fgb::TargetDensity q1 = fgb::build_target(cfg.q1);
    const fgb::TargetDensity q2 = fgb::build_target(cfg.q2);
    const int threads = resolve_threads(g.threads);

    std::filesystem::create_directories(cfg.out_dir);
    std::ostringstream table;
    table << "# config_hash=" << fgb::config_hash(cfg) << " seed=" << cfg.seed << "\n";
    table << "# parenthesized columns are standard errors over reps\n";
    table << "method\tmc_mse\tmc_mse_se\tmean_re2\tmean_re2_se\tfailures\n";

    int total_failures = 0;
    json raw;

    if (cfg.bench.mode == "fixed_flow") {
        fgb::Rng rng = fgb::make_substream(cfg.seed, 0xd4aa);
        const fgb::SampleBatch b1 = q1.sampler(rng, cfg.n1);
        const fgb::SampleBatch b2 = q2.sampler(rng, cfg.n2);
        fgb::FgbArtifacts art;
        auto [res, rep] = fgb::fgb_estimate(cfg.train, cfg.flow, q1, q2, b1, b2,
                                            cfg.split_fraction, &art);
        (void)res;
        (void)rep;
        const fgb::FixedFlowStudy study = fgb::fixed_flow_re2_study(
            art.model, q1, q2, cfg.bench.n_prime, cfg.bench.reps, cfg.seed, threads);
        table << "fgb_fixed_flow\t" << fmt6(study.mc_mse) << "\t" << fmt6(study.se_mse) << "\t"
              << fmt6(study.mean_re2) << "\t" << fmt6(study.se_re2) << "\t" << study.failures
              << "\n";
        total_failures += study.failures;
        raw["fgb_fixed_flow"] = {{"log_r_hats", study.log_r_hats},
                                 {"re2_estimates", study.re2_estimates}};
    } else if (cfg.bench.mode == "repetitions") {
        fgb::ExperimentSpec spec;
        spec.q1 = &q1;
        spec.q2 = &q2;
        spec.n1 = cfg.n1;
        spec.n2 = cfg.n2;
        spec.split_fraction = cfg.split_fraction;
        spec.train = cfg.train;
        spec.flow = cfg.flow;
        spec.seed = cfg.seed;
        spec.threads = threads;
        for (const std::string& name : cfg.bench.methods) {
            const fgb::Method m = fgb::method_from_name(name);
            const fgb::RepetitionSummary sum = fgb::run_repetitions(spec, m, cfg.bench.reps);
            table << sum.method << "\t" << fmt6(sum.mc_mse_log_r) << "\t" << fmt6(sum.mc_mse_se)
                  << "\t" << fmt6(sum.mean_re2_estimate) << "\t" << fmt6(sum.mean_re2_se) << "\t"
                  << sum.failures << "\n";
            total_failures += sum.failures;
            raw[sum.method] = {{"log_r_hats", sum.log_r_hats},
                               {"re2_estimates", sum.re2_estimates},
                               {"true_log_r", sum.true_log_r}};
        }
    } else {
        throw std::invalid_argument("config: unknown bench mode '" + cfg.bench.mode + "'");
    }

    write_text(std::filesystem::path(cfg.out_dir) / "summary.tsv", table.str());
    write_text(std::filesystem::path(cfg.out_dir) / "raw.json", raw.dump(2) + "\n");
    std::cout << table.str();
    std::cout << "wrote " << (std::filesystem::path(cfg.out_dir) / "summary.tsv").string()
              << "\n";
    return total_failures == 0 ? kExitOk : kExitNumeric;
}

bool check_one(const std::string& name, bool ok, int& failures) {
    std::cout << (ok ? "PASS " : "FAIL ") << name << "\n";
    if (!ok) ++failures;
    return ok;
}

int cmd_check() {
    using namespace fgb;
    int failures = 0;

    // Generator identities on a log-spaced grid.
    {
        bool ok = true;
        const std::vector<GeneratorFunction> gens = {
            make_harmonic_generator(0.3), make_kl_generator(), make_reverse_kl_generator(),
            make_js_generator(0.5), make_sq_hellinger_generator()};
        for (const auto& gen : gens) {
            if (std::abs(gen.f(1.0)) > 1e-12) ok = false;
            for (int i = 0; i < 100; ++i) {
                const double u = std::pow(10.0, -4.0 + 8.0 * i / 99.0);
                if (!(gen.f_double_prime(u) > 0.0)) ok = false;
                const double lhs = gen.conjugate_of_fprime(u);
                const double rhs = u * gen.f_prime(u) - gen.f(u);
                if (std::abs(lhs - rhs) > 1e-10 * std::max(1.0, std::abs(rhs))) ok = false;
            }
        }
        check_one("generator_identities", ok, failures);
    }

    // Flow round-trip, log-det antisymmetry and the zero-init identity.
    {
        bool ok = true;
        Rng rng = make_rng(7);
        for (int K : {1, 4, 10}) {
            FlowModel m = build_flow(6, K, {16, 16}, rng);
            for (double& v : m.theta) v += 0.05 * draw_normal(rng);
            std::vector<double> x(6), y(6), back(6);
            for (int t = 0; t < 20; ++t) {
                for (auto& v : x) v = draw_normal(rng);
                const double ld = flow_forward(m, x, y);
                const double ldi = flow_inverse(m, y, back);
                for (int j = 0; j < 6; ++j)
                    if (std::abs(back[static_cast<std::size_t>(j)] -
                                 x[static_cast<std::size_t>(j)]) > 1e-8)
                        ok = false;
                if (std::abs(ld + ldi) > 1e-8) ok = false;
            }
        }
        FlowModel fresh = build_flow(4, 3, {8}, rng);
        std::vector<double> x = {0.3, -1.2, 2.0, 0.1}, y(4);
        if (flow_forward(fresh, x, y) != 0.0) ok = false;
        for (int j = 0; j < 4; ++j)
            if (y[static_cast<std::size_t>(j)] != x[static_cast<std::size_t>(j)]) ok = false;
        check_one("flow_roundtrip_identity", ok, failures);
    }

    // Gradient spot check on a small hybrid objective.
    {
        bool ok = true;
        Rng rng = make_rng(11);
        const TargetDensity q1 = gaussian_target({0.0, 0.0}, {1.0, 1.0});
        const TargetDensity q2 = gaussian_target({0.5, -0.5}, {2.0, 1.5});
        const SampleBatch s1 = q1.sampler(rng, 64);
        const SampleBatch s2 = q2.sampler(rng, 64);
        FlowModel m = build_flow(2, 2, {8}, rng);
        for (double& v : m.theta) v += 0.02 * draw_normal(rng);
        HybridObjective obj(m, q1, q2, s1, s2, 0.05, 0.05, 0.5);
        const double err = finite_difference_check(obj, m.theta, 0.1, 1e-5);
        if (!(err < 1e-4)) ok = false;
        check_one("gradient_fd_spot_check", ok, failures);
    }

    // Model save/load: exact round-trip, corrupted header detected.
    {
        bool ok = true;
        Rng rng = make_rng(13);
        FlowModel m = build_flow(5, 2, {8, 8}, rng);
        for (double& v : m.theta) v += draw_normal(rng);
        const std::string path = "fgb_check_model.tmp";
        save_flow(m, path);
        FlowModel back = load_flow(path);
        if (back.theta != m.theta || back.dim != m.dim) ok = false;
        {
            std::ofstream f(path);
            f << "not-a-flow 9\n";
        }
        try {
            load_flow(path);
            ok = false;
        } catch (const std::exception&) {
        }
        std::filesystem::remove(path);
        check_one("model_save_load", ok, failures);
    }

    // Bridge closed forms on a constant-ratio pair.
    {
        bool ok = true;
        Rng rng = make_rng(17);
        const TargetDensity q = gaussian_target({0.0}, {1.0});
        auto lq2 = [&](std::span<const double> x) { return q.log_unnorm(x); };
        auto lq1 = [&](std::span<const double> x) { return q.log_unnorm(x) + M_LN2; };
        const SampleBatch s1 = q.sampler(rng, 100);
        const SampleBatch s2 = q.sampler(rng, 100);
        const BridgeResult ob = optimal_bridge(lq1, lq2, s1, s2, 3.0);
        if (std::abs(ob.log_r_hat - M_LN2) > 1e-12) ok = false;
        const BridgeResult gb = geometric_bridge(lq1, lq2, s1, s2);
        if (std::abs(gb.log_r_hat - M_LN2) > 1e-12) ok = false;
        check_one("bridge_constant_ratio", ok, failures);
    }

    std::cout << (failures == 0 ? "all checks passed" : "some checks FAILED") << "\n";
    return failures == 0 ? kExitOk : kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bridge-sampling ratio estimation with f-GAN-trained flow transports"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--config", g.config_path, "Path to a JSON run configuration");
    app.add_option("--seed", g.seed, "Override the config seed")->each([&](const std::string&) {
        g.seed_set = true;
    });
    app.add_option("--threads", g.threads,
                   "Worker pool cap for benchmark repetitions (default: FGB_THREADS or all cores; "
                   "1 is the bit-reproducibility baseline)");
    app.add_option("--out", g.out_dir, "Output directory (overrides config out_dir)");
    app.add_flag("--log10", g.log10_display, "Display log quantities in base 10 (files stay natural log)");

    auto* est = app.add_subcommand("estimate", "Run the full estimator once and write a result record");
    auto* ben = app.add_subcommand("bench", "Repeated-run benchmark protocol");
    auto* chk = app.add_subcommand("check", "Fast invariant suite (generators, flow, gradients)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (est->parsed()) return cmd_estimate(g);
        if (ben->parsed()) return cmd_bench(g);
        if (chk->parsed()) return cmd_check();
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    }
    return kExitUsage;
}
