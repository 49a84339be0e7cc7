#include "fgb/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace fgb {

using nlohmann::json;

namespace {

[[noreturn]] void missing(const std::string& field) {
    throw std::invalid_argument("config: missing required field '" + field + "'");
}

json require(const json& j, const std::string& field) {
    if (!j.contains(field)) missing(field);
    return j.at(field);
}

TargetSpec parse_target(const json& j, const std::string& where) {
    TargetSpec t;
    t.kind = require(j, "kind").get<std::string>();
    if (t.kind == "gaussian") {
        t.mean = require(j, "mean").get<std::vector<double>>();
        t.cov_diag = require(j, "cov_diag").get<std::vector<double>>();
    } else if (t.kind == "ring_mixture") {
        t.dim = require(j, "dim").get<int>();
        const auto m1 = require(j, "mu1").get<std::vector<double>>();
        const auto m2 = require(j, "mu2").get<std::vector<double>>();
        if (m1.size() != 2 || m2.size() != 2)
            throw std::invalid_argument("config: " + where + ".mu1/mu2 must have 2 entries");
        t.mu1[0] = m1[0]; t.mu1[1] = m1[1];
        t.mu2[0] = m2[0]; t.mu2[1] = m2[1];
        t.s = require(j, "s").get<double>();
        t.sigma = require(j, "sigma").get<double>();
    } else if (t.kind == "t_mixture") {
        t.weights = require(j, "weights").get<std::vector<double>>();
        t.means = require(j, "means").get<std::vector<std::vector<double>>>();
        t.scale = require(j, "scale").get<std::vector<double>>();
        t.nu = require(j, "nu").get<double>();
    } else if (t.kind == "augmented") {
        t.base = std::make_shared<TargetSpec>(parse_target(require(j, "base"), where + ".base"));
        t.extra_dims = require(j, "extra_dims").get<int>();
    } else {
        throw std::invalid_argument("config: unknown target kind '" + t.kind + "' in " + where);
    }
    return t;
}

json emit_target(const TargetSpec& t) {
    json j;
    j["kind"] = t.kind;
    if (t.kind == "gaussian") {
        j["mean"] = t.mean;
        j["cov_diag"] = t.cov_diag;
    } else if (t.kind == "ring_mixture") {
        j["dim"] = t.dim;
        j["mu1"] = {t.mu1[0], t.mu1[1]};
        j["mu2"] = {t.mu2[0], t.mu2[1]};
        j["s"] = t.s;
        j["sigma"] = t.sigma;
    } else if (t.kind == "t_mixture") {
        j["weights"] = t.weights;
        j["means"] = t.means;
        j["scale"] = t.scale;
        j["nu"] = t.nu;
    } else if (t.kind == "augmented") {
        j["base"] = emit_target(*t.base);
        j["extra_dims"] = t.extra_dims;
    }
    return j;
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config: parse error: ") + e.what());
    }
    RunConfig c;
    c.q1 = parse_target(require(j, "q1"), "q1");
    c.q2 = parse_target(require(j, "q2"), "q2");
    c.n1 = require(j, "n1").get<int>();
    c.n2 = require(j, "n2").get<int>();
    if (c.n1 < 2 || c.n2 < 2) throw std::invalid_argument("config: n1/n2 must be >= 2");
    c.split_fraction = j.value("split_fraction", 0.5);
    if (j.contains("flow")) {
        const json f = j.at("flow");
        c.flow.layer_count = f.value("layers", 4);
        if (f.contains("hidden")) c.flow.hidden = f.at("hidden").get<std::vector<int>>();
    }
    if (j.contains("train")) {
        const json t = j.at("train");
        c.train.beta1 = t.value("beta1", 0.05);
        c.train.beta2 = t.value("beta2", 0.05);
        c.train.eta_phi = t.value("eta_phi", 1e-3);
        c.train.eta_r = t.value("eta_r", 1e-2);
        c.train.eps1 = t.value("eps1", 5e-3);
        c.train.eps2 = t.value("eps2", 5e-3);
        c.train.max_epochs = t.value("max_epochs", 200);
        c.train.restarts = t.value("restarts", 1);
        if (t.contains("minibatch") && !t.at("minibatch").is_null())
            c.train.minibatch = t.at("minibatch").get<int>();
    }
    c.method = j.value("method", std::string("fgb"));
    c.out_dir = j.value("out_dir", std::string("out"));
    c.seed = j.value("seed", std::uint64_t{1});
    c.train.seed = c.seed;
    if (j.contains("bench")) {
        const json b = j.at("bench");
        c.bench.mode = b.value("mode", std::string("repetitions"));
        if (b.contains("methods"))
            c.bench.methods = b.at("methods").get<std::vector<std::string>>();
        c.bench.reps = b.value("reps", 100);
        c.bench.n_prime = b.value("n_prime", 1000);
    }
    return c;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("config: cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_run_config(ss.str());
}

std::string emit_run_config(const RunConfig& c) {
    json j;
    j["q1"] = emit_target(c.q1);
    j["q2"] = emit_target(c.q2);
    j["n1"] = c.n1;
    j["n2"] = c.n2;
    j["split_fraction"] = c.split_fraction;
    j["flow"] = {{"layers", c.flow.layer_count}, {"hidden", c.flow.hidden}};
    json t;
    t["beta1"] = c.train.beta1;
    t["beta2"] = c.train.beta2;
    t["eta_phi"] = c.train.eta_phi;
    t["eta_r"] = c.train.eta_r;
    t["eps1"] = c.train.eps1;
    t["eps2"] = c.train.eps2;
    t["max_epochs"] = c.train.max_epochs;
    t["restarts"] = c.train.restarts;
    if (c.train.minibatch) t["minibatch"] = *c.train.minibatch;
    else t["minibatch"] = nullptr;
    j["train"] = t;
    j["method"] = c.method;
    j["out_dir"] = c.out_dir;
    j["seed"] = c.seed;
    j["bench"] = {{"mode", c.bench.mode},
                  {"methods", c.bench.methods},
                  {"reps", c.bench.reps},
                  {"n_prime", c.bench.n_prime}};
    return j.dump(2) + "\n";
}

TargetDensity build_target(const TargetSpec& spec) {
    if (spec.kind == "gaussian") return gaussian_target(spec.mean, spec.cov_diag);
    if (spec.kind == "ring_mixture") {
        RingMixtureParams p;
        p.dim = spec.dim;
        p.mu1[0] = spec.mu1[0]; p.mu1[1] = spec.mu1[1];
        p.mu2[0] = spec.mu2[0]; p.mu2[1] = spec.mu2[1];
        p.s = spec.s;
        p.sigma = spec.sigma;
        return ring_mixture_target(p);
    }
    if (spec.kind == "t_mixture")
        return t_mixture_target(spec.weights, spec.means, spec.scale, spec.nu);
    if (spec.kind == "augmented")
        return augment_with_standard_normal(build_target(*spec.base), spec.extra_dims);
    throw std::invalid_argument("config: unknown target kind '" + spec.kind + "'");
}

std::string config_hash(const RunConfig& config) {
    const std::string s = emit_run_config(config);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace fgb
