#include "fgb/flow.hpp"

#include <cmath>
#include <cstdio>
#include <memory>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fgb {

namespace {

// Stage widths of a layer's conditioner MLP: in -> hidden... -> 2*out.
std::vector<int> stage_dims(const CouplingLayer& layer) {
    std::vector<int> dims;
    dims.push_back(layer.in_dim);
    for (int h : layer.hidden) dims.push_back(h);
    dims.push_back(2 * layer.out_dim);
    return dims;
}

std::size_t layer_param_count(const CouplingLayer& layer) {
    const auto dims = stage_dims(layer);
    std::size_t n = 0;
    for (std::size_t s = 0; s + 1 < dims.size(); ++s)
        n += static_cast<std::size_t>(dims[s + 1]) * static_cast<std::size_t>(dims[s]) +
             static_cast<std::size_t>(dims[s + 1]);
    return n;
}

// Gather the identity block (conditioner input) of a point.
void gather_identity(const CouplingLayer& layer, const std::vector<double>& point,
                     std::vector<double>& x_a) {
    x_a.resize(static_cast<std::size_t>(layer.in_dim));
    for (int i = 0; i < layer.in_dim; ++i)
        x_a[static_cast<std::size_t>(i)] = point[static_cast<std::size_t>(layer.id_idx[static_cast<std::size_t>(i)])];
}

// Runs the conditioner; acts receives hidden activations (concatenated),
// head the raw outputs. Returns nothing; caller splits head into mu / s_raw.
void mlp_forward(const CouplingLayer& layer, std::span<const double> theta,
                 std::span<const double> x_a, std::span<double> acts, std::span<double> head) {
    const auto dims = stage_dims(layer);
    std::size_t off = layer.theta_offset;
    std::size_t act_off = 0;
    const double* cur = x_a.data();
    int cur_n = dims[0];
    for (std::size_t s = 0; s + 1 < dims.size(); ++s) {
        const int rows = dims[s + 1];
        const bool last = (s + 2 == dims.size());
        double* out = last ? head.data() : acts.data() + act_off;
        const double* W = theta.data() + off;
        const double* b = W + static_cast<std::size_t>(rows) * static_cast<std::size_t>(cur_n);
        for (int i = 0; i < rows; ++i) {
            double z = b[i];
            const double* wrow = W + static_cast<std::size_t>(i) * static_cast<std::size_t>(cur_n);
            for (int j = 0; j < cur_n; ++j) z += wrow[j] * cur[j];
            out[i] = last ? z : std::tanh(z);
        }
        off += static_cast<std::size_t>(rows) * static_cast<std::size_t>(cur_n) +
               static_cast<std::size_t>(rows);
        if (!last) {
            cur = out;
            cur_n = rows;
            act_off += static_cast<std::size_t>(rows);
        }
    }
}

// Backprop through the conditioner. g_head is consumed; g_x_a receives the
// input gradient; parameter gradients accumulate into d_theta.
void mlp_backward(const CouplingLayer& layer, std::span<const double> theta,
                  std::span<const double> x_a, std::span<const double> acts,
                  std::span<double> g_head, std::span<double> g_x_a,
                  std::span<double> d_theta) {
    const auto dims = stage_dims(layer);
    const std::size_t n_stage = dims.size() - 1;

    // Per-stage parameter offsets and activation offsets.
    std::vector<std::size_t> off(n_stage), aoff(n_stage, 0);
    {
        std::size_t o = layer.theta_offset, a = 0;
        for (std::size_t s = 0; s < n_stage; ++s) {
            off[s] = o;
            o += static_cast<std::size_t>(dims[s + 1]) * static_cast<std::size_t>(dims[s]) +
                 static_cast<std::size_t>(dims[s + 1]);
            aoff[s] = a;
            if (s + 1 < n_stage) a += static_cast<std::size_t>(dims[s + 1]);
        }
    }

    std::vector<double> g_cur(g_head.begin(), g_head.end());
    for (std::size_t s = n_stage; s-- > 0;) {
        const int rows = dims[s + 1];
        const int cols = dims[s];
        const bool last = (s + 1 == n_stage);
        const double* input = (s == 0) ? x_a.data() : acts.data() + aoff[s - 1] + 0;
        // For hidden stages the stored activation is tanh(z); convert the
        // activation gradient into the pre-activation gradient in place.
        if (!last) {
            const double* a_here = acts.data() + aoff[s];
            for (int i = 0; i < rows; ++i) g_cur[static_cast<std::size_t>(i)] *= 1.0 - a_here[i] * a_here[i];
        }
        const double* W = theta.data() + off[s];
        double* gW = d_theta.data() + off[s];
        double* gb = gW + static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
        std::vector<double> g_prev(static_cast<std::size_t>(cols), 0.0);
        for (int i = 0; i < rows; ++i) {
            const double gz = g_cur[static_cast<std::size_t>(i)];
            const double* wrow = W + static_cast<std::size_t>(i) * static_cast<std::size_t>(cols);
            double* gwrow = gW + static_cast<std::size_t>(i) * static_cast<std::size_t>(cols);
            for (int j = 0; j < cols; ++j) {
                gwrow[j] += gz * input[j];
                g_prev[static_cast<std::size_t>(j)] += gz * wrow[j];
            }
            gb[i] += gz;
        }
        if (s == 0) {
            for (int j = 0; j < cols; ++j) g_x_a[j] = g_prev[static_cast<std::size_t>(j)];
        } else {
            g_cur = std::move(g_prev);
        }
    }
}

std::size_t total_acts(const CouplingLayer& layer) {
    std::size_t n = 0;
    for (int h : layer.hidden) n += static_cast<std::size_t>(h);
    return n;
}

void resize_trace(const FlowModel& model, FlowTrace& trace) {
    trace.layers.resize(model.layers.size());
    for (std::size_t k = 0; k < model.layers.size(); ++k) {
        const auto& L = model.layers[k];
        auto& t = trace.layers[k];
        t.in.resize(static_cast<std::size_t>(model.dim));
        t.out.resize(static_cast<std::size_t>(model.dim));
        t.acts.resize(total_acts(L));
        t.head.resize(2 * static_cast<std::size_t>(L.out_dim));
        t.logsig.resize(static_cast<std::size_t>(L.out_dim));
    }
}

// Applies one coupling layer given a filled trace slot (in, acts, head must
// be valid); fills logsig and out and returns the layer log-det.
double apply_layer_from_trace(const FlowModel& model, const CouplingLayer& L, LayerTrace& t) {
    const int d = model.dim;
    double ld = 0.0;
    for (int i = 0; i < d; ++i) t.out[static_cast<std::size_t>(i)] = t.in[static_cast<std::size_t>(i)];
    for (int i = 0; i < L.out_dim; ++i) {
        const int c = L.tr_idx[static_cast<std::size_t>(i)];
        const double mu = t.head[static_cast<std::size_t>(i)];
        const double raw = t.head[static_cast<std::size_t>(L.out_dim + i)];
        const double ls = model.s_max * std::tanh(raw / model.s_max);
        t.logsig[static_cast<std::size_t>(i)] = ls;
        t.out[static_cast<std::size_t>(c)] =
            mu + std::exp(ls) * t.in[static_cast<std::size_t>(c)];
        ld += ls;
    }
    return ld;
}

}  // namespace

FlowModel build_flow(int dim, int layer_count, const std::vector<int>& hidden_sizes, Rng& rng) {
    if (dim < 2)
        throw std::invalid_argument(
            "build_flow: dim must be >= 2 (augment_with_standard_normal first)");
    if (layer_count < 1) throw std::invalid_argument("build_flow: layer_count must be >= 1");
    if (hidden_sizes.empty()) throw std::invalid_argument("build_flow: need at least one hidden layer");
    for (int h : hidden_sizes)
        if (h < 1) throw std::invalid_argument("build_flow: hidden sizes must be positive");

    FlowModel m;
    m.dim = dim;
    std::size_t off = 0;
    for (int k = 0; k < layer_count; ++k) {
        CouplingLayer L;
        // Checkerboard masks: even layers keep even coordinates, odd layers
        // keep odd ones, so each coordinate conditions on its neighbours.
        const int keep_parity = k % 2;
        for (int c = 0; c < dim; ++c)
            (c % 2 == keep_parity ? L.id_idx : L.tr_idx).push_back(c);
        L.in_dim = static_cast<int>(L.id_idx.size());
        L.out_dim = static_cast<int>(L.tr_idx.size());
        L.hidden = hidden_sizes;
        L.theta_offset = off;
        L.theta_count = layer_param_count(L);
        off += L.theta_count;
        m.layers.push_back(std::move(L));
    }
    m.theta.assign(off, 0.0);

    // Small random hidden weights, zero output head: T is exactly identity.
    for (const auto& L : m.layers) {
        const auto dims = stage_dims(L);
        std::size_t o = L.theta_offset;
        for (std::size_t s = 0; s + 1 < dims.size(); ++s) {
            const std::size_t n_w =
                static_cast<std::size_t>(dims[s + 1]) * static_cast<std::size_t>(dims[s]);
            const bool last = (s + 2 == dims.size());
            if (!last) {
                const double a = 1.0 / std::sqrt(static_cast<double>(dims[s]));
                for (std::size_t i = 0; i < n_w; ++i)
                    m.theta[o + i] = draw_uniform(rng, -a, a);
            }
            o += n_w + static_cast<std::size_t>(dims[s + 1]);
        }
    }
    return m;
}

double flow_forward_trace(const FlowModel& model, std::span<const double> theta,
                          std::span<const double> x, FlowTrace& trace) {
    if (static_cast<int>(x.size()) != model.dim)
        throw std::invalid_argument("flow_forward: point has wrong dimension");
    resize_trace(model, trace);
    trace.logdet = 0.0;
    std::span<const double> cur = x;
    std::vector<double> x_a;
    for (std::size_t k = 0; k < model.layers.size(); ++k) {
        const auto& L = model.layers[k];
        auto& t = trace.layers[k];
        for (int i = 0; i < model.dim; ++i) t.in[static_cast<std::size_t>(i)] = cur[static_cast<std::size_t>(i)];
        gather_identity(L, t.in, x_a);
        mlp_forward(L, theta, x_a, t.acts, t.head);
        trace.logdet += apply_layer_from_trace(model, L, t);
        if (!std::isfinite(trace.logdet))
            throw std::runtime_error("flow_forward: non-finite value at layer " + std::to_string(k));
        cur = t.out;
    }
    return trace.logdet;
}

double flow_forward(const FlowModel& model, std::span<const double> theta,
                    std::span<const double> x, std::span<double> y) {
    FlowTrace trace;
    const double ld = flow_forward_trace(model, theta, x, trace);
    const auto& out = trace.layers.back().out;
    for (int i = 0; i < model.dim; ++i) y[static_cast<std::size_t>(i)] = out[static_cast<std::size_t>(i)];
    return ld;
}

double flow_forward(const FlowModel& model, std::span<const double> x, std::span<double> y) {
    return flow_forward(model, model.theta, x, y);
}

void flow_forward_backward(const FlowModel& model, std::span<const double> theta,
                           const FlowTrace& trace, std::span<const double> seed_y,
                           double seed_logdet, std::span<double> d_theta) {
    std::vector<double> g(seed_y.begin(), seed_y.end());
    std::vector<double> g_head, g_xa, x_a;
    for (std::size_t k = model.layers.size(); k-- > 0;) {
        const auto& L = model.layers[k];
        const auto& t = trace.layers[k];
        g_head.assign(2 * static_cast<std::size_t>(L.out_dim), 0.0);
        g_xa.assign(static_cast<std::size_t>(L.in_dim), 0.0);
        for (int i = 0; i < L.out_dim; ++i) {
            const int c = L.tr_idx[static_cast<std::size_t>(i)];
            const double gy = g[static_cast<std::size_t>(c)];
            const double sig = std::exp(t.logsig[static_cast<std::size_t>(i)]);
            const double xb = t.in[static_cast<std::size_t>(c)];
            const double raw = t.head[static_cast<std::size_t>(L.out_dim + i)];
            const double th = std::tanh(raw / model.s_max);
            g_head[static_cast<std::size_t>(i)] = gy;  // d/d mu
            g_head[static_cast<std::size_t>(L.out_dim + i)] =
                (gy * sig * xb + seed_logdet) * (1.0 - th * th);
            g[static_cast<std::size_t>(c)] = gy * sig;
        }
        gather_identity(L, t.in, x_a);
        mlp_backward(L, theta, x_a, t.acts, g_head, g_xa, d_theta);
        for (int i = 0; i < L.in_dim; ++i)
            g[static_cast<std::size_t>(L.id_idx[static_cast<std::size_t>(i)])] +=
                g_xa[static_cast<std::size_t>(i)];
    }
}

double flow_inverse_trace(const FlowModel& model, std::span<const double> theta,
                          std::span<const double> y, FlowTrace& trace) {
    if (static_cast<int>(y.size()) != model.dim)
        throw std::invalid_argument("flow_inverse: point has wrong dimension");
    resize_trace(model, trace);
    trace.logdet = 0.0;
    const int d = model.dim;
    std::span<const double> cur = y;
    std::vector<double> x_a;
    // Trace slot k holds the application of model layer K-1-k.
    for (std::size_t k = 0; k < model.layers.size(); ++k) {
        const auto& L = model.layers[model.layers.size() - 1 - k];
        auto& t = trace.layers[k];
        for (int i = 0; i < d; ++i) t.in[static_cast<std::size_t>(i)] = cur[static_cast<std::size_t>(i)];
        gather_identity(L, t.in, x_a);
        mlp_forward(L, theta, x_a, t.acts, t.head);
        for (int i = 0; i < d; ++i) t.out[static_cast<std::size_t>(i)] = t.in[static_cast<std::size_t>(i)];
        for (int i = 0; i < L.out_dim; ++i) {
            const int c = L.tr_idx[static_cast<std::size_t>(i)];
            const double mu = t.head[static_cast<std::size_t>(i)];
            const double raw = t.head[static_cast<std::size_t>(L.out_dim + i)];
            const double ls = model.s_max * std::tanh(raw / model.s_max);
            t.logsig[static_cast<std::size_t>(i)] = ls;
            t.out[static_cast<std::size_t>(c)] =
                (t.in[static_cast<std::size_t>(c)] - mu) * std::exp(-ls);
            trace.logdet -= ls;
        }
        if (!std::isfinite(trace.logdet))
            throw std::runtime_error("flow_inverse: non-finite value at layer " +
                                     std::to_string(model.layers.size() - 1 - k));
        cur = t.out;
    }
    return trace.logdet;
}

double flow_inverse(const FlowModel& model, std::span<const double> theta,
                    std::span<const double> y, std::span<double> x) {
    FlowTrace trace;
    const double ld = flow_inverse_trace(model, theta, y, trace);
    const auto& out = trace.layers.back().out;
    for (int i = 0; i < model.dim; ++i) x[static_cast<std::size_t>(i)] = out[static_cast<std::size_t>(i)];
    return ld;
}

double flow_inverse(const FlowModel& model, std::span<const double> y, std::span<double> x) {
    return flow_inverse(model, model.theta, y, x);
}

void flow_inverse_backward(const FlowModel& model, std::span<const double> theta,
                           const FlowTrace& trace, std::span<const double> seed_x,
                           double seed_logdet_inv, std::span<double> d_theta) {
    std::vector<double> g(seed_x.begin(), seed_x.end());
    std::vector<double> g_head, g_xa, x_a;
    for (std::size_t k = model.layers.size(); k-- > 0;) {
        const auto& L = model.layers[model.layers.size() - 1 - k];
        const auto& t = trace.layers[k];
        g_head.assign(2 * static_cast<std::size_t>(L.out_dim), 0.0);
        g_xa.assign(static_cast<std::size_t>(L.in_dim), 0.0);
        for (int i = 0; i < L.out_dim; ++i) {
            const int c = L.tr_idx[static_cast<std::size_t>(i)];
            const double gxb = g[static_cast<std::size_t>(c)];
            const double ls = t.logsig[static_cast<std::size_t>(i)];
            const double xb = t.out[static_cast<std::size_t>(c)];
            const double raw = t.head[static_cast<std::size_t>(L.out_dim + i)];
            const double th = std::tanh(raw / model.s_max);
            g_head[static_cast<std::size_t>(i)] = -gxb * std::exp(-ls);  // d/d mu
            g_head[static_cast<std::size_t>(L.out_dim + i)] =
                (-gxb * xb - seed_logdet_inv) * (1.0 - th * th);
            g[static_cast<std::size_t>(c)] = gxb * std::exp(-ls);
        }
        gather_identity(L, t.in, x_a);
        mlp_backward(L, theta, x_a, t.acts, g_head, g_xa, d_theta);
        for (int i = 0; i < L.in_dim; ++i)
            g[static_cast<std::size_t>(L.id_idx[static_cast<std::size_t>(i)])] +=
                g_xa[static_cast<std::size_t>(i)];
    }
}

double transformed_log_unnorm(const FlowModel& model, const TargetDensity& base,
                              std::span<const double> y) {
    if (base.dim != model.dim)
        throw std::invalid_argument("transformed_log_unnorm: base dimension mismatch");
    std::vector<double> x(static_cast<std::size_t>(model.dim));
    const double ldi = flow_inverse(model, y, x);
    return base.log_unnorm(x) + ldi;
}

TargetDensity make_transformed_target(const FlowModel& model, const TargetDensity& base) {
    if (base.dim != model.dim)
        throw std::invalid_argument("make_transformed_target: base dimension mismatch");
    auto snapshot = std::make_shared<FlowModel>(model);
    auto base_copy = std::make_shared<TargetDensity>(base);
    TargetDensity t;
    t.dim = model.dim;
    t.name = base.name + "@flow";
    t.exact_log_z = base.exact_log_z;  // change of variables keeps Z
    t.log_unnorm = [snapshot, base_copy](std::span<const double> y) {
        return transformed_log_unnorm(*snapshot, *base_copy, y);
    };
    if (base.has_sampler()) {
        t.sampler = [snapshot, base_copy](Rng& rng, int n) {
            SampleBatch raw = base_copy->sampler(rng, n);
            SampleBatch out(snapshot->dim, n, base_copy->name + "@flow");
            for (int i = 0; i < n; ++i) flow_forward(*snapshot, raw.row(i), out.row(i));
            return out;
        };
    }
    return t;
}

std::vector<double> flow_forward_batch(const FlowModel& model, const SampleBatch& in,
                                       SampleBatch& out) {
    out = SampleBatch(model.dim, in.size(), in.source_id + "@flow");
    std::vector<double> logdets(static_cast<std::size_t>(in.size()));
    for (int i = 0; i < in.size(); ++i)
        logdets[static_cast<std::size_t>(i)] = flow_forward(model, in.row(i), out.row(i));
    return logdets;
}

void save_flow(const FlowModel& model, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_flow: cannot open " + path);
    f << "fgb-flow 1\n";
    f << "dim " << model.dim << "\n";
    f << "layers " << model.layer_count() << "\n";
    f << "hidden";
    for (int h : model.layers.front().hidden) f << " " << h;
    f << "\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "smax %a\n", model.s_max);
    f << buf;
    f << "theta " << model.theta.size() << "\n";
    for (double v : model.theta) {
        std::snprintf(buf, sizeof buf, "%a\n", v);
        f << buf;
    }
    if (!f) throw std::runtime_error("save_flow: write failed for " + path);
}

FlowModel load_flow(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_flow: cannot open " + path);
    std::string magic;
    int version = 0;
    f >> magic >> version;
    if (magic != "fgb-flow" || version != 1)
        throw std::runtime_error("load_flow: bad header in " + path);
    std::string key;
    int dim = 0, layer_count = 0;
    f >> key >> dim;
    if (key != "dim" || dim < 2) throw std::runtime_error("load_flow: bad dim field");
    f >> key >> layer_count;
    if (key != "layers" || layer_count < 1) throw std::runtime_error("load_flow: bad layers field");
    f >> key;
    if (key != "hidden") throw std::runtime_error("load_flow: bad hidden field");
    std::string rest;
    std::getline(f, rest);
    std::vector<int> hidden;
    {
        std::istringstream hs(rest);
        int h;
        while (hs >> h) hidden.push_back(h);
    }
    if (hidden.empty()) throw std::runtime_error("load_flow: bad hidden field");
    double s_max = 0.0;
    std::string smax_tok;
    f >> key >> smax_tok;
    if (key == "smax" && !smax_tok.empty()) s_max = std::strtod(smax_tok.c_str(), nullptr);
    if (key != "smax" || !(s_max > 0.0)) throw std::runtime_error("load_flow: bad smax field");
    std::size_t count = 0;
    f >> key >> count;
    if (key != "theta") throw std::runtime_error("load_flow: bad theta field");

    Rng dummy(0);
    FlowModel m = build_flow(dim, layer_count, hidden, dummy);
    m.s_max = s_max;
    if (m.theta.size() != count)
        throw std::runtime_error("load_flow: theta count does not match architecture");
    for (std::size_t i = 0; i < count; ++i) {
        std::string tok;
        if (!(f >> tok)) throw std::runtime_error("load_flow: truncated theta block");
        m.theta[i] = std::strtod(tok.c_str(), nullptr);
    }
    return m;
}

}  // namespace fgb
