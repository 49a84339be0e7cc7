#include "fgb/train.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "fgb/math_utils.hpp"
#include "fgb/rng.hpp"

namespace fgb {

HybridObjective::HybridObjective(const FlowModel& model, const TargetDensity& base_q1,
                                 const TargetDensity& q2, const SampleBatch& s1,
                                 const SampleBatch& s2, double beta1, double beta2, double pi)
    : model_(&model), base_q1_(&base_q1), q2_(&q2), s1_(&s1), s2_(&s2), beta1_(beta1),
      beta2_(beta2), pi_(pi) {
    if (!(pi > 0.0 && pi < 1.0))
        throw std::invalid_argument("HybridObjective: pi must lie in (0,1)");
    if (s1.size() < 1 || s2.size() < 1)
        throw std::invalid_argument("HybridObjective: empty sample batch");
    if (model.dim != base_q1.dim || model.dim != q2.dim)
        throw std::invalid_argument("HybridObjective: dimension mismatch");
    lq1_on_s1_.resize(static_cast<std::size_t>(s1.size()));
    for (int j = 0; j < s1.size(); ++j)
        lq1_on_s1_[static_cast<std::size_t>(j)] = base_q1.log_unnorm(s1.row(j));
    lq2_on_s2_.resize(static_cast<std::size_t>(s2.size()));
    for (int j = 0; j < s2.size(); ++j)
        lq2_on_s2_[static_cast<std::size_t>(j)] = q2.log_unnorm(s2.row(j));
}

GradientRecord HybridObjective::eval(std::span<const double> theta, double log_r) const {
    return eval_impl(theta, log_r, false);
}

GradientRecord HybridObjective::eval_raw_g(std::span<const double> theta, double log_r) const {
    return eval_impl(theta, log_r, true);
}

GradientRecord HybridObjective::eval_impl(std::span<const double> theta, double log_r,
                                          bool raw_g) const {
    const int d = model_->dim;
    const int n1 = s1_->size(), n2 = s2_->size();
    const double c = std::log(pi_) - std::log1p(-pi_);
    const double l_pn1 = std::log(pi_) + std::log(static_cast<double>(n1));
    const double l_qn2 = std::log1p(-pi_) + std::log(static_cast<double>(n2));

    // Pass 1: evaluate everything, caching traces for the backward sweep.
    std::vector<FlowTrace> traces1(static_cast<std::size_t>(n1));
    std::vector<FlowTrace> traces2(static_cast<std::size_t>(n2));
    std::vector<double> l1(static_cast<std::size_t>(n1));   // log q1~^phi(T(w1j))
    std::vector<double> l2(static_cast<std::size_t>(n1));   // log q2~(T(w1j))
    std::vector<double> lphi(static_cast<std::size_t>(n2)); // log q1~^phi(w2j)
    std::vector<double> z1(static_cast<std::size_t>(n1)), z2(static_cast<std::size_t>(n2));
    std::vector<double> terms(static_cast<std::size_t>(n1 + n2));

    for (int j = 0; j < n1; ++j) {
        auto& tr = traces1[static_cast<std::size_t>(j)];
        const double ld = flow_forward_trace(*model_, theta, s1_->row(j), tr);
        const auto& y = tr.layers.back().out;
        l1[static_cast<std::size_t>(j)] = lq1_on_s1_[static_cast<std::size_t>(j)] - ld;
        l2[static_cast<std::size_t>(j)] = q2_->log_unnorm(y);
        if (!std::isfinite(l2[static_cast<std::size_t>(j)]) &&
            l2[static_cast<std::size_t>(j)] != kNegInf)
            throw std::runtime_error("hybrid objective: non-finite q2 density at q1 sample " +
                                     std::to_string(j));
        const double z = c + l2[static_cast<std::size_t>(j)] - l1[static_cast<std::size_t>(j)] + log_r;
        z1[static_cast<std::size_t>(j)] = z;
        terms[static_cast<std::size_t>(j)] = 2.0 * log_sigmoid(z) - l_pn1;
    }
    for (int j = 0; j < n2; ++j) {
        auto& tr = traces2[static_cast<std::size_t>(j)];
        const double ldi = flow_inverse_trace(*model_, theta, s2_->row(j), tr);
        const auto& x = tr.layers.back().out;
        lphi[static_cast<std::size_t>(j)] = base_q1_->log_unnorm(x) + ldi;
        const double z = -c + lphi[static_cast<std::size_t>(j)] -
                         lq2_on_s2_[static_cast<std::size_t>(j)] - log_r;
        z2[static_cast<std::size_t>(j)] = z;
        terms[static_cast<std::size_t>(n1 + j)] = 2.0 * log_sigmoid(z) - l_qn2;
    }

    const double log1m_g = log_sum_exp(terms);  // log(1 - G^), exact

    GradientRecord rec;
    rec.d_theta.assign(theta.size(), 0.0);

    double like1 = 0.0, like2 = 0.0;
    for (int j = 0; j < n1; ++j)
        like1 += l2[static_cast<std::size_t>(j)] - l1[static_cast<std::size_t>(j)];
    for (int j = 0; j < n2; ++j) like2 += lphi[static_cast<std::size_t>(j)];

    // raw_g: value = G^ = 1 - exp(log1m_g); gradients of G^ alone.
    // otherwise: value = -log1m_g - (beta1/n1) like1 - (beta2/n2) like2.
    const double b1n = raw_g ? 0.0 : beta1_ / static_cast<double>(n1);
    const double b2n = raw_g ? 0.0 : beta2_ / static_cast<double>(n2);
    rec.value = raw_g ? -std::expm1(log1m_g)
                      : -log1m_g - b1n * like1 - b2n * like2;

    // dL/dt_j = -w_j for the f-GAN part; dG^/dt_j = -(1-G^) w_j = -exp(t_j).
    std::vector<double> seed_y(static_cast<std::size_t>(d));
    std::vector<double> grad_buf(static_cast<std::size_t>(d));
    double d_log_r = 0.0;
    for (int j = 0; j < n1; ++j) {
        const double w = raw_g ? std::exp(terms[static_cast<std::size_t>(j)])
                               : std::exp(terms[static_cast<std::size_t>(j)] - log1m_g);
        const double sbar = 1.0 - sigmoid(z1[static_cast<std::size_t>(j)]);
        const double g_l2 = -2.0 * w * sbar - b1n;   // dL/d l2_j
        const double g_l1 = 2.0 * w * sbar + b1n;    // dL/d l1_j
        d_log_r += -2.0 * w * sbar;
        const auto& tr = traces1[static_cast<std::size_t>(j)];
        q2_->grad_log_unnorm(tr.layers.back().out, grad_buf);
        for (int i = 0; i < d; ++i) seed_y[static_cast<std::size_t>(i)] = g_l2 * grad_buf[static_cast<std::size_t>(i)];
        // l1 = const - logdet_forward
        flow_forward_backward(*model_, theta, tr, seed_y, -g_l1, rec.d_theta);
    }
    std::vector<double> seed_x(static_cast<std::size_t>(d));
    for (int j = 0; j < n2; ++j) {
        const double w = raw_g ? std::exp(terms[static_cast<std::size_t>(n1 + j)])
                               : std::exp(terms[static_cast<std::size_t>(n1 + j)] - log1m_g);
        const double sbar = 1.0 - sigmoid(z2[static_cast<std::size_t>(j)]);
        const double g_lphi = -2.0 * w * sbar - b2n;  // dL/d lphi_j
        d_log_r += 2.0 * w * sbar;
        const auto& tr = traces2[static_cast<std::size_t>(j)];
        base_q1_->grad_log_unnorm(tr.layers.back().out, grad_buf);
        for (int i = 0; i < d; ++i) seed_x[static_cast<std::size_t>(i)] = g_lphi * grad_buf[static_cast<std::size_t>(i)];
        flow_inverse_backward(*model_, theta, tr, seed_x, g_lphi, rec.d_theta);
    }
    rec.d_log_r = d_log_r;
    return rec;
}

double hybrid_objective(std::span<const double> theta, double log_r_tilde,
                        const FlowModel& model, const TargetDensity& base_q1,
                        const TargetDensity& q2, const SampleBatch& s1, const SampleBatch& s2,
                        double beta1, double beta2, double pi) {
    HybridObjective obj(model, base_q1, q2, s1, s2, beta1, beta2, pi);
    return obj.eval(theta, log_r_tilde).value;
}

namespace {

double raw_r_change(double log_r_new, double log_r_old) {
    // |r_new - r_old| without materializing huge exponentials blindly.
    const double base = std::exp(log_r_old);
    if (!std::isfinite(base)) return kInf;
    return std::abs(base * std::expm1(log_r_new - log_r_old));
}

void clip_norm(std::vector<double>& g, double cap) {
    double n2 = 0.0;
    for (double v : g) n2 += v * v;
    const double n = std::sqrt(n2);
    if (n > cap) {
        const double s = cap / n;
        for (double& v : g) v *= s;
    }
}

}  // namespace

TrainReport train(const TrainConfig& config, const TargetDensity& base_q1,
                  const TargetDensity& q2, const SampleBatch& train1, const SampleBatch& train2,
                  FlowModel& model) {
    if (model.dim != base_q1.dim || model.dim != q2.dim)
        throw std::invalid_argument("train: dimension mismatch between model and targets");
    if (!(config.eps1 > 0.0 && config.eps2 > 0.0))
        throw std::invalid_argument("train: tolerances must be positive");

    const int n1 = train1.size(), n2 = train2.size();
    const double pi = static_cast<double>(n2) / static_cast<double>(n1 + n2);
    HybridObjective obj(model, base_q1, q2, train1, train2, config.beta1, config.beta2, pi);

    // r~_0 from the optimal bridge on the raw training data (geometric start).
    // Under poor overlap the geometric estimate alone can be wild; the fixed
    // point of the iterative procedure stays usable even then.
    auto lq1 = [&](std::span<const double> x) { return base_q1.log_unnorm(x); };
    auto lq2 = [&](std::span<const double> x) { return q2.log_unnorm(x); };
    const double geo = geometric_bridge(lq1, lq2, train1, train2).log_r_hat;
    double log_r = optimal_bridge(lq1, lq2, train1, train2, geo).log_r_hat;

    OptimizerState phi_state = OptimizerState::fresh(model.theta.size(), config.eta_phi);
    OptimizerState r_state = OptimizerState::fresh(1, config.eta_r);

    Rng shuffle_rng = make_substream(config.seed, 0x5ba7c4);

    TrainReport rep;
    GradientRecord rec = obj.eval(model.theta, log_r);
    rep.objective_trace.push_back(rec.value);
    rep.r_trace.push_back(log_r);

    int bad_streak = std::isfinite(rec.value) ? 0 : 1;
    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        if (!config.minibatch) {
            // One full-batch gradient pair at (phi_t, r~_t), then update both.
            clip_norm(rec.d_theta, config.grad_clip);
            auto [new_theta, new_phi_state] = adam_step(phi_state, rec.d_theta, model.theta);
            double d_log_r = rec.d_log_r;
            if (config.gauss_seidel) {
                model.theta = std::move(new_theta);
                phi_state = std::move(new_phi_state);
                d_log_r = obj.eval(model.theta, log_r).d_log_r;
            }
            const double neg[1] = {-d_log_r};  // ascent in log r~
            const double cur[1] = {log_r};
            auto [new_r, new_r_state] = adam_step(r_state, neg, cur);
            if (!config.gauss_seidel) {
                model.theta = std::move(new_theta);
                phi_state = std::move(new_phi_state);
            }
            log_r = new_r[0];
            r_state = std::move(new_r_state);
        } else {
            const int mb = *config.minibatch;
            if (mb < 1) throw std::invalid_argument("train: minibatch must be positive");
            std::vector<int> idx1(static_cast<std::size_t>(n1)), idx2(static_cast<std::size_t>(n2));
            for (int i = 0; i < n1; ++i) idx1[static_cast<std::size_t>(i)] = i;
            for (int i = 0; i < n2; ++i) idx2[static_cast<std::size_t>(i)] = i;
            std::shuffle(idx1.begin(), idx1.end(), shuffle_rng);
            std::shuffle(idx2.begin(), idx2.end(), shuffle_rng);
            const int chunks = (std::max(n1, n2) + mb - 1) / mb;
            for (int ci = 0; ci < chunks; ++ci) {
                SampleBatch c1(train1.dim, 0), c2(train2.dim, 0);
                // The smaller side recycles rows modulo its size so both
                // chunks stay the same length and pi stays meaningful.
                auto take = [&](const SampleBatch& src, const std::vector<int>& idx,
                                SampleBatch& dst) {
                    const int n = static_cast<int>(idx.size());
                    dst = SampleBatch(src.dim, mb, src.source_id);
                    for (int i = 0; i < mb; ++i) {
                        auto s = src.row(idx[static_cast<std::size_t>((ci * mb + i) % n)]);
                        auto d = dst.row(i);
                        for (int j = 0; j < src.dim; ++j) d[j] = s[j];
                    }
                };
                take(train1, idx1, c1);
                take(train2, idx2, c2);
                HybridObjective chunk_obj(model, base_q1, q2, c1, c2, config.beta1, config.beta2,
                                          pi);
                GradientRecord crec = chunk_obj.eval(model.theta, log_r);
                clip_norm(crec.d_theta, config.grad_clip);
                auto [new_theta, new_phi_state] = adam_step(phi_state, crec.d_theta, model.theta);
                const double neg[1] = {-crec.d_log_r};
                const double cur[1] = {log_r};
                auto [new_r, new_r_state] = adam_step(r_state, neg, cur);
                model.theta = std::move(new_theta);
                phi_state = std::move(new_phi_state);
                log_r = new_r[0];
                r_state = std::move(new_r_state);
            }
        }

        rec = obj.eval(model.theta, log_r);
        rep.objective_trace.push_back(rec.value);
        rep.r_trace.push_back(log_r);

        if (!std::isfinite(rec.value)) {
            if (++bad_streak >= 3)
                throw std::runtime_error(
                    "train: objective non-finite for 3 consecutive epochs (last finite epoch " +
                    std::to_string(static_cast<int>(rep.objective_trace.size()) - 1 - bad_streak) +
                    ")");
        } else {
            bad_streak = 0;
        }

        const std::size_t t = rep.objective_trace.size() - 1;
        const double d_obj =
            std::abs(rep.objective_trace[t] - rep.objective_trace[t - 1]);
        const double d_r = raw_r_change(rep.r_trace[t], rep.r_trace[t - 1]);
        if (std::isfinite(rec.value) && d_obj <= config.eps1 && d_r <= config.eps2) {
            rep.stopped_by = StopReason::ObjectiveAndRStable;
            break;
        }
    }

    rep.epochs_run = static_cast<int>(rep.objective_trace.size()) - 1;
    rep.final_theta = model.theta;
    rep.final_log_r_tilde = log_r;
    return rep;
}

std::pair<BridgeResult, TrainReport> fgb_estimate(const TrainConfig& config,
                                                  const FlowSpec& flow_spec,
                                                  const TargetDensity& base_q1,
                                                  const TargetDensity& q2,
                                                  const SampleBatch& all_samples_1,
                                                  const SampleBatch& all_samples_2,
                                                  double split_fraction,
                                                  FgbArtifacts* artifacts_out) {
    if (base_q1.dim != q2.dim)
        throw std::invalid_argument("fgb_estimate: targets must share a dimension "
                                    "(augment_with_standard_normal first)");
    if (base_q1.dim < 2)
        throw std::invalid_argument("fgb_estimate: dim must be >= 2 "
                                    "(augment_with_standard_normal first)");

    Rng split_rng = make_substream(config.seed, 0x59117);
    auto [train1, est1] = split_samples(all_samples_1, split_fraction, split_rng);
    auto [train2, est2] = split_samples(all_samples_2, split_fraction, split_rng);

    // Train; extra restarts keep the lowest final objective value.
    FlowModel best_model;
    TrainReport best_rep;
    double best_final = kInf;
    const int restarts = std::max(1, config.restarts);
    for (int k = 0; k < restarts; ++k) {
        Rng init_rng = make_substream(config.seed, 0xf10c + static_cast<std::uint64_t>(k));
        FlowModel model = build_flow(base_q1.dim, flow_spec.layer_count, flow_spec.hidden,
                                     init_rng);
        TrainConfig cfg = config;
        cfg.seed = substream_seed(config.seed, 0x7a11 + static_cast<std::uint64_t>(k));
        TrainReport rep = train(cfg, base_q1, q2, train1, train2, model);
        const double fin = rep.objective_trace.back();
        if (k == 0 || fin < best_final) {
            best_final = fin;
            best_model = std::move(model);
            best_rep = std::move(rep);
        }
    }

    // Bridge step on the held-out halves: push the q1 estimating samples
    // through T and face them against q2 with the transformed density.
    SampleBatch est1_t;
    const std::vector<double> fwd_logdet = flow_forward_batch(best_model, est1, est1_t);

    std::vector<double> lt1_on_s1(static_cast<std::size_t>(est1.size()));
    std::vector<double> lq2_on_s1(static_cast<std::size_t>(est1.size()));
    for (int j = 0; j < est1.size(); ++j) {
        // Exact by construction: log q1~^phi(T(x)) = log q1~(x) - logdet_fwd(x).
        lt1_on_s1[static_cast<std::size_t>(j)] =
            base_q1.log_unnorm(est1.row(j)) - fwd_logdet[static_cast<std::size_t>(j)];
        lq2_on_s1[static_cast<std::size_t>(j)] = q2.log_unnorm(est1_t.row(j));
    }
    std::vector<double> lt1_on_s2(static_cast<std::size_t>(est2.size()));
    std::vector<double> lq2_on_s2(static_cast<std::size_t>(est2.size()));
    for (int j = 0; j < est2.size(); ++j) {
        lt1_on_s2[static_cast<std::size_t>(j)] = transformed_log_unnorm(best_model, base_q1,
                                                                        est2.row(j));
        lq2_on_s2[static_cast<std::size_t>(j)] = q2.log_unnorm(est2.row(j));
    }

    BridgeResult res = optimal_bridge_from_values(lt1_on_s1, lq2_on_s1, lt1_on_s2, lq2_on_s2,
                                                  best_rep.final_log_r_tilde);

    // RE^2 from the estimating split only, with the training-split pi reused
    // for G^ and the estimating shares in the prefactor.
    const double pi_train = static_cast<double>(train2.size()) /
                            static_cast<double>(train1.size() + train2.size());
    std::vector<double> diff1(static_cast<std::size_t>(est1.size()));
    std::vector<double> diff2(static_cast<std::size_t>(est2.size()));
    for (int j = 0; j < est1.size(); ++j)
        diff1[static_cast<std::size_t>(j)] =
            lt1_on_s1[static_cast<std::size_t>(j)] - lq2_on_s1[static_cast<std::size_t>(j)];
    for (int j = 0; j < est2.size(); ++j)
        diff2[static_cast<std::size_t>(j)] =
            lt1_on_s2[static_cast<std::size_t>(j)] - lq2_on_s2[static_cast<std::size_t>(j)];
    const DivergenceEstimate div = estimate_harmonic_divergence_from_diffs(pi_train, diff1, diff2);
    const double n_prime = static_cast<double>(est1.size() + est2.size());
    const double s1p = static_cast<double>(est1.size()) / n_prime;
    const double s2p = static_cast<double>(est2.size()) / n_prime;
    res.saturated = re2_saturated(div);
    res.re2_estimate = res.saturated
                           ? kInf
                           : std::expm1(-div.log_one_minus_value) / (s1p * s2p * n_prime);

    if (artifacts_out) {
        artifacts_out->model = std::move(best_model);
        artifacts_out->estimate1 = std::move(est1);
        artifacts_out->estimate1_transformed = std::move(est1_t);
        artifacts_out->estimate2 = std::move(est2);
    }
    return {std::move(res), std::move(best_rep)};
}

}  // namespace fgb
