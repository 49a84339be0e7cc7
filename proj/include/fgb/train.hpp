#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fgb/bridge.hpp"
#include "fgb/density.hpp"
#include "fgb/flow.hpp"
#include "fgb/grad.hpp"

namespace fgb {

struct TrainConfig {
    double beta1 = 0.05;    // likelihood-term weights
    double beta2 = 0.05;
    double eta_phi = 1e-3;  // flow learning rate
    double eta_r = 1e-2;    // log r~ learning rate
    double eps1 = 5e-3;     // objective stability tolerance
    double eps2 = 5e-3;     // r~ stability tolerance (raw scale)
    int max_epochs = 200;
    std::optional<int> minibatch;  // off by default: full-batch epochs
    int restarts = 1;
    std::uint64_t seed = 1;
    bool gauss_seidel = false;  // re-evaluate gradients between the two updates
    double grad_clip = 100.0;   // cap on ||d_theta||_2
};

enum class StopReason { ObjectiveAndRStable, MaxEpochs };

struct TrainReport {
    std::vector<double> final_theta;
    double final_log_r_tilde = 0.0;
    std::vector<double> objective_trace;  // epochs_run + 1 entries
    std::vector<double> r_trace;          // log r~ per epoch, same length
    int epochs_run = 0;
    StopReason stopped_by = StopReason::MaxEpochs;
};

struct FlowSpec {
    int layer_count = 4;
    std::vector<int> hidden = {64, 64};
};

// The stabilized minimax objective
//   L = -log(1 - G^_pi(r~, phi))
//       - (beta1/n1) sum [log q2~(T(w1j)) - log q1~^phi(T(w1j))]
//       - (beta2/n2) sum log q1~^phi(w2j),
// with 1 - G^ carried as its own log throughout.
class HybridObjective : public Objective {
  public:
    HybridObjective(const FlowModel& model, const TargetDensity& base_q1,
                    const TargetDensity& q2, const SampleBatch& s1, const SampleBatch& s2,
                    double beta1, double beta2, double pi);

    std::size_t theta_size() const override { return model_->theta.size(); }
    GradientRecord eval(std::span<const double> theta, double log_r) const override;

    // Gradients of the untransformed G^ itself (value = G^); used by the
    // monotone-transform identity checks.
    GradientRecord eval_raw_g(std::span<const double> theta, double log_r) const;

    double pi() const { return pi_; }

  private:
    GradientRecord eval_impl(std::span<const double> theta, double log_r, bool raw_g) const;

    const FlowModel* model_;
    const TargetDensity* base_q1_;
    const TargetDensity* q2_;
    const SampleBatch* s1_;
    const SampleBatch* s2_;
    double beta1_, beta2_, pi_;
    std::vector<double> lq1_on_s1_;  // log q1~ at the q1 samples (constants)
    std::vector<double> lq2_on_s2_;  // log q2~ at the q2 samples (constants)
};

// Value-only convenience wrapper.
double hybrid_objective(std::span<const double> theta, double log_r_tilde,
                        const FlowModel& model, const TargetDensity& base_q1,
                        const TargetDensity& q2, const SampleBatch& s1, const SampleBatch& s2,
                        double beta1, double beta2, double pi);

// Alternating minimax training (descent in phi, ascent in log r~) with the
// dual stopping rule on the objective change and the raw-scale r~ change.
// The model is updated in place; the returned final_log_r_tilde seeds the
// bridge step and is not itself the estimate.
TrainReport train(const TrainConfig& config, const TargetDensity& base_q1,
                  const TargetDensity& q2, const SampleBatch& train1, const SampleBatch& train2,
                  FlowModel& model);

// Side outputs of fgb_estimate wanted by the CLI and the benchmark harness.
struct FgbArtifacts {
    FlowModel model;
    SampleBatch estimate1;              // held-out q1 samples
    SampleBatch estimate1_transformed;  // T(held-out q1 samples)
    SampleBatch estimate2;              // held-out q2 samples
};

// Full pipeline: split, train on the training halves, transform the held-out
// q1 samples, run the optimal bridge seeded with the trained r~, and attach
// the estimating-split RE^2.
std::pair<BridgeResult, TrainReport> fgb_estimate(const TrainConfig& config,
                                                  const FlowSpec& flow_spec,
                                                  const TargetDensity& base_q1,
                                                  const TargetDensity& q2,
                                                  const SampleBatch& all_samples_1,
                                                  const SampleBatch& all_samples_2,
                                                  double split_fraction = 0.5,
                                                  FgbArtifacts* artifacts_out = nullptr);

}  // namespace fgb
