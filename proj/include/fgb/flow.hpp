#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fgb/density.hpp"
#include "fgb/rng.hpp"

namespace fgb {

// One affine coupling layer. The identity block feeds a small tanh MLP whose
// two output heads give the shift and the raw log-scale; the log-scale is
// squashed through s_max * tanh(. / s_max) so per-layer scaling stays within
// [e^-s_max, e^s_max]. Masks alternate coordinate parity between consecutive
// layers, so paired coordinates condition on each other.
struct CouplingLayer {
    int in_dim = 0;           // identity block size (conditioner input)
    int out_dim = 0;          // transformed block size
    std::vector<int> id_idx;  // coordinates kept fixed (conditioner input)
    std::vector<int> tr_idx;  // coordinates shifted and scaled
    std::vector<int> hidden;
    std::size_t theta_offset = 0;
    std::size_t theta_count = 0;
};

struct FlowModel {
    int dim = 0;
    double s_max = 5.0;
    std::vector<CouplingLayer> layers;
    std::vector<double> theta;  // flattened parameter vector, contiguous

    int layer_count() const { return static_cast<int>(layers.size()); }
    std::span<const double> params() const { return theta; }
};

// Cached intermediates of one layer application, for backpropagation.
struct LayerTrace {
    std::vector<double> in;      // layer input point (dim)
    std::vector<double> out;     // layer output point (dim)
    std::vector<double> acts;    // hidden activations, concatenated
    std::vector<double> head;    // raw MLP outputs: shift then raw log-scale
    std::vector<double> logsig;  // squashed log-scales
};

struct FlowTrace {
    std::vector<LayerTrace> layers;  // in application order
    double logdet = 0.0;
};

// Zero-initialized output heads make the fresh flow the exact identity map.
FlowModel build_flow(int dim, int layer_count, const std::vector<int>& hidden_sizes, Rng& rng);

// y = T(x) and log|det J_forward|(x).
double flow_forward(const FlowModel& model, std::span<const double> theta,
                    std::span<const double> x, std::span<double> y);
double flow_forward(const FlowModel& model, std::span<const double> x, std::span<double> y);

// x = T^{-1}(y) and log|det J_inverse|(y).
double flow_inverse(const FlowModel& model, std::span<const double> theta,
                    std::span<const double> y, std::span<double> x);
double flow_inverse(const FlowModel& model, std::span<const double> y, std::span<double> x);

// Trace-recording variants plus parameter backpropagation. The backward
// passes accumulate d(seed_y . y + seed_logdet * logdet)/d(theta) into
// d_theta (and the inverse-path analogue).
double flow_forward_trace(const FlowModel& model, std::span<const double> theta,
                          std::span<const double> x, FlowTrace& trace);
void flow_forward_backward(const FlowModel& model, std::span<const double> theta,
                           const FlowTrace& trace, std::span<const double> seed_y,
                           double seed_logdet, std::span<double> d_theta);

double flow_inverse_trace(const FlowModel& model, std::span<const double> theta,
                          std::span<const double> y, FlowTrace& trace);
void flow_inverse_backward(const FlowModel& model, std::span<const double> theta,
                           const FlowTrace& trace, std::span<const double> seed_x,
                           double seed_logdet_inv, std::span<double> d_theta);

// log q1~^(phi)(y) = log q1~(T^{-1}(y)) + log|det J_inverse|(y); the
// normalizing constant equals the base one by change of variables.
double transformed_log_unnorm(const FlowModel& model, const TargetDensity& base,
                              std::span<const double> y);

// Snapshot the model and wrap the transformed unnormalized density as a
// TargetDensity (sampler = push base draws through the flow).
TargetDensity make_transformed_target(const FlowModel& model, const TargetDensity& base);

// Apply T to every row; returns per-row forward log-determinants.
std::vector<double> flow_forward_batch(const FlowModel& model, const SampleBatch& in,
                                       SampleBatch& out);

void save_flow(const FlowModel& model, const std::string& path);
FlowModel load_flow(const std::string& path);

}  // namespace fgb
