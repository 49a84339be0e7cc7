#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fgb/rng.hpp"

namespace fgb {

// A batch of points drawn from one density, stored row-major (n x dim).
struct SampleBatch {
    int dim = 0;
    std::vector<double> data;  // n * dim
    std::string source_id;

    SampleBatch() = default;
    SampleBatch(int dim_, int n_, std::string source = {})
        : dim(dim_), data(static_cast<std::size_t>(dim_) * static_cast<std::size_t>(n_), 0.0),
          source_id(std::move(source)) {}

    int size() const { return dim == 0 ? 0 : static_cast<int>(data.size()) / dim; }

    std::span<const double> row(int i) const {
        return {data.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(dim),
                static_cast<std::size_t>(dim)};
    }
    std::span<double> row(int i) {
        return {data.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(dim),
                static_cast<std::size_t>(dim)};
    }
};

// An unnormalized log-density on R^dim, with optional exact log normalizing
// constant and optional exact sampler. Evaluation is pure and reentrant;
// samplers take an explicit RNG stream.
struct TargetDensity {
    int dim = 0;
    std::string name;
    std::optional<double> exact_log_z;
    std::function<double(std::span<const double>)> log_unnorm;
    // Gradient of log_unnorm with respect to the point; required by the
    // flow-training path, available for every shipped target.
    std::function<void(std::span<const double>, std::span<double>)> grad_log_unnorm;
    std::function<SampleBatch(Rng&, int)> sampler;

    bool has_sampler() const { return static_cast<bool>(sampler); }

    std::vector<double> grad(std::span<const double> x) const {
        std::vector<double> g(static_cast<std::size_t>(dim));
        grad_log_unnorm(x, g);
        return g;
    }
};

struct RingMixtureParams {
    int dim = 2;          // p, even
    double mu1[2] = {0, 0};
    double mu2[2] = {0, 0};
    double s = 1.0;       // mean of the squared radius
    double sigma = 1.0;   // thickness
};

// Independent diagonal Gaussian, kept unnormalized as exp(-sum (x-m)^2/(2c)).
TargetDensity gaussian_target(std::vector<double> mean, std::vector<double> cov_diag);

// Product over p/2 coordinate pairs of an equal-weight two-ring mixture.
TargetDensity ring_mixture_target(const RingMixtureParams& params);

// Mixture of multivariate t distributions sharing scale and degrees of
// freedom; the component constant is factored out so the normalizing
// constant has the closed form used by the benchmarks.
TargetDensity t_mixture_target(std::vector<double> weights,
                               std::vector<std::vector<double>> means,
                               std::vector<double> scale_row_major, double nu);

// Pad a target with independent standard-normal coordinates; the normalizing
// constant is unchanged.
TargetDensity augment_with_standard_normal(const TargetDensity& base, int extra_dims);

}  // namespace fgb
