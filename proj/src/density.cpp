#include "fgb/density.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

#include "fgb/linalg.hpp"
#include "fgb/math_utils.hpp"

namespace fgb {

namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727;  // (1/2) log(2 pi)

void check_point_dim(std::span<const double> x, int dim, const char* who) {
    if (static_cast<int>(x.size()) != dim)
        throw std::invalid_argument(std::string(who) + ": point has wrong dimension");
}

}  // namespace

TargetDensity gaussian_target(std::vector<double> mean, std::vector<double> cov_diag) {
    if (mean.empty() || mean.size() != cov_diag.size())
        throw std::invalid_argument("gaussian_target: mean/cov_diag size mismatch");
    for (double c : cov_diag)
        if (!(c > 0.0)) throw std::invalid_argument("gaussian_target: variances must be positive");

    const int d = static_cast<int>(mean.size());
    double log_z = static_cast<double>(d) * kHalfLog2Pi;
    for (double c : cov_diag) log_z += 0.5 * std::log(c);

    auto m = std::make_shared<std::vector<double>>(std::move(mean));
    auto c = std::make_shared<std::vector<double>>(std::move(cov_diag));

    TargetDensity t;
    t.dim = d;
    t.name = "gaussian";
    t.exact_log_z = log_z;
    t.log_unnorm = [m, c, d](std::span<const double> x) {
        check_point_dim(x, d, "gaussian_target");
        double s = 0.0;
        for (int j = 0; j < d; ++j) {
            const double u = x[j] - (*m)[static_cast<std::size_t>(j)];
            s -= u * u / (2.0 * (*c)[static_cast<std::size_t>(j)]);
        }
        return s;
    };
    t.grad_log_unnorm = [m, c, d](std::span<const double> x, std::span<double> g) {
        check_point_dim(x, d, "gaussian_target");
        for (int j = 0; j < d; ++j)
            g[j] = -(x[j] - (*m)[static_cast<std::size_t>(j)]) / (*c)[static_cast<std::size_t>(j)];
    };
    t.sampler = [m, c, d](Rng& rng, int n) {
        SampleBatch b(d, n, "gaussian");
        for (int i = 0; i < n; ++i) {
            auto r = b.row(i);
            for (int j = 0; j < d; ++j)
                r[j] = (*m)[static_cast<std::size_t>(j)] +
                       std::sqrt((*c)[static_cast<std::size_t>(j)]) * draw_normal(rng);
        }
        return b;
    };
    return t;
}

namespace {

// One 2-d ring block: log of the equal-weight mixture of the two unnormalized
// ring kernels exp(-(||v-mu||^2 - s)^2 / (2 sigma^2)).
struct RingBlock {
    double mu1[2], mu2[2], s, sigma2;

    double kernel_exponent(const double* v, const double* mu) const {
        const double dx = v[0] - mu[0], dy = v[1] - mu[1];
        const double t = dx * dx + dy * dy - s;
        return -t * t / (2.0 * sigma2);
    }

    double log_density(const double* v) const {
        const double g1 = kernel_exponent(v, mu1);
        const double g2 = kernel_exponent(v, mu2);
        return log_sum_exp(g1, g2) - M_LN2;
    }

    void add_grad(const double* v, double* g) const {
        const double g1 = kernel_exponent(v, mu1);
        const double g2 = kernel_exponent(v, mu2);
        const double m = std::max(g1, g2);
        const double w1 = std::exp(g1 - m), w2 = std::exp(g2 - m);
        const double tot = w1 + w2;
        const double d1x = v[0] - mu1[0], d1y = v[1] - mu1[1];
        const double d2x = v[0] - mu2[0], d2y = v[1] - mu2[1];
        const double t1 = d1x * d1x + d1y * d1y - s;
        const double t2 = d2x * d2x + d2y * d2y - s;
        const double c1 = -2.0 * t1 / sigma2 * (w1 / tot);
        const double c2 = -2.0 * t2 / sigma2 * (w2 / tot);
        g[0] += c1 * d1x + c2 * d2x;
        g[1] += c1 * d1y + c2 * d2y;
    }
};

}  // namespace

TargetDensity ring_mixture_target(const RingMixtureParams& params) {
    if (params.dim < 2 || params.dim % 2 != 0)
        throw std::invalid_argument("ring_mixture_target: dim must be a positive even integer");
    if (!(params.s > 0.0) || !(params.sigma > 0.0))
        throw std::invalid_argument("ring_mixture_target: s and sigma must be positive");

    const int d = params.dim;
    const int blocks = d / 2;
    RingBlock blk{{params.mu1[0], params.mu1[1]},
                  {params.mu2[0], params.mu2[1]},
                  params.s,
                  params.sigma * params.sigma};

    // Z per block = sqrt(2 pi^3 sigma^2) Phi(s/sigma); the mixture keeps it.
    const double log_z_block = 0.5 * std::log(2.0 * M_PI * M_PI * M_PI * blk.sigma2) +
                               log_norm_cdf(params.s / params.sigma);

    const double s = params.s, sigma = params.sigma;

    TargetDensity t;
    t.dim = d;
    t.name = "ring_mixture";
    t.exact_log_z = static_cast<double>(blocks) * log_z_block;
    t.log_unnorm = [blk, d](std::span<const double> x) {
        check_point_dim(x, d, "ring_mixture_target");
        double acc = 0.0;
        for (int b = 0; b < d / 2; ++b) acc += blk.log_density(x.data() + 2 * b);
        return acc;
    };
    t.grad_log_unnorm = [blk, d](std::span<const double> x, std::span<double> g) {
        check_point_dim(x, d, "ring_mixture_target");
        for (int j = 0; j < d; ++j) g[j] = 0.0;
        for (int b = 0; b < d / 2; ++b) blk.add_grad(x.data() + 2 * b, g.data() + 2 * b);
    };
    // Exact sampler: per block pick a ring, then in polar coordinates around
    // its center the squared radius follows Normal(s, sigma^2) truncated to
    // t > 0 (rejection; acceptance Phi(s/sigma)) and the angle is uniform.
    t.sampler = [blk, d, s, sigma](Rng& rng, int n) {
        SampleBatch out(d, n, "ring_mixture");
        for (int i = 0; i < n; ++i) {
            auto row = out.row(i);
            for (int b = 0; b < d / 2; ++b) {
                const double* mu = (draw_uniform(rng) < 0.5) ? blk.mu1 : blk.mu2;
                double t2;
                do {
                    t2 = s + sigma * draw_normal(rng);
                } while (!(t2 > 0.0));
                const double radius = std::sqrt(t2);
                const double theta = draw_uniform(rng, 0.0, 2.0 * M_PI);
                row[2 * b] = mu[0] + radius * std::cos(theta);
                row[2 * b + 1] = mu[1] + radius * std::sin(theta);
            }
        }
        return out;
    };
    return t;
}

TargetDensity t_mixture_target(std::vector<double> weights,
                               std::vector<std::vector<double>> means,
                               std::vector<double> scale_row_major, double nu) {
    const std::size_t K = weights.size();
    if (K == 0 || means.size() != K)
        throw std::invalid_argument("t_mixture_target: weights/means size mismatch");
    const std::size_t p = means[0].size();
    for (const auto& mu : means)
        if (mu.size() != p) throw std::invalid_argument("t_mixture_target: ragged means");
    if (!(nu > 0.0)) throw std::invalid_argument("t_mixture_target: nu must be positive");
    double wsum = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw std::invalid_argument("t_mixture_target: negative weight");
        wsum += w;
    }
    if (std::abs(wsum - 1.0) > 1e-12)
        throw std::invalid_argument("t_mixture_target: weights must sum to 1");
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (std::abs(scale_row_major[i * p + j] - scale_row_major[j * p + i]) > 1e-12)
                throw std::invalid_argument("t_mixture_target: scale matrix not symmetric");

    // Throws on non-SPD input.
    auto L = std::make_shared<std::vector<double>>(cholesky_lower(scale_row_major, p));
    const double log_det = log_det_from_cholesky(*L, p);

    // log Z = lgamma((nu+p)/2) - lgamma(nu/2) - (p/2) log nu - (p/2) log pi
    //         - (1/2) log |Sigma|
    const double pd = static_cast<double>(p);
    const double log_z = std::lgamma((nu + pd) / 2.0) - std::lgamma(nu / 2.0) -
                         0.5 * pd * std::log(nu) - 0.5 * pd * std::log(M_PI) - 0.5 * log_det;

    auto w = std::make_shared<std::vector<double>>(std::move(weights));
    auto mu = std::make_shared<std::vector<std::vector<double>>>(std::move(means));
    const int d = static_cast<int>(p);

    // Per-component log pdf = log_z - ((nu+p)/2) log1p(d^2/nu), with
    // d^2 = (x-mu)' Sigma^{-1} (x-mu) via the Cholesky factor.
    auto comp_log_pdf = [L, log_z, nu, pd, p](std::span<const double> x,
                                              std::span<const double> m,
                                              std::span<double> scratch) {
        std::vector<double> diff(p);
        for (std::size_t j = 0; j < p; ++j) diff[j] = x[j] - m[j];
        solve_lower(*L, p, diff, scratch);
        double d2 = 0.0;
        for (std::size_t j = 0; j < p; ++j) d2 += scratch[j] * scratch[j];
        return log_z - 0.5 * (nu + pd) * std::log1p(d2 / nu);
    };

    TargetDensity t;
    t.dim = d;
    t.name = "t_mixture";
    t.exact_log_z = log_z;
    t.log_unnorm = [w, mu, comp_log_pdf, log_z, d](std::span<const double> x) {
        check_point_dim(x, d, "t_mixture_target");
        const std::size_t p = static_cast<std::size_t>(d);
        std::vector<double> scratch(p);
        std::vector<double> terms(w->size());
        for (std::size_t k = 0; k < w->size(); ++k)
            terms[k] = ((*w)[k] > 0.0 ? std::log((*w)[k]) : kNegInf) +
                       comp_log_pdf(x, (*mu)[k], scratch);
        return log_z + log_sum_exp(terms);
    };
    t.grad_log_unnorm = [w, mu, L, comp_log_pdf, nu, d](std::span<const double> x,
                                                        std::span<double> g) {
        check_point_dim(x, d, "t_mixture_target");
        const std::size_t p = static_cast<std::size_t>(d);
        const double pd = static_cast<double>(p);
        std::vector<double> scratch(p), diff(p), sinv(p);
        std::vector<double> lw(w->size());
        for (std::size_t k = 0; k < w->size(); ++k)
            lw[k] = ((*w)[k] > 0.0 ? std::log((*w)[k]) : kNegInf) +
                    comp_log_pdf(x, (*mu)[k], scratch);
        const double lse = log_sum_exp(lw);
        for (std::size_t j = 0; j < p; ++j) g[j] = 0.0;
        for (std::size_t k = 0; k < w->size(); ++k) {
            const double wk = std::exp(lw[k] - lse);
            if (wk == 0.0) continue;
            for (std::size_t j = 0; j < p; ++j) diff[j] = x[j] - (*mu)[k][j];
            solve_lower(*L, p, diff, scratch);
            double d2 = 0.0;
            for (std::size_t j = 0; j < p; ++j) d2 += scratch[j] * scratch[j];
            solve_lower_transpose(*L, p, scratch, sinv);  // Sigma^{-1} (x - mu_k)
            const double c = -wk * (nu + pd) / (nu + d2);
            for (std::size_t j = 0; j < p; ++j) g[j] += c * sinv[j];
        }
    };
    t.sampler = [w, mu, L, nu, d](Rng& rng, int n) {
        const std::size_t p = static_cast<std::size_t>(d);
        SampleBatch out(d, n, "t_mixture");
        std::discrete_distribution<int> comp(w->begin(), w->end());
        std::gamma_distribution<double> chi2(nu / 2.0, 2.0);
        for (int i = 0; i < n; ++i) {
            auto row = out.row(i);
            const auto& m = (*mu)[static_cast<std::size_t>(comp(rng))];
            const double scale = std::sqrt(nu / chi2(rng));
            std::vector<double> z(p);
            for (std::size_t j = 0; j < p; ++j) z[j] = draw_normal(rng);
            for (std::size_t j = 0; j < p; ++j) {
                double acc = 0.0;
                for (std::size_t k = 0; k <= j; ++k) acc += (*L)[j * p + k] * z[k];
                row[j] = m[j] + scale * acc;
            }
        }
        return out;
    };
    return t;
}

TargetDensity augment_with_standard_normal(const TargetDensity& base, int extra_dims) {
    if (extra_dims < 1)
        throw std::invalid_argument("augment_with_standard_normal: extra_dims must be >= 1");
    if (!base.log_unnorm)
        throw std::invalid_argument("augment_with_standard_normal: base has no log_unnorm");

    auto b = std::make_shared<TargetDensity>(base);
    const int d0 = base.dim;
    const int d = d0 + extra_dims;

    TargetDensity t;
    t.dim = d;
    t.name = base.name + "+aug" + std::to_string(extra_dims);
    t.exact_log_z = base.exact_log_z;  // augmenting density is normalized
    t.log_unnorm = [b, d0, d](std::span<const double> x) {
        check_point_dim(x, d, "augment_with_standard_normal");
        double s = b->log_unnorm(x.subspan(0, static_cast<std::size_t>(d0)));
        for (int j = d0; j < d; ++j) s += -0.5 * x[j] * x[j] - kHalfLog2Pi;
        return s;
    };
    t.grad_log_unnorm = [b, d0, d](std::span<const double> x, std::span<double> g) {
        check_point_dim(x, d, "augment_with_standard_normal");
        b->grad_log_unnorm(x.subspan(0, static_cast<std::size_t>(d0)),
                           g.subspan(0, static_cast<std::size_t>(d0)));
        for (int j = d0; j < d; ++j) g[j] = -x[j];
    };
    if (base.has_sampler()) {
        t.sampler = [b, d0, d](Rng& rng, int n) {
            SampleBatch inner = b->sampler(rng, n);
            SampleBatch out(d, n, b->name + "+aug");
            for (int i = 0; i < n; ++i) {
                auto dst = out.row(i);
                auto src = inner.row(i);
                for (int j = 0; j < d0; ++j) dst[j] = src[j];
                for (int j = d0; j < d; ++j) dst[j] = draw_normal(rng);
            }
            return out;
        };
    }
    return t;
}

}  // namespace fgb
