#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>

#include "shapley/exact.hpp"
#include "shapley/gaussian.hpp"
#include "shapley/linearize.hpp"

namespace shapley {

// Source of i.i.d. base vectors U; draws are pure functions of the stream.
struct BaseSampler {
    int dim = 0;
    std::string name;
    std::function<Vector(RngStream&)> draw;
};

// Empirical mean of n fresh draws of the base vector.
inline Vector sample_empirical_mean(const BaseSampler& base, std::int64_t n, RngStream stream) {
    if (n < 1) throw Error("sample_empirical_mean: n must be >= 1");
    Vector acc = Vector::Zero(base.dim);
    for (std::int64_t i = 0; i < n; ++i) acc += base.draw(stream);
    return acc / static_cast<double>(n);
}

// Sample mean and unbiased sample covariance of the base law.
struct MomentEstimate {
    Vector mean_hat;
    CovMatrix cov_hat;
    std::int64_t n_mean = 0;
    std::int64_t n_cov = 0;
};

// Moment estimation on independent streams by default; with
// shared_sample = true the mean is computed from the covariance sample
// (one sample serves both estimates). Sample covariances of continuous
// laws are PD almost surely; if factorization still fails, a diagonal
// jitter of eps * mean(diag) is tried for eps in {1e-12, 1e-10, 1e-8}
// before giving up, so a persistent failure signals a degenerate sampler.
inline MomentEstimate estimate_moments(const BaseSampler& base, std::int64_t n_mean,
                                       std::int64_t n_cov, RngStream stream,
                                       bool shared_sample = false) {
    const int p = base.dim;
    if (n_mean < 1) throw Error("estimate_moments: n_mean must be >= 1");
    if (n_cov < p + 1)
        throw Error("estimate_moments: n_cov must be at least p + 1 = " + std::to_string(p + 1));

    RngStream cov_stream = stream.child(0);
    Matrix draws(n_cov, p);
    for (std::int64_t i = 0; i < n_cov; ++i)
        draws.row(i) = base.draw(cov_stream).transpose();
    Eigen::RowVectorXd cov_sample_mean = draws.colwise().mean();
    Matrix centered = draws.rowwise() - cov_sample_mean;
    Matrix s = centered.transpose() * centered / static_cast<double>(n_cov - 1);

    Vector mean_hat;
    if (shared_sample) {
        mean_hat = cov_sample_mean.transpose();
        n_mean = n_cov;
    } else {
        mean_hat = sample_empirical_mean(base, n_mean, stream.child(1));
    }

    std::optional<CovMatrix> cov;
    const double diag_mean = s.diagonal().mean();
    for (double eps : {0.0, 1e-12, 1e-10, 1e-8}) {
        try {
            cov = CovMatrix::validate_and_factor(
                s + eps * diag_mean * Matrix::Identity(p, p));
            break;
        } catch (const NotPositiveDefinite&) {
            continue;
        }
    }
    if (!cov)
        throw NotPositiveDefinite(
            "estimate_moments: sample covariance is not positive definite after jitter; "
            "the base sampler looks degenerate");
    return {std::move(mean_hat), std::move(*cov), n_mean, n_cov};
}

struct GlaOptions {
    // Analytic gradient; when absent the gradient is estimated by central
    // finite differences around mean_hat.
    std::function<Vector(const Vector&)> gradient;
    // Explicit finite-difference steps; default h_i = sqrt(cov_hat_ii / n),
    // the standard deviation of an n-term empirical mean. The 1/n factor
    // only affects finite-difference accuracy: Shapley effects are scale
    // invariant in the covariance.
    std::optional<StepVector> steps;
    std::int64_t step_scale_n = 0; // n of the step rule; 0 means n_mean
};

// Gaussian-linear-approximation Shapley estimate: linearize at mean_hat,
// then exact Shapley effects of (gradient, cov_hat).
inline ShapleyVector gla_shapley_estimate(const BlackBoxModel& f, const MomentEstimate& moments,
                                          const GlaOptions& opt = {}) {
    const Vector& mu = moments.mean_hat;
    Vector grad;
    if (opt.gradient) {
        grad = opt.gradient(mu);
    } else {
        StepVector steps = [&] {
            if (opt.steps) return *opt.steps;
            const std::int64_t n = opt.step_scale_n > 0 ? opt.step_scale_n
                                   : moments.n_mean > 0 ? moments.n_mean
                                                        : 1;
            return StepVector(
                (moments.cov_hat.entries().diagonal() / static_cast<double>(n)).cwiseSqrt());
        }();
        grad = finite_diff_gradient(f, mu, steps);
    }
    LinearModel surrogate = taylor_linear(grad, mu, 0.0); // ZeroGradient check
    return shapley_linear(surrogate, moments.cov_hat);
}

namespace dist {

// Inverse-CDF draws for the base laws of the mixed five-variable sampler.

inline double uniform(RngStream& rng, double lo, double hi) {
    return lo + (hi - lo) * rng.next_uniform();
}

// Symmetric triangular on [lo, hi] (apex at the midpoint).
inline double triangular_symmetric(RngStream& rng, double lo, double hi) {
    const double u = rng.next_uniform();
    const double half_area = (hi - lo) * (hi - lo) / 2.0;
    return u < 0.5 ? lo + std::sqrt(u * half_area) : hi - std::sqrt((1.0 - u) * half_area);
}

// Beta(1, 2): density 2(1-x) on [0, 1].
inline double beta_1_2(RngStream& rng) { return 1.0 - std::sqrt(1.0 - rng.next_uniform()); }

inline double exponential(RngStream& rng, double rate) {
    return -std::log(rng.next_uniform_pos()) / rate;
}

} // namespace dist

// "N(0, 4)" of the five-variable suite is read as variance 4.
inline constexpr double kMixedSamplerNormalStdDev = 2.0;

// The five base variables of the dependent test suite:
//   A1 ~ U[5,10], A2 ~ N(0,4), A3 ~ symmetric triangular on [-1,8],
//   A4 ~ 5 Beta(1,2), A5 ~ Exp(1).
inline Vector section42_base_draw(RngStream& rng) {
    Vector a(5);
    a(0) = dist::uniform(rng, 5.0, 10.0);
    a(1) = kMixedSamplerNormalStdDev * rng.next_normal();
    a(2) = dist::triangular_symmetric(rng, -1.0, 8.0);
    a(3) = 5.0 * dist::beta_1_2(rng);
    a(4) = dist::exponential(rng, 1.0);
    return a;
}

// Mixing matrix producing the dependent vector U = M A.
inline Matrix section42_mixing() {
    Matrix m(5, 5);
    m << 1.0,  2.0, -0.5,  0.0,  0.0,
         2.0,  1.0,  0.0,  0.0, -0.5,
         0.0,  2.0,  1.0,  0.0, -0.5,
         2.0, -0.5,  0.0,  1.0,  0.0,
         0.0,  0.0,  2.0, -0.5,  1.0;
    return m;
}

// Analytic means of (A1, ..., A5); handy for sampler checks.
inline Vector section42_base_means() {
    Vector m(5);
    m << 7.5, 0.0, 3.5, 5.0 / 3.0, 1.0;
    return m;
}

inline BaseSampler make_mixed_sampler(std::function<Vector(RngStream&)> base_draw,
                                      Matrix mixing, std::string name) {
    const int dim = static_cast<int>(mixing.rows());
    return BaseSampler{dim, std::move(name),
                       [base_draw = std::move(base_draw), mixing = std::move(mixing)](
                           RngStream& rng) { return (mixing * base_draw(rng)).eval(); }};
}

// The dependent five-variable sampler used by the estimation-error study.
inline BaseSampler section42_sampler() {
    return make_mixed_sampler(section42_base_draw, section42_mixing(), "section42");
}

inline BaseSampler make_gaussian_sampler(const GaussianSpec& spec) {
    return BaseSampler{spec.dim(), "gaussian", [spec](RngStream& rng) {
                           Vector z(spec.dim());
                           for (int i = 0; i < spec.dim(); ++i) z(i) = rng.next_normal();
                           return (spec.mean +
                                   spec.cov.chol().triangularView<Eigen::Lower>() * z)
                               .eval();
                       }};
}

inline BaseSampler make_constant_sampler(const Vector& value) {
    return BaseSampler{static_cast<int>(value.size()), "constant",
                       [value](RngStream&) { return value; }};
}

} // namespace shapley
