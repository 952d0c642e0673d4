#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "shapley/exact.hpp"
#include "shapley/gaussian.hpp"

namespace shapley {

// Deterministic scalar-valued evaluator on p-vectors. Copies share the
// evaluation counter, so experiment accounting follows the logical model
// rather than a particular handle.
class BlackBoxModel {
public:
    using Fn = std::function<double(const Vector&)>;

    BlackBoxModel(int arity, Fn fn, bool thread_safe = true, std::string name = "")
        : arity_(arity),
          fn_(std::move(fn)),
          thread_safe_(thread_safe),
          name_(std::move(name)),
          count_(std::make_shared<std::atomic<std::uint64_t>>(0)) {
        if (arity_ < 1) throw Error("BlackBoxModel: arity must be >= 1");
    }

    double operator()(const Vector& x) const {
        if (x.size() != arity_)
            throw Error("BlackBoxModel: expected " + std::to_string(arity_) +
                        " inputs, got " + std::to_string(x.size()));
        count_->fetch_add(1, std::memory_order_relaxed);
        return fn_(x);
    }

    [[nodiscard]] int arity() const { return arity_; }
    [[nodiscard]] bool thread_safe() const { return thread_safe_; }
    [[nodiscard]] const std::string& name() const { return name_; }
    [[nodiscard]] std::uint64_t eval_count() const {
        return count_->load(std::memory_order_relaxed);
    }
    void reset_eval_count() const { count_->store(0, std::memory_order_relaxed); }

private:
    int arity_;
    Fn fn_;
    bool thread_safe_;
    std::string name_;
    std::shared_ptr<std::atomic<std::uint64_t>> count_;
};

// Strictly positive central-difference steps, one per coordinate.
struct StepVector {
    Vector steps;

    explicit StepVector(Vector s) : steps(std::move(s)) {
        if (steps.size() < 1 || (steps.array() <= 0.0).any())
            throw Error("StepVector: all steps must be strictly positive");
    }
};

// Least-squares fit of an affine surrogate plus diagnostics.
struct RegressionFit {
    LinearModel model;
    double residual_norm = 0.0;
    double condition_estimate = 0.0;
    Eigen::Index n_samples = 0;
};

// Affine surrogate with the given gradient at `center`:
//   coeffs = gradient, intercept = f_center - gradient . center.
// The intercept only matters for surrogate evaluation; Shapley effects
// ignore constants.
inline LinearModel taylor_linear(const Vector& gradient, const Vector& center,
                                 double f_center) {
    if (gradient.size() != center.size())
        throw Error("taylor_linear: gradient/center dimension mismatch");
    if (gradient.norm() <= 1e-14 * (1.0 + std::abs(f_center)))
        throw ZeroGradient("taylor_linear: gradient is zero within tolerance");
    return LinearModel{f_center - gradient.dot(center), gradient};
}

// Central finite differences, component i = (f(x + e_i h_i) - f(x - e_i h_i)) / (2 h_i).
// Exactly 2p model evaluations. Steps are floored at 1e-8 (1 + |center_i|)
// to avoid catastrophic cancellation for vanishing covariances.
inline Vector finite_diff_gradient(const BlackBoxModel& model, const Vector& center,
                                   const StepVector& h) {
    const auto p = center.size();
    if (h.steps.size() != p || model.arity() != p)
        throw Error("finite_diff_gradient: dimension mismatch");
    Vector grad(p);
    Vector x = center;
    for (Eigen::Index i = 0; i < p; ++i) {
        const double step = std::max(h.steps(i), 1e-8 * (1.0 + std::abs(center(i))));
        x(i) = center(i) + step;
        const double up = model(x);
        x(i) = center(i) - step;
        const double down = model(x);
        x(i) = center(i);
        if (!std::isfinite(up) || !std::isfinite(down))
            throw NonFiniteEvaluation("finite_diff_gradient: model returned a non-finite value at coordinate " +
                                      std::to_string(i));
        grad(i) = (up - down) / (2.0 * step);
    }
    return grad;
}

// Default step rule: h_i = sqrt(Sigma_ii), the marginal standard deviation.
inline StepVector default_steps(const CovMatrix& cov) {
    return StepVector(cov.entries().diagonal().cwiseSqrt());
}

// Least-squares affine fit of (inputs, outputs) via Householder QR with
// column pivoting. Inputs are recentered at their sample mean before the
// solve and the intercept is restored afterwards, which drops the condition
// number without changing the exact-arithmetic solution.
inline RegressionFit fit_linear_regression(const SampleBatch& batch) {
    if (!batch.outputs)
        throw Error("fit_linear_regression: batch has no outputs");
    const Eigen::Index n = batch.size();
    const Eigen::Index p = batch.dim();
    if (n < p + 1)
        throw TooFewSamples("fit_linear_regression: need at least p + 1 = " +
                            std::to_string(p + 1) + " samples, got " + std::to_string(n));

    Eigen::RowVectorXd center = batch.inputs.colwise().mean();
    Matrix design(n, p + 1);
    design.col(0).setOnes();
    design.rightCols(p) = batch.inputs.rowwise() - center;

    Eigen::ColPivHouseholderQR<Matrix> qr(design);
    const Vector r_diag = qr.matrixR().diagonal().head(p + 1).cwiseAbs();
    const double r_max = r_diag.maxCoeff();
    const double r_min = r_diag.minCoeff();
    if (r_min < static_cast<double>(n) * std::numeric_limits<double>::epsilon() * r_max)
        throw RankDeficient("fit_linear_regression: design matrix is numerically rank-deficient");

    Vector sol = qr.solve(*batch.outputs);
    Vector coeffs = sol.tail(p);
    const double intercept = sol(0) - coeffs.dot(center.transpose());

    RegressionFit fit;
    fit.model = LinearModel{intercept, std::move(coeffs)};
    fit.residual_norm = (design * sol - *batch.outputs).norm();
    fit.condition_estimate = r_max / r_min;
    fit.n_samples = n;
    return fit;
}

enum class LinearizeMethod { ExactGradient, FiniteDiff, Regression };

inline LinearizeMethod parse_linearize_method(const std::string& name) {
    if (name == "exact-gradient") return LinearizeMethod::ExactGradient;
    if (name == "finite-diff") return LinearizeMethod::FiniteDiff;
    if (name == "regression") return LinearizeMethod::Regression;
    throw ConfigError("unknown linearization method: " + name);
}

struct LinearizeOptions {
    // exact-gradient: either a precomputed gradient at the mean or a callback
    std::optional<Vector> gradient;
    std::function<Vector(const Vector&)> gradient_fn;
    // finite-diff: explicit steps; defaults to sqrt(diag(cov))
    std::optional<StepVector> steps;
    // regression: sample size and the stream that draws the design
    Eigen::Index regression_n = 40;
    std::optional<RngStream> regression_stream;
};

struct LinearizeResult {
    LinearModel model;
    std::uint64_t evals = 0; // model evaluations spent by this call
    LinearizeMethod method = LinearizeMethod::ExactGradient;
    std::optional<RegressionFit> fit; // regression diagnostics when applicable
};

// Dispatch over the three linearization strategies, always centered at
// spec.mean. Surrogates are of the form g . (x - mean): the intercept
// absorbs the centering and no evaluation of f at the mean is spent.
inline LinearizeResult linearize_pipeline(const BlackBoxModel& f, const GaussianSpec& spec,
                                          LinearizeMethod method,
                                          const LinearizeOptions& opt = {}) {
    const Vector& mu = spec.mean;
    switch (method) {
        case LinearizeMethod::ExactGradient: {
            Vector g;
            if (opt.gradient) {
                g = *opt.gradient;
            } else if (opt.gradient_fn) {
                g = opt.gradient_fn(mu);
            } else {
                throw Error("linearize_pipeline: exact-gradient needs a gradient or callback");
            }
            return {taylor_linear(g, mu, 0.0), 0, method, std::nullopt};
        }
        case LinearizeMethod::FiniteDiff: {
            const StepVector steps = opt.steps ? *opt.steps : default_steps(spec.cov);
            Vector g = finite_diff_gradient(f, mu, steps);
            return {taylor_linear(g, mu, 0.0), 2 * static_cast<std::uint64_t>(f.arity()),
                    method, std::nullopt};
        }
        case LinearizeMethod::Regression: {
            if (!opt.regression_stream)
                throw Error("linearize_pipeline: regression needs an RNG stream");
            SampleBatch batch = sample_marginal(spec, opt.regression_n, *opt.regression_stream);
            Vector y(batch.size());
            for (Eigen::Index i = 0; i < batch.size(); ++i) {
                y(i) = f(batch.inputs.row(i).transpose());
                if (!std::isfinite(y(i)))
                    throw NonFiniteEvaluation("linearize_pipeline: non-finite model output");
            }
            batch.attach_outputs(std::move(y));
            RegressionFit fit = fit_linear_regression(batch);
            LinearModel model = fit.model;
            return {std::move(model), static_cast<std::uint64_t>(batch.size()), method,
                    std::move(fit)};
        }
    }
    throw Error("linearize_pipeline: unreachable");
}

} // namespace shapley
