#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "shapley/linearize.hpp"

namespace shapley {

// A black-box model together with its analytic gradient when one is known.
struct ModelEntry {
    BlackBoxModel model;
    std::function<Vector(const Vector&)> gradient; // empty when unavailable
};

// Four-variable trigonometric test model
//   f(x) = cos(x1) x2 + sin(x2) + 2 cos(x3) x1 - sin(x4),
// 1-Lipschitz and smooth.
inline ModelEntry make_trig4_model() {
    BlackBoxModel model(
        4,
        [](const Vector& x) {
            return std::cos(x(0)) * x(1) + std::sin(x(1)) + 2.0 * std::cos(x(2)) * x(0) -
                   std::sin(x(3));
        },
        true, "fig1");
    auto gradient = [](const Vector& x) {
        Vector g(4);
        g(0) = -std::sin(x(0)) * x(1) + 2.0 * std::cos(x(2));
        g(1) = std::cos(x(0)) + std::cos(x(1));
        g(2) = -2.0 * std::sin(x(2)) * x(0);
        g(3) = -std::cos(x(3));
        return g;
    };
    return {std::move(model), gradient};
}

// Two-variable model f(x) = x1 + x2^2, the minimal case where the linear
// surrogate provably misses a variable.
inline ModelEntry make_remark1_model() {
    BlackBoxModel model(
        2, [](const Vector& x) { return x(0) + x(1) * x(1); }, true, "remark1");
    auto gradient = [](const Vector& x) {
        Vector g(2);
        g(0) = 1.0;
        g(1) = 2.0 * x(1);
        return g;
    };
    return {std::move(model), gradient};
}

// Squared Euclidean norm in p variables; gradient 2x.
inline ModelEntry make_sqnorm_model(int p) {
    BlackBoxModel model(
        p, [](const Vector& x) { return x.squaredNorm(); }, true, "sqnorm");
    auto gradient = [](const Vector& x) { return (2.0 * x).eval(); };
    return {std::move(model), gradient};
}

// Affine model with inline coefficients; gradient is the constant vector.
inline ModelEntry make_linear_model(const Vector& coeffs, double intercept = 0.0) {
    LinearModel lm{intercept, coeffs};
    BlackBoxModel model(
        static_cast<int>(coeffs.size()), [lm](const Vector& x) { return lm(x); }, true,
        "linear");
    Vector beta = coeffs;
    auto gradient = [beta](const Vector&) { return beta; };
    return {std::move(model), gradient};
}

// Registry lookup by config name. "linear" requires coefficients; "sqnorm"
// takes its arity from `dim` (default 5).
inline ModelEntry make_builtin_model(const std::string& name,
                                     const std::optional<Vector>& coeffs = std::nullopt,
                                     double intercept = 0.0, int dim = 5) {
    if (name == "fig1") return make_trig4_model();
    if (name == "remark1") return make_remark1_model();
    if (name == "sqnorm") return make_sqnorm_model(dim);
    if (name == "linear") {
        if (!coeffs) throw ConfigError("model \"linear\" requires coefficients");
        return make_linear_model(*coeffs, intercept);
    }
    throw ConfigError("unknown model name: " + name);
}

} // namespace shapley
