#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "shapley/exact.hpp"
#include "shapley/gaussian.hpp"
#include "shapley/linearize.hpp"
#include "shapley/rng.hpp"

namespace shapley {

// Budgets of the permutation estimator. budget_scale shrinks the outer
// counts for desk runs; the inner count stays fixed because the unbiased
// inner variance needs at least two draws.
struct PermEstimatorParams {
    std::int64_t n_var = 100000;          // draws for the Var(Y) estimate
    std::int64_t n_perms = 1000;          // random permutations
    std::int64_t n_inner = 3;             // conditional draws per prefix
    std::int64_t n_outer_per_prefix = 1;  // conditioning points per prefix

    void validate() const {
        if (n_var < 1 || n_perms < 1 || n_inner < 1 || n_outer_per_prefix < 1)
            throw Error("PermEstimatorParams: all counts must be >= 1");
    }

    [[nodiscard]] PermEstimatorParams scaled(double budget_scale) const {
        PermEstimatorParams out = *this;
        out.n_var = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::llround(
                                                  static_cast<double>(n_var) * budget_scale)));
        out.n_perms = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::llround(
                                                    static_cast<double>(n_perms) * budget_scale)));
        return out;
    }
};

// Budgets of the nested double-Monte-Carlo loop.
struct OracleParams {
    std::int64_t n_outer = 2000;
    std::int64_t n_inner = 100;

    void validate() const {
        if (n_outer < 2 || n_inner < 2)
            throw Error("OracleParams: both counts must be >= 2 (inner sample variance)");
    }
};

// A scalar Monte-Carlo estimate with its standard error.
struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;
};

// A Shapley estimate with per-coordinate standard errors.
struct ShapleyEstimate {
    ShapleyVector eta;
    Vector std_error;
};

namespace detail {

inline double sample_variance(const std::vector<double>& xs) {
    const auto n = static_cast<double>(xs.size());
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double acc = 0.0;
    for (double x : xs) acc += (x - mean) * (x - mean);
    return acc / (n - 1.0);
}

// Shapley aggregation of a full table of closed-Sobol estimates:
//   eta_i = (1/p) sum_{u not containing i} C(p-1,|u|)^{-1} (S_{u+i} - S_u).
// Uncertainty is propagated assuming independent per-subset errors.
inline ShapleyEstimate aggregate_closed_sobol_table(const std::vector<double>& s,
                                                    const std::vector<double>& se, int p) {
    std::vector<double> weight(static_cast<std::size_t>(p));
    for (int size = 0; size < p; ++size)
        weight[static_cast<std::size_t>(size)] = 1.0 / static_cast<double>(binomial(p - 1, size));
    Vector eta = Vector::Zero(p);
    Vector var = Vector::Zero(p);
    const std::uint32_t n_masks = std::uint32_t{1} << p;
    for (std::uint32_t u = 0; u < n_masks; ++u) {
        const double w = weight[static_cast<std::size_t>(std::popcount(u))];
        for (int i = 0; i < p; ++i) {
            if ((u >> i) & 1u) continue;
            const std::uint32_t ui = u | (std::uint32_t{1} << i);
            eta(i) += w * (s[ui] - s[u]);
            var(i) += w * w * (se[ui] * se[ui] + se[u] * se[u]);
        }
    }
    eta /= static_cast<double>(p);
    var /= static_cast<double>(p) * static_cast<double>(p);
    return {ShapleyVector{std::move(eta), false}, var.cwiseSqrt()};
}

} // namespace detail

// Nested Monte-Carlo estimate of the closed Sobol index
// S_u = V(E(Y|X_u)) / V(Y): outer draws of X_u, inner conditional draws of
// X_{-u}. The outer variance of the inner means is debiased by
// mean(inner variance)/N_I, and V(Y) is recovered from the same loop by the
// total-variance split V(Y) = V(E(Y|X_u)) + E(V(Y|X_u)), keeping both
// pieces unbiased. The standard error is a bootstrap over outer draws.
inline McEstimate double_mc_closed_sobol(const BlackBoxModel& f, const GaussianSpec& spec,
                                         const SubsetMask& u, const OracleParams& params,
                                         RngStream stream, int bootstrap = 200) {
    params.validate();
    if (u.dim() != spec.dim() || f.arity() != spec.dim())
        throw Error("double_mc_closed_sobol: dimension mismatch");
    if (u.is_empty()) return {0.0, 0.0};
    if (u.is_full()) return {1.0, 0.0};

    ConditionalSampler sampler(spec, u);
    const auto n_outer = static_cast<std::size_t>(params.n_outer);
    std::vector<double> means(n_outer);
    std::vector<double> vars(n_outer);
    for (std::size_t t = 0; t < n_outer; ++t) {
        RngStream st = stream.child(t);
        Vector x_u = sampler.draw_marginal_u(st);
        double sum = 0.0;
        double sum_sq = 0.0;
        for (std::int64_t j = 0; j < params.n_inner; ++j) {
            Vector rest = sampler.draw_rest(x_u, st);
            const double y = f(sampler.assemble(x_u, rest));
            if (!std::isfinite(y))
                throw NonFiniteEvaluation("double_mc_closed_sobol: non-finite model output");
            sum += y;
            sum_sq += y * y;
        }
        const double n_i = static_cast<double>(params.n_inner);
        means[t] = sum / n_i;
        vars[t] = std::max(0.0, (sum_sq - sum * sum / n_i) / (n_i - 1.0));
    }

    auto statistic = [&](const std::vector<std::size_t>& idx) {
        double m1 = 0.0;
        double m2 = 0.0;
        double v1 = 0.0;
        for (std::size_t t : idx) {
            m1 += means[t];
            m2 += means[t] * means[t];
            v1 += vars[t];
        }
        const double n = static_cast<double>(idx.size());
        const double var_of_means = (m2 - m1 * m1 / n) / (n - 1.0);
        const double mean_inner_var = v1 / n;
        const double v_explained = var_of_means - mean_inner_var / static_cast<double>(params.n_inner);
        const double v_total = v_explained + mean_inner_var;
        return v_total > 0.0 ? v_explained / v_total : 0.0;
    };

    std::vector<std::size_t> all(n_outer);
    std::iota(all.begin(), all.end(), std::size_t{0});
    const double value = statistic(all);

    RngStream boot = stream.child(0x626F6F74); // independent resampling stream
    std::vector<double> replicas(static_cast<std::size_t>(bootstrap));
    std::vector<std::size_t> idx(n_outer);
    for (int b = 0; b < bootstrap; ++b) {
        for (auto& i : idx) i = static_cast<std::size_t>(boot.next_below(n_outer));
        replicas[static_cast<std::size_t>(b)] = statistic(idx);
    }
    const double se = std::sqrt(detail::sample_variance(replicas));
    return {value, se};
}

// Shapley effects from a full table of double-MC closed Sobol indices,
// aggregated with the subset-sum weights. The empty and full subsets are
// handled analytically, so the estimate sums to exactly 1.
inline ShapleyEstimate shapley_subset_oracle(const BlackBoxModel& f, const GaussianSpec& spec,
                                             const OracleParams& params, RngStream stream) {
    const int p = spec.dim();
    if (p > 12)
        throw DimensionTooLarge("shapley_subset_oracle: p = " + std::to_string(p) +
                                " exceeds 12 (2^p nested loops)");
    const std::uint32_t n_masks = std::uint32_t{1} << p;
    std::vector<double> s(n_masks, 0.0);
    std::vector<double> se(n_masks, 0.0);
    s[n_masks - 1] = 1.0;
    for (std::uint32_t m = 1; m + 1 < n_masks; ++m) {
        McEstimate est = double_mc_closed_sobol(f, spec, SubsetMask(m, p), params, stream.child(m));
        s[m] = est.value;
        se[m] = est.std_error;
    }
    return detail::aggregate_closed_sobol_table(s, se, p);
}

// Permutation-walk estimator of the Shapley effects. The walk accumulates
// drops of the cost c(u) = E[V(Y|X_u)] along random permutations:
// c(empty) is the Var(Y) estimate and c(full) = 0, so every permutation's
// credits telescope and the estimate sums to exactly 1. Per-coordinate
// standard errors come from the spread of per-permutation credits.
// Permutations may run on a thread pool (only when the model declares
// itself thread-safe); each derives its stream from its index and results
// are reduced in index order, so the output does not depend on the thread
// count.
inline ShapleyEstimate shapley_perm_mc(const BlackBoxModel& f, const GaussianSpec& spec,
                                       const PermEstimatorParams& params, RngStream stream,
                                       int threads = 1) {
    params.validate();
    if (!f.thread_safe()) threads = 1;
    const int p = spec.dim();
    if (f.arity() != p) throw Error("shapley_perm_mc: dimension mismatch");
    if (p == 1)
        return {ShapleyVector{Vector::Ones(1), false}, Vector::Zero(1)};
    if (params.n_var < 2)
        throw Error("shapley_perm_mc: n_var must be >= 2 to estimate Var(Y)");

    // Var(Y) from marginal draws.
    SampleBatch var_batch = sample_marginal(spec, params.n_var, stream.child(0));
    std::vector<double> ys(static_cast<std::size_t>(params.n_var));
    for (std::size_t i = 0; i < ys.size(); ++i) {
        ys[i] = f(var_batch.inputs.row(static_cast<Eigen::Index>(i)).transpose());
        if (!std::isfinite(ys[i]))
            throw NonFiniteEvaluation("shapley_perm_mc: non-finite model output");
    }
    const double var_y = detail::sample_variance(ys);
    if (var_y <= 0.0) throw ZeroVarianceModel("shapley_perm_mc: estimated Var(Y) is zero");

    const auto m = static_cast<std::size_t>(params.n_perms);
    Matrix credits(static_cast<Eigen::Index>(m), p); // per-permutation cost drops

    auto run_perm = [&](std::size_t r) {
        RngStream perm_stream = stream.child(1).child(r);
        std::vector<int> order(static_cast<std::size_t>(p));
        std::iota(order.begin(), order.end(), 0);
        for (int i = p - 1; i > 0; --i)
            std::swap(order[static_cast<std::size_t>(i)],
                      order[perm_stream.next_below(static_cast<std::uint64_t>(i) + 1)]);

        double c_prev = var_y;
        std::uint32_t prefix = 0;
        for (int j = 0; j < p; ++j) {
            prefix |= std::uint32_t{1} << order[static_cast<std::size_t>(j)];
            double c_next = 0.0;
            if (j < p - 1) {
                SubsetMask u(prefix, p);
                ConditionalSampler sampler(spec, u);
                RngStream pos_stream = perm_stream.child(static_cast<std::uint64_t>(j) + 1);
                double acc = 0.0;
                for (std::int64_t o = 0; o < params.n_outer_per_prefix; ++o) {
                    Vector x_u = sampler.draw_marginal_u(pos_stream);
                    double sum = 0.0;
                    double sum_sq = 0.0;
                    for (std::int64_t inner = 0; inner < params.n_inner; ++inner) {
                        Vector rest = sampler.draw_rest(x_u, pos_stream);
                        const double y = f(sampler.assemble(x_u, rest));
                        if (!std::isfinite(y))
                            throw NonFiniteEvaluation("shapley_perm_mc: non-finite model output");
                        sum += y;
                        sum_sq += y * y;
                    }
                    const double n_i = static_cast<double>(params.n_inner);
                    acc += std::max(0.0, (sum_sq - sum * sum / n_i) / (n_i - 1.0));
                }
                c_next = acc / static_cast<double>(params.n_outer_per_prefix);
            }
            credits(static_cast<Eigen::Index>(r), order[static_cast<std::size_t>(j)]) =
                c_prev - c_next;
            c_prev = c_next;
        }
    };

    if (threads <= 1) {
        for (std::size_t r = 0; r < m; ++r) run_perm(r);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = m / static_cast<std::size_t>(threads) + 1;
        for (std::size_t lo = 0; lo < m; lo += chunk) {
            const std::size_t hi = std::min(m, lo + chunk);
            pool.emplace_back([&, lo, hi] {
                for (std::size_t r = lo; r < hi; ++r) run_perm(r);
            });
        }
        for (auto& t : pool) t.join();
    }

    Vector eta = credits.colwise().mean().transpose() / var_y;
    Vector se(p);
    for (int i = 0; i < p; ++i) {
        const double mean = credits.col(i).mean();
        const double sd = std::sqrt((credits.col(i).array() - mean).square().sum() /
                                    (static_cast<double>(m) - 1.0));
        se(i) = sd / (var_y * std::sqrt(static_cast<double>(m)));
    }
    return {ShapleyVector{std::move(eta), false}, std::move(se)};
}

// k-nearest-neighbor estimate of the closed Sobol index from a plain
// inputs/outputs sample: anchors' local neighborhood means in the X_u
// coordinates (standardized per coordinate) estimate E(Y|X_u); their
// variance, debiased by mean(local variance)/k, estimates V(E(Y|X_u)).
// n_anchors = 0 uses every sample point as an anchor; otherwise anchors
// are a deterministic strided subsample.
inline McEstimate knn_closed_sobol(const SampleBatch& batch, const SubsetMask& u, int k,
                                   Eigen::Index n_anchors = 0, int bootstrap = 200) {
    if (!batch.outputs) throw Error("knn_closed_sobol: batch has no outputs");
    if (u.is_empty()) throw Error("knn_closed_sobol: u must be nonempty");
    const Eigen::Index n = batch.size();
    if (k < 2) throw Error("knn_closed_sobol: k must be > 1");
    if (n < 10 * static_cast<Eigen::Index>(k))
        throw Error("knn_closed_sobol: batch size must be at least 10k");

    const Vector& y = *batch.outputs;
    const double var_y = (y.array() - y.mean()).square().sum() / static_cast<double>(n - 1);
    const double y_scale = y.cwiseAbs().maxCoeff();
    if (var_y <= 1e-14 * std::max(1e-300, y_scale * y_scale))
        return {0.0, 0.0}; // constant output explains nothing

    const auto cols = u.indices();
    Matrix coords(n, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) {
        Vector col = batch.inputs.col(cols[c]);
        const double mean = col.mean();
        const double sd =
            std::sqrt((col.array() - mean).square().sum() / static_cast<double>(n - 1));
        if (sd == 0.0)
            throw DegenerateCoordinates("knn_closed_sobol: coordinate " +
                                        std::to_string(cols[c]) + " has zero sample variance");
        coords.col(static_cast<Eigen::Index>(c)) = (col.array() - mean) / sd;
    }

    if (n_anchors <= 0 || n_anchors > n) n_anchors = n;
    std::vector<double> local_mean(static_cast<std::size_t>(n_anchors));
    std::vector<double> local_var(static_cast<std::size_t>(n_anchors));
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::vector<double> dist(static_cast<std::size_t>(n));
    for (Eigen::Index a = 0; a < n_anchors; ++a) {
        const Eigen::Index anchor = a * n / n_anchors;
        for (Eigen::Index i = 0; i < n; ++i)
            dist[static_cast<std::size_t>(i)] =
                (coords.row(i) - coords.row(anchor)).squaredNorm();
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::nth_element(order.begin(), order.begin() + (k - 1), order.end(),
                         [&](Eigen::Index lhs, Eigen::Index rhs) {
                             return dist[static_cast<std::size_t>(lhs)] <
                                    dist[static_cast<std::size_t>(rhs)];
                         });
        double sum = 0.0;
        double sum_sq = 0.0;
        for (int j = 0; j < k; ++j) {
            const double v = y(order[static_cast<std::size_t>(j)]);
            sum += v;
            sum_sq += v * v;
        }
        const double kd = static_cast<double>(k);
        local_mean[static_cast<std::size_t>(a)] = sum / kd;
        local_var[static_cast<std::size_t>(a)] =
            std::max(0.0, (sum_sq - sum * sum / kd) / (kd - 1.0));
    }

    auto statistic = [&](const std::vector<std::size_t>& idx) {
        double m1 = 0.0;
        double m2 = 0.0;
        double v1 = 0.0;
        for (std::size_t t : idx) {
            m1 += local_mean[t];
            m2 += local_mean[t] * local_mean[t];
            v1 += local_var[t];
        }
        const double na = static_cast<double>(idx.size());
        const double var_means = (m2 - m1 * m1 / na) / (na - 1.0);
        return (var_means - v1 / na / static_cast<double>(k)) / var_y;
    };

    std::vector<std::size_t> all(static_cast<std::size_t>(n_anchors));
    std::iota(all.begin(), all.end(), std::size_t{0});
    const double value = statistic(all);

    RngStream boot(batch.seed_tag ^ (0x6B6E6EULL + u.bits()));
    std::vector<double> replicas(static_cast<std::size_t>(bootstrap));
    std::vector<std::size_t> idx(static_cast<std::size_t>(n_anchors));
    for (int b = 0; b < bootstrap; ++b) {
        for (auto& i : idx)
            i = static_cast<std::size_t>(boot.next_below(static_cast<std::uint64_t>(n_anchors)));
        replicas[static_cast<std::size_t>(b)] = statistic(idx);
    }
    return {value, std::sqrt(detail::sample_variance(replicas))};
}

// Shapley effects aggregated from kNN closed Sobol indices over the full
// power set; empty and full subsets are analytic, so the result sums to 1.
inline ShapleyEstimate knn_shapley_aggregate(const SampleBatch& batch, int k,
                                             Eigen::Index n_anchors = 0) {
    const int p = static_cast<int>(batch.dim());
    if (p > 12)
        throw DimensionTooLarge("knn_shapley_aggregate: p exceeds 12 (2^p subsets)");
    const std::uint32_t n_masks = std::uint32_t{1} << p;
    std::vector<double> s(n_masks, 0.0);
    std::vector<double> se(n_masks, 0.0);
    s[n_masks - 1] = 1.0;
    for (std::uint32_t m = 1; m + 1 < n_masks; ++m) {
        McEstimate est = knn_closed_sobol(batch, SubsetMask(m, p), k, n_anchors);
        s[m] = est.value;
        se[m] = est.std_error;
    }
    return detail::aggregate_closed_sobol_table(s, se, p);
}

} // namespace shapley
