#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "shapley/gaussian.hpp"
#include "shapley/subset.hpp"

namespace shapley {

// Affine surrogate y = intercept + coeffs . x.
struct LinearModel {
    double intercept = 0.0;
    Vector coeffs;

    [[nodiscard]] int dim() const { return static_cast<int>(coeffs.size()); }
    [[nodiscard]] double operator()(const Vector& x) const {
        return intercept + coeffs.dot(x);
    }
};

// Vector of p sensitivity indices. On the exact Gaussian-linear path the
// entries lie in [0,1] and sum to 1 (up to 1e-10); Monte-Carlo estimators
// return the same type with exact=false and only soft checks apply.
struct ShapleyVector {
    Vector values;
    bool exact = true;

    [[nodiscard]] int dim() const { return static_cast<int>(values.size()); }
    [[nodiscard]] double sum() const { return values.sum(); }

    void validate_exact(double tol = 1e-10) const {
        if (!exact) return;
        if (std::abs(sum() - 1.0) > tol)
            throw Error("ShapleyVector: exact-path values sum to " + std::to_string(sum()));
        for (Eigen::Index i = 0; i < values.size(); ++i)
            if (values(i) < -tol || values(i) > 1.0 + tol)
                throw Error("ShapleyVector: exact-path value out of [0,1]: " +
                            std::to_string(values(i)));
    }

    [[nodiscard]] bool within_soft_bounds(double tol) const {
        return std::abs(sum() - 1.0) <= tol;
    }
};

// All 2^p conditional variances V(Y|X_u), indexed by subset bitmask.
// entries[0] = Var(Y), entries[full] = 0, nonincreasing under inclusion.
struct CondVarTable {
    int dim = 0;
    std::vector<double> entries;

    [[nodiscard]] double operator[](const SubsetMask& u) const { return entries[u.bits()]; }
    [[nodiscard]] double var_y() const { return entries[0]; }
};

namespace detail {

// Scale-aware zero-variance threshold: a PD covariance admitted by the
// pivot rule guarantees beta^T S beta above this bound for any nonzero beta.
inline double zero_variance_tol(const LinearModel& model, const CovMatrix& cov) {
    return static_cast<double>(cov.dim()) * std::numeric_limits<double>::epsilon() *
           cov.entries().diagonal().maxCoeff() * model.coeffs.squaredNorm();
}

// V(Y|X_u) for masks given as raw bits, with index scratch reuse.
inline double cond_var_linear_bits(const LinearModel& model, const CovMatrix& cov,
                                   std::uint32_t bits) {
    const int p = cov.dim();
    const Matrix& S = cov.entries();
    const Vector& beta = model.coeffs;
    if (bits == 0) return beta.dot(S * beta);
    if (bits == (std::uint32_t{1} << p) - 1) return 0.0;

    std::vector<int> in;
    std::vector<int> out;
    in.reserve(static_cast<std::size_t>(p));
    out.reserve(static_cast<std::size_t>(p));
    for (int i = 0; i < p; ++i) ((bits >> i) & 1u ? in : out).push_back(i);

    // V = b_r^T S_rr b_r - t^T S_uu^{-1} t with t = S_{u,r} b_r.
    const auto nu = static_cast<Eigen::Index>(in.size());
    const auto nr = static_cast<Eigen::Index>(out.size());
    Matrix s_uu(nu, nu);
    for (Eigen::Index i = 0; i < nu; ++i)
        for (Eigen::Index j = 0; j < nu; ++j) s_uu(i, j) = S(in[i], in[j]);
    Vector b_r(nr);
    for (Eigen::Index i = 0; i < nr; ++i) b_r(i) = beta(out[i]);
    Vector t(nu);
    double quad_rr = 0.0;
    for (Eigen::Index i = 0; i < nu; ++i) {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < nr; ++j) acc += S(in[i], out[j]) * b_r(j);
        t(i) = acc;
    }
    for (Eigen::Index i = 0; i < nr; ++i)
        for (Eigen::Index j = 0; j < nr; ++j) quad_rr += b_r(i) * S(out[i], out[j]) * b_r(j);

    Matrix l_uu = CovMatrix::cholesky_lower(s_uu);
    Vector w = l_uu.triangularView<Eigen::Lower>().solve(t);
    const double v = quad_rr - w.squaredNorm();
    return v > 0.0 ? v : 0.0; // Schur quadratic form; clip round-off below zero
}

} // namespace detail

// Exact conditional variance V(Y|X_u) of the Gaussian-linear pair,
//   V(Y|X_u) = b_{-u}^T (S_{-u,-u} - S_{-u,u} S_{u,u}^{-1} S_{u,-u}) b_{-u}.
// u may be empty (total variance) or full (zero).
inline double conditional_variance_linear(const LinearModel& model, const CovMatrix& cov,
                                          const SubsetMask& u) {
    if (model.dim() != cov.dim() || u.dim() != cov.dim())
        throw Error("conditional_variance_linear: dimension mismatch");
    return detail::cond_var_linear_bits(model, cov, u.bits());
}

// All 2^p conditional variances. Mask-parallel when threads > 1; slots are
// disjoint, so the result is identical for any thread count.
inline CondVarTable build_cond_var_table(const LinearModel& model, const CovMatrix& cov,
                                         int threads = 1) {
    const int p = cov.dim();
    if (model.dim() != p) throw Error("build_cond_var_table: dimension mismatch");
    if (p > kMaxSubsetDim)
        throw DimensionTooLarge(
            "build_cond_var_table: p = " + std::to_string(p) +
            " exceeds 25; use shapley_linear_blockwise on a block-diagonal covariance");
    CondVarTable table;
    table.dim = p;
    const std::uint32_t n_masks = std::uint32_t{1} << p;
    table.entries.resize(n_masks);

    auto fill = [&](std::uint32_t lo, std::uint32_t hi) {
        for (std::uint32_t m = lo; m < hi; ++m)
            table.entries[m] = detail::cond_var_linear_bits(model, cov, m);
    };
    if (threads <= 1 || n_masks < 1024) {
        fill(0, n_masks);
    } else {
        std::vector<std::thread> pool;
        const std::uint32_t chunk = n_masks / static_cast<std::uint32_t>(threads) + 1;
        for (std::uint32_t lo = 0; lo < n_masks; lo += chunk)
            pool.emplace_back(fill, lo, std::min(n_masks, lo + chunk));
        for (auto& t : pool) t.join();
    }
    return table;
}

namespace detail {

// Shapley aggregation over a conditional-variance table: one pass over
// masks, crediting every i outside u with w(|u|) (V(Y|X_u) - V(Y|X_{u+i})).
inline ShapleyVector aggregate_cond_var_table(const CondVarTable& table) {
    const int p = table.dim;
    const double var_y = table.var_y();
    std::vector<double> weight(static_cast<std::size_t>(p));
    for (int s = 0; s < p; ++s)
        weight[static_cast<std::size_t>(s)] = 1.0 / static_cast<double>(binomial(p - 1, s));

    Vector eta = Vector::Zero(p);
    const std::uint32_t n_masks = std::uint32_t{1} << p;
    for (std::uint32_t m = 0; m < n_masks; ++m) {
        const double w = weight[static_cast<std::size_t>(std::popcount(m))];
        const double v_u = table.entries[m];
        for (int i = 0; i < p; ++i) {
            if ((m >> i) & 1u) continue;
            eta(i) += w * (v_u - table.entries[m | (std::uint32_t{1} << i)]);
        }
    }
    eta /= static_cast<double>(p) * var_y;
    ShapleyVector out{std::move(eta), true};
    out.validate_exact();
    return out;
}

} // namespace detail

// Exact Shapley effects of the Gaussian-linear pair (beta, Sigma) by full
// power-set enumeration. Hard cap p <= 25.
inline ShapleyVector shapley_linear(const LinearModel& model, const CovMatrix& cov,
                                    int threads = 1) {
    CondVarTable table = build_cond_var_table(model, cov, threads);
    if (table.var_y() <= detail::zero_variance_tol(model, cov))
        throw ZeroVarianceModel("shapley_linear: beta^T Sigma beta is zero within tolerance");
    return detail::aggregate_cond_var_table(table);
}

// Closed Sobol index S_u^cl = V(E(Y|X_u))/V(Y) = 1 - V(Y|X_u)/V(Y).
inline double closed_sobol_linear(const LinearModel& model, const CovMatrix& cov,
                                  const SubsetMask& u) {
    if (u.is_empty()) return 0.0;
    if (u.is_full()) return 1.0;
    const double var_y = conditional_variance_linear(model, cov, SubsetMask::empty(cov.dim()));
    if (var_y <= detail::zero_variance_tol(model, cov))
        throw ZeroVarianceModel("closed_sobol_linear: beta^T Sigma beta is zero within tolerance");
    return 1.0 - conditional_variance_linear(model, cov, u) / var_y;
}

// Connected components of the graph with an edge (i,j) iff
// |S_ij| > tol * sqrt(S_ii S_jj). Blocks are sorted and cover [0, p).
inline std::vector<std::vector<int>> block_decompose(const CovMatrix& cov,
                                                     double tol = 1e-12) {
    const int p = cov.dim();
    const Matrix& S = cov.entries();
    std::vector<int> parent(static_cast<std::size_t>(p));
    for (int i = 0; i < p; ++i) parent[static_cast<std::size_t>(i)] = i;
    auto find = [&](int i) {
        while (parent[static_cast<std::size_t>(i)] != i) {
            parent[static_cast<std::size_t>(i)] =
                parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(i)])];
            i = parent[static_cast<std::size_t>(i)];
        }
        return i;
    };
    for (int i = 0; i < p; ++i)
        for (int j = i + 1; j < p; ++j)
            if (std::abs(S(i, j)) > tol * std::sqrt(S(i, i) * S(j, j)))
                parent[static_cast<std::size_t>(find(i))] = find(j);

    std::vector<std::vector<int>> blocks;
    std::vector<int> root_to_block(static_cast<std::size_t>(p), -1);
    for (int i = 0; i < p; ++i) {
        const int r = find(i);
        if (root_to_block[static_cast<std::size_t>(r)] < 0) {
            root_to_block[static_cast<std::size_t>(r)] = static_cast<int>(blocks.size());
            blocks.emplace_back();
        }
        blocks[static_cast<std::size_t>(root_to_block[static_cast<std::size_t>(r)])].push_back(i);
    }
    return blocks;
}

// Shapley effects via block-diagonal decomposition: per block b, Shapley on
// (beta_b, Sigma_b) scaled by Var(Y_b)/Var(Y); a block with beta_b = 0
// contributes zeros and no variance share. Equals full enumeration on
// block-diagonal inputs.
inline ShapleyVector shapley_linear_blockwise(const LinearModel& model, const CovMatrix& cov,
                                              double tol = 1e-12, int threads = 1) {
    const int p = cov.dim();
    if (model.dim() != p) throw Error("shapley_linear_blockwise: dimension mismatch");
    const auto blocks = block_decompose(cov, tol);

    struct BlockWork {
        std::vector<int> idx;
        LinearModel model;
        CovMatrix cov;
        double var_y;
    };
    std::vector<BlockWork> work;
    double var_total = 0.0;
    for (const auto& idx : blocks) {
        Matrix sub = detail::submatrix(cov.entries(), idx, idx);
        CovMatrix sub_cov = CovMatrix::validate_and_factor(sub);
        Vector beta_b(static_cast<Eigen::Index>(idx.size()));
        for (std::size_t i = 0; i < idx.size(); ++i)
            beta_b(static_cast<Eigen::Index>(i)) = model.coeffs(idx[i]);
        LinearModel block_model{0.0, std::move(beta_b)};
        const double v = block_model.coeffs.dot(sub_cov.entries() * block_model.coeffs);
        var_total += v;
        work.push_back({idx, std::move(block_model), std::move(sub_cov), v});
    }
    if (var_total <= detail::zero_variance_tol(model, cov))
        throw ZeroVarianceModel("shapley_linear_blockwise: total variance is zero within tolerance");

    Vector eta = Vector::Zero(p);
    for (const auto& b : work) {
        if (b.var_y <= detail::zero_variance_tol(b.model, b.cov)) continue; // inert block
        ShapleyVector block_eta = shapley_linear(b.model, b.cov, threads);
        const double share = b.var_y / var_total;
        for (std::size_t i = 0; i < b.idx.size(); ++i)
            eta(b.idx[i]) = share * block_eta.values(static_cast<Eigen::Index>(i));
    }
    ShapleyVector out{std::move(eta), true};
    out.validate_exact();
    return out;
}

} // namespace shapley
