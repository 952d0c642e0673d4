#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "shapley/errors.hpp"
#include "shapley/rng.hpp"
#include "shapley/subset.hpp"

namespace shapley {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Symmetric positive-definite covariance matrix with a cached lower
// Cholesky factor. Immutable after construction.
class CovMatrix {
public:
    // Validates and factors a raw square matrix. The input is symmetrized
    // as (M + M^T)/2 before factoring, which tolerates serialization noise;
    // asymmetry beyond 1e-10 * max|M| is rejected outright.
    static CovMatrix validate_and_factor(const Matrix& raw) {
        if (raw.rows() != raw.cols() || raw.rows() < 1)
            throw Error("CovMatrix: matrix must be square and non-empty");
        const double scale = raw.cwiseAbs().maxCoeff();
        const double asym = (raw - raw.transpose()).cwiseAbs().maxCoeff();
        if (asym > 1e-10 * std::max(scale, 1e-300))
            throw NotSymmetric("CovMatrix: max|M - M^T| = " + std::to_string(asym) +
                               " exceeds 1e-10 * max|M|");
        Matrix sym = 0.5 * (raw + raw.transpose());
        Matrix chol = cholesky_lower(sym);
        return CovMatrix(std::move(sym), std::move(chol));
    }

    [[nodiscard]] int dim() const { return static_cast<int>(entries_.rows()); }
    [[nodiscard]] const Matrix& entries() const { return entries_; }
    // Cached lower-triangular factor L with L L^T = entries().
    [[nodiscard]] const Matrix& chol() const { return chol_; }

    [[nodiscard]] double operator()(int i, int j) const { return entries_(i, j); }

    // Lower Cholesky with the scale-free pivot rule: every pivot must
    // exceed p * machine-epsilon * max diagonal entry.
    static Matrix cholesky_lower(const Matrix& m) {
        const auto p = m.rows();
        const double tol = static_cast<double>(p) *
                           std::numeric_limits<double>::epsilon() *
                           m.diagonal().maxCoeff();
        Matrix L = Matrix::Zero(p, p);
        for (Eigen::Index j = 0; j < p; ++j) {
            double d = m(j, j) - L.row(j).head(j).squaredNorm();
            if (!(d > tol))
                throw NotPositiveDefinite("CovMatrix: Cholesky pivot " + std::to_string(d) +
                                          " at index " + std::to_string(j) +
                                          " is not above tolerance " + std::to_string(tol));
            L(j, j) = std::sqrt(d);
            for (Eigen::Index i = j + 1; i < p; ++i) {
                L(i, j) = (m(i, j) - L.row(i).head(j).dot(L.row(j).head(j))) / L(j, j);
            }
        }
        return L;
    }

private:
    CovMatrix(Matrix entries, Matrix chol)
        : entries_(std::move(entries)), chol_(std::move(chol)) {}

    Matrix entries_;
    Matrix chol_;
};

// Multivariate Gaussian input law N(mean, cov).
struct GaussianSpec {
    Vector mean;
    CovMatrix cov;

    GaussianSpec(Vector mean_in, CovMatrix cov_in)
        : mean(std::move(mean_in)), cov(std::move(cov_in)) {
        if (mean.size() != cov.dim())
            throw Error("GaussianSpec: mean length " + std::to_string(mean.size()) +
                        " does not match covariance dimension " + std::to_string(cov.dim()));
    }

    [[nodiscard]] int dim() const { return cov.dim(); }
};

// A batch of N sample rows, optionally with model outputs attached.
struct SampleBatch {
    Matrix inputs;                 // N x p, one sample per row
    std::optional<Vector> outputs; // length N when present
    std::uint64_t seed_tag = 0;    // key of the stream that produced it

    [[nodiscard]] Eigen::Index size() const { return inputs.rows(); }
    [[nodiscard]] Eigen::Index dim() const { return inputs.cols(); }

    void attach_outputs(Vector y) {
        if (y.size() != inputs.rows())
            throw Error("SampleBatch: outputs length must equal the number of rows");
        outputs = std::move(y);
    }
};

namespace detail {

inline Matrix submatrix(const Matrix& m, const std::vector<int>& rows,
                        const std::vector<int>& cols) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols.size(); ++j)
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(rows[i], cols[j]);
    return out;
}

inline Vector subvector(const Vector& v, const std::vector<int>& idx) {
    Vector out(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(idx[i]);
    return out;
}

} // namespace detail

// Conditional moments of X_{-u} given X_u = x_u:
//   mean = mu_{-u} + S_{-u,u} S_{u,u}^{-1} (x_u - mu_u)
//   cov  = S_{-u,-u} - S_{-u,u} S_{u,u}^{-1} S_{u,-u}   (Schur complement)
// u must be a proper nonempty subset. Factorization failures of the
// sub-block or of the Schur complement propagate as NotPositiveDefinite.
inline std::pair<Vector, CovMatrix> conditional_moments(const GaussianSpec& spec,
                                                        const SubsetMask& u,
                                                        const Vector& x_u) {
    if (u.dim() != spec.dim())
        throw Error("conditional_moments: mask dimension mismatch");
    if (u.is_empty() || u.is_full())
        throw Error("conditional_moments: u must be a proper nonempty subset");
    const auto in = u.indices();
    const auto out = u.complement().indices();
    if (x_u.size() != static_cast<Eigen::Index>(in.size()))
        throw Error("conditional_moments: x_u length must equal |u|");

    const Matrix& S = spec.cov.entries();
    Matrix s_uu = detail::submatrix(S, in, in);
    Matrix s_ru = detail::submatrix(S, out, in); // rest x u
    Matrix s_rr = detail::submatrix(S, out, out);

    // Solve via the Cholesky of the u-block; p <= 25 keeps refactoring cheap.
    Matrix l_uu = CovMatrix::cholesky_lower(s_uu);
    auto solve_uu = [&](const Matrix& rhs) {
        Matrix t = l_uu.triangularView<Eigen::Lower>().solve(rhs);
        return l_uu.transpose().triangularView<Eigen::Upper>().solve(t).eval();
    };

    Vector mu_u = detail::subvector(spec.mean, in);
    Vector mu_r = detail::subvector(spec.mean, out);
    Vector mean = mu_r + s_ru * solve_uu(x_u - mu_u);
    Matrix schur = s_rr - s_ru * solve_uu(s_ru.transpose());
    return {std::move(mean), CovMatrix::validate_and_factor(schur)};
}

// n i.i.d. draws of N(mean, cov) as mean + L z. Pure function of
// (spec, n, stream): the caller's stream is taken by value.
inline SampleBatch sample_marginal(const GaussianSpec& spec, Eigen::Index n,
                                   RngStream stream) {
    if (n < 1) throw Error("sample_marginal: n must be >= 1");
    const int p = spec.dim();
    SampleBatch batch;
    batch.seed_tag = stream.key();
    batch.inputs.resize(n, p);
    Vector z(p);
    for (Eigen::Index r = 0; r < n; ++r) {
        for (int j = 0; j < p; ++j) z(j) = stream.next_normal();
        batch.inputs.row(r) =
            (spec.mean + spec.cov.chol().triangularView<Eigen::Lower>() * z).transpose();
    }
    return batch;
}

// Precomputed machinery for repeated conditional draws of X_{-u} | X_u.
// The Schur complement and the regression map do not depend on x_u, so one
// factorization serves any number of conditioning points.
class ConditionalSampler {
public:
    ConditionalSampler(const GaussianSpec& spec, const SubsetMask& u)
        : u_indices_(u.indices()), rest_indices_(u.complement().indices()) {
        if (u.dim() != spec.dim())
            throw Error("ConditionalSampler: mask dimension mismatch");
        if (u.is_empty() || u.is_full())
            throw Error("ConditionalSampler: u must be a proper nonempty subset");
        const Matrix& S = spec.cov.entries();
        Matrix s_uu = detail::submatrix(S, u_indices_, u_indices_);
        Matrix s_ru = detail::submatrix(S, rest_indices_, u_indices_);
        Matrix s_rr = detail::submatrix(S, rest_indices_, rest_indices_);
        Matrix l_uu = CovMatrix::cholesky_lower(s_uu);
        // K = S_{-u,u} S_{u,u}^{-1}
        Matrix kt = l_uu.triangularView<Eigen::Lower>().solve(s_ru.transpose());
        kt = l_uu.transpose().triangularView<Eigen::Upper>().solve(kt);
        gain_ = kt.transpose();
        Matrix schur = s_rr - gain_ * s_ru.transpose();
        schur_chol_ = CovMatrix::cholesky_lower(0.5 * (schur + schur.transpose()));
        mu_u_ = detail::subvector(spec.mean, u_indices_);
        mu_rest_ = detail::subvector(spec.mean, rest_indices_);
        marginal_u_chol_ = CovMatrix::cholesky_lower(s_uu);
    }

    [[nodiscard]] Vector conditional_mean(const Vector& x_u) const {
        return mu_rest_ + gain_ * (x_u - mu_u_);
    }

    // One draw of X_{-u} | X_u = x_u.
    [[nodiscard]] Vector draw_rest(const Vector& x_u, RngStream& stream) const {
        Vector z(static_cast<Eigen::Index>(rest_indices_.size()));
        for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = stream.next_normal();
        return conditional_mean(x_u) + schur_chol_.triangularView<Eigen::Lower>() * z;
    }

    // One draw of the marginal law of X_u.
    [[nodiscard]] Vector draw_marginal_u(RngStream& stream) const {
        Vector z(static_cast<Eigen::Index>(u_indices_.size()));
        for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = stream.next_normal();
        return mu_u_ + marginal_u_chol_.triangularView<Eigen::Lower>() * z;
    }

    // Scatters (x_u, x_rest) back into a full p-vector.
    [[nodiscard]] Vector assemble(const Vector& x_u, const Vector& x_rest) const {
        Vector full(static_cast<Eigen::Index>(u_indices_.size() + rest_indices_.size()));
        for (std::size_t i = 0; i < u_indices_.size(); ++i)
            full(u_indices_[i]) = x_u(static_cast<Eigen::Index>(i));
        for (std::size_t i = 0; i < rest_indices_.size(); ++i)
            full(rest_indices_[i]) = x_rest(static_cast<Eigen::Index>(i));
        return full;
    }

    [[nodiscard]] const std::vector<int>& u_indices() const { return u_indices_; }
    [[nodiscard]] const std::vector<int>& rest_indices() const { return rest_indices_; }

private:
    std::vector<int> u_indices_;
    std::vector<int> rest_indices_;
    Vector mu_u_;
    Vector mu_rest_;
    Matrix gain_;            // S_{-u,u} S_{u,u}^{-1}
    Matrix schur_chol_;      // lower factor of the Schur complement
    Matrix marginal_u_chol_; // lower factor of S_{u,u}
};

// n draws of X_{-u} | X_u = x_u, columns ordered by the indices of -u.
inline SampleBatch sample_conditional(const GaussianSpec& spec, const SubsetMask& u,
                                      const Vector& x_u, Eigen::Index n,
                                      RngStream stream) {
    if (n < 1) throw Error("sample_conditional: n must be >= 1");
    ConditionalSampler sampler(spec, u);
    if (x_u.size() != static_cast<Eigen::Index>(sampler.u_indices().size()))
        throw Error("sample_conditional: x_u length must equal |u|");
    SampleBatch batch;
    batch.seed_tag = stream.key();
    batch.inputs.resize(n, static_cast<Eigen::Index>(sampler.rest_indices().size()));
    for (Eigen::Index r = 0; r < n; ++r)
        batch.inputs.row(r) = sampler.draw_rest(x_u, stream).transpose();
    return batch;
}

} // namespace shapley
