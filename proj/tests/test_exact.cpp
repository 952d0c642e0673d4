#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "shapley/exact.hpp"
#include "test_support.hpp"

using namespace shapley;

namespace {

// Independent oracle: direct evaluation of the subset-sum definition with
// explicit matrix inverses and lgamma-based binomial weights. Shares no
// code with the table/Cholesky path it checks.
double oracle_cond_var(const Vector& beta, const Matrix& s, std::uint32_t bits) {
    const int p = static_cast<int>(beta.size());
    std::vector<int> in;
    std::vector<int> out;
    for (int i = 0; i < p; ++i) ((bits >> i) & 1u ? in : out).push_back(i);
    if (out.empty()) return 0.0;
    Matrix s_rr(out.size(), out.size());
    Vector b_r(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        b_r(static_cast<Eigen::Index>(i)) = beta(out[i]);
        for (std::size_t j = 0; j < out.size(); ++j)
            s_rr(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s(out[i], out[j]);
    }
    if (in.empty()) return b_r.dot(s_rr * b_r);
    Matrix s_uu(in.size(), in.size());
    Matrix s_ru(out.size(), in.size());
    for (std::size_t i = 0; i < in.size(); ++i)
        for (std::size_t j = 0; j < in.size(); ++j)
            s_uu(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s(in[i], in[j]);
    for (std::size_t i = 0; i < out.size(); ++i)
        for (std::size_t j = 0; j < in.size(); ++j)
            s_ru(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s(out[i], in[j]);
    Matrix schur = s_rr - s_ru * s_uu.inverse() * s_ru.transpose();
    return b_r.dot(schur * b_r);
}

double oracle_binomial(int n, int k) {
    return std::round(std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0)));
}

Vector shapley_oracle(const Vector& beta, const Matrix& s) {
    const int p = static_cast<int>(beta.size());
    const double var_y = oracle_cond_var(beta, s, 0);
    Vector eta = Vector::Zero(p);
    for (int i = 0; i < p; ++i) {
        for (std::uint32_t u = 0; u < (std::uint32_t{1} << p); ++u) {
            if ((u >> i) & 1u) continue;
            const int size = std::popcount(u);
            const double w = 1.0 / oracle_binomial(p - 1, size);
            eta(i) += w * (oracle_cond_var(beta, s, u) -
                           oracle_cond_var(beta, s, u | (std::uint32_t{1} << i)));
        }
        eta(i) /= p * var_y;
    }
    return eta;
}

LinearModel lm(std::initializer_list<double> coeffs, double intercept = 0.0) {
    Vector b(static_cast<Eigen::Index>(coeffs.size()));
    Eigen::Index i = 0;
    for (double c : coeffs) b(i++) = c;
    return LinearModel{intercept, b};
}

CovMatrix cov2(double a, double b, double c, double d) {
    Matrix m(2, 2);
    m << a, b, c, d;
    return CovMatrix::validate_and_factor(m);
}

} // namespace

TEST_CASE("conditional variance examples") {
    CovMatrix rho = cov2(1, 0.5, 0.5, 1);
    REQUIRE(conditional_variance_linear(lm({0, 1}), rho, SubsetMask(0b01, 2)) ==
            Catch::Approx(0.75).margin(1e-12));

    CovMatrix eye = cov2(1, 0, 0, 1);
    REQUIRE(conditional_variance_linear(lm({1, 1}), eye, SubsetMask::full(2)) == 0.0);
    REQUIRE(conditional_variance_linear(lm({1, 1}), eye, SubsetMask(0b10, 2)) ==
            Catch::Approx(1.0).margin(1e-12));
    // empty mask returns the total variance
    REQUIRE(conditional_variance_linear(lm({1, 1}), rho, SubsetMask::empty(2)) ==
            Catch::Approx(3.0).margin(1e-12));
}

TEST_CASE("conditional variance table on small cases") {
    CondVarTable t2 = build_cond_var_table(lm({1, 1}), cov2(1, 0, 0, 1));
    REQUIRE(t2.entries.size() == 4);
    REQUIRE(t2.entries[0b00] == Catch::Approx(2.0));
    REQUIRE(t2.entries[0b01] == Catch::Approx(1.0));
    REQUIRE(t2.entries[0b10] == Catch::Approx(1.0));
    REQUIRE(t2.entries[0b11] == 0.0);

    Matrix s1(1, 1);
    s1 << 2.5;
    CondVarTable t1 = build_cond_var_table(lm({3.0}), CovMatrix::validate_and_factor(s1));
    REQUIRE(t1.entries[0] == Catch::Approx(9.0 * 2.5));
    REQUIRE(t1.entries[1] == 0.0);
}

TEST_CASE("table is monotone nonincreasing under inclusion") {
    RngStream rng(404);
    for (int trial = 0; trial < 30; ++trial) {
        const int p = 2 + static_cast<int>(rng.next_below(7));
        CovMatrix cov = CovMatrix::validate_and_factor(test_support::random_pd(p, rng));
        LinearModel model{0.0, test_support::random_vector(p, rng)};
        CondVarTable table = build_cond_var_table(model, cov);
        for (std::uint32_t m = 0; m < (std::uint32_t{1} << p); ++m)
            for (int i = 0; i < p; ++i)
                if (!((m >> i) & 1u))
                    REQUIRE(table.entries[m] >= table.entries[m | (std::uint32_t{1} << i)] - 1e-10);
    }
}

TEST_CASE("shapley on symmetric and degenerate-direction cases") {
    ShapleyVector sym = shapley_linear(lm({1, 1}), cov2(1, 0, 0, 1));
    REQUIRE(sym.values(0) == Catch::Approx(0.5).margin(1e-12));
    REQUIRE(sym.values(1) == Catch::Approx(0.5).margin(1e-12));

    const int p = 5;
    Vector e1 = Vector::Zero(p);
    e1(0) = 1.0;
    ShapleyVector single = shapley_linear(LinearModel{0.0, e1},
                                          CovMatrix::validate_and_factor(Matrix::Identity(p, p)));
    REQUIRE(single.values(0) == Catch::Approx(1.0).margin(1e-12));
    for (int i = 1; i < p; ++i) REQUIRE(std::abs(single.values(i)) < 1e-12);
}

TEST_CASE("independent inputs reduce to normalized beta_i^2 sigma_ii") {
    ShapleyVector eta = shapley_linear(lm({1, 2}), cov2(1, 0, 0, 1));
    REQUIRE(eta.values(0) == Catch::Approx(0.2).margin(1e-12));
    REQUIRE(eta.values(1) == Catch::Approx(0.8).margin(1e-12));

    Vector oracle = shapley_oracle(lm({1, 2}).coeffs, Matrix::Identity(2, 2));
    REQUIRE((eta.values - oracle).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("agreement with the direct subset-sum oracle") {
    RngStream rng(808);
    for (int trial = 0; trial < 50; ++trial) {
        const int p = 2 + static_cast<int>(rng.next_below(7)); // p in [2,8]
        Matrix s = test_support::random_pd(p, rng);
        Vector beta = test_support::random_vector(p, rng);
        ShapleyVector eta = shapley_linear(LinearModel{0.0, beta}, CovMatrix::validate_and_factor(s));
        Vector oracle = shapley_oracle(beta, s);
        REQUIRE((eta.values - oracle).cwiseAbs().maxCoeff() < 1e-9);
        REQUIRE(eta.sum() == Catch::Approx(1.0).margin(1e-10));
        REQUIRE(eta.values.minCoeff() > -1e-10);
    }
}

TEST_CASE("scale invariance in beta and Sigma") {
    RngStream rng(909);
    for (int trial = 0; trial < 20; ++trial) {
        const int p = 2 + static_cast<int>(rng.next_below(5));
        Matrix s = test_support::random_pd(p, rng);
        Vector beta = test_support::random_vector(p, rng);
        const double c = 0.01 + 100.0 * rng.next_uniform();
        ShapleyVector base = shapley_linear(LinearModel{0.0, beta}, CovMatrix::validate_and_factor(s));
        ShapleyVector cov_scaled =
            shapley_linear(LinearModel{0.0, beta}, CovMatrix::validate_and_factor(c * s));
        ShapleyVector beta_scaled =
            shapley_linear(LinearModel{0.0, (c * beta).eval()}, CovMatrix::validate_and_factor(s));
        REQUIRE((base.values - cov_scaled.values).cwiseAbs().maxCoeff() < 1e-12);
        REQUIRE((base.values - beta_scaled.values).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("permutation equivariance") {
    RngStream rng(1010);
    for (int trial = 0; trial < 20; ++trial) {
        const int p = 3 + static_cast<int>(rng.next_below(4));
        Matrix s = test_support::random_pd(p, rng);
        Vector beta = test_support::random_vector(p, rng);

        std::vector<int> perm(static_cast<std::size_t>(p));
        for (int i = 0; i < p; ++i) perm[static_cast<std::size_t>(i)] = i;
        for (int i = p - 1; i > 0; --i)
            std::swap(perm[static_cast<std::size_t>(i)],
                      perm[rng.next_below(static_cast<std::uint64_t>(i) + 1)]);

        Matrix sp(p, p);
        Vector bp(p);
        for (int i = 0; i < p; ++i) {
            bp(i) = beta(perm[static_cast<std::size_t>(i)]);
            for (int j = 0; j < p; ++j)
                sp(i, j) = s(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
        }
        ShapleyVector eta = shapley_linear(LinearModel{0.0, beta}, CovMatrix::validate_and_factor(s));
        ShapleyVector eta_p = shapley_linear(LinearModel{0.0, bp}, CovMatrix::validate_and_factor(sp));
        for (int i = 0; i < p; ++i)
            REQUIRE(std::abs(eta_p.values(i) - eta.values(perm[static_cast<std::size_t>(i)])) < 1e-12);
    }
}

TEST_CASE("closed Sobol index") {
    CovMatrix rho = cov2(1, 0.5, 0.5, 1);
    REQUIRE(closed_sobol_linear(lm({0, 1}), rho, SubsetMask::empty(2)) == 0.0);
    REQUIRE(closed_sobol_linear(lm({0, 1}), rho, SubsetMask::full(2)) == 1.0);
    REQUIRE(closed_sobol_linear(lm({0, 1}), rho, SubsetMask(0b01, 2)) ==
            Catch::Approx(0.25).margin(1e-12));
}

TEST_CASE("block decomposition") {
    CovMatrix diag = CovMatrix::validate_and_factor(Matrix::Identity(5, 5));
    auto singletons = block_decompose(diag);
    REQUIRE(singletons.size() == 5);

    Matrix two(4, 4);
    two << 2, 0.9, 0, 0,
           0.9, 2, 0, 0,
           0, 0, 3, 1.1,
           0, 0, 1.1, 3;
    auto blocks = block_decompose(CovMatrix::validate_and_factor(two));
    REQUIRE(blocks.size() == 2);
    REQUIRE(blocks[0] == std::vector<int>{0, 1});
    REQUIRE(blocks[1] == std::vector<int>{2, 3});

    RngStream rng(11);
    Matrix dense = test_support::random_pd(6, rng);
    REQUIRE(block_decompose(CovMatrix::validate_and_factor(dense)).size() == 1);
}

TEST_CASE("blockwise shapley on two independent symmetric blocks") {
    Matrix s = Matrix::Identity(4, 4);
    ShapleyVector eta = shapley_linear_blockwise(lm({1, 1, 1, 1}), CovMatrix::validate_and_factor(s));
    for (int i = 0; i < 4; ++i) REQUIRE(eta.values(i) == Catch::Approx(0.25).margin(1e-12));
}

TEST_CASE("blockwise equals full enumeration on block-diagonal covariance") {
    RngStream rng(1212);
    for (int trial = 0; trial < 5; ++trial) {
        const int p = 12;
        Matrix s = Matrix::Zero(p, p);
        for (int b = 0; b < 3; ++b)
            s.block(4 * b, 4 * b, 4, 4) = test_support::random_pd(4, rng);
        Vector beta = test_support::random_vector(p, rng);
        CovMatrix cov = CovMatrix::validate_and_factor(s);
        ShapleyVector full = shapley_linear(LinearModel{0.0, beta}, cov);
        ShapleyVector blocks = shapley_linear_blockwise(LinearModel{0.0, beta}, cov);
        REQUIRE((full.values - blocks.values).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("a zero-coefficient block contributes zeros") {
    Matrix s = Matrix::Identity(4, 4);
    s(0, 1) = s(1, 0) = 0.5;
    s(2, 3) = s(3, 2) = 0.5;
    ShapleyVector eta = shapley_linear_blockwise(lm({1, 1, 0, 0}), CovMatrix::validate_and_factor(s));
    REQUIRE(eta.values(2) == 0.0);
    REQUIRE(eta.values(3) == 0.0);
    REQUIRE(eta.sum() == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("zero model variance is rejected") {
    REQUIRE_THROWS_AS(shapley_linear(lm({0, 0}), cov2(1, 0, 0, 1)), ZeroVarianceModel);
    REQUIRE_THROWS_AS(shapley_linear_blockwise(lm({0, 0}), cov2(1, 0, 0, 1)), ZeroVarianceModel);
}

TEST_CASE("dimension cap") {
    const int p = 26;
    CovMatrix cov = CovMatrix::validate_and_factor(Matrix::Identity(p, p));
    LinearModel model{0.0, Vector::Ones(p)};
    REQUIRE_THROWS_AS(build_cond_var_table(model, cov), DimensionTooLarge);
}

TEST_CASE("blockwise path works beyond the enumeration cap") {
    // p = 30 diagonal covariance: full enumeration is rejected, the
    // blockwise route reduces to the independent-input closed form
    const int p = 30;
    Vector diag(p);
    Vector beta(p);
    RngStream rng(1414);
    for (int i = 0; i < p; ++i) {
        diag(i) = 0.5 + 2.0 * rng.next_uniform();
        beta(i) = rng.next_normal();
    }
    CovMatrix cov = CovMatrix::validate_and_factor(Matrix(diag.asDiagonal()));
    LinearModel model{0.0, beta};
    REQUIRE_THROWS_AS(shapley_linear(model, cov), DimensionTooLarge);

    ShapleyVector eta = shapley_linear_blockwise(model, cov);
    Vector shares = beta.cwiseProduct(beta).cwiseProduct(diag);
    shares /= shares.sum();
    REQUIRE((eta.values - shares).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("threaded table construction matches serial") {
    RngStream rng(1313);
    const int p = 10;
    CovMatrix cov = CovMatrix::validate_and_factor(test_support::random_pd(p, rng));
    LinearModel model{0.0, test_support::random_vector(p, rng)};
    CondVarTable serial = build_cond_var_table(model, cov, 1);
    CondVarTable parallel = build_cond_var_table(model, cov, 4);
    REQUIRE(serial.entries == parallel.entries);
}
