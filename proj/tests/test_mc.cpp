#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "shapley/mc.hpp"
#include "shapley/models.hpp"
#include "test_support.hpp"

using namespace shapley;

namespace {

GaussianSpec iso_spec(int p, double variance) {
    return GaussianSpec(Vector::Zero(p),
                        CovMatrix::validate_and_factor(variance * Matrix::Identity(p, p)));
}

// Inputs N(0, I/a) with f(x) = x1 + x2^2 give closed-form effects
// (a/(a+2), 2/(a+2)); the workhorse nonlinear check.
Vector remark1_truth(double a) {
    Vector eta(2);
    eta << a / (a + 2.0), 2.0 / (a + 2.0);
    return eta;
}

} // namespace

TEST_CASE("double MC short-circuits the empty and full subsets") {
    ModelEntry linear = make_linear_model(Vector::Ones(2));
    GaussianSpec spec = iso_spec(2, 1.0);
    OracleParams params{50, 5};
    REQUIRE(double_mc_closed_sobol(linear.model, spec, SubsetMask::empty(2), params, RngStream(1))
                .value == 0.0);
    REQUIRE(double_mc_closed_sobol(linear.model, spec, SubsetMask::full(2), params, RngStream(1))
                .value == 1.0);
}

TEST_CASE("double MC matches the closed form on linear models") {
    RngStream rng(4242);
    const int p = 3;
    Matrix s = test_support::random_pd(p, rng);
    Vector beta = test_support::random_vector(p, rng);
    CovMatrix cov = CovMatrix::validate_and_factor(s);
    GaussianSpec spec(test_support::random_vector(p, rng), cov);
    ModelEntry linear = make_linear_model(beta);
    LinearModel lm{0.0, beta};

    OracleParams params{1500, 40};
    for (std::uint32_t bits : {0b001u, 0b011u, 0b110u}) {
        SubsetMask u(bits, p);
        McEstimate est = double_mc_closed_sobol(linear.model, spec, u, params, rng.child(bits));
        const double truth = closed_sobol_linear(lm, cov, u);
        INFO("subset bits " << bits << " est " << est.value << " truth " << truth << " se "
                            << est.std_error);
        REQUIRE(std::abs(est.value - truth) <= 3.0 * est.std_error);
        REQUIRE(est.value > -0.1);
        REQUIRE(est.value < 1.1);
    }
}

TEST_CASE("double MC reproduces the nonlinear closed form") {
    // V(E(Y|X1))/V(Y) = (1/4) / (1/4 + 2/16) = 2/3 at a = 4
    ModelEntry rem = make_remark1_model();
    GaussianSpec spec = iso_spec(2, 0.25);
    McEstimate est = double_mc_closed_sobol(rem.model, spec, SubsetMask(0b01, 2),
                                            OracleParams{2000, 100}, RngStream(7));
    REQUIRE(std::abs(est.value - 2.0 / 3.0) < 0.03);
}

TEST_CASE("subset oracle on a linear model") {
    ModelEntry linear = make_linear_model((Vector(2) << 1, 2).finished());
    GaussianSpec spec = iso_spec(2, 1.0);
    ShapleyEstimate est =
        shapley_subset_oracle(linear.model, spec, OracleParams{1500, 40}, RngStream(99));
    REQUIRE(est.eta.sum() == Catch::Approx(1.0).margin(1e-12)); // telescoping is exact
    REQUIRE(std::abs(est.eta.values(0) - 0.2) <= 3.0 * est.std_error(0));
    REQUIRE(std::abs(est.eta.values(1) - 0.8) <= 3.0 * est.std_error(1));
}

TEST_CASE("subset oracle tracks the exact path across random instances") {
    RngStream rng(31415);
    int within = 0;
    const int cases = 20;
    for (int trial = 0; trial < cases; ++trial) {
        const int p = 2 + static_cast<int>(rng.next_below(5)); // p in [2,6]
        Matrix s = test_support::random_pd(p, rng);
        Vector beta = test_support::random_vector(p, rng);
        CovMatrix cov = CovMatrix::validate_and_factor(s);
        GaussianSpec spec(test_support::random_vector(p, rng), cov);
        ModelEntry linear = make_linear_model(beta);

        ShapleyEstimate est = shapley_subset_oracle(linear.model, spec, OracleParams{800, 30},
                                                    rng.child(static_cast<std::uint64_t>(trial)));
        ShapleyVector truth = shapley_linear(LinearModel{0.0, beta}, cov);
        bool ok = true;
        for (int i = 0; i < p; ++i)
            ok = ok && std::abs(est.eta.values(i) - truth.values(i)) <=
                           3.0 * std::max(est.std_error(i), 1e-6);
        within += ok;
    }
    INFO("instances within 3 SE: " << within << "/" << cases);
    REQUIRE(within >= 18);
}

TEST_CASE("subset oracle on the nonlinear benchmark") {
    ModelEntry rem = make_remark1_model();
    ShapleyEstimate est = shapley_subset_oracle(rem.model, iso_spec(2, 0.25),
                                                OracleParams{2000, 100}, RngStream(555));
    Vector truth = remark1_truth(4.0);
    REQUIRE(std::abs(est.eta.values(0) - truth(0)) < 0.03);
    REQUIRE(std::abs(est.eta.values(1) - truth(1)) < 0.03);
}

TEST_CASE("subset oracle respects symmetry") {
    ModelEntry linear = make_linear_model(Vector::Ones(2));
    ShapleyEstimate est = shapley_subset_oracle(linear.model, iso_spec(2, 1.0),
                                                OracleParams{1000, 20}, RngStream(2718));
    REQUIRE(std::abs(est.eta.values(0) - 0.5) < 0.05);
    REQUIRE(std::abs(est.eta.values(1) - 0.5) < 0.05);
}

TEST_CASE("subset oracle dimension cap") {
    ModelEntry linear = make_linear_model(Vector::Ones(13));
    REQUIRE_THROWS_AS(
        shapley_subset_oracle(linear.model, iso_spec(13, 1.0), OracleParams{}, RngStream(0)),
        DimensionTooLarge);
}

TEST_CASE("permutation estimator on a linear model") {
    ModelEntry linear = make_linear_model((Vector(2) << 1, 2).finished());
    PermEstimatorParams params{10000, 500, 3, 1};
    ShapleyEstimate est = shapley_perm_mc(linear.model, iso_spec(2, 1.0), params, RngStream(11));
    REQUIRE(est.eta.sum() == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(std::abs(est.eta.values(0) - 0.2) < 0.05);
    REQUIRE(std::abs(est.eta.values(1) - 0.8) < 0.05);
}

TEST_CASE("permutation estimator on the nonlinear benchmark") {
    ModelEntry rem = make_remark1_model();
    PermEstimatorParams params{10000, 500, 3, 1};
    ShapleyEstimate est = shapley_perm_mc(rem.model, iso_spec(2, 0.125), params, RngStream(13));
    Vector truth = remark1_truth(8.0);
    REQUIRE(std::abs(est.eta.values(0) - truth(0)) < 0.05);
    REQUIRE(std::abs(est.eta.values(1) - truth(1)) < 0.05);
}

TEST_CASE("permutation estimator with a single variable") {
    ModelEntry linear = make_linear_model((Vector(1) << 3).finished());
    ShapleyEstimate est =
        shapley_perm_mc(linear.model, iso_spec(1, 2.0), PermEstimatorParams{10, 5, 3, 1},
                        RngStream(1));
    REQUIRE(est.eta.values(0) == 1.0);
}

TEST_CASE("permutation estimator is deterministic across thread counts") {
    ModelEntry rem = make_remark1_model();
    PermEstimatorParams params{2000, 100, 3, 1};
    ShapleyEstimate one = shapley_perm_mc(rem.model, iso_spec(2, 0.25), params, RngStream(21), 1);
    ShapleyEstimate four = shapley_perm_mc(rem.model, iso_spec(2, 0.25), params, RngStream(21), 4);
    REQUIRE(one.eta.values == four.eta.values);
    REQUIRE(one.std_error == four.std_error);
}

TEST_CASE("averaging 50 independent runs shrinks the error at the root-m rate") {
    ModelEntry rem = make_remark1_model();
    GaussianSpec spec = iso_spec(2, 0.25);
    const Vector truth = remark1_truth(4.0);
    PermEstimatorParams params{5000, 200, 3, 1};

    // Squared errors are pooled over several independent 50-run groups so
    // the averaged-run error has enough degrees of freedom to be stable.
    const int group_size = 50;
    const int groups = 12;
    RngStream rng(1618);
    double sq_err_single = 0.0;
    double sq_err_avg = 0.0;
    for (int g = 0; g < groups; ++g) {
        Vector group_mean = Vector::Zero(2);
        for (int r = 0; r < group_size; ++r) {
            ShapleyEstimate est = shapley_perm_mc(
                rem.model, spec, params,
                rng.child(static_cast<std::uint64_t>(g * group_size + r)));
            group_mean += est.eta.values;
            sq_err_single += (est.eta.values - truth).squaredNorm();
        }
        group_mean /= static_cast<double>(group_size);
        sq_err_avg += (group_mean - truth).squaredNorm();
    }
    const double rmse_single = std::sqrt(sq_err_single / (groups * group_size));
    const double rmse_avg = std::sqrt(sq_err_avg / groups);
    const double factor = rmse_single / rmse_avg;
    INFO("rmse_single " << rmse_single << " rmse_avg " << rmse_avg << " factor " << factor);
    REQUIRE(factor > 5.0);
    REQUIRE(factor < 10.0);
}

TEST_CASE("the conditional variance table matches double MC on the trig surrogate") {
    // linear surrogate of the four-variable trigonometric model at n = 1:
    // gradient taken at mu + 1, covariance the full Gram matrix
    ModelEntry trig = make_trig4_model();
    Vector mu1 = (Vector(4) << 2, 1, 3, 2).finished();
    Matrix a(4, 4);
    a << -2, -1, 0, 1,
          2, -2, -1, 0,
          1, 2, -2, -1,
          0, 1, 2, -2;
    CovMatrix sigma = CovMatrix::validate_and_factor((a.transpose() * a).eval());
    LinearModel surrogate = taylor_linear(trig.gradient(mu1), mu1, 0.0);
    CondVarTable table = build_cond_var_table(surrogate, sigma);

    ModelEntry surrogate_box = make_linear_model(surrogate.coeffs, surrogate.intercept);
    GaussianSpec spec(mu1, sigma);
    for (std::uint32_t bits : {0b0001u, 0b0110u, 0b1011u}) {
        SubsetMask u(bits, 4);
        const double closed = 1.0 - table.entries[bits] / table.var_y();
        McEstimate est = double_mc_closed_sobol(surrogate_box.model, spec, u,
                                                OracleParams{1500, 40}, RngStream(bits));
        INFO("bits " << bits << " closed " << closed << " mc " << est.value);
        REQUIRE(std::abs(est.value - closed) <= 3.0 * est.std_error);
    }
}

TEST_CASE("estimator outputs sum to one within the soft budget") {
    ModelEntry rem = make_remark1_model();
    GaussianSpec spec = iso_spec(2, 0.25);
    ShapleyEstimate perm =
        shapley_perm_mc(rem.model, spec, PermEstimatorParams{2000, 100, 3, 1}, RngStream(5));
    ShapleyEstimate oracle =
        shapley_subset_oracle(rem.model, spec, OracleParams{200, 10}, RngStream(6));
    REQUIRE(perm.eta.within_soft_bounds(0.1));
    REQUIRE(oracle.eta.within_soft_bounds(0.1));
}
