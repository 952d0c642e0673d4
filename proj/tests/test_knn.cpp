#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "shapley/empirical.hpp"
#include "shapley/mc.hpp"
#include "shapley/models.hpp"
#include "test_support.hpp"

using namespace shapley;

TEST_CASE("constant output explains nothing") {
    GaussianSpec spec(Vector::Zero(2), CovMatrix::validate_and_factor(Matrix::Identity(2, 2)));
    SampleBatch batch = sample_marginal(spec, 1000, RngStream(3));
    batch.attach_outputs(Vector::Constant(1000, 4.2));
    McEstimate est = knn_closed_sobol(batch, SubsetMask(0b01, 2), 10);
    REQUIRE(est.value == 0.0);
}

TEST_CASE("a fully explanatory coordinate scores near one") {
    GaussianSpec spec(Vector::Zero(2), CovMatrix::validate_and_factor(Matrix::Identity(2, 2)));
    SampleBatch batch = sample_marginal(spec, 10000, RngStream(17));
    batch.attach_outputs(batch.inputs.col(0));
    McEstimate est = knn_closed_sobol(batch, SubsetMask(0b01, 2), 50);
    INFO("estimate " << est.value << " se " << est.std_error);
    REQUIRE(std::abs(est.value - 1.0) < 0.05);
}

TEST_CASE("degenerate conditioning coordinates are rejected") {
    SampleBatch batch;
    batch.inputs.resize(500, 2);
    RngStream rng(5);
    for (int i = 0; i < 500; ++i) {
        batch.inputs(i, 0) = 1.0; // constant column
        batch.inputs(i, 1) = rng.next_normal();
    }
    batch.attach_outputs(batch.inputs.col(1));
    REQUIRE_THROWS_AS(knn_closed_sobol(batch, SubsetMask(0b01, 2), 5), DegenerateCoordinates);
}

TEST_CASE("parameter validation") {
    GaussianSpec spec(Vector::Zero(2), CovMatrix::validate_and_factor(Matrix::Identity(2, 2)));
    SampleBatch batch = sample_marginal(spec, 100, RngStream(9));
    batch.attach_outputs(batch.inputs.col(0));
    REQUIRE_THROWS_AS(knn_closed_sobol(batch, SubsetMask(0b01, 2), 1), Error);   // k too small
    REQUIRE_THROWS_AS(knn_closed_sobol(batch, SubsetMask(0b01, 2), 20), Error);  // N < 10k
    REQUIRE_THROWS_AS(knn_closed_sobol(batch, SubsetMask::empty(2), 5), Error);
}

TEST_CASE("kNN agrees with double MC on a moment-matched Gaussian surrogate") {
    // Empirical-mean inputs (n = 100 summands) of the dependent 5-variable
    // suite, squared-norm output.
    BaseSampler base = section42_sampler();
    const std::int64_t n_terms = 100;
    const Eigen::Index batch_size = 10000;

    RngStream rng(2024);
    SampleBatch batch;
    batch.seed_tag = rng.key();
    batch.inputs.resize(batch_size, 5);
    for (Eigen::Index i = 0; i < batch_size; ++i)
        batch.inputs.row(i) =
            sample_empirical_mean(base, n_terms, rng.child(static_cast<std::uint64_t>(i)))
                .transpose();
    ModelEntry sq = make_sqnorm_model(5);
    Vector y(batch_size);
    for (Eigen::Index i = 0; i < batch_size; ++i) y(i) = sq.model(batch.inputs.row(i).transpose());
    batch.attach_outputs(y);

    McEstimate knn = knn_closed_sobol(batch, SubsetMask(0b00001, 5), 50, 2000);

    // Gaussian surrogate with the batch's own first two moments.
    Vector mean_hat = batch.inputs.colwise().mean().transpose();
    Matrix cov_hat = test_support::sample_cov(batch.inputs);
    GaussianSpec surrogate(mean_hat, CovMatrix::validate_and_factor(cov_hat));
    McEstimate dmc = double_mc_closed_sobol(sq.model, surrogate, SubsetMask(0b00001, 5),
                                            OracleParams{2000, 50}, RngStream(404));

    INFO("knn " << knn.value << " double-mc " << dmc.value);
    REQUIRE(std::abs(knn.value - dmc.value) < 0.1);
}

TEST_CASE("aggregated kNN effects sum to one and match structure") {
    // Additive independent model: eta = (0.2, 0.8) for beta = (1, 2).
    GaussianSpec spec(Vector::Zero(2), CovMatrix::validate_and_factor(Matrix::Identity(2, 2)));
    SampleBatch batch = sample_marginal(spec, 5000, RngStream(31));
    batch.attach_outputs(batch.inputs.col(0) + 2.0 * batch.inputs.col(1));
    ShapleyEstimate est = knn_shapley_aggregate(batch, 30, 1000);
    REQUIRE(est.eta.sum() == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(std::abs(est.eta.values(0) - 0.2) < 0.1);
    REQUIRE(std::abs(est.eta.values(1) - 0.8) < 0.1);
}
