#pragma once

// Shared helpers for the test suites.

#include <Eigen/Dense>

#include "shapley/gaussian.hpp"
#include "shapley/rng.hpp"

namespace test_support {

// Random well-conditioned PD matrix: G G^T / p + 0.3 I, then a random
// diagonal rescaling so entries are not all on the same scale.
inline Eigen::MatrixXd random_pd(int p, shapley::RngStream& rng) {
    Eigen::MatrixXd g(p, p);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) g(i, j) = rng.next_normal();
    Eigen::MatrixXd s = g * g.transpose() / static_cast<double>(p) +
                        0.3 * Eigen::MatrixXd::Identity(p, p);
    Eigen::VectorXd d(p);
    for (int i = 0; i < p; ++i) d(i) = 0.5 + 1.5 * rng.next_uniform();
    return d.asDiagonal() * s * d.asDiagonal();
}

inline Eigen::VectorXd random_vector(int p, shapley::RngStream& rng) {
    Eigen::VectorXd v(p);
    for (int i = 0; i < p; ++i) v(i) = rng.next_normal();
    return v;
}

// Covariance of the rows of a batch, unbiased (N-1) normalization.
inline Eigen::MatrixXd sample_cov(const Eigen::MatrixXd& rows) {
    Eigen::RowVectorXd mean = rows.colwise().mean();
    Eigen::MatrixXd centered = rows.rowwise() - mean;
    return centered.transpose() * centered / static_cast<double>(rows.rows() - 1);
}

} // namespace test_support
