#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "shapley/experiment.hpp"

namespace shapley {

struct CriterionResult {
    std::string id;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

struct AcceptanceReport {
    std::vector<CriterionResult> criteria;

    [[nodiscard]] int total() const { return static_cast<int>(criteria.size()); }
    [[nodiscard]] int passed() const {
        int n = 0;
        for (const auto& c : criteria) n += c.pass;
        return n;
    }
    [[nodiscard]] bool all_passed() const { return passed() == total(); }

    [[nodiscard]] json to_json() const {
        json out;
        out["passed"] = passed();
        out["total"] = total();
        json list = json::array();
        for (const auto& c : criteria)
            list.push_back({{"id", c.id},
                            {"pass", c.pass},
                            {"detail", c.detail},
                            {"seconds", c.seconds}});
        out["criteria"] = list;
        return out;
    }
};

// Exact-path invariants: entries in [0,1] and summing to 1, both within tol.
inline bool check_exact_shapley_invariants(const ShapleyVector& eta, double tol = 1e-10) {
    if (std::abs(eta.sum() - 1.0) > tol) return false;
    for (Eigen::Index i = 0; i < eta.values.size(); ++i)
        if (eta.values(i) < -tol || eta.values(i) > 1.0 + tol) return false;
    return true;
}

namespace detail {

inline Matrix acceptance_random_pd(int p, RngStream& rng) {
    Matrix g(p, p);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) g(i, j) = rng.next_normal();
    Matrix s = g * g.transpose() / static_cast<double>(p) +
               0.3 * Matrix::Identity(p, p);
    Vector d(p);
    for (int i = 0; i < p; ++i) d(i) = 0.5 + 1.5 * rng.next_uniform();
    return d.asDiagonal() * s * d.asDiagonal();
}

inline Vector acceptance_random_vector(int p, RngStream& rng) {
    Vector v(p);
    for (int i = 0; i < p; ++i) v(i) = rng.next_normal();
    return v;
}

inline double median(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

template <typename Fn>
CriterionResult timed_criterion(const std::string& id, double time_limit_s, Fn&& body) {
    CriterionResult result;
    result.id = id;
    StopWatch clock;
    std::ostringstream info;
    bool pass = false;
    try {
        pass = body(info);
    } catch (const std::exception& e) {
        info << " exception: " << e.what();
    }
    result.seconds = clock.elapsed_ms() / 1000.0;
    if (time_limit_s > 0.0 && result.seconds >= time_limit_s) {
        pass = false;
        info << " [exceeded " << time_limit_s << " s budget]";
    }
    result.pass = pass;
    result.detail = info.str();
    return result;
}

} // namespace detail

// A1: on the two-variable benchmark the scaled analytic gap a * |gap|_inf
// equals 2a/(a+2) to machine precision, and the subset-MC oracle recovers
// the closed-form effects within 0.03 on at least 2 of the 3 grid points.
inline CriterionResult acceptance_a1(const ExperimentConfig& base) {
    return detail::timed_criterion("A1", 60.0, [&](std::ostringstream& info) {
        ExperimentConfig config;
        config.experiment = "remark1";
        config.n_grid = {4, 16, 64};
        config.replicates = 1;
        config.seed = 42;
        config.threads = base.threads;
        config.oracle = OracleParams{2000, 100};
        std::vector<ResultRow> rows = run_remark1(config);

        bool algebra_ok = true;
        int oracle_hits = 0;
        for (std::int64_t a_int : config.n_grid) {
            const double a = static_cast<double>(a_int);
            double gap_times_a = std::numeric_limits<double>::quiet_NaN();
            Vector oracle_eta;
            for (const ResultRow& row : rows) {
                if (row.n != a_int) continue;
                if (row.method == "analytic") gap_times_a = row.gap_times_a;
                if (row.method == "oracle") oracle_eta = row.eta;
            }
            const double algebra_err = std::abs(gap_times_a - 2.0 * a / (a + 2.0));
            algebra_ok = algebra_ok && algebra_err <= 1e-12;
            const double e1 = std::abs(oracle_eta(0) - a / (a + 2.0));
            const double e2 = std::abs(oracle_eta(1) - 2.0 / (a + 2.0));
            oracle_hits += e1 <= 0.03 && e2 <= 0.03;
            info << "a=" << a_int << " algebra_err=" << algebra_err
                   << " oracle_err=" << std::max(e1, e2) << "; ";
        }
        info << "oracle_hits=" << oracle_hits << "/3";
        return algebra_ok && oracle_hits >= 2;
    });
}

// A2: randomized self-consistency of the exact path across 1000 pairs with
// p in [2,12]: sum/nonnegativity at 1e-10, scale and permutation
// equivariance at 1e-12, and blockwise agreement on 50 block-diagonal cases.
inline CriterionResult acceptance_a2(const ExperimentConfig&) {
    return detail::timed_criterion("A2", 120.0, [&](std::ostringstream& info) {
        RngStream rng(4242);
        double worst_sum = 0.0;
        double worst_neg = 0.0;
        double worst_scale = 0.0;
        double worst_perm = 0.0;
        for (int trial = 0; trial < 1000; ++trial) {
            const int p = 2 + static_cast<int>(rng.next_below(11)); // [2, 12]
            Matrix s = detail::acceptance_random_pd(p, rng);
            Vector beta = detail::acceptance_random_vector(p, rng);
            CovMatrix cov = CovMatrix::validate_and_factor(s);
            ShapleyVector eta = shapley_linear(LinearModel{0.0, beta}, cov);
            if (!check_exact_shapley_invariants(eta, 1e-10)) return false;
            worst_sum = std::max(worst_sum, std::abs(eta.sum() - 1.0));
            worst_neg = std::max(worst_neg, -eta.values.minCoeff());

            const double c = 0.02 + 50.0 * rng.next_uniform();
            ShapleyVector scaled =
                shapley_linear(LinearModel{0.0, (c * beta).eval()},
                               CovMatrix::validate_and_factor((c * s).eval()));
            worst_scale =
                std::max(worst_scale, (eta.values - scaled.values).cwiseAbs().maxCoeff());

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
                    sp(i, j) =
                        s(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
            }
            ShapleyVector eta_p =
                shapley_linear(LinearModel{0.0, bp}, CovMatrix::validate_and_factor(sp));
            for (int i = 0; i < p; ++i)
                worst_perm = std::max(
                    worst_perm, std::abs(eta_p.values(i) - eta.values(perm[static_cast<std::size_t>(i)])));
        }

        double worst_block = 0.0;
        for (int trial = 0; trial < 50; ++trial) {
            const int p = 12;
            Matrix s = Matrix::Zero(p, p);
            for (int b = 0; b < 3; ++b)
                s.block(4 * b, 4 * b, 4, 4) = detail::acceptance_random_pd(4, rng);
            Vector beta = detail::acceptance_random_vector(p, rng);
            CovMatrix cov = CovMatrix::validate_and_factor(s);
            ShapleyVector full = shapley_linear(LinearModel{0.0, beta}, cov);
            ShapleyVector blocks = shapley_linear_blockwise(LinearModel{0.0, beta}, cov);
            worst_block =
                std::max(worst_block, (full.values - blocks.values).cwiseAbs().maxCoeff());
        }

        info << "worst: sum_err=" << worst_sum << " neg=" << worst_neg
               << " scale=" << worst_scale << " perm=" << worst_perm
               << " blockwise=" << worst_block;
        return worst_sum <= 1e-10 && worst_neg <= 1e-10 && worst_scale <= 1e-12 &&
               worst_perm <= 1e-12 && worst_block <= 1e-10;
    });
}

// A3: desk-scale rerun of the four-variable convergence study.
// (i) finite-difference effects approach the exact-gradient ones at the
// squared-step rate, (ii) the median permutation-MC estimate approaches the
// exact-gradient effects as n grows, (iii) at n=2 the regression surrogate
// deviates more than the exact-gradient surrogate from a high-budget MC
// reference of the true effects in at least 15 of 20 replicates.
inline CriterionResult acceptance_a3(const ExperimentConfig& base) {
    return detail::timed_criterion("A3", 600.0, [&](std::ostringstream& info) {
        ExperimentConfig config;
        config.experiment = "fig1";
        config.n_grid = {2, 4, 8, 16};
        config.replicates = 20;
        config.seed = 4242;
        config.threads = base.threads;
        config.budget_scale = 0.1;
        config.regression_n = 40;
        std::vector<ResultRow> rows = run_fig1(config);

        auto find_rows = [&](std::int64_t n, const std::string& method) {
            std::vector<const ResultRow*> out;
            for (const ResultRow& row : rows)
                if (row.n == n && row.method == method) out.push_back(&row);
            return out;
        };

        // (i) finite-diff vs exact-gradient surrogate, deterministic
        bool fd_monotone = true;
        double prev_gap = std::numeric_limits<double>::infinity();
        double fd_gap_16 = 0.0;
        for (std::int64_t n : config.n_grid) {
            const Vector& taylor = find_rows(n, "taylor").front()->eta;
            const Vector& fd = find_rows(n, "finite_diff").front()->eta;
            const double gap = (fd - taylor).cwiseAbs().maxCoeff();
            fd_monotone = fd_monotone && gap <= prev_gap + 1e-15;
            prev_gap = gap;
            if (n == 16) fd_gap_16 = gap;
            info << "fd_gap(n=" << n << ")=" << gap << "; ";
        }
        const bool fd_ok = fd_monotone && fd_gap_16 < 0.01;

        // (ii) median MC deviation from the exact-gradient surrogate
        auto median_mc_gap = [&](std::int64_t n) {
            const Vector& taylor = find_rows(n, "taylor").front()->eta;
            auto mc_rows = find_rows(n, "perm_mc");
            double worst = 0.0;
            for (int i = 0; i < 4; ++i) {
                std::vector<double> coord;
                coord.reserve(mc_rows.size());
                for (const ResultRow* row : mc_rows) coord.push_back(row->eta(i));
                worst = std::max(worst, std::abs(detail::median(coord) - taylor(i)));
            }
            return worst;
        };
        const double mc_gap_2 = median_mc_gap(2);
        const double mc_gap_16 = median_mc_gap(16);
        const bool mc_ok = mc_gap_16 < mc_gap_2;
        info << "mc_gap(n=2)=" << mc_gap_2 << " mc_gap(n=16)=" << mc_gap_16 << "; ";

        // (iii) regression vs exact-gradient deviation from a reference of
        // the true effects at n=2
        ModelEntry trig = make_trig4_model();
        ShapleyEstimate ref =
            shapley_subset_oracle(trig.model, fig1_spec(2), OracleParams{4000, 200},
                                  RngStream(777));
        const Vector& taylor2 = find_rows(2, "taylor").front()->eta;
        const double taylor_dev = (taylor2 - ref.eta.values).cwiseAbs().maxCoeff();
        int regression_worse = 0;
        double mean_reg_dev = 0.0;
        for (const ResultRow* row : find_rows(2, "regression")) {
            const double dev = (row->eta - ref.eta.values).cwiseAbs().maxCoeff();
            regression_worse += dev > taylor_dev;
            mean_reg_dev += dev / 20.0;
        }
        info << "taylor_dev(n=2)=" << taylor_dev << " mean_regression_dev(n=2)=" << mean_reg_dev
             << " regression_worse=" << regression_worse << "/20 (need >= 15)";
        const bool reg_ok = regression_worse >= 15;

        return fd_ok && mc_ok && reg_ok;
    });
}

// A4: second-order error decay of the central differences on smooth
// functions, and exactness on degree-<=2 polynomials.
inline CriterionResult acceptance_a4(const ExperimentConfig&) {
    return detail::timed_criterion("A4", 0.0, [&](std::ostringstream& info) {
        RngStream rng(12321);
        double worst_low = std::numeric_limits<double>::infinity();
        double worst_high = 0.0;
        for (int trial = 0; trial < 10; ++trial) {
            // centers where the third derivative of both test functions is
            // bounded away from zero, so the h^2 term dominates
            const double x0 = 0.2 + rng.next_uniform();
            for (int which = 0; which < 2; ++which) {
                BlackBoxModel f(1, [which](const Vector& x) {
                    return which == 0 ? std::exp(x(0)) : std::sin(x(0));
                });
                const double truth = which == 0 ? std::exp(x0) : std::cos(x0);
                double prev_err = -1.0;
                for (double h : {0.1, 0.05, 0.025}) {
                    Vector g = finite_diff_gradient(f, Vector::Constant(1, x0),
                                                    StepVector(Vector::Constant(1, h)));
                    const double err = std::abs(g(0) - truth);
                    if (prev_err > 0.0) {
                        const double ratio = prev_err / err;
                        worst_low = std::min(worst_low, ratio);
                        worst_high = std::max(worst_high, ratio);
                    }
                    prev_err = err;
                }
            }
        }
        info << "halving ratios in [" << worst_low << ", " << worst_high << "]; ";

        double worst_quad = 0.0;
        for (int trial = 0; trial < 20; ++trial) {
            const int p = 1 + static_cast<int>(rng.next_below(5));
            Matrix q = detail::acceptance_random_pd(p, rng);
            Vector b = detail::acceptance_random_vector(p, rng);
            const double c = rng.next_normal();
            BlackBoxModel quad(
                p, [q, b, c](const Vector& x) { return x.dot(q * x) + b.dot(x) + c; });
            Vector center = detail::acceptance_random_vector(p, rng);
            Vector g = finite_diff_gradient(quad, center,
                                            StepVector(Vector::Constant(p, 0.25)));
            Vector truth = 2.0 * q * center + b;
            worst_quad = std::max(worst_quad,
                                  (g - truth).norm() / (1.0 + truth.norm()));
        }
        info << "quadratic_rel_err=" << worst_quad;
        return worst_low >= 3.5 && worst_high <= 4.5 && worst_quad <= 1e-9;
    });
}

// A5: regression recovery from p + 1 noise-free generic points, and
// rejection of rank-deficient designs.
inline CriterionResult acceptance_a5(const ExperimentConfig&) {
    return detail::timed_criterion("A5", 0.0, [&](std::ostringstream& info) {
        RngStream rng(55555);
        double worst = 0.0;
        for (int trial = 0; trial < 25; ++trial) {
            const int p = 1 + static_cast<int>(rng.next_below(6));
            const Eigen::Index n = p + 1;
            SampleBatch batch;
            batch.inputs.resize(n, p);
            for (Eigen::Index i = 0; i < n; ++i)
                for (int j = 0; j < p; ++j) batch.inputs(i, j) = rng.next_normal();
            Vector beta = detail::acceptance_random_vector(p, rng);
            const double intercept = rng.next_normal();
            batch.attach_outputs(batch.inputs * beta + Vector::Constant(n, intercept));

            RegressionFit fit = fit_linear_regression(batch);
            worst = std::max(worst, (fit.model.coeffs - beta).cwiseAbs().maxCoeff());
            worst = std::max(worst, std::abs(fit.model.intercept - intercept));
        }
        info << "worst_coefficient_err=" << worst << "; ";

        bool rejected = false;
        SampleBatch degenerate;
        degenerate.inputs.resize(8, 2);
        for (int i = 0; i < 8; ++i) {
            degenerate.inputs(i, 0) = rng.next_normal();
            degenerate.inputs(i, 1) = -3.0 * degenerate.inputs(i, 0);
        }
        degenerate.attach_outputs(Vector::Ones(8));
        try {
            fit_linear_regression(degenerate);
        } catch (const RankDeficient&) {
            rejected = true;
        }
        info << "rank_deficient_rejected=" << rejected;
        return worst <= 1e-8 && rejected;
    });
}

// A6: the empirical-mean pipeline at 200 replicates. The GLA spread
// tightens with n, stays below the kNN spread at n=100, and every GLA
// estimate is faster than its kNN counterpart.
inline CriterionResult acceptance_a6(const ExperimentConfig& base) {
    return detail::timed_criterion("A6", 900.0, [&](std::ostringstream& info) {
        ExperimentConfig config;
        config.experiment = "empirical42";
        config.n_grid = {100, 1000};
        config.replicates = 200;
        config.seed = 4242;
        config.threads = base.threads;
        std::vector<ResultRow> rows = run_empirical42(config);

        auto replicate_sd = [&](std::int64_t n, const std::string& method) {
            Matrix etas(config.replicates, 5);
            Eigen::Index r = 0;
            for (const ResultRow& row : rows)
                if (row.n == n && row.method == method) etas.row(r++) = row.eta.transpose();
            Eigen::RowVectorXd mean = etas.colwise().mean();
            return ((etas.rowwise() - mean).colwise().squaredNorm() /
                    static_cast<double>(config.replicates - 1))
                .cwiseSqrt()
                .transpose()
                .eval();
        };
        Vector gla_100 = replicate_sd(100, "gla");
        Vector gla_1000 = replicate_sd(1000, "gla");
        Vector knn_100 = replicate_sd(100, "knn");
        bool sd_shrinks = true;
        bool gla_below_knn = true;
        for (int i = 0; i < 5; ++i) {
            sd_shrinks = sd_shrinks && gla_1000(i) < gla_100(i);
            gla_below_knn = gla_below_knn && gla_100(i) < knn_100(i);
        }
        info << "gla_sd(100)=" << gla_100.maxCoeff() << " gla_sd(1000)=" << gla_1000.maxCoeff()
               << " knn_sd(100)=" << knn_100.maxCoeff() << "; ";

        // A paired GLA estimate costs well under a millisecond while its kNN
        // counterpart costs tens of milliseconds, so a violation on a loaded
        // box is scheduler preemption, not estimator cost. Violating pairs
        // are re-measured serially and alone; only a repeat offence counts.
        int timing_violations = 0;
        int remeasured = 0;
        for (const ResultRow& row : rows) {
            if (row.method != "gla") continue;
            for (const ResultRow& other : rows) {
                if (other.method != "knn" || other.n != row.n ||
                    other.replicate != row.replicate)
                    continue;
                if (row.wall_time_ms < other.wall_time_ms) continue;
                if (++remeasured > 20) {
                    ++timing_violations; // too many to be noise
                    continue;
                }
                ExperimentConfig retry = config;
                retry.n_grid = {row.n};
                retry.replicates = 1;
                retry.threads = 1;
                std::vector<ResultRow> pair = run_empirical42(retry);
                timing_violations += !(pair[0].wall_time_ms < pair[1].wall_time_ms);
            }
        }
        info << "timing_violations=" << timing_violations << "/"
               << config.n_grid.size() * static_cast<std::size_t>(config.replicates)
               << " (remeasured " << remeasured << ")";
        return sd_shrinks && gla_below_knn && timing_violations == 0;
    });
}

// A7: the exact path stays interactive at p = 15 and the blockwise path
// handles p = 24 split into four independent 6-blocks.
inline CriterionResult acceptance_a7(const ExperimentConfig&) {
    return detail::timed_criterion("A7", 0.0, [&](std::ostringstream& info) {
        RngStream rng(7777);
        {
            const int p = 15;
            Matrix s = detail::acceptance_random_pd(p, rng);
            Vector beta = detail::acceptance_random_vector(p, rng);
            detail::StopWatch clock;
            ShapleyVector eta =
                shapley_linear(LinearModel{0.0, beta}, CovMatrix::validate_and_factor(s), 1);
            const double seconds = clock.elapsed_ms() / 1000.0;
            info << "p=15 full enumeration " << seconds << " s; ";
            if (!(seconds < 5.0) || !check_exact_shapley_invariants(eta)) return false;
        }
        {
            const int p = 24;
            Matrix s = Matrix::Zero(p, p);
            for (int b = 0; b < 4; ++b)
                s.block(6 * b, 6 * b, 6, 6) = detail::acceptance_random_pd(6, rng);
            Vector beta = detail::acceptance_random_vector(p, rng);
            detail::StopWatch clock;
            ShapleyVector eta = shapley_linear_blockwise(LinearModel{0.0, beta},
                                                         CovMatrix::validate_and_factor(s));
            const double seconds = clock.elapsed_ms() / 1000.0;
            info << "p=24 blockwise " << seconds << " s";
            if (!(seconds < 5.0) || !check_exact_shapley_invariants(eta)) return false;
        }
        return true;
    });
}

// A8: byte-identical primary CSV at 1 and 8 worker threads for both
// randomized experiments.
inline CriterionResult acceptance_a8(const ExperimentConfig&) {
    return detail::timed_criterion("A8", 0.0, [&](std::ostringstream& info) {
        auto csv_for = [&](const std::string& experiment, int threads) {
            ExperimentConfig config;
            config.experiment = experiment;
            config.seed = 20240807;
            config.threads = threads;
            config.replicates = 3;
            if (experiment == "fig1") {
                config.n_grid = {2, 4};
                config.budget_scale = 0.05;
            } else {
                config.n_grid = {50, 100};
                config.knn.batch = 200;
            }
            std::vector<ResultRow> rows =
                experiment == "fig1" ? run_fig1(config) : run_empirical42(config);
            std::ostringstream out;
            write_csv(rows, out);
            return out.str();
        };
        const bool fig1_ok = csv_for("fig1", 1) == csv_for("fig1", 8);
        const bool emp_ok = csv_for("empirical42", 1) == csv_for("empirical42", 8);
        info << "fig1_identical=" << fig1_ok << " empirical42_identical=" << emp_ok;
        return fig1_ok && emp_ok;
    });
}

// Runs every criterion; config contributes only the worker thread count.
inline AcceptanceReport run_acceptance(const ExperimentConfig& config) {
    AcceptanceReport report;
    report.criteria.push_back(acceptance_a1(config));
    report.criteria.push_back(acceptance_a2(config));
    report.criteria.push_back(acceptance_a3(config));
    report.criteria.push_back(acceptance_a4(config));
    report.criteria.push_back(acceptance_a5(config));
    report.criteria.push_back(acceptance_a6(config));
    report.criteria.push_back(acceptance_a7(config));
    report.criteria.push_back(acceptance_a8(config));
    return report;
}

} // namespace shapley
