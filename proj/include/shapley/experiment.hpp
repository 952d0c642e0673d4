#pragma once

#include <atomic>
#include <mutex>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "shapley/empirical.hpp"
#include "shapley/exact.hpp"
#include "shapley/mc.hpp"
#include "shapley/models.hpp"

namespace shapley {

using json = nlohmann::json;

struct KnnParams {
    int k = 3;
    std::int64_t batch = 1000;
    std::int64_t anchors = 0; // 0 = every sample point
};

// One JSON document drives a whole run; unknown keys are errors so a typo
// cannot silently fall back to a default budget.
struct ExperimentConfig {
    std::string experiment; // fig1 | remark1 | empirical42 | custom
    std::vector<std::int64_t> n_grid = {2, 4, 8, 16, 32};
    int replicates = 1;
    std::uint64_t seed = 0;
    int threads = 0; // 0 = one worker per hardware thread
    double budget_scale = 1.0;
    std::string output;

    PermEstimatorParams perm;
    OracleParams oracle;
    std::int64_t regression_n = 40;
    KnnParams knn;

    // custom-model inputs (exact / linearize subcommands)
    std::string model_name;
    std::optional<Vector> model_coeffs;
    double model_intercept = 0.0;
    int model_dim = 5;
    std::optional<Vector> mean;
    std::optional<Matrix> cov;
    std::string sampler = "section42";
    std::optional<Vector> sampler_value;
    std::string method = "finite-diff";

    [[nodiscard]] int resolved_threads() const {
        if (threads > 0) return threads;
        const unsigned hw = std::thread::hardware_concurrency();
        return hw > 0 ? static_cast<int>(hw) : 1;
    }

    void validate() const {
        if (n_grid.empty()) throw ConfigError("n_grid must not be empty");
        for (std::size_t i = 0; i < n_grid.size(); ++i) {
            if (n_grid[i] < 1) throw ConfigError("n_grid entries must be positive");
            if (i > 0 && n_grid[i] <= n_grid[i - 1])
                throw ConfigError("n_grid must be strictly ascending");
        }
        if (replicates < 1) throw ConfigError("replicates must be >= 1");
        if (budget_scale <= 0.0) throw ConfigError("budget_scale must be positive");
        if (threads < 0) throw ConfigError("threads must be >= 0");
        if (regression_n < 2) throw ConfigError("regression_n must be >= 2");
        if (knn.k < 2) throw ConfigError("knn.k must be > 1");
        if (knn.batch < 10 * knn.k) throw ConfigError("knn.batch must be at least 10 * knn.k");
        try {
            perm.validate();
            oracle.validate();
        } catch (const Error& e) {
            throw ConfigError(e.what());
        }
    }

    [[nodiscard]] json resolved() const {
        json j;
        j["experiment"] = experiment;
        j["n_grid"] = n_grid;
        j["replicates"] = replicates;
        j["seed"] = seed;
        j["threads"] = threads;
        j["budget_scale"] = budget_scale;
        j["output"] = output;
        j["perm"] = {{"n_var", perm.n_var},
                     {"n_perms", perm.n_perms},
                     {"n_inner", perm.n_inner},
                     {"n_outer_per_prefix", perm.n_outer_per_prefix}};
        j["oracle"] = {{"n_outer", oracle.n_outer}, {"n_inner", oracle.n_inner}};
        j["regression_n"] = regression_n;
        j["knn"] = {{"k", knn.k}, {"batch", knn.batch}, {"anchors", knn.anchors}};
        if (!model_name.empty()) j["model"] = model_name;
        if (!sampler.empty()) j["sampler"] = sampler;
        j["method"] = method;
        return j;
    }
};

namespace detail {

inline void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed,
                                const std::string& where) {
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* key : allowed) known = known || item.key() == key;
        if (!known)
            throw ConfigError("unknown config key \"" + where + item.key() + "\"");
    }
}

inline Vector parse_vector(const json& j, const std::string& where) {
    if (!j.is_array() || j.empty())
        throw ConfigError(where + " must be a non-empty array of numbers");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ConfigError(where + " must contain only numbers");
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
}

inline Matrix parse_matrix(const json& j, const std::string& where) {
    if (!j.is_array() || j.empty()) throw ConfigError(where + " must be an array of rows");
    const std::size_t rows = j.size();
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(rows));
    for (std::size_t r = 0; r < rows; ++r) {
        if (!j[r].is_array() || j[r].size() != rows)
            throw ConfigError(where + " must be square");
        for (std::size_t c = 0; c < rows; ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
    }
    return m;
}

} // namespace detail

inline ExperimentConfig parse_config(const json& j) {
    detail::reject_unknown_keys(
        j,
        {"experiment", "n_grid", "replicates", "seed", "threads", "budget_scale", "output",
         "perm", "oracle", "regression_n", "knn", "model", "gaussian", "sampler", "method"},
        "");
    ExperimentConfig cfg;
    if (j.contains("experiment")) cfg.experiment = j["experiment"].get<std::string>();
    if (j.contains("n_grid")) cfg.n_grid = j["n_grid"].get<std::vector<std::int64_t>>();
    if (j.contains("replicates")) cfg.replicates = j["replicates"].get<int>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("threads")) cfg.threads = j["threads"].get<int>();
    if (j.contains("budget_scale")) cfg.budget_scale = j["budget_scale"].get<double>();
    if (j.contains("output")) cfg.output = j["output"].get<std::string>();
    if (j.contains("perm")) {
        const json& p = j["perm"];
        detail::reject_unknown_keys(p, {"n_var", "n_perms", "n_inner", "n_outer_per_prefix"},
                                    "perm.");
        if (p.contains("n_var")) cfg.perm.n_var = p["n_var"].get<std::int64_t>();
        if (p.contains("n_perms")) cfg.perm.n_perms = p["n_perms"].get<std::int64_t>();
        if (p.contains("n_inner")) cfg.perm.n_inner = p["n_inner"].get<std::int64_t>();
        if (p.contains("n_outer_per_prefix"))
            cfg.perm.n_outer_per_prefix = p["n_outer_per_prefix"].get<std::int64_t>();
    }
    if (j.contains("oracle")) {
        const json& o = j["oracle"];
        detail::reject_unknown_keys(o, {"n_outer", "n_inner"}, "oracle.");
        if (o.contains("n_outer")) cfg.oracle.n_outer = o["n_outer"].get<std::int64_t>();
        if (o.contains("n_inner")) cfg.oracle.n_inner = o["n_inner"].get<std::int64_t>();
    }
    if (j.contains("regression_n")) cfg.regression_n = j["regression_n"].get<std::int64_t>();
    if (j.contains("knn")) {
        const json& k = j["knn"];
        detail::reject_unknown_keys(k, {"k", "batch", "anchors"}, "knn.");
        if (k.contains("k")) cfg.knn.k = k["k"].get<int>();
        if (k.contains("batch")) cfg.knn.batch = k["batch"].get<std::int64_t>();
        if (k.contains("anchors")) cfg.knn.anchors = k["anchors"].get<std::int64_t>();
    }
    if (j.contains("model")) {
        const json& m = j["model"];
        detail::reject_unknown_keys(m, {"name", "coeffs", "intercept", "dim"}, "model.");
        if (m.contains("name")) cfg.model_name = m["name"].get<std::string>();
        if (m.contains("coeffs")) cfg.model_coeffs = detail::parse_vector(m["coeffs"], "model.coeffs");
        if (m.contains("intercept")) cfg.model_intercept = m["intercept"].get<double>();
        if (m.contains("dim")) cfg.model_dim = m["dim"].get<int>();
    }
    if (j.contains("gaussian")) {
        const json& g = j["gaussian"];
        detail::reject_unknown_keys(g, {"mean", "cov"}, "gaussian.");
        if (g.contains("mean")) cfg.mean = detail::parse_vector(g["mean"], "gaussian.mean");
        if (g.contains("cov")) cfg.cov = detail::parse_matrix(g["cov"], "gaussian.cov");
    }
    if (j.contains("sampler")) {
        const json& s = j["sampler"];
        if (s.is_string()) {
            cfg.sampler = s.get<std::string>();
        } else {
            detail::reject_unknown_keys(s, {"name", "value"}, "sampler.");
            if (s.contains("name")) cfg.sampler = s["name"].get<std::string>();
            if (s.contains("value"))
                cfg.sampler_value = detail::parse_vector(s["value"], "sampler.value");
        }
    }
    if (j.contains("method")) cfg.method = j["method"].get<std::string>();
    cfg.validate();
    return cfg;
}

inline ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
    return parse_config(j);
}

// One emitted estimate. wall_time_ms is written to a timing sidecar, never
// to the primary CSV, which must be byte-identical across thread counts.
struct ResultRow {
    std::string experiment;
    std::string method;
    std::int64_t n = 0;
    int replicate = 0;
    Vector eta;
    Vector se; // empty for deterministic methods
    std::uint64_t eval_count = 0;
    double wall_time_ms = 0.0;
    double gap_inf = std::numeric_limits<double>::quiet_NaN();     // remark1 analytic rows
    double gap_times_a = std::numeric_limits<double>::quiet_NaN(); // remark1 analytic rows
};

namespace detail {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class StopWatch {
public:
    StopWatch() : start_(std::chrono::steady_clock::now()) {}
    [[nodiscard]] double elapsed_ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                         start_)
            .count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

// Runs tasks 0..count-1 on a worker pool. Each task writes only its own
// slots, so the outcome is independent of scheduling. The first exception
// stops the pool and is rethrown on the calling thread.
template <typename TaskFn>
void run_task_pool(std::size_t count, int threads, TaskFn&& task) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < count && !failed.load();
             i = next.fetch_add(1)) {
            try {
                task(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                failed.store(true);
            }
        }
    };
    std::vector<std::thread> pool;
    const int n_workers = std::min<int>(threads, static_cast<int>(count));
    pool.reserve(static_cast<std::size_t>(n_workers));
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace detail

// Writes rows in order with a fixed header. Column count follows the
// experiment's dimension p; remark1 adds the two analytic gap columns.
inline void write_csv(const std::vector<ResultRow>& rows, std::ostream& out,
                      bool gap_columns = false) {
    if (rows.empty()) return;
    const auto p = rows.front().eta.size();
    out << "experiment,method,n,replicate";
    for (Eigen::Index i = 1; i <= p; ++i) out << ",eta" << i;
    for (Eigen::Index i = 1; i <= p; ++i) out << ",se" << i;
    out << ",eval_count";
    if (gap_columns) out << ",gap_inf,gap_times_a";
    out << "\n";
    for (const ResultRow& row : rows) {
        out << row.experiment << ',' << row.method << ',' << row.n << ',' << row.replicate;
        for (Eigen::Index i = 0; i < p; ++i) out << ',' << detail::format_double(row.eta(i));
        for (Eigen::Index i = 0; i < p; ++i)
            out << ',' << (row.se.size() > i ? detail::format_double(row.se(i)) : "");
        out << ',' << row.eval_count;
        if (gap_columns) {
            out << ',' << (std::isnan(row.gap_inf) ? "" : detail::format_double(row.gap_inf));
            out << ','
                << (std::isnan(row.gap_times_a) ? "" : detail::format_double(row.gap_times_a));
        }
        out << "\n";
    }
}

inline void write_timing_csv(const std::vector<ResultRow>& rows, std::ostream& out) {
    out << "experiment,method,n,replicate,wall_time_ms\n";
    for (const ResultRow& row : rows)
        out << row.experiment << ',' << row.method << ',' << row.n << ',' << row.replicate << ','
            << detail::format_double(row.wall_time_ms) << "\n";
}

// The fixed ingredients of the four-variable convergence study: the
// trigonometric model with inputs N(mu + (1/n) 1, Sigma / n^2) around
// mu = (1, 0, 2, 1) and Sigma = A^T A.
inline Matrix fig1_sigma() {
    Matrix a(4, 4);
    a << -2, -1, 0, 1,
          2, -2, -1, 0,
          1, 2, -2, -1,
          0, 1, 2, -2;
    return a.transpose() * a;
}

inline Vector fig1_mu() { return (Vector(4) << 1, 0, 2, 1).finished(); }

inline GaussianSpec fig1_spec(std::int64_t n) {
    const double nd = static_cast<double>(n);
    Vector mu_n = fig1_mu().array() + 1.0 / nd;
    Matrix sigma_n = fig1_sigma() / (nd * nd);
    return GaussianSpec(std::move(mu_n), CovMatrix::validate_and_factor(sigma_n));
}

// Per (n, replicate): the three linearizations plus one permutation-MC run.
// Streams derive from (seed, experiment, n, replicate); every row's model
// handle is task-local so eval counters do not interleave across threads.
inline std::vector<ResultRow> run_fig1(const ExperimentConfig& config) {
    const PermEstimatorParams perm = config.perm.scaled(config.budget_scale);
    const std::size_t tasks = config.n_grid.size() * static_cast<std::size_t>(config.replicates);
    std::vector<ResultRow> rows(tasks * 4);

    detail::run_task_pool(tasks, config.resolved_threads(), [&](std::size_t t) {
        const std::size_t n_idx = t / static_cast<std::size_t>(config.replicates);
        const int replicate = static_cast<int>(t % static_cast<std::size_t>(config.replicates));
        const std::int64_t n = config.n_grid[n_idx];
        GaussianSpec spec = fig1_spec(n);
        ModelEntry entry = make_trig4_model();
        RngStream stream = RngStream(config.seed)
                               .child(1)
                               .child(static_cast<std::uint64_t>(n))
                               .child(static_cast<std::uint64_t>(replicate));
        auto emit = [&](std::size_t slot, const char* method, ShapleyVector eta, Vector se,
                        std::uint64_t evals, double ms) {
            rows[t * 4 + slot] = ResultRow{"fig1",      method, n,  replicate, std::move(eta.values),
                                           std::move(se), evals,  ms};
        };

        {
            detail::StopWatch clock;
            LinearizeOptions opt;
            opt.gradient_fn = entry.gradient;
            LinearizeResult lin =
                linearize_pipeline(entry.model, spec, LinearizeMethod::ExactGradient, opt);
            ShapleyVector eta = shapley_linear(lin.model, spec.cov);
            emit(0, "taylor", std::move(eta), Vector(), lin.evals, clock.elapsed_ms());
        }
        {
            detail::StopWatch clock;
            entry.model.reset_eval_count();
            LinearizeResult lin =
                linearize_pipeline(entry.model, spec, LinearizeMethod::FiniteDiff, {});
            ShapleyVector eta = shapley_linear(lin.model, spec.cov);
            emit(1, "finite_diff", std::move(eta), Vector(), entry.model.eval_count(),
                 clock.elapsed_ms());
        }
        {
            detail::StopWatch clock;
            entry.model.reset_eval_count();
            LinearizeOptions opt;
            opt.regression_n = config.regression_n;
            opt.regression_stream = stream.child(0);
            LinearizeResult lin =
                linearize_pipeline(entry.model, spec, LinearizeMethod::Regression, opt);
            ShapleyVector eta = shapley_linear(lin.model, spec.cov);
            emit(2, "regression", std::move(eta), Vector(), entry.model.eval_count(),
                 clock.elapsed_ms());
        }
        {
            detail::StopWatch clock;
            entry.model.reset_eval_count();
            ShapleyEstimate est = shapley_perm_mc(entry.model, spec, perm, stream.child(1));
            emit(3, "perm_mc", std::move(est.eta), std::move(est.std_error),
                 entry.model.eval_count(), clock.elapsed_ms());
        }
    });
    return rows;
}

// Per grid value a: closed-form effects of the benchmark pair, the linear
// surrogate's effects, their gap scaled by a, and `replicates` subset-MC
// estimates. With inputs N(0, I/a) and f(x) = x1 + x2^2 the component
// variances are Var(x1) = 1/a and Var(x2^2) = 2/a^2, which normalize to
// eta = (a/(a+2), 2/(a+2)).
inline std::vector<ResultRow> run_remark1(const ExperimentConfig& config) {
    const int p = 2;
    const std::size_t per_a = 2 + static_cast<std::size_t>(config.replicates);
    std::vector<ResultRow> rows(config.n_grid.size() * per_a);

    detail::run_task_pool(config.n_grid.size(), config.resolved_threads(), [&](std::size_t a_idx) {
        const std::int64_t a_int = config.n_grid[a_idx];
        const double a = static_cast<double>(a_int);
        ModelEntry entry = make_remark1_model();
        GaussianSpec spec(Vector::Zero(p),
                          CovMatrix::validate_and_factor((Matrix::Identity(p, p) / a).eval()));
        RngStream stream = RngStream(config.seed).child(2).child(static_cast<std::uint64_t>(a_int));

        detail::StopWatch analytic_clock;
        Vector analytic(p);
        analytic << a / (a + 2.0), 2.0 / (a + 2.0);
        const double analytic_ms = analytic_clock.elapsed_ms();

        detail::StopWatch taylor_clock;
        LinearizeOptions opt;
        opt.gradient_fn = entry.gradient;
        LinearizeResult lin =
            linearize_pipeline(entry.model, spec, LinearizeMethod::ExactGradient, opt);
        ShapleyVector taylor = shapley_linear(lin.model, spec.cov);
        const double taylor_ms = taylor_clock.elapsed_ms();

        const double gap_inf = (analytic - taylor.values).cwiseAbs().maxCoeff();
        ResultRow analytic_row{"remark1", "analytic", a_int, 0, analytic, Vector(), 0,
                               analytic_ms};
        analytic_row.gap_inf = gap_inf;
        analytic_row.gap_times_a = a * gap_inf;
        rows[a_idx * per_a] = std::move(analytic_row);
        rows[a_idx * per_a + 1] =
            ResultRow{"remark1", "taylor", a_int, 0, taylor.values, Vector(), 0, taylor_ms};

        for (int r = 0; r < config.replicates; ++r) {
            detail::StopWatch clock;
            ModelEntry task_entry = make_remark1_model();
            ShapleyEstimate est =
                shapley_subset_oracle(task_entry.model, spec, config.oracle,
                                      stream.child(static_cast<std::uint64_t>(r)));
            rows[a_idx * per_a + 2 + static_cast<std::size_t>(r)] =
                ResultRow{"remark1",        "oracle",
                          a_int,            r,
                          est.eta.values,   est.std_error,
                          task_entry.model.eval_count(), clock.elapsed_ms()};
        }
    });
    return rows;
}

// Base sampler named in the config: the dependent five-variable suite, a
// Gaussian law from gaussian.mean/cov, or a constant vector.
inline BaseSampler sampler_from_config(const ExperimentConfig& config) {
    if (config.sampler == "section42") return section42_sampler();
    if (config.sampler == "gaussian") {
        if (!config.cov) throw ConfigError("sampler \"gaussian\" needs gaussian.cov");
        CovMatrix cov = CovMatrix::validate_and_factor(*config.cov);
        Vector mean = config.mean ? *config.mean : Vector::Zero(cov.dim());
        return make_gaussian_sampler(GaussianSpec(std::move(mean), std::move(cov)));
    }
    if (config.sampler == "constant") {
        if (!config.sampler_value)
            throw ConfigError("sampler \"constant\" needs sampler.value");
        return make_constant_sampler(*config.sampler_value);
    }
    throw ConfigError("unknown sampler: " + config.sampler);
}

// Per (n, replicate): one Gaussian-linear-approximation estimate from an
// n-term shared moment sample, and one kNN aggregate over a batch of
// independent n-term empirical means, both on the squared-norm model.
// When knn.anchors is 0 the batch size is treated as the estimator's total
// accuracy budget and split evenly across the 2^p - 2 proper subsets, the
// allocation the benchmarked neighbor estimator uses.
inline std::vector<ResultRow> run_empirical42(const ExperimentConfig& config) {
    const int p = sampler_from_config(config).dim;
    const Eigen::Index anchors =
        config.knn.anchors > 0
            ? config.knn.anchors
            : std::max<Eigen::Index>(2, config.knn.batch / ((Eigen::Index{1} << p) - 2));
    const std::size_t tasks = config.n_grid.size() * static_cast<std::size_t>(config.replicates);
    std::vector<ResultRow> rows(tasks * 2);

    detail::run_task_pool(tasks, config.resolved_threads(), [&](std::size_t t) {
        const std::size_t n_idx = t / static_cast<std::size_t>(config.replicates);
        const int replicate = static_cast<int>(t % static_cast<std::size_t>(config.replicates));
        const std::int64_t n = config.n_grid[n_idx];
        BaseSampler base = sampler_from_config(config);
        ModelEntry sq = make_sqnorm_model(p);
        RngStream stream = RngStream(config.seed)
                               .child(3)
                               .child(static_cast<std::uint64_t>(n))
                               .child(static_cast<std::uint64_t>(replicate));

        {
            detail::StopWatch clock;
            MomentEstimate moments = estimate_moments(base, n, n, stream.child(0), true);
            GlaOptions opt;
            opt.gradient = sq.gradient;
            ShapleyVector eta = gla_shapley_estimate(sq.model, moments, opt);
            rows[t * 2] = ResultRow{"empirical42", "gla",   n, replicate, std::move(eta.values),
                                    Vector(),      0,       clock.elapsed_ms()};
        }
        {
            detail::StopWatch clock;
            ModelEntry task_sq = make_sqnorm_model(p);
            RngStream batch_stream = stream.child(1);
            SampleBatch batch;
            batch.seed_tag = batch_stream.key();
            batch.inputs.resize(config.knn.batch, p);
            Vector y(config.knn.batch);
            for (Eigen::Index i = 0; i < config.knn.batch; ++i) {
                batch.inputs.row(i) =
                    sample_empirical_mean(base, n, batch_stream.child(static_cast<std::uint64_t>(i)))
                        .transpose();
                y(i) = task_sq.model(batch.inputs.row(i).transpose());
            }
            batch.attach_outputs(std::move(y));
            ShapleyEstimate est = knn_shapley_aggregate(batch, config.knn.k, anchors);
            rows[t * 2 + 1] =
                ResultRow{"empirical42", "knn",          n, replicate, std::move(est.eta.values),
                          std::move(est.std_error), task_sq.model.eval_count(), clock.elapsed_ms()};
        }
    });
    return rows;
}

// Runs the experiment named in the config and writes the primary CSV,
// the timing sidecar (<out>.timing.csv) and the resolved-config sidecar
// (<out>.config.json).
inline std::vector<ResultRow> run_experiment_to_files(const ExperimentConfig& config) {
    std::vector<ResultRow> rows;
    bool gap_columns = false;
    if (config.experiment == "fig1") {
        rows = run_fig1(config);
    } else if (config.experiment == "remark1") {
        rows = run_remark1(config);
        gap_columns = true;
    } else if (config.experiment == "empirical42") {
        rows = run_empirical42(config);
    } else {
        throw ConfigError("unknown experiment: " + config.experiment);
    }

    // Exact methods must sum to one; Monte-Carlo rows get a soft check only.
    for (const ResultRow& row : rows) {
        const double gap = std::abs(row.eta.sum() - 1.0);
        const bool exact_method = row.method == "taylor" || row.method == "finite_diff" ||
                                  row.method == "regression" || row.method == "gla" ||
                                  row.method == "analytic";
        if (exact_method && gap > 1e-10)
            throw Error("exact-method row violates sum-to-one: " + row.method);
        if (!exact_method && gap > 0.1)
            std::fprintf(stderr,
                         "warning: %s row (n=%lld, replicate=%d) sums to 1 %+.3g\n",
                         row.method.c_str(), static_cast<long long>(row.n), row.replicate,
                         row.eta.sum() - 1.0);
    }
    if (!config.output.empty()) {
        std::ofstream out(config.output);
        if (!out) throw Error("cannot open output file: " + config.output);
        write_csv(rows, out, gap_columns);
        std::ofstream timing(config.output + ".timing.csv");
        write_timing_csv(rows, timing);
        std::ofstream resolved(config.output + ".config.json");
        resolved << config.resolved().dump(2) << "\n";
    }
    return rows;
}

} // namespace shapley
