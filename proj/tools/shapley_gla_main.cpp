// Command-line driver: exact Shapley effects for Gaussian-linear pairs,
// black-box linearization, the canned experiments, and the acceptance suite.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "shapley/acceptance.hpp"
#include "shapley/experiment.hpp"

namespace {

using namespace shapley;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitAcceptance = 2;
constexpr int kExitNumerical = 3;

struct CliOverrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<std::string> out;
    std::optional<double> budget_scale;
};

ExperimentConfig load_with_overrides(const CliOverrides& cli, const std::string& experiment) {
    ExperimentConfig config =
        cli.config_path.empty() ? ExperimentConfig{} : load_config_file(cli.config_path);
    if (!config.experiment.empty() && !experiment.empty() && config.experiment != experiment)
        throw ConfigError("config experiment \"" + config.experiment +
                          "\" does not match subcommand \"" + experiment + "\"");
    if (!experiment.empty()) config.experiment = experiment;
    if (cli.seed) config.seed = *cli.seed;
    if (cli.threads) config.threads = *cli.threads;
    if (cli.out) config.output = *cli.out;
    if (cli.budget_scale) config.budget_scale = *cli.budget_scale;
    config.validate();
    return config;
}

GaussianSpec gaussian_from_config(const ExperimentConfig& config) {
    if (!config.cov) throw ConfigError("this subcommand needs gaussian.cov");
    CovMatrix cov = CovMatrix::validate_and_factor(*config.cov);
    Vector mean = config.mean ? *config.mean : Vector::Zero(cov.dim());
    return GaussianSpec(std::move(mean), std::move(cov));
}

void print_shapley(const ShapleyVector& eta) {
    for (Eigen::Index i = 0; i < eta.values.size(); ++i)
        std::printf("eta%ld = %.12g\n", static_cast<long>(i + 1), eta.values(i));
    std::printf("sum  = %.12g\n", eta.sum());
}

int run_exact(const ExperimentConfig& config) {
    GaussianSpec spec = gaussian_from_config(config);
    if (!config.model_coeffs)
        throw ConfigError("exact needs model.coeffs (a linear model)");
    LinearModel model{config.model_intercept, *config.model_coeffs};
    ShapleyVector eta = shapley_linear_blockwise(model, spec.cov);
    print_shapley(eta);
    if (!config.output.empty()) {
        std::ofstream out(config.output);
        ResultRow row{"exact", "taylor", 0, 0, eta.values, Vector(), 0, 0.0};
        write_csv({row}, out);
    }
    return kExitOk;
}

int run_linearize(const ExperimentConfig& config) {
    GaussianSpec spec = gaussian_from_config(config);
    ModelEntry entry = make_builtin_model(config.model_name.empty() ? "linear" : config.model_name,
                                          config.model_coeffs, config.model_intercept,
                                          spec.dim());
    if (entry.model.arity() != spec.dim())
        throw ConfigError("model arity does not match the Gaussian dimension");

    LinearizeMethod method = parse_linearize_method(config.method);
    LinearizeOptions opt;
    opt.gradient_fn = entry.gradient;
    opt.regression_n = config.regression_n;
    opt.regression_stream = RngStream(config.seed).child(4);
    LinearizeResult lin = linearize_pipeline(entry.model, spec, method, opt);

    std::printf("method = %s\nintercept = %.12g\n", config.method.c_str(), lin.model.intercept);
    for (Eigen::Index i = 0; i < lin.model.coeffs.size(); ++i)
        std::printf("beta%ld = %.12g\n", static_cast<long>(i + 1), lin.model.coeffs(i));
    std::printf("model_evals = %llu\n", static_cast<unsigned long long>(lin.evals));
    ShapleyVector eta = shapley_linear(lin.model, spec.cov);
    print_shapley(eta);
    return kExitOk;
}

int run_experiment(const ExperimentConfig& config) {
    std::vector<ResultRow> rows = run_experiment_to_files(config);
    std::printf("experiment %s: %zu rows", config.experiment.c_str(), rows.size());
    if (!config.output.empty()) std::printf(" -> %s", config.output.c_str());
    std::printf("\n");
    return kExitOk;
}

int run_acceptance_cmd(const ExperimentConfig& config, const std::string& report_path) {
    AcceptanceReport report = run_acceptance(config);
    for (const CriterionResult& c : report.criteria)
        std::printf("%s: %s (%.1f s) %s\n", c.id.c_str(), c.pass ? "PASS" : "FAIL", c.seconds,
                    c.detail.c_str());
    std::printf("acceptance: %d/%d criteria passed\n", report.passed(), report.total());
    if (!report_path.empty()) {
        std::ofstream out(report_path);
        if (!out) throw Error("cannot open report file: " + report_path);
        out << report.to_json().dump(2) << "\n";
    }
    return report.all_passed() ? kExitOk : kExitAcceptance;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Shapley effects for dependent inputs via the Gaussian-linear closed form"};
    app.require_subcommand(1);

    CliOverrides cli;
    std::uint64_t seed_arg = 0;
    int threads_arg = 0;
    std::string out_arg;
    double budget_arg = 1.0;

    auto add_common = [&](CLI::App* sub, bool config_required) {
        auto* c = sub->add_option("--config", cli.config_path, "JSON config file");
        if (config_required) c->required();
        sub->add_option("--seed", seed_arg, "override config seed");
        sub->add_option("--threads", threads_arg, "override config thread count");
        sub->add_option("--out", out_arg, "override config output path");
        sub->add_option("--budget-scale", budget_arg, "override config budget scale");
    };

    auto apply_overrides = [&](CLI::App* sub) {
        if (sub->count("--seed")) cli.seed = seed_arg;
        if (sub->count("--threads")) cli.threads = threads_arg;
        if (sub->count("--out")) cli.out = out_arg;
        if (sub->count("--budget-scale")) cli.budget_scale = budget_arg;
    };

    CLI::App* exact = app.add_subcommand("exact", "exact effects of a Gaussian-linear pair");
    add_common(exact, true);
    CLI::App* linearize = app.add_subcommand("linearize", "fit a linear surrogate and its effects");
    add_common(linearize, true);
    CLI::App* fig1 = app.add_subcommand("fig1", "four-variable linearization convergence study");
    add_common(fig1, true);
    CLI::App* remark1 = app.add_subcommand("remark1", "two-variable exact-rate study");
    add_common(remark1, true);
    CLI::App* empirical42 =
        app.add_subcommand("empirical42", "empirical-mean estimation-error study");
    add_common(empirical42, true);
    CLI::App* acceptance = app.add_subcommand("acceptance", "run the acceptance criteria");
    add_common(acceptance, false);
    std::string report_path = "acceptance_report.json";
    acceptance->add_option("--report", report_path, "JSON report path (default acceptance_report.json)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        for (CLI::App* sub : {exact, linearize, fig1, remark1, empirical42, acceptance})
            if (sub->parsed()) apply_overrides(sub);
        if (exact->parsed()) return run_exact(load_with_overrides(cli, "custom"));
        if (linearize->parsed()) return run_linearize(load_with_overrides(cli, "custom"));
        if (fig1->parsed()) return run_experiment(load_with_overrides(cli, "fig1"));
        if (remark1->parsed()) return run_experiment(load_with_overrides(cli, "remark1"));
        if (empirical42->parsed()) return run_experiment(load_with_overrides(cli, "empirical42"));
        if (acceptance->parsed()) {
            ExperimentConfig config = cli.config_path.empty()
                                          ? ExperimentConfig{}
                                          : load_with_overrides(cli, "");
            if (cli.threads) config.threads = *cli.threads;
            return run_acceptance_cmd(config, report_path);
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const Error& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumerical;
    }
    return kExitConfig;
}
