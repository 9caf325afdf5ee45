// Command-line front end: fit, sample, simulate, benchmark.

#include "mvst/errors.hpp"
#include "mvst/io.hpp"
#include "mvst/metrics.hpp"
#include "mvst/mixture.hpp"
#include "mvst/simulation.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace mvst;

namespace {

struct FitArgs {
    std::string data;
    std::string labels;
    std::size_t groups = 1;
    std::string model = "mvst";
    double tol = 1e-6;
    int max_iter = 500;
    std::uint64_t seed = 1;
    double nu_min = 0.05;
    double nu_max = 200.0;
    bool rescale_each_iter = false;
    std::string out;
};

struct SampleArgs {
    std::string params;
    std::size_t count = 0;
    std::uint64_t seed = 1;
    std::string out;
    std::string labels_out;
};

struct SimulateArgs {
    std::string scenario;
    std::size_t count = 0;
    std::uint64_t seed = 1;
    std::string out;
    std::string labels_out;
};

struct BenchArgs {
    std::string scenario;
    std::vector<std::size_t> sizes;
    std::size_t reps = 0;
    std::uint64_t seed = 1;
    std::string out_dir;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int run_fit(const FitArgs& a, int threads) {
    const auto t0 = std::chrono::steady_clock::now();
    const Dataset data = read_dataset(fs::path(a.data));
    LabelVector truth;
    if (!a.labels.empty()) truth = read_labels(fs::path(a.labels), data.size());

    FitConfig config;
    config.variant = parse_variant(a.model);
    config.tol = a.tol;
    config.max_iter = a.max_iter;
    config.seed = a.seed;
    config.nu_bounds = {a.nu_min, a.nu_max};
    config.rescale_timing = a.rescale_each_iter ? RescaleTiming::PerIteration : RescaleTiming::AtConvergence;

    const FitResult result = fit_mixture(data, a.groups, config);
    Json out = fit_result_to_json(result);
    Json run;
    run["command"] = "fit";
    run["data"] = a.data;
    run["labels"] = a.labels.empty() ? Json(nullptr) : Json(a.labels);
    run["groups"] = a.groups;
    run["threads"] = threads;
    out["run"] = std::move(run);
    write_json(fs::path(a.out), out);

    std::cout << "model " << to_string(config.variant) << ", G=" << a.groups << ", N=" << data.size() << '\n'
              << "loglik " << result.loglik << ", BIC " << result.bic << ", iterations " << result.trace.iterations
              << (result.trace.converged ? " (converged)" : " (max_iter reached)") << '\n';
    if (!truth.empty()) {
        std::cout << "ARI " << ari(truth, result.labels) << ", MCR " << mcr(truth, result.labels) << '\n';
    }
    std::cout << "wall time " << seconds_since(t0) << " s\n";
    return 0;
}

int run_sample(const SampleArgs& a) {
    const Json j = read_json(fs::path(a.params));
    const MixtureParams theta = params_from_json(j.contains("params") ? j.at("params") : j);
    const LabeledSample s = generate_mixture_sample(theta, a.count, a.seed);
    write_dataset(fs::path(a.out), s.data);
    if (!a.labels_out.empty()) write_labels(fs::path(a.labels_out), s.labels);
    return 0;
}

int run_simulate(const SimulateArgs& a) {
    const LabeledSample s = generate_mixture_sample(scenario_params(parse_scenario(a.scenario)), a.count, a.seed);
    write_dataset(fs::path(a.out), s.data);
    if (!a.labels_out.empty()) write_labels(fs::path(a.labels_out), s.labels);
    return 0;
}

int run_benchmark(const std::string& kind, BenchArgs a) {
    const auto t0 = std::chrono::steady_clock::now();
    const Scenario scenario = parse_scenario(a.scenario);
    ExperimentOptions options;
    options.seed = a.seed;
    ExperimentReport report;
    if (kind == "rmse") {
        if (a.sizes.empty()) a.sizes = {250, 500, 1000};
        options.replications = a.reps == 0 ? 50 : a.reps;
        report = rmse_experiment(scenario, a.sizes, options);
    } else {
        if (a.sizes.empty()) a.sizes = {500};
        options.replications = a.reps == 0 ? 20 : a.reps;
        for (std::size_t n : a.sizes) {
            ExperimentReport part = comparison_experiment(scenario, n, options);
            report.experiment = part.experiment;
            report.scenario = part.scenario;
            report.seed = part.seed;
            report.options = part.options;
            report.rows.insert(report.rows.end(), part.rows.begin(), part.rows.end());
        }
    }
    fs::create_directories(a.out_dir);
    const std::string stem = kind + "_" + std::string(to_string(scenario));
    {
        std::ofstream csv(fs::path(a.out_dir) / (stem + ".csv"));
        if (!csv) throw ValidationError("cannot write into '" + a.out_dir + "'", 0);
        write_report_csv(csv, report);
    }
    {
        std::ofstream json(fs::path(a.out_dir) / (stem + ".json"));
        write_report_json(json, report);
    }
    write_report_csv(std::cout, report);
    std::cout << "wall time " << seconds_since(t0) << " s\n";
    return 0;
}

int resolve_threads(int flag) {
    if (flag > 0) return flag;
    if (const char* env = std::getenv("MVST_THREADS")) {
        try {
            const int v = std::stoi(env);
            if (v > 0) return v;
        } catch (const std::exception&) {
        }
        throw ValidationError(std::string("MVST_THREADS must be a positive integer, got '") + env + "'", 0);
    }
    return omp_get_max_threads();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mixtures of matrix-variate skew-t distributions"};
    app.require_subcommand(1);
    int threads_flag = 0;
    app.add_option("--threads", threads_flag, "Worker threads (default: MVST_THREADS or all cores)")
        ->check(CLI::PositiveNumber);

    FitArgs fa;
    auto* fit = app.add_subcommand("fit", "Fit a G-component mixture to a long-CSV dataset");
    fit->add_option("--data", fa.data, "Dataset CSV (sample,row,col,value)")->required();
    fit->add_option("--labels", fa.labels, "Optional true labels (sample,label) for ARI/MCR");
    fit->add_option("--groups", fa.groups, "Number of components")->required()->check(CLI::PositiveNumber);
    fit->add_option("--model", fa.model, "mvn, mvt, rmvsn or mvst")
        ->capture_default_str()
        ->check(CLI::IsMember({"mvn", "mvt", "rmvsn", "mvst"}, CLI::ignore_case));
    fit->add_option("--tol", fa.tol, "Relative log-likelihood tolerance")->capture_default_str();
    fit->add_option("--max-iter", fa.max_iter, "Iteration cap")->capture_default_str();
    fit->add_option("--seed", fa.seed, "Initialization seed")->capture_default_str();
    fit->add_option("--nu-min", fa.nu_min, "Lower bound for nu")->capture_default_str();
    fit->add_option("--nu-max", fa.nu_max, "Upper bound for nu")->capture_default_str();
    fit->add_flag("--rescale-each-iter", fa.rescale_each_iter, "Apply the Sigma[1,1] = 1 rescale every iteration");
    fit->add_option("--out", fa.out, "Output FitResult JSON")->required();

    SampleArgs sa;
    auto* sample = app.add_subcommand("sample", "Draw from a fitted or declared model");
    sample->add_option("--params", sa.params, "FitResult or parameter JSON")->required();
    sample->add_option("--count", sa.count, "Number of draws")->required()->check(CLI::PositiveNumber);
    sample->add_option("--seed", sa.seed, "Sampling seed")->capture_default_str();
    sample->add_option("--out", sa.out, "Output dataset CSV")->required();
    sample->add_option("--labels-out", sa.labels_out, "Output component labels CSV");

    SimulateArgs ma;
    auto* simulate = app.add_subcommand("simulate", "Draw from a reference scenario");
    simulate->add_option("--scenario", ma.scenario, "I or II")->required();
    simulate->add_option("--count", ma.count, "Number of draws")->required()->check(CLI::PositiveNumber);
    simulate->add_option("--seed", ma.seed, "Sampling seed")->capture_default_str();
    simulate->add_option("--out", ma.out, "Output dataset CSV")->required();
    simulate->add_option("--labels-out", ma.labels_out, "Output true labels CSV");

    BenchArgs ba;
    std::string bench_kind;
    auto* bench = app.add_subcommand("benchmark", "Run a simulation experiment");
    bench->add_option("kind", bench_kind, "rmse or compare")->required()->check(CLI::IsMember({"rmse", "compare"}));
    bench->add_option("--scenario", ba.scenario, "I or II")->required();
    bench->add_option("--sizes", ba.sizes, "Sample sizes (rmse: 250 500 1000, compare: 500)");
    bench->add_option("--reps", ba.reps, "Replications (rmse: 50, compare: 20)");
    bench->add_option("--seed", ba.seed, "Base seed")->capture_default_str();
    bench->add_option("--out-dir", ba.out_dir, "Directory for the CSV and JSON reports")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }

    try {
        const int threads = resolve_threads(threads_flag);
        omp_set_num_threads(threads);
        if (*fit) return run_fit(fa, threads);
        if (*sample) return run_sample(sa);
        if (*simulate) return run_simulate(ma);
        return run_benchmark(bench_kind, ba);
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
