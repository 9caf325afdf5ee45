#include "mvst/simulation.hpp"

#include "mvst/errors.hpp"
#include "mvst/io.hpp"
#include "mvst/metrics.hpp"
#include "mvst/rng.hpp"

#include <json.hpp>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <optional>
#include <ostream>
#include <random>

namespace mvst {

std::string_view to_string(Scenario s) noexcept { return s == Scenario::I ? "I" : "II"; }

Scenario parse_scenario(std::string_view name) {
    std::string upper;
    for (char c : name) upper.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    if (upper == "I") return Scenario::I;
    if (upper == "II") return Scenario::II;
    throw DomainError("unknown scenario '" + std::string(name) + "' (expected I or II)");
}

namespace {

Matrix rows_of(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
    Eigen::Index r = 0;
    for (const auto& row : rows) {
        Eigen::Index c = 0;
        for (double v : row) m(r, c++) = v;
        ++r;
    }
    return m;
}

// A (x) 1_k: each entry becomes a block of k equal entries down the rows.
Matrix stack_ones(const Matrix& a, Eigen::Index k) {
    Matrix out(a.rows() * k, a.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * k, j, k, 1).setConstant(a(i, j));
    }
    return out;
}

// A (x) I_k.
Matrix kron_identity(const Matrix& a, Eigen::Index k) {
    Matrix out = Matrix::Zero(a.rows() * k, a.cols() * k);
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * k, j * k, k, k) = a(i, j) * Matrix::Identity(k, k);
        }
    }
    return out;
}

}  // namespace

MixtureParams scenario_params(Scenario s) {
    if (s == Scenario::I) {
        MvstParams c1(rows_of({{-1, 1, -1, 2}, {0, 2, -1, 0}, {0, 0, 0, -1}}),
                      rows_of({{1, 0, 0}, {0, 0.7, -0.1}, {0, -0.1, 1}}),
                      rows_of({{0.7, 0, 0, 0}, {0, 1, -0.5, 0.5}, {0, -0.5, 1.5, 0.1}, {0, 0.5, 0.1, 1}}),
                      rows_of({{1, -2, 0, 1}, {1, -2, 0, 1}, {1, -2, 0, 1}}), 3.0, Variant::Mvst);
        MvstParams c2(rows_of({{0, 2, 0, 1}, {0, 2, 0, -1}, {0, 1, 1, -1}}),
                      rows_of({{1, 0.1, 0.2}, {0.1, 0.5, -0.5}, {0.2, -0.5, 1.4}}),
                      rows_of({{1, 0.5, 0, 0}, {0.5, 1, 0.5, 0.5}, {0, 0.5, 1, 0.1}, {0, 0.5, 0.1, 1}}),
                      rows_of({{0, 1, -1, 0}, {0, 1, -1, -1}, {1, 1, 0, -1}}), 5.0, Variant::Mvst);
        return MixtureParams({0.3, 0.7}, {c1, c2});
    }
    MvstParams c1(stack_ones(rows_of({{-1, -1}, {0, 1}}), 5), kron_identity(rows_of({{5, -0.5}, {-0.5, 1}}), 5),
                  0.5 * Matrix::Identity(2, 2), stack_ones(rows_of({{-2, 1}, {-2, 1}}), 5), 4.0, Variant::Mvst);
    MvstParams c2(stack_ones(rows_of({{0, 0}, {2, 1}}), 5), kron_identity(rows_of({{2, 0.1}, {0.1, 0.5}}), 5),
                  rows_of({{1, 0.5}, {0.5, 1}}), stack_ones(rows_of({{1, 2}, {1, 2}}), 5), 4.0, Variant::Mvst);
    return MixtureParams({0.4, 0.6}, {c1, c2});
}

LabeledSample generate_mixture_sample(const MixtureParams& theta, std::size_t count, std::uint64_t seed) {
    std::vector<Matrix> draws(count);
    LabelVector labels(count);
    const std::size_t groups = theta.groups();
    std::vector<double> cumulative(groups);
    double acc = 0.0;
    for (std::size_t g = 0; g < groups; ++g) cumulative[g] = (acc += theta.weights()[g]);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(count); ++i) {
        Engine engine = make_engine(seed, static_cast<std::uint64_t>(i));
        const double u = std::uniform_real_distribution<double>(0.0, acc)(engine);
        std::size_t g = 0;
        while (g + 1 < groups && !(u < cumulative[g])) ++g;
        labels[static_cast<std::size_t>(i)] = static_cast<int>(g) + 1;
        draws[static_cast<std::size_t>(i)] = sample_one(theta.component(g), engine);
    }
    return {Dataset(std::move(draws)), std::move(labels)};
}

std::uint64_t replication_seed(std::uint64_t seed, std::size_t sample_size, std::size_t replication) noexcept {
    return stream_seed(stream_seed(seed, sample_size), replication);
}

const ReportRow& ExperimentReport::find(std::size_t sample_size, std::string_view model,
                                        std::string_view statistic) const {
    for (const auto& r : rows) {
        if (r.sample_size == sample_size && r.model == model && r.statistic == statistic) return r;
    }
    throw DomainError("report has no row for N=" + std::to_string(sample_size) + ", model " + std::string(model) +
                      ", statistic " + std::string(statistic));
}

// ---------------------------------------------------------------------------

namespace {

constexpr double not_applicable = std::numeric_limits<double>::quiet_NaN();

struct Replicate {
    LabeledSample sample;
    FitConfig config;
};

Replicate make_replicate(const MixtureParams& truth, std::size_t sample_size, const ExperimentOptions& options,
                         std::size_t r) {
    const std::uint64_t rs = replication_seed(options.seed, sample_size, r);
    Replicate rep{generate_mixture_sample(truth, sample_size, stream_seed(rs, 0)), options.fit};
    rep.config.seed = stream_seed(rs, 1);
    // Replications are the parallel unit; each fit runs its kernels serially.
    rep.config.policy = ExecPolicy::Serial;
    return rep;
}

void check_failures(std::size_t failures, std::size_t total, const ExperimentOptions& options,
                    const std::string& where) {
    if (static_cast<double>(failures) > options.max_failure_share * static_cast<double>(total)) {
        throw NumericalRangeError(where + ": " + std::to_string(failures) + " of " + std::to_string(total) +
                                  " fits failed; refusing to summarize");
    }
}

// Named parameter blocks of a mixture, component labels 1-based.
std::vector<std::pair<std::string, Matrix>> parameter_blocks(const MixtureParams& theta, bool normalized_truth) {
    std::vector<std::pair<std::string, Matrix>> out;
    for (std::size_t g = 0; g < theta.groups(); ++g) {
        const MvstParams& c = theta.component(g);
        const std::string k = std::to_string(g + 1);
        const double scale = c.sigma()(0, 0);
        out.emplace_back("pi" + k, Matrix::Constant(1, 1, theta.weights()[g]));
        out.emplace_back("M" + k, c.location());
        out.emplace_back("Sigma" + k, c.sigma());
        out.emplace_back("Sigma" + k + "_norm", normalized_truth ? Matrix(c.sigma() / scale) : c.sigma());
        out.emplace_back("Psi" + k, c.psi());
        out.emplace_back("Psi" + k + "_norm", normalized_truth ? Matrix(c.psi() * scale) : c.psi());
        out.emplace_back("Lambda" + k, c.lambda());
        out.emplace_back("nu" + k, Matrix::Constant(1, 1, c.nu()));
    }
    return out;
}

MixtureParams permuted(const MixtureParams& theta, const std::vector<int>& perm) {
    // perm[k] = truth label matched to estimated component k + 1.
    std::vector<double> weights(theta.groups());
    std::vector<std::optional<MvstParams>> slots(theta.groups());
    for (std::size_t k = 0; k < theta.groups(); ++k) {
        const auto t = static_cast<std::size_t>(perm[k] - 1);
        weights[t] = theta.weights()[k];
        slots[t] = theta.component(k);
    }
    std::vector<MvstParams> comps;
    for (auto& s : slots) comps.push_back(*s);
    return MixtureParams(std::move(weights), std::move(comps));
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double std_error_of(const std::vector<double>& v) {
    if (v.size() < 2) return not_applicable;
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

}  // namespace

ExperimentReport rmse_experiment(Scenario scenario, const std::vector<std::size_t>& sizes,
                                 const ExperimentOptions& options) {
    if (options.replications < 2) throw DomainError("rmse_experiment: replications must be at least 2");
    if (sizes.empty()) throw DomainError("rmse_experiment: no sample sizes given");
    const MixtureParams truth = scenario_params(scenario);
    const auto truth_blocks = parameter_blocks(truth, true);
    ExperimentReport report{"rmse", scenario, options.seed, options, {}};

    for (std::size_t sample_size : sizes) {
        if (sample_size <= truth.groups()) throw DomainError("rmse_experiment: N must exceed the group count");
        const std::size_t reps = options.replications;
        std::vector<std::optional<MixtureParams>> estimates(reps);
#pragma omp parallel for schedule(dynamic)
        for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(reps); ++r) {
            const auto rr = static_cast<std::size_t>(r);
            try {
                const Replicate rep = make_replicate(truth, sample_size, options, rr);
                FitConfig cfg = rep.config;
                cfg.variant = Variant::Mvst;
                const FitResult fit = fit_mixture(rep.sample.data, truth.groups(), cfg);
                const auto perm = best_permutation(rep.sample.labels, fit.labels, truth.groups());
                estimates[rr] = permuted(fit.params, perm);
            } catch (const NumericalError&) {
                // Counted below.
            }
        }
        std::size_t failures = 0;
        std::vector<std::vector<std::pair<std::string, Matrix>>> blocks;
        for (const auto& e : estimates) {
            if (e) {
                blocks.push_back(parameter_blocks(*e, false));
            } else {
                ++failures;
            }
        }
        check_failures(failures, reps, options, "rmse_experiment N=" + std::to_string(sample_size));
        for (std::size_t b = 0; b < truth_blocks.size(); ++b) {
            const Matrix& target = truth_blocks[b].second;
            Matrix squared = Matrix::Zero(target.rows(), target.cols());
            for (const auto& est : blocks) squared += (est[b].second - target).array().square().matrix();
            squared /= static_cast<double>(blocks.size());
            ReportRow row;
            row.sample_size = sample_size;
            row.model = "mvst";
            row.statistic = truth_blocks[b].first;
            row.value = squared.array().sqrt().mean();
            row.std_error = not_applicable;
            row.replications = blocks.size();
            row.failures = failures;
            report.rows.push_back(row);
        }
    }
    return report;
}

ExperimentReport comparison_experiment(Scenario scenario, std::size_t sample_size, const ExperimentOptions& options) {
    if (options.replications < 2) throw DomainError("comparison_experiment: replications must be at least 2");
    const MixtureParams truth = scenario_params(scenario);
    if (sample_size <= truth.groups()) throw DomainError("comparison_experiment: N must exceed the group count");
    constexpr Variant models[] = {Variant::Mvn, Variant::Mvt, Variant::Rmvsn, Variant::Mvst};
    constexpr std::size_t model_count = 4;
    const std::size_t reps = options.replications;

    struct Outcome {
        bool ok = false;
        double bic = 0.0;
        double ari = 0.0;
        double mcr = 0.0;
    };
    std::vector<Outcome> outcomes(reps * model_count);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(reps); ++r) {
        const auto rr = static_cast<std::size_t>(r);
        const Replicate rep = make_replicate(truth, sample_size, options, rr);
        for (std::size_t m = 0; m < model_count; ++m) {
            try {
                FitConfig cfg = rep.config;
                cfg.variant = models[m];
                const FitResult fit = fit_mixture(rep.sample.data, truth.groups(), cfg);
                outcomes[rr * model_count + m] = {true, fit.bic, ari(rep.sample.labels, fit.labels),
                                                  mcr(rep.sample.labels, fit.labels)};
            } catch (const NumericalError&) {
            }
        }
    }

    ExperimentReport report{"compare", scenario, options.seed, options, {}};
    for (std::size_t m = 0; m < model_count; ++m) {
        std::vector<double> bics;
        std::vector<double> aris;
        std::vector<double> mcrs;
        for (std::size_t r = 0; r < reps; ++r) {
            const Outcome& o = outcomes[r * model_count + m];
            if (!o.ok) continue;
            bics.push_back(o.bic);
            aris.push_back(o.ari);
            mcrs.push_back(o.mcr);
        }
        const std::size_t failures = reps - bics.size();
        const std::string model(to_string(models[m]));
        check_failures(failures, reps, options, "comparison_experiment model " + model);
        const std::pair<const char*, const std::vector<double>*> stats[] = {
            {"BIC", &bics}, {"ARI", &aris}, {"MCR", &mcrs}};
        for (const auto& [name, values] : stats) {
            report.rows.push_back({sample_size, model, name, mean_of(*values), std_error_of(*values), values->size(),
                                   failures});
        }
    }
    return report;
}

// ---------------------------------------------------------------------------

namespace {

std::string format_double(double v) {
    if (std::isnan(v)) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void write_report_csv(std::ostream& out, const ExperimentReport& report) {
    out << "experiment,scenario,N,model,statistic,value,std_error,replications,failures,seed\n";
    for (const auto& r : report.rows) {
        out << report.experiment << ',' << to_string(report.scenario) << ',' << r.sample_size << ',' << r.model
            << ',' << r.statistic << ',' << format_double(r.value) << ',' << format_double(r.std_error) << ','
            << r.replications << ',' << r.failures << ',' << report.seed << '\n';
    }
}

void write_report_json(std::ostream& out, const ExperimentReport& report) {
    nlohmann::ordered_json j;
    j["experiment"] = report.experiment;
    j["scenario"] = std::string(to_string(report.scenario));
    j["seed"] = report.seed;
    // Resolved settings. Each replication derives its own fit seed, and the comparison
    // sets the variant per model, so those two keys are dropped.
    Json fit = config_to_json(report.options.fit);
    fit.erase("seed");
    if (report.experiment == "compare") fit.erase("variant");
    j["config"] = {{"replications", report.options.replications},
                   {"max_failure_share", report.options.max_failure_share},
                   {"fit", std::move(fit)}};
    auto& cells = j["cells"] = nlohmann::ordered_json::array();
    for (const auto& r : report.rows) {
        nlohmann::ordered_json c;
        c["N"] = r.sample_size;
        c["model"] = r.model;
        c["statistic"] = r.statistic;
        c["value"] = r.value;
        c["std_error"] = std::isnan(r.std_error) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(r.std_error);
        c["replications"] = r.replications;
        c["failures"] = r.failures;
        cells.push_back(std::move(c));
    }
    out << j.dump(2) << '\n';
}

}  // namespace mvst
