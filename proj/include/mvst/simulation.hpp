#pragma once

// Synthetic studies: the two reference scenarios, seeded mixture sampling, a parameter
// recovery (RMSE) experiment and a four-model comparison experiment.

#include "mvst/config.hpp"
#include "mvst/mixture.hpp"
#include "mvst/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace mvst {

enum class Scenario { I, II };

std::string_view to_string(Scenario s) noexcept;
/// "I" or "II" (case-insensitive).
Scenario parse_scenario(std::string_view name);

/// Scenario I: G=2, 3x4. Scenario II: G=2, 10x2, built from 2x2 blocks expanded by
/// A (x) 1_5 (each entry repeated down 5 rows) and A (x) I_5.
MixtureParams scenario_params(Scenario s);

struct LabeledSample {
    Dataset data;
    LabelVector labels;
};

/// Observation i draws its label and then Y_i from stream (seed, i).
LabeledSample generate_mixture_sample(const MixtureParams& theta, std::size_t count, std::uint64_t seed);

/// One line of a report: a statistic for one (N, model, parameter) cell.
struct ReportRow {
    std::size_t sample_size = 0;
    std::string model;
    std::string statistic;
    double value = 0.0;
    double std_error = 0.0;  // NaN when not applicable
    std::size_t replications = 0;
    std::size_t failures = 0;
};

struct ExperimentOptions {
    std::size_t replications = 50;
    std::uint64_t seed = 1;
    FitConfig fit{};
    /// Maximum share of failed fits before the experiment refuses to summarize.
    double max_failure_share = 0.2;
};

struct ExperimentReport {
    std::string experiment;  // "rmse" or "compare"
    Scenario scenario = Scenario::I;
    std::uint64_t seed = 0;
    ExperimentOptions options{};
    std::vector<ReportRow> rows;

    /// First row matching (N, model, statistic); throws DomainError if absent.
    const ReportRow& find(std::size_t sample_size, std::string_view model, std::string_view statistic) const;
};

/// Seed of replication r at sample size N.
std::uint64_t replication_seed(std::uint64_t seed, std::size_t sample_size, std::size_t replication) noexcept;

/// For each N: generate, fit FM-MVST with G=2, align the estimate to the truth by the
/// MCR-optimal permutation, then per parameter take sqrt(mean over replications of the
/// squared error) of each element and average over elements. Statistics are named
/// "pi1", "M1", "Sigma1", "Sigma1_norm", "Psi1", "Psi1_norm", "Lambda1", "nu1" (and so on
/// for g = 2); the _norm rows compare Sigma/Sigma[0,0] and Psi*Sigma[0,0] of the truth.
ExperimentReport rmse_experiment(Scenario scenario, const std::vector<std::size_t>& sizes,
                                 const ExperimentOptions& options);

/// Fits MVN, MVT, RMVSN and MVST (G=2) to each replication and reports mean and
/// standard error of BIC, ARI and MCR per model.
ExperimentReport comparison_experiment(Scenario scenario, std::size_t sample_size, const ExperimentOptions& options);

/// Tidy CSV: experiment,scenario,N,model,statistic,value,std_error,replications,failures,seed
void write_report_csv(std::ostream& out, const ExperimentReport& report);
void write_report_json(std::ostream& out, const ExperimentReport& report);

}  // namespace mvst
