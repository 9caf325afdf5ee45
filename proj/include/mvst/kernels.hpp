#pragma once

// Data-parallel inner loops of the fitting code. Each kernel has a serial reference
// implementation and an OpenMP one. Both write per-element results into preallocated
// buffers and reduce in the same fixed order, so their outputs are bitwise identical
// for any thread count (checked by test_kernels and compared by bench_kernels).

#include "mvst/core_math.hpp"
#include "mvst/distribution.hpp"
#include "mvst/types.hpp"

#include <span>
#include <vector>

namespace mvst {

enum class ExecPolicy { Serial, Parallel };

/// Per-(observation, component) quantities of one E-step, stored row-major (i * G + g).
struct ComponentTable {
    std::size_t samples = 0;
    std::size_t components = 0;
    std::vector<QuadForms> forms;
    std::vector<double> log_weighted;  // ln pi_g + ln f_g(Y_i)
    std::vector<PosteriorMoments> moments;
    std::vector<unsigned char> tail_underflow;

    std::size_t index(std::size_t i, std::size_t g) const noexcept { return i * components + g; }
};

/// Quadratic forms, weighted log-densities and posterior moments for every (i, g).
/// `with_moments = false` skips the moment evaluation (log-likelihood only).
ComponentTable evaluate_components_serial(const Dataset& data, std::span<const MvstParams> components,
                                          std::span<const double> log_weights, bool with_moments);
ComponentTable evaluate_components_parallel(const Dataset& data, std::span<const MvstParams> components,
                                            std::span<const double> log_weights, bool with_moments);
ComponentTable evaluate_components(const Dataset& data, std::span<const MvstParams> components,
                                   std::span<const double> log_weights, bool with_moments, ExecPolicy policy);

/// Row-wise log-sum-exp of the table: ln f(Y_i; Theta) for each i.
std::vector<double> row_log_likelihoods(const ComponentTable& table);

/// sum_i ln( exp(others[i]) + exp(log_weight + ln f(Y_i; nu)) ), the objective of the
/// per-component nu search. `forms` are the component's cached quadratic forms;
/// `others[i]` is the log-sum-exp of the remaining components (-inf when G = 1).
double nu_objective_serial(std::span<const QuadForms> forms, std::span<const double> others, double log_weight,
                           const LogDensityEvaluator& density, std::vector<double>& scratch);
double nu_objective_parallel(std::span<const QuadForms> forms, std::span<const double> others, double log_weight,
                             const LogDensityEvaluator& density, std::vector<double>& scratch);
double nu_objective(std::span<const QuadForms> forms, std::span<const double> others, double log_weight,
                    const LogDensityEvaluator& density, std::vector<double>& scratch, ExecPolicy policy);

/// ln(exp(a) + exp(b)); returns b exactly when a = -inf.
double log_add_exp(double a, double b) noexcept;

}  // namespace mvst
