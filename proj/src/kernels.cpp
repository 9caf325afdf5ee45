#include "mvst/kernels.hpp"

#include "mvst/errors.hpp"

#include <cmath>
#include <exception>
#include <limits>

namespace mvst {

namespace {

ComponentTable make_table(const Dataset& data, std::span<const MvstParams> components,
                          std::span<const double> log_weights, bool with_moments) {
    if (components.size() != log_weights.size()) {
        throw DimensionError("evaluate_components: weight and component counts differ");
    }
    for (const auto& c : components) {
        if (c.rows() != data.rows() || c.cols() != data.cols()) {
            throw DimensionError("evaluate_components: component shape does not match the data");
        }
    }
    ComponentTable t;
    t.samples = data.size();
    t.components = components.size();
    const std::size_t cells = t.samples * t.components;
    t.forms.resize(cells);
    t.log_weighted.resize(cells);
    if (with_moments) {
        t.moments.resize(cells);
        t.tail_underflow.assign(cells, 0);
    }
    return t;
}

void evaluate_cell(const Dataset& data, std::span<const MvstParams> components, std::span<const double> log_weights,
                   std::span<const LogDensityEvaluator> densities, std::size_t i, ComponentTable& t) {
    const double dims = static_cast<double>(data.rows() * data.cols());
    for (std::size_t g = 0; g < t.components; ++g) {
        const std::size_t k = t.index(i, g);
        const MvstParams& theta = components[g];
        t.forms[k] = quad_forms(data[i], theta);
        t.log_weighted[k] = log_weights[g] + densities[g](t.forms[k]);
        if (!t.moments.empty() && std::isinf(t.forms[k].delta)) {
            // Zero density: the cell carries no responsibility, so its moments are never used.
            t.moments[k] = PosteriorMoments{0.0, 0.0, 0.0};
        } else if (!t.moments.empty()) {
            bool underflow = false;
            t.moments[k] = posterior_moments_from_forms(t.forms[k], dims, theta.nu(), theta.variant(), underflow);
            t.tail_underflow[k] = underflow ? 1 : 0;
        }
    }
}

std::vector<LogDensityEvaluator> make_evaluators(std::span<const MvstParams> components) {
    std::vector<LogDensityEvaluator> out;
    out.reserve(components.size());
    for (const auto& c : components) out.emplace_back(c);
    return out;
}

}  // namespace

ComponentTable evaluate_components_serial(const Dataset& data, std::span<const MvstParams> components,
                                          std::span<const double> log_weights, bool with_moments) {
    ComponentTable t = make_table(data, components, log_weights, with_moments);
    const auto densities = make_evaluators(components);
    for (std::size_t i = 0; i < t.samples; ++i) evaluate_cell(data, components, log_weights, densities, i, t);
    return t;
}

ComponentTable evaluate_components_parallel(const Dataset& data, std::span<const MvstParams> components,
                                            std::span<const double> log_weights, bool with_moments) {
    ComponentTable t = make_table(data, components, log_weights, with_moments);
    const auto densities = make_evaluators(components);
    const auto n = static_cast<std::ptrdiff_t>(t.samples);
    // Exceptions must not escape an OpenMP region; the first one is rethrown afterwards.
    std::exception_ptr failure;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            evaluate_cell(data, components, log_weights, densities, static_cast<std::size_t>(i), t);
        } catch (...) {
#pragma omp critical(mvst_kernel_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return t;
}

ComponentTable evaluate_components(const Dataset& data, std::span<const MvstParams> components,
                                   std::span<const double> log_weights, bool with_moments, ExecPolicy policy) {
    return policy == ExecPolicy::Serial ? evaluate_components_serial(data, components, log_weights, with_moments)
                                        : evaluate_components_parallel(data, components, log_weights, with_moments);
}

std::vector<double> row_log_likelihoods(const ComponentTable& table) {
    std::vector<double> rows(table.samples);
    for (std::size_t i = 0; i < table.samples; ++i) {
        rows[i] = log_sum_exp(std::span<const double>(table.log_weighted).subspan(i * table.components,
                                                                                  table.components));
    }
    return rows;
}

double log_add_exp(double a, double b) noexcept {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

double nu_objective_serial(std::span<const QuadForms> forms, std::span<const double> others, double log_weight,
                           const LogDensityEvaluator& density, std::vector<double>& scratch) {
    scratch.resize(forms.size());
    for (std::size_t i = 0; i < forms.size(); ++i) {
        scratch[i] = log_add_exp(others[i], log_weight + density(forms[i]));
    }
    return pairwise_sum(scratch);
}

double nu_objective_parallel(std::span<const QuadForms> forms, std::span<const double> others, double log_weight,
                             const LogDensityEvaluator& density, std::vector<double>& scratch) {
    scratch.resize(forms.size());
    const auto n = static_cast<std::ptrdiff_t>(forms.size());
    std::exception_ptr failure;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            const auto k = static_cast<std::size_t>(i);
            scratch[k] = log_add_exp(others[k], log_weight + density(forms[k]));
        } catch (...) {
#pragma omp critical(mvst_kernel_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return pairwise_sum(scratch);
}

double nu_objective(std::span<const QuadForms> forms, std::span<const double> others, double log_weight,
                    const LogDensityEvaluator& density, std::vector<double>& scratch, ExecPolicy policy) {
    return policy == ExecPolicy::Serial ? nu_objective_serial(forms, others, log_weight, density, scratch)
                                        : nu_objective_parallel(forms, others, log_weight, density, scratch);
}

}  // namespace mvst
