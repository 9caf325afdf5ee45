#include "mvst/mixture.hpp"

#include "mvst/errors.hpp"
#include "mvst/init.hpp"
#include "mvst/metrics.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace mvst {

namespace {

constexpr double neg_inf = -std::numeric_limits<double>::infinity();

}  // namespace

MixtureParams::MixtureParams(std::vector<double> weights, std::vector<MvstParams> components)
    : weights_(std::move(weights)), components_(std::move(components)) {
    if (components_.empty()) throw DomainError("mixture needs at least one component");
    if (weights_.size() != components_.size()) {
        throw DimensionError("mixture has " + std::to_string(weights_.size()) + " weights for " +
                             std::to_string(components_.size()) + " components");
    }
    double total = 0.0;
    for (double w : weights_) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw DomainError("mixture weights must be nonnegative");
        total += w;
    }
    if (std::fabs(total - 1.0) > 1e-12) throw DomainError("mixture weights must sum to 1");
    for (const auto& c : components_) {
        if (c.rows() != rows() || c.cols() != cols()) throw DimensionError("mixture components differ in shape");
        if (c.variant() != variant()) throw DomainError("mixture components differ in variant");
    }
}

std::vector<double> MixtureParams::log_weights() const {
    std::vector<double> out(weights_.size());
    for (std::size_t g = 0; g < out.size(); ++g) out[g] = weights_[g] > 0.0 ? std::log(weights_[g]) : neg_inf;
    return out;
}

std::vector<double> MixtureParams::nus() const {
    std::vector<double> out;
    out.reserve(components_.size());
    for (const auto& c : components_) out.push_back(c.nu());
    return out;
}

// ---------------------------------------------------------------------------

double mixture_loglik(const Dataset& data, const MixtureParams& theta, ExecPolicy policy) {
    const auto lw = theta.log_weights();
    const ComponentTable table = evaluate_components(data, theta.components(), lw, false, policy);
    return pairwise_sum(row_log_likelihoods(table));
}

EStepResult e_step(const Dataset& data, const MixtureParams& theta, ExecPolicy policy) {
    const auto lw = theta.log_weights();
    EStepResult out;
    out.table = evaluate_components(data, theta.components(), lw, true, policy);
    out.row_loglik = row_log_likelihoods(out.table);
    const std::size_t groups = theta.groups();
    out.resp.z_hat.resize(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(groups));
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double row = out.row_loglik[i];
        if (!std::isfinite(row)) {
            throw NumericalRangeError("every component density underflows for observation " + std::to_string(i + 1));
        }
        for (std::size_t g = 0; g < groups; ++g) {
            out.resp.z_hat(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(g)) =
                std::exp(out.table.log_weighted[out.table.index(i, g)] - row);
        }
    }
    for (unsigned char u : out.table.tail_underflow) out.tail_underflows += u;
    out.loglik = pairwise_sum(out.row_loglik);
    return out;
}

MixtureParams mixture_cm_steps(const Dataset& data, const EStepResult& estep, const MixtureParams& current) {
    const std::size_t groups = current.groups();
    const std::size_t count = data.size();
    if (static_cast<std::size_t>(estep.resp.z_hat.rows()) != count ||
        static_cast<std::size_t>(estep.resp.z_hat.cols()) != groups) {
        throw DimensionError("mixture_cm_steps: responsibilities do not match data and components");
    }
    const double required = static_cast<double>(data.rows() * data.cols()) + 1.0;

    std::vector<double> weights(groups);
    std::vector<MvstParams> components;
    components.reserve(groups);
    std::vector<double> z(count);
    std::vector<PosteriorMoments> moments(count);
    for (std::size_t g = 0; g < groups; ++g) {
        for (std::size_t i = 0; i < count; ++i) {
            z[i] = estep.resp.z_hat(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(g));
            moments[i] = estep.table.moments[estep.table.index(i, g)];
        }
        const double effective = pairwise_sum(z);
        if (effective < required) throw DegenerateClusterError(g, effective, required);
        weights[g] = effective / static_cast<double>(count);

        const MvstParams& old = current.component(g);
        const CmUpdate upd = weighted_cm_updates(data, z, moments, old);
        components.emplace_back(upd.location, upd.sigma, upd.psi, upd.lambda, old.nu(), old.variant());
    }
    // Row sums of z are 1 only up to rounding, so the weights are renormalized.
    double total = 0.0;
    for (double w : weights) total += w;
    if (groups > 1) {
        for (double& w : weights) w /= total;
    }
    return MixtureParams(std::move(weights), std::move(components));
}

std::vector<double> mixture_cml_nu(const Dataset& data, const MixtureParams& theta_fixed, NuBounds bounds,
                                   ExecPolicy policy) {
    std::vector<double> nus = theta_fixed.nus();
    if (!has_nu(theta_fixed.variant())) return nus;
    bounds.validate();
    const std::size_t groups = theta_fixed.groups();
    const auto lw = theta_fixed.log_weights();
    ComponentTable table = evaluate_components(data, theta_fixed.components(), lw, false, policy);

    const std::size_t count = data.size();
    std::vector<QuadForms> forms(count);
    std::vector<double> others(count);
    std::vector<double> scratch;
    const int cycles = groups == 1 ? 1 : 2;
    for (int cycle = 0; cycle < cycles; ++cycle) {
        for (std::size_t g = 0; g < groups; ++g) {
            if (lw[g] == neg_inf) continue;
            for (std::size_t i = 0; i < count; ++i) {
                forms[i] = table.forms[table.index(i, g)];
                double acc = neg_inf;
                for (std::size_t h = 0; h < groups; ++h) {
                    if (h != g) acc = log_add_exp(acc, table.log_weighted[table.index(i, h)]);
                }
                others[i] = acc;
            }
            const MvstParams& c = theta_fixed.component(g);
            const double ld_sigma = c.sigma_factor().log_determinant();
            const double ld_psi = c.psi_factor().log_determinant();
            auto objective = [&](double nu) {
                const LogDensityEvaluator density(c.rows(), c.cols(), ld_sigma, ld_psi, nu, c.variant());
                return nu_objective(forms, others, lw[g], density, scratch, policy);
            };
            nus[g] = golden_section_nu(objective, bounds, nus[g]).nu;

            const LogDensityEvaluator density(c.rows(), c.cols(), ld_sigma, ld_psi, nus[g], c.variant());
            for (std::size_t i = 0; i < count; ++i) {
                table.log_weighted[table.index(i, g)] = lw[g] + density(forms[i]);
            }
        }
    }
    return nus;
}

// ---------------------------------------------------------------------------

LabelVector classify(const Responsibilities& resp) {
    const auto& z = resp.z_hat;
    LabelVector labels(static_cast<std::size_t>(z.rows()));
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index g = 1; g < z.cols(); ++g) {
            if (z(i, g) > z(i, best)) best = g;
        }
        labels[static_cast<std::size_t>(i)] = static_cast<int>(best) + 1;
    }
    return labels;
}

std::pair<Matrix, Matrix> rescale_identifiability(const Matrix& sigma, const Matrix& psi) {
    if (sigma.rows() == 0 || !(sigma(0, 0) > 0.0)) throw NotPositiveDefiniteError(0);
    const double c = sigma(0, 0);
    return {sigma / c, psi * c};
}

MvstParams rescale_identifiability(const MvstParams& theta) {
    auto [sigma, psi] = rescale_identifiability(theta.sigma(), theta.psi());
    return theta.with_scales(std::move(sigma), std::move(psi));
}

MixtureParams rescale_identifiability(const MixtureParams& theta) {
    std::vector<MvstParams> comps;
    comps.reserve(theta.groups());
    for (const auto& c : theta.components()) comps.push_back(rescale_identifiability(c));
    return MixtureParams(theta.weights(), std::move(comps));
}

long parameter_count(std::size_t rows, std::size_t cols, std::size_t groups, Variant variant) {
    const long n = static_cast<long>(rows);
    const long p = static_cast<long>(cols);
    const long g = static_cast<long>(groups);
    const long per = n * p + (has_skew(variant) ? n * p : 0) + n * (n + 1) / 2 - 1 + p * (p + 1) / 2 +
                     (has_nu(variant) ? 1 : 0);
    return g * per + g - 1;
}

// ---------------------------------------------------------------------------

FitResult fit_mixture_from(const Dataset& data, const MixtureParams& init, const FitConfig& config) {
    config.validate();
    if (data.size() < 2) throw DomainError("fit_mixture: need at least two observations");
    if (init.rows() != data.rows() || init.cols() != data.cols()) {
        throw DimensionError("fit_mixture: initial parameters do not match the data shape");
    }
    if (init.variant() != config.variant) throw DomainError("fit_mixture: initial parameters use a different variant");

    MixtureParams theta = init;
    EStepResult estep = e_step(data, theta, config.policy);
    FitTrace trace;
    trace.initial_loglik = estep.loglik;
    if (!std::isfinite(estep.loglik)) throw NonFiniteLikelihoodError(0);
    double previous = estep.loglik;

    for (int it = 1; it <= config.max_iter; ++it) {
        trace.tail_underflows += estep.tail_underflows;
        MixtureParams next = mixture_cm_steps(data, estep, theta);
        if (has_nu(next.variant())) {
            const auto nus = mixture_cml_nu(data, next, config.nu_bounds, config.policy);
            std::vector<MvstParams> comps;
            comps.reserve(next.groups());
            for (std::size_t g = 0; g < next.groups(); ++g) comps.push_back(next.component(g).with_nu(nus[g]));
            next = MixtureParams(next.weights(), std::move(comps));
        }
        if (config.rescale_timing == RescaleTiming::PerIteration) next = rescale_identifiability(next);
        theta = std::move(next);

        estep = e_step(data, theta, config.policy);
        const double current = estep.loglik;
        if (!std::isfinite(current)) throw NonFiniteLikelihoodError(it);
        trace.loglik_per_iter.push_back(current);
        trace.iterations = it;
        if (converged(previous, current, config.tol)) {
            trace.converged = true;
            break;
        }
        previous = current;
    }
    if (config.rescale_timing == RescaleTiming::AtConvergence) {
        theta = rescale_identifiability(theta);
        estep = e_step(data, theta, config.policy);
    }

    FitResult result{theta, std::move(trace), estep.resp, classify(estep.resp), estep.loglik, 0.0, 0, config};
    result.parameter_count = parameter_count(data.rows(), data.cols(), theta.groups(), theta.variant());
    result.bic = bic(result.loglik, result.parameter_count, data.size());
    return result;
}

FitResult fit_mixture(const Dataset& data, std::size_t groups, const FitConfig& config) {
    config.validate();
    if (groups == 0) throw DomainError("fit_mixture: groups must be positive");
    if (data.size() <= groups) throw DomainError("fit_mixture: need more observations than groups");
    const InitSpec spec = config.init_spec();
    const Matrix z0 = kmeans_partition(data, groups, spec);
    const MixtureParams init = initial_params(data, z0, spec, config.variant);
    return fit_mixture_from(data, init, config);
}

}  // namespace mvst
