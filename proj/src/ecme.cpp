#include "mvst/ecme.hpp"

#include "mvst/errors.hpp"
#include "mvst/kernels.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace mvst {

void NuBounds::validate() const {
    if (!(lower > 0.0) || !(lower < upper) || !std::isfinite(upper)) {
        throw DomainError("nu bounds must satisfy 0 < lower < upper < inf");
    }
}

void InitSpec::validate() const {
    if (kmeans_restarts < 1) throw DomainError("kmeans_restarts must be positive");
    if (!(lambda_lower < lambda_upper)) throw DomainError("lambda range must satisfy lower < upper");
    if (!(nu_init > 0.0) || !std::isfinite(nu_init)) throw DomainError("nu_init must be positive and finite");
}

void FitConfig::validate() const {
    if (!(tol > 0.0)) throw DomainError("tol must be positive");
    if (max_iter < 1) throw DomainError("max_iter must be positive");
    nu_bounds.validate();
    init.validate();
}

InitSpec FitConfig::init_spec() const {
    InitSpec spec = init;
    spec.seed = seed;
    return spec;
}

bool converged(double previous, double current, double tol) noexcept {
    return std::fabs(current - previous) / (std::fabs(previous) + 1.0) < tol;
}

// ---------------------------------------------------------------------------

double complete_data_loglik(const Dataset& data, const MvstParams& theta, std::span<const Latent> latents) {
    if (latents.size() != data.size()) {
        throw DimensionError("complete_data_loglik: " + std::to_string(latents.size()) + " latents for " +
                             std::to_string(data.size()) + " observations");
    }
    const double n = static_cast<double>(theta.rows());
    const double p = static_cast<double>(theta.cols());
    const double nu = theta.nu();
    const bool tails = has_nu(theta.variant());
    const double shared = (tails ? nu * std::log(0.5 * nu) - 2.0 * log_gamma(0.5 * nu) : 0.0) -
                          p * theta.sigma_factor().log_determinant() - n * theta.psi_factor().log_determinant();
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const QuadForms q = quad_forms(data[i], theta);
        const double w = latents[i].w;
        const double g = latents[i].gamma;
        double term = shared + 2.0 * q.eta * g * w - (q.rho + 1.0) * g * g * w - q.delta * w;
        if (tails) term += -nu * w + (nu + n * p - 1.0) * std::log(w);
        total += 0.5 * term;
    }
    return total;
}

double weighted_q_function(const Dataset& data, std::span<const double> weights, const MvstParams& theta,
                           std::span<const PosteriorMoments> moments) {
    if (weights.size() != data.size() || moments.size() != data.size()) {
        throw DimensionError("q_function: weights and moments must have one entry per observation");
    }
    const double n = static_cast<double>(theta.rows());
    const double p = static_cast<double>(theta.cols());
    const double nu = theta.nu();
    const bool tails = has_nu(theta.variant());
    const double shared = (tails ? nu * std::log(0.5 * nu) - 2.0 * log_gamma(0.5 * nu) : 0.0) -
                          p * theta.sigma_factor().log_determinant() - n * theta.psi_factor().log_determinant();
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const QuadForms q = quad_forms(data[i], theta);
        const PosteriorMoments& m = moments[i];
        double term = shared + 2.0 * q.eta * m.kappa1_hat - (q.rho + 1.0) * m.kappa2_hat - q.delta * m.w_hat;
        if (tails) term -= nu * m.w_hat;
        total += 0.5 * weights[i] * term;
    }
    return total;
}

double q_function(const Dataset& data, const MvstParams& theta, std::span<const PosteriorMoments> moments) {
    const std::vector<double> ones(data.size(), 1.0);
    return weighted_q_function(data, ones, theta, moments);
}

// ---------------------------------------------------------------------------

namespace {

// X F^{-T} for the Cholesky factor F of a column-scale matrix.
Matrix right_whiten(const SpdFactor& f, const Matrix& x) { return f.whiten(x.transpose()).transpose(); }

}  // namespace

CmUpdate weighted_cm_updates(const Dataset& data, std::span<const double> weights,
                             std::span<const PosteriorMoments> moments, const MvstParams& current) {
    if (weights.size() != data.size() || moments.size() != data.size()) {
        throw DimensionError("cm_updates: weights and moments must have one entry per observation");
    }
    if (data.empty()) throw DimensionError("cm_updates: empty dataset");
    const bool skew = has_skew(current.variant());
    const auto rows = static_cast<Eigen::Index>(data.rows());
    const auto cols = static_cast<Eigen::Index>(data.cols());

    double sum_z = 0.0;
    double sum_zw = 0.0;
    double sum_zk1 = 0.0;
    double sum_zk2 = 0.0;
    Matrix weighted_y = Matrix::Zero(rows, cols);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double z = weights[i];
        sum_z += z;
        sum_zw += z * moments[i].w_hat;
        weighted_y += (z * moments[i].w_hat) * data[i];
        if (skew) {
            sum_zk1 += z * moments[i].kappa1_hat;
            sum_zk2 += z * moments[i].kappa2_hat;
        }
    }
    if (!(sum_zw > 0.0) || !(sum_z > 0.0)) throw DegenerateScatterError("cm_updates: weights sum to zero");

    const Matrix& lambda = current.lambda();
    CmUpdate out;
    out.location = skew ? Matrix((weighted_y - lambda * sum_zk1) / sum_zw) : Matrix(weighted_y / sum_zw);

    // B = sum z k1 (Y - M)
    std::vector<Matrix> resid(data.size());
    Matrix skew_resid = Matrix::Zero(rows, cols);
    for (std::size_t i = 0; i < data.size(); ++i) {
        resid[i] = data[i] - out.location;
        if (skew) skew_resid += (weights[i] * moments[i].kappa1_hat) * resid[i];
    }

    // Row scale, with Psi and Lambda at their current values.
    {
        const SpdFactor& psi_f = current.psi_factor();
        Matrix scatter = Matrix::Zero(rows, rows);
        for (std::size_t i = 0; i < data.size(); ++i) {
            const Matrix rw = right_whiten(psi_f, resid[i]);
            scatter.noalias() += (weights[i] * moments[i].w_hat) * (rw * rw.transpose());
        }
        if (skew) {
            const Matrix lw = right_whiten(psi_f, lambda);
            const Matrix bw = right_whiten(psi_f, skew_resid);
            const Matrix cross = bw * lw.transpose();
            scatter += sum_zk2 * (lw * lw.transpose()) - cross - cross.transpose();
        }
        scatter /= static_cast<double>(cols) * sum_z;
        out.sigma = spd_factorize_with_jitter(scatter).matrix;
    }

    // Column scale, with the new Sigma.
    {
        const SpdFactor sigma_f = spd_factorize(out.sigma);
        Matrix scatter = Matrix::Zero(cols, cols);
        for (std::size_t i = 0; i < data.size(); ++i) {
            const Matrix lw = sigma_f.whiten(resid[i]);
            scatter.noalias() += (weights[i] * moments[i].w_hat) * (lw.transpose() * lw);
        }
        if (skew) {
            const Matrix ll = sigma_f.whiten(lambda);
            const Matrix bl = sigma_f.whiten(skew_resid);
            const Matrix cross = bl.transpose() * ll;
            scatter += sum_zk2 * (ll.transpose() * ll) - cross - cross.transpose();
        }
        scatter /= static_cast<double>(rows) * sum_z;
        out.psi = spd_factorize_with_jitter(scatter).matrix;
    }

    if (skew) {
        if (!(sum_zk2 > 0.0)) throw DegenerateScatterError("cm_updates: skewness weights sum to zero");
        out.lambda = skew_resid / sum_zk2;
    } else {
        out.lambda = Matrix::Zero(rows, cols);
    }
    return out;
}

CmUpdate cm_updates(const Dataset& data, std::span<const PosteriorMoments> moments, const MvstParams& current) {
    const std::vector<double> ones(data.size(), 1.0);
    return weighted_cm_updates(data, ones, moments, current);
}

// ---------------------------------------------------------------------------

NuSearch golden_section_nu(const std::function<double(double)>& objective, NuBounds bounds, double incumbent) {
    bounds.validate();
    constexpr double inv_phi = 0.61803398874989484820458683436564;
    constexpr int max_iter = 60;
    constexpr double width_tol = 1e-6;  // in ln(nu)

    double a = std::log(bounds.lower);
    double b = std::log(bounds.upper);
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = objective(std::exp(c));
    double fd = objective(std::exp(d));
    for (int it = 0; it < max_iter && (b - a) > width_tol; ++it) {
        // NaN compares false, which moves the bracket away from the NaN point.
        if (fc > fd || std::isnan(fd)) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = objective(std::exp(c));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = objective(std::exp(d));
        }
    }
    NuSearch best = fc > fd || std::isnan(fd) ? NuSearch{std::exp(c), fc} : NuSearch{std::exp(d), fd};
    if (std::isfinite(incumbent) && incumbent > 0.0) {
        const double at_incumbent = objective(incumbent);
        if (!(best.value > at_incumbent)) best = {incumbent, at_incumbent};
    }
    return best;
}

double cml_nu(const Dataset& data, const MvstParams& theta_fixed, NuBounds bounds, ExecPolicy policy) {
    if (!has_nu(theta_fixed.variant())) return theta_fixed.nu();
    const double zero_weight[] = {0.0};
    const ComponentTable table =
        evaluate_components(data, std::span<const MvstParams>(&theta_fixed, 1), zero_weight, false, policy);
    const std::vector<double> others(data.size(), -std::numeric_limits<double>::infinity());
    std::vector<double> scratch;
    const double ld_sigma = theta_fixed.sigma_factor().log_determinant();
    const double ld_psi = theta_fixed.psi_factor().log_determinant();
    auto objective = [&](double nu) {
        const LogDensityEvaluator density(theta_fixed.rows(), theta_fixed.cols(), ld_sigma, ld_psi, nu,
                                          theta_fixed.variant());
        return nu_objective(table.forms, others, 0.0, density, scratch, policy);
    };
    return golden_section_nu(objective, bounds, theta_fixed.nu()).nu;
}

double loglik(const Dataset& data, const MvstParams& theta, ExecPolicy policy) {
    const double zero_weight[] = {0.0};
    const ComponentTable table =
        evaluate_components(data, std::span<const MvstParams>(&theta, 1), zero_weight, false, policy);
    return pairwise_sum(row_log_likelihoods(table));
}

// ---------------------------------------------------------------------------

namespace {

MvstParams rescaled(const MvstParams& theta) {
    const double c = theta.sigma()(0, 0);
    if (!(c > 0.0)) throw NotPositiveDefiniteError(0);
    return theta.with_scales(theta.sigma() / c, theta.psi() * c);
}

}  // namespace

std::pair<MvstParams, FitTrace> fit_single(const Dataset& data, const MvstParams& init, const FitConfig& config) {
    config.validate();
    if (data.size() < 2) throw DomainError("fit_single: need at least two observations");
    if (init.rows() != data.rows() || init.cols() != data.cols()) {
        throw DimensionError("fit_single: initial parameters do not match the data shape");
    }
    if (init.variant() != config.variant) throw DomainError("fit_single: initial parameters use a different variant");

    const double zero_weight[] = {0.0};
    MvstParams theta = init;
    ComponentTable table = evaluate_components(data, std::span<const MvstParams>(&theta, 1), zero_weight, true,
                                               config.policy);
    FitTrace trace;
    trace.initial_loglik = pairwise_sum(row_log_likelihoods(table));
    if (!std::isfinite(trace.initial_loglik)) throw NonFiniteLikelihoodError(0);
    double previous = trace.initial_loglik;

    for (int it = 1; it <= config.max_iter; ++it) {
        for (unsigned char u : table.tail_underflow) trace.tail_underflows += u;
        const CmUpdate upd = cm_updates(data, table.moments, theta);
        MvstParams next(upd.location, upd.sigma, upd.psi, upd.lambda, theta.nu(), theta.variant());
        if (has_nu(next.variant())) next = next.with_nu(cml_nu(data, next, config.nu_bounds, config.policy));
        if (config.rescale_timing == RescaleTiming::PerIteration) next = rescaled(next);
        theta = std::move(next);

        table = evaluate_components(data, std::span<const MvstParams>(&theta, 1), zero_weight, true, config.policy);
        const double current = pairwise_sum(row_log_likelihoods(table));
        if (!std::isfinite(current)) throw NonFiniteLikelihoodError(it);
        trace.loglik_per_iter.push_back(current);
        trace.iterations = it;
        if (converged(previous, current, config.tol)) {
            trace.converged = true;
            break;
        }
        previous = current;
    }
    if (config.rescale_timing == RescaleTiming::AtConvergence) theta = rescaled(theta);
    return {std::move(theta), std::move(trace)};
}

}  // namespace mvst
