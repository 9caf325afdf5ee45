#pragma once

// Finite mixtures of MVST components (or of one reduced variant) fitted by ECME.

#include "mvst/config.hpp"
#include "mvst/distribution.hpp"
#include "mvst/ecme.hpp"
#include "mvst/kernels.hpp"
#include "mvst/types.hpp"

#include <vector>

namespace mvst {

class MixtureParams {
public:
    /// Weights must be nonnegative and sum to 1 within 1e-12; components must share
    /// shape and variant.
    MixtureParams(std::vector<double> weights, std::vector<MvstParams> components);

    std::size_t groups() const noexcept { return components_.size(); }
    std::size_t rows() const noexcept { return components_.front().rows(); }
    std::size_t cols() const noexcept { return components_.front().cols(); }
    Variant variant() const noexcept { return components_.front().variant(); }

    const std::vector<double>& weights() const noexcept { return weights_; }
    const std::vector<MvstParams>& components() const noexcept { return components_; }
    const MvstParams& component(std::size_t g) const { return components_.at(g); }

    std::vector<double> log_weights() const;
    std::vector<double> nus() const;

private:
    std::vector<double> weights_;
    std::vector<MvstParams> components_;
};

struct Responsibilities {
    Matrix z_hat;  // N x G
};

struct EStepResult {
    Responsibilities resp;
    ComponentTable table;
    std::vector<double> row_loglik;
    double loglik = 0.0;
    long tail_underflows = 0;
};

/// sum_i ln sum_g pi_g f(Y_i; theta_g).
double mixture_loglik(const Dataset& data, const MixtureParams& theta, ExecPolicy policy = ExecPolicy::Parallel);

/// Responsibilities and per-(i, g) posterior moments. Throws NumericalRangeError when
/// every component density underflows for some observation.
EStepResult e_step(const Dataset& data, const MixtureParams& theta, ExecPolicy policy = ExecPolicy::Parallel);

/// pi_g = sum_i z_ig / N followed by the z-weighted single-component updates. nu is
/// carried over unchanged. Throws DegenerateClusterError when sum_i z_ig < np + 1.
MixtureParams mixture_cm_steps(const Dataset& data, const EStepResult& estep, const MixtureParams& current);

/// Cyclic coordinate search over (nu_1..nu_G) on the mixture log-likelihood, two sweeps
/// (one when G = 1). Returns the current nus for variants without nu.
std::vector<double> mixture_cml_nu(const Dataset& data, const MixtureParams& theta_fixed, NuBounds bounds,
                                   ExecPolicy policy = ExecPolicy::Parallel);

struct FitResult {
    MixtureParams params;
    FitTrace trace;
    Responsibilities resp;
    LabelVector labels;
    double loglik = 0.0;
    double bic = 0.0;
    long parameter_count = 0;
    FitConfig config;
};

/// Initializes with kmeans_partition + initial_params, then runs ECME.
FitResult fit_mixture(const Dataset& data, std::size_t groups, const FitConfig& config);

/// ECME from given starting values.
FitResult fit_mixture_from(const Dataset& data, const MixtureParams& init, const FitConfig& config);

/// Row-wise argmax, 1-based; ties go to the lowest index.
LabelVector classify(const Responsibilities& resp);

/// (Sigma / Sigma[0,0], Psi * Sigma[0,0]).
std::pair<Matrix, Matrix> rescale_identifiability(const Matrix& sigma, const Matrix& psi);
MvstParams rescale_identifiability(const MvstParams& theta);
MixtureParams rescale_identifiability(const MixtureParams& theta);

/// Free parameters of a G-component model:
/// G (np [+ np] + n(n+1)/2 - 1 + p(p+1)/2 [+ 1]) + G - 1.
long parameter_count(std::size_t rows, std::size_t cols, std::size_t groups, Variant variant);

}  // namespace mvst
