#pragma once

// Maximum-likelihood fitting of a single MVST component by ECME: an E-step of
// closed-form posterior moments, conditional maximization of the expected
// complete-data log-likelihood over M, Sigma, Psi and Lambda in that order, and a
// direct maximization of the observed log-likelihood over nu.

#include "mvst/config.hpp"
#include "mvst/distribution.hpp"
#include "mvst/types.hpp"

#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace mvst {

struct FitTrace {
    double initial_loglik = 0.0;
    std::vector<double> loglik_per_iter;  // observed-data log-likelihood after each full iteration
    int iterations = 0;
    bool converged = false;
    /// E-step cells whose t-cdf normalizer fell below 1e-300.
    long tail_underflows = 0;
};

/// Realized latent variables of one observation.
struct Latent {
    double w = 1.0;
    double gamma = 0.0;
};

/// Complete-data log-likelihood, without the additive constants that do not involve parameters.
double complete_data_loglik(const Dataset& data, const MvstParams& theta, std::span<const Latent> latents);

/// Expected complete-data log-likelihood given moments, omitting the E(ln W | Y) term
/// (its coefficient depends on nu only).
double q_function(const Dataset& data, const MvstParams& theta, std::span<const PosteriorMoments> moments);

/// Weighted version used by the mixture: sum_i z_i { ... } for one component.
double weighted_q_function(const Dataset& data, std::span<const double> weights, const MvstParams& theta,
                           std::span<const PosteriorMoments> moments);

struct CmUpdate {
    Matrix location;
    Matrix sigma;
    Matrix psi;
    Matrix lambda;
};

/// One round of the closed-form conditional updates for a component whose
/// observations carry weights z_i (all ones for a single component):
///
///   M      = (sum z w Y - Lambda sum z k1) / sum z w
///   Sigma  = S(M, Psi, Lambda) / (p sum z)
///   Psi    = T(M, Sigma_new, Lambda) / (n sum z)
///   Lambda = sum z k1 (Y - M) / sum z k2
///
/// where S and T are the expected scatters of (Y - M - gamma Lambda) weighted by W.
/// Skew terms are dropped for variants without Lambda. Sigma and Psi are symmetrized
/// and factorized with one jitter retry; failure raises DegenerateScatterError.
CmUpdate weighted_cm_updates(const Dataset& data, std::span<const double> weights,
                             std::span<const PosteriorMoments> moments, const MvstParams& current);

CmUpdate cm_updates(const Dataset& data, std::span<const PosteriorMoments> moments, const MvstParams& current);

/// Maximizes `objective` over ln(nu) in [ln lower, ln upper] by golden-section search
/// (at most 60 iterations). Never returns a point worse than `incumbent`.
struct NuSearch {
    double nu;
    double value;
};
NuSearch golden_section_nu(const std::function<double(double)>& objective, NuBounds bounds, double incumbent);

/// argmax_nu sum_i ln f(Y_i; M, Sigma, Psi, Lambda, nu).
double cml_nu(const Dataset& data, const MvstParams& theta_fixed, NuBounds bounds,
              ExecPolicy policy = ExecPolicy::Parallel);

/// Runs ECME from `init` until the relative log-likelihood change drops below config.tol
/// or config.max_iter iterations have run.
std::pair<MvstParams, FitTrace> fit_single(const Dataset& data, const MvstParams& init, const FitConfig& config);

/// Sum_i ln f(Y_i; theta).
double loglik(const Dataset& data, const MvstParams& theta, ExecPolicy policy = ExecPolicy::Parallel);

/// True when the relative change criterion is met.
bool converged(double previous, double current, double tol) noexcept;

}  // namespace mvst
