#pragma once

#include "mvst/core_math.hpp"
#include "mvst/rng.hpp"
#include "mvst/types.hpp"

#include <cstdint>
#include <vector>

namespace mvst {

/// Parameters theta = (M, Sigma, Psi, Lambda, nu) of one matrix-variate skew-t
/// component, or of one of its reduced variants:
///
///   MVST   full model
///   RMVSN  nu -> infinity (restricted skew-normal); nu is stored as +inf
///   MVT    Lambda = 0
///   MVN    Lambda = 0 and nu -> infinity
///
/// Construction validates shapes, symmetrizes and factorizes Sigma and Psi, and caches
/// the whitened skewness L_Sigma^{-1} Lambda L_Psi^{-T}. Immutable afterwards.
class MvstParams {
public:
    MvstParams(Matrix location, Matrix sigma, Matrix psi, Matrix lambda, double nu, Variant variant);

    std::size_t rows() const noexcept { return static_cast<std::size_t>(location_.rows()); }
    std::size_t cols() const noexcept { return static_cast<std::size_t>(location_.cols()); }

    const Matrix& location() const noexcept { return location_; }
    const Matrix& sigma() const noexcept { return sigma_; }
    const Matrix& psi() const noexcept { return psi_; }
    const Matrix& lambda() const noexcept { return lambda_; }
    double nu() const noexcept { return nu_; }
    Variant variant() const noexcept { return variant_; }

    const SpdFactor& sigma_factor() const noexcept { return sigma_factor_; }
    const SpdFactor& psi_factor() const noexcept { return psi_factor_; }

    /// L_Sigma^{-1} Lambda L_Psi^{-T}
    const Matrix& whitened_lambda() const noexcept { return whitened_lambda_; }
    /// tr[Sigma^-1 Lambda Psi^-1 Lambda^T]
    double rho() const noexcept { return rho_; }

    /// Copy with a different nu; ignored for variants without nu.
    MvstParams with_nu(double nu) const;

    /// (Sigma / c, c Psi) leaves the distribution unchanged.
    MvstParams with_scales(Matrix sigma, Matrix psi) const;

private:
    Matrix location_;
    Matrix sigma_;
    Matrix psi_;
    Matrix lambda_;
    double nu_;
    Variant variant_;
    SpdFactor sigma_factor_;
    SpdFactor psi_factor_;
    Matrix whitened_lambda_;
    double rho_;
};

/// Posterior moments of the latent (W, gamma) given one observation:
/// w_hat = E(W|Y), kappa1_hat = E(gamma W|Y), kappa2_hat = E(gamma^2 W|Y).
struct PosteriorMoments {
    double w_hat = 1.0;
    double kappa1_hat = 0.0;
    double kappa2_hat = 1.0;
};

/// Log-density evaluator with every nu-dependent constant precomputed; evaluating it on
/// many QuadForms is the inner loop of both the E-step and the nu search.
class LogDensityEvaluator {
public:
    LogDensityEvaluator(std::size_t rows, std::size_t cols, double log_det_sigma, double log_det_psi, double nu,
                        Variant variant);
    LogDensityEvaluator(const MvstParams& theta);

    double operator()(const QuadForms& q) const;

private:
    Variant variant_;
    double dims_;
    double nu_;
    double constant_;
    StudentTCdf tcdf_;
};

/// ln f(Y; theta).
double log_density(const MatrixObservation& y, const MvstParams& theta);

/// Moments from precomputed forms; `dims` = n * p. Sets `tail_underflow` when the t-cdf
/// normalizer falls below 1e-300 (the moments are still computed in log space).
PosteriorMoments posterior_moments_from_forms(const QuadForms& q, double dims, double nu, Variant variant,
                                              bool& tail_underflow);
PosteriorMoments posterior_moments_from_forms(const QuadForms& q, double dims, double nu, Variant variant);

PosteriorMoments posterior_moments(const MatrixObservation& y, const MvstParams& theta);

/// Normalized ln f(w | Y) for the MVST variant.
double posterior_w_logpdf(double w, const MatrixObservation& y, const MvstParams& theta);

/// E(Y) = M + c(nu) Lambda, c(nu) = sqrt(nu/pi) Gamma((nu-1)/2) / Gamma(nu/2); requires nu > 1.
Matrix mean(const MvstParams& theta);

/// c(nu) above; sqrt(2/pi) for the nu -> infinity limit.
double mean_skew_constant(double nu);

/// One draw of Y = M + W^{-1/2} (U Lambda + Z).
Matrix sample_one(const MvstParams& theta, Engine& engine);

/// `count` draws; draw i uses stream (seed, i), so output is identical for any thread count.
std::vector<Matrix> sample(const MvstParams& theta, std::size_t count, std::uint64_t seed);

}  // namespace mvst
