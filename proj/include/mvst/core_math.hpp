#pragma once

#include "mvst/types.hpp"

#include <cstddef>
#include <span>

namespace mvst {

class MvstParams;

// ---------------------------------------------------------------------------
// Special functions
// ---------------------------------------------------------------------------

/// ln Gamma(x) for finite x > 0.
double log_gamma(double x);

/// ln Gamma(x + h) - ln Gamma(x), accurate when x is large and h is moderate.
double log_gamma_ratio(double x, double h);

/// ln B(a, b).
double log_beta(double a, double b);

/// ln I_x(a, b), the log of the regularized incomplete beta function. `x1m` must
/// equal 1 - x; passing it separately avoids cancellation when x is close to 1.
double log_incomplete_beta(double a, double b, double x, double x1m);

/// Student-t cdf with (possibly fractional) degrees of freedom.
double student_t_cdf(double x, double df);

/// ln P(T_df <= x), finite for every finite x.
double log_student_t_cdf(double x, double df);

/// Cached evaluator for many t-cdf calls that share the same degrees of freedom.
class StudentTCdf {
public:
    explicit StudentTCdf(double df);

    double df() const noexcept { return df_; }
    double log_cdf(double x) const;

private:
    double df_;
    double half_df_;
    double log_beta_;
};

/// ln Phi(x) for the standard normal cdf; accurate far into the lower tail.
double log_normal_cdf(double x);

/// ln phi(x) for the standard normal density.
double log_normal_pdf(double x) noexcept;

/// First two moments of V ~ N(x, 1) conditioned on V > 0. Stays accurate (and positive)
/// for x far below zero, where the textbook formulas cancel.
struct TruncatedNormalMoments {
    double first;
    double second;
};
TruncatedNormalMoments truncated_normal_moments(double x);

// ---------------------------------------------------------------------------
// SPD factorization
// ---------------------------------------------------------------------------

/// Cholesky factor A = L L^T of a symmetric positive definite matrix.
/// Immutable after construction.
class SpdFactor {
public:
    std::size_t dimension() const noexcept { return static_cast<std::size_t>(lower_.rows()); }
    double log_determinant() const noexcept { return log_det_; }
    const Matrix& lower() const noexcept { return lower_; }

    /// A^{-1} B.
    Matrix solve(const Matrix& b) const;
    /// L^{-1} B.
    Matrix whiten(const Matrix& b) const;
    /// L L^T.
    Matrix reconstruct() const;

private:
    friend SpdFactor spd_factorize(const Matrix& a);
    SpdFactor(Matrix lower, double log_det) : lower_(std::move(lower)), log_det_(log_det) {}

    Matrix lower_;
    double log_det_ = 0.0;
};

/// Factorizes a symmetric positive definite matrix. Asymmetry up to 1e-10 (relative to
/// the largest entry) is removed by averaging with the transpose; larger asymmetry is
/// rejected with DomainError. A non-positive pivot raises NotPositiveDefiniteError.
SpdFactor spd_factorize(const Matrix& a);

/// Result of a factorization that may have needed a diagonal nudge.
struct JitteredFactor {
    Matrix matrix;   // the (symmetrized, possibly jittered) matrix that was factorized
    SpdFactor factor;
    bool jittered;
};

/// Factorizes `a`; on failure adds 1e-8 * mean(diag(a)) to the diagonal and retries once.
/// A second failure is rethrown as DegenerateScatterError.
JitteredFactor spd_factorize_with_jitter(const Matrix& a);

/// (A + A^T) / 2
Matrix symmetrize(const Matrix& a);

// ---------------------------------------------------------------------------
// Quadratic forms
// ---------------------------------------------------------------------------

/// Trace forms of one observation under one parameter set:
///   delta     = tr[Sigma^-1 (Y-M) Psi^-1 (Y-M)^T]
///   rho       = tr[Sigma^-1 Lambda Psi^-1 Lambda^T]
///   eta       = tr[Sigma^-1 (Y-M) Psi^-1 Lambda^T]
///   cap_delta = eta / sqrt(rho + 1)
struct QuadForms {
    double delta = 0.0;
    double rho = 0.0;
    double eta = 0.0;
    double cap_delta = 0.0;

    /// delta - cap_delta^2, clamped at zero against roundoff.
    double residual() const noexcept;
};

QuadForms quad_forms(const MatrixObservation& y, const MvstParams& theta);

/// The normalized-skew correction term of E(gamma W | Y), evaluated in log space.
double zeta(const MatrixObservation& y, const MvstParams& theta);

/// zeta from precomputed forms; dims = n * p.
double zeta_from_forms(const QuadForms& q, double dims, double nu);

/// Pairwise summation in a fixed order; the result is independent of thread count.
double pairwise_sum(std::span<const double> values) noexcept;

/// ln sum exp(values)
double log_sum_exp(std::span<const double> values) noexcept;

}  // namespace mvst
