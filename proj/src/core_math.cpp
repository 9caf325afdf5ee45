#include "mvst/core_math.hpp"

#include "mvst/distribution.hpp"
#include "mvst/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace mvst {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;
constexpr double kLogHalf = -0.69314718055994530941723212145818;

// Bernoulli coefficients B_{2k} / (2k (2k - 1)) of the Stirling series.
constexpr double kStirling[] = {
    1.0 / 12.0,         -1.0 / 360.0,      1.0 / 1260.0,          -1.0 / 1680.0,
    1.0 / 1188.0,       -691.0 / 360360.0, 1.0 / 156.0,           -3617.0 / 122400.0,
};

double stirling_tail(double z) {
    const double inv = 1.0 / z;
    const double inv2 = inv * inv;
    double term = inv;
    double sum = 0.0;
    for (double c : kStirling) {
        sum += c * term;
        term *= inv2;
    }
    return sum;
}

// Modified Lentz evaluation of the continued fraction for I_x(a, b).
double incomplete_beta_cf(double a, double b, double x) {
    constexpr double tiny = 1e-300;
    constexpr double eps = 1e-16;
    const int max_iter = 200 + static_cast<int>(10.0 * std::sqrt(a + b));

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) return h;
    }
    throw NumericalRangeError("incomplete beta continued fraction did not converge (a=" + std::to_string(a) +
                              ", b=" + std::to_string(b) + ", x=" + std::to_string(x) + ")");
}

// ln I_x(a, b) with a precomputed ln B(a, b).
double log_incomplete_beta_impl(double a, double b, double x, double x1m, double lbeta) {
    if (x <= 0.0) return -std::numeric_limits<double>::infinity();
    if (x1m <= 0.0) return 0.0;
    if (x < (a + 1.0) / (a + b + 2.0)) {
        const double front = a * std::log(x) + b * std::log(x1m) - lbeta;
        return front + std::log(incomplete_beta_cf(a, b, x) / a);
    }
    const double front = b * std::log(x1m) + a * std::log(x) - lbeta;
    const double complement = std::exp(front) * incomplete_beta_cf(b, a, x1m) / b;
    return std::log1p(-complement);
}

// ln of the lower tail P(T <= -|x|) = I_z(df/2, 1/2) / 2 with z = df / (df + x^2).
double log_t_lower_tail(double abs_x, double half_df, double lbeta) {
    const double df = 2.0 * half_df;
    const double x2 = abs_x * abs_x;
    if (!std::isfinite(x2)) {
        // P(T <= -|x|) ~ |x|^-df
        return half_df * (std::log(df) - 2.0 * std::log(abs_x)) - lbeta - std::log(half_df) + kLogHalf;
    }
    const double denom = df + x2;
    const double z = df / denom;
    const double z1m = x2 / denom;
    return kLogHalf + log_incomplete_beta_impl(half_df, 0.5, z, z1m, lbeta);
}

double log_t_cdf_impl(double x, double half_df, double lbeta) {
    if (x == 0.0) return kLogHalf;
    if (std::isnan(x)) throw DomainError("student_t_cdf: x is NaN");
    const double tail = log_t_lower_tail(std::fabs(x), half_df, lbeta);
    if (x < 0.0) return tail;
    return std::log1p(-std::exp(tail));
}

void check_df(double df) {
    if (!(df > 0.0) || !std::isfinite(df)) {
        throw DomainError("student_t_cdf: degrees of freedom must be positive and finite, got " + std::to_string(df));
    }
}

}  // namespace

double log_gamma(double x) {
    if (!(x > 0.0) || !std::isfinite(x)) {
        throw DomainError("log_gamma: argument must be positive and finite, got " + std::to_string(x));
    }
#if defined(__GLIBC__)
    int sign = 0;
    return ::lgamma_r(x, &sign);
#else
    return std::lgamma(x);
#endif
}

double log_gamma_ratio(double x, double h) {
    if (h == 0.0) return 0.0;
    const double lo = std::min(x, x + h);
    if (lo < 10.0) return log_gamma(x + h) - log_gamma(x);
    // Stirling difference: no large terms to cancel.
    const double xh = x + h;
    return (x - 0.5) * std::log1p(h / x) + h * std::log(xh) - h + (stirling_tail(xh) - stirling_tail(x));
}

double log_beta(double a, double b) {
    if (!(a > 0.0) || !(b > 0.0)) throw DomainError("log_beta: arguments must be positive");
    const double big = std::max(a, b);
    const double small = std::min(a, b);
    return log_gamma(small) - log_gamma_ratio(big, small);
}

double log_incomplete_beta(double a, double b, double x, double x1m) {
    if (!(a > 0.0) || !(b > 0.0)) throw DomainError("log_incomplete_beta: shape parameters must be positive");
    if (x < 0.0 || x1m < 0.0) throw DomainError("log_incomplete_beta: x must lie in [0, 1]");
    return log_incomplete_beta_impl(a, b, x, x1m, log_beta(a, b));
}

double student_t_cdf(double x, double df) {
    check_df(df);
    if (x == 0.0) return 0.5;
    const double half_df = 0.5 * df;
    const double tail = std::exp(log_t_lower_tail(std::fabs(x), half_df, log_beta(half_df, 0.5)));
    return x < 0.0 ? tail : 1.0 - tail;
}

double log_student_t_cdf(double x, double df) {
    check_df(df);
    const double half_df = 0.5 * df;
    return log_t_cdf_impl(x, half_df, log_beta(half_df, 0.5));
}

StudentTCdf::StudentTCdf(double df) : df_(df), half_df_(0.5 * df), log_beta_(0.0) {
    check_df(df);
    log_beta_ = log_beta(half_df_, 0.5);
}

double StudentTCdf::log_cdf(double x) const { return log_t_cdf_impl(x, half_df_, log_beta_); }

double log_normal_pdf(double x) noexcept { return -0.5 * x * x - 0.5 * kLogTwoPi; }

namespace {

// Laplace continued fraction for the Mills ratio: Phi(-t) = phi(t) / (t + K_1),
// K_j = j / (t + K_{j+1}). Evaluated backwards; accurate for t >= 8.
struct MillsTail {
    double k1;
    double k2;
};

MillsTail mills_tail(double t) {
    constexpr int depth = 120;
    double k = 0.0;
    double k_next = 0.0;
    for (int j = depth; j >= 1; --j) {
        k_next = k;
        k = j / (t + k);
    }
    return {k, k_next};
}

}  // namespace

double log_normal_cdf(double x) {
    if (std::isnan(x)) throw DomainError("log_normal_cdf: x is NaN");
    constexpr double inv_sqrt2 = 0.70710678118654752440084436210485;
    if (x > 5.0) return std::log1p(-0.5 * std::erfc(x * inv_sqrt2));
    if (x > -8.0) return std::log(0.5 * std::erfc(-x * inv_sqrt2));
    if (!std::isfinite(x)) return -std::numeric_limits<double>::infinity();
    const double t = -x;
    const MillsTail tail = mills_tail(t);
    return log_normal_pdf(x) - std::log(t + tail.k1);
}

TruncatedNormalMoments truncated_normal_moments(double x) {
    if (x >= -8.0) {
        const double mills = std::exp(log_normal_pdf(x) - log_normal_cdf(x));
        const double first = x + mills;
        return {first, 1.0 + x * first};
    }
    const MillsTail tail = mills_tail(-x);
    return {tail.k1, tail.k1 * tail.k2};
}

// ---------------------------------------------------------------------------

Matrix SpdFactor::solve(const Matrix& b) const {
    if (b.rows() != lower_.rows()) throw DimensionError("SpdFactor::solve: row count mismatch");
    Matrix y = lower_.triangularView<Eigen::Lower>().solve(b);
    return lower_.transpose().triangularView<Eigen::Upper>().solve(y);
}

Matrix SpdFactor::whiten(const Matrix& b) const {
    if (b.rows() != lower_.rows()) throw DimensionError("SpdFactor::whiten: row count mismatch");
    return lower_.triangularView<Eigen::Lower>().solve(b);
}

Matrix SpdFactor::reconstruct() const { return lower_ * lower_.transpose(); }

Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

SpdFactor spd_factorize(const Matrix& a) {
    if (a.rows() != a.cols() || a.rows() == 0) throw DimensionError("spd_factorize: matrix must be square and non-empty");
    if (!a.allFinite()) throw DomainError("spd_factorize: matrix has non-finite entries");
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    const double asymmetry = (a - a.transpose()).cwiseAbs().maxCoeff();
    if (asymmetry > 1e-10 * scale) {
        throw DomainError("spd_factorize: matrix is not symmetric (max asymmetry " + std::to_string(asymmetry) + ")");
    }
    const Matrix s = symmetrize(a);
    const Eigen::Index dim = s.rows();
    Matrix lower = Matrix::Zero(dim, dim);
    double log_det = 0.0;
    for (Eigen::Index j = 0; j < dim; ++j) {
        double pivot = s(j, j);
        for (Eigen::Index k = 0; k < j; ++k) pivot -= lower(j, k) * lower(j, k);
        // Relative floor: a pivot lost in roundoff is as singular as a negative one.
        if (!(pivot > 1e-14 * std::fabs(s(j, j))) || !(pivot > 0.0)) {
            throw NotPositiveDefiniteError(static_cast<std::size_t>(j));
        }
        const double root = std::sqrt(pivot);
        lower(j, j) = root;
        log_det += 2.0 * std::log(root);
        for (Eigen::Index i = j + 1; i < dim; ++i) {
            double v = s(i, j);
            for (Eigen::Index k = 0; k < j; ++k) v -= lower(i, k) * lower(j, k);
            lower(i, j) = v / root;
        }
    }
    return SpdFactor(std::move(lower), log_det);
}

JitteredFactor spd_factorize_with_jitter(const Matrix& a) {
    Matrix s = symmetrize(a);
    try {
        SpdFactor f = spd_factorize(s);
        return {std::move(s), std::move(f), false};
    } catch (const NotPositiveDefiniteError&) {
    }
    const double mean_diag = s.diagonal().mean();
    const double bump = mean_diag > 0.0 ? 1e-8 * mean_diag : 1e-8;
    s.diagonal().array() += bump;
    try {
        SpdFactor f = spd_factorize(s);
        return {std::move(s), std::move(f), true};
    } catch (const NotPositiveDefiniteError& e) {
        throw DegenerateScatterError(std::string("scatter matrix is singular even after jitter: ") + e.what());
    }
}

// ---------------------------------------------------------------------------

double QuadForms::residual() const noexcept { return std::max(delta - cap_delta * cap_delta, 0.0); }

QuadForms quad_forms(const MatrixObservation& y, const MvstParams& theta) {
    if (static_cast<std::size_t>(y.rows()) != theta.rows() || static_cast<std::size_t>(y.cols()) != theta.cols()) {
        throw DimensionError("quad_forms: observation is " + std::to_string(y.rows()) + "x" + std::to_string(y.cols()) +
                             " but parameters are " + std::to_string(theta.rows()) + "x" +
                             std::to_string(theta.cols()));
    }
    const Matrix left = theta.sigma_factor().whiten(y - theta.location());
    const Matrix white = theta.psi_factor().whiten(left.transpose()).transpose();
    QuadForms q;
    q.delta = white.squaredNorm();
    q.rho = theta.rho();
    q.eta = white.cwiseProduct(theta.whitened_lambda()).sum();
    q.cap_delta = q.eta / std::sqrt(q.rho + 1.0);
    return q;
}

double zeta_from_forms(const QuadForms& q, double dims, double nu) {
    if (!(nu > 0.0) || !std::isfinite(nu)) throw DomainError("zeta: nu must be positive and finite");
    const double a = 0.5 * (nu + dims);
    const double scale = q.residual() + nu;
    const double log_t0 = log_student_t_cdf(q.cap_delta * std::sqrt(2.0 * a / scale), 2.0 * a);
    const double spread = q.delta + nu;
    const double log_zeta = log_gamma_ratio(a, 0.5) - 0.5 * kLogTwoPi - log_t0 +
                            a * std::log1p(-q.cap_delta * q.cap_delta / spread) - 0.5 * std::log(0.5 * spread);
    if (log_zeta > 700.0) {
        throw NumericalRangeError("zeta: log magnitude " + std::to_string(log_zeta) + " exceeds the representable range");
    }
    return std::exp(log_zeta);
}

double zeta(const MatrixObservation& y, const MvstParams& theta) {
    if (!has_nu(theta.variant())) throw DomainError("zeta: requires a variant with finite nu");
    return zeta_from_forms(quad_forms(y, theta), static_cast<double>(theta.rows() * theta.cols()), theta.nu());
}

double pairwise_sum(std::span<const double> values) noexcept {
    if (values.size() <= 16) {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

double log_sum_exp(std::span<const double> values) noexcept {
    double top = -std::numeric_limits<double>::infinity();
    for (double v : values) top = std::max(top, v);
    if (!std::isfinite(top)) return top;
    double s = 0.0;
    for (double v : values) s += std::exp(v - top);
    return top + std::log(s);
}

}  // namespace mvst
