#include "mvst/distribution.hpp"

#include "mvst/errors.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace mvst {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;
constexpr double kLog2 = 0.69314718055994530941723212145818;
constexpr double kLogUnderflow = -690.77552789821368;  // ln 1e-300

void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const char* name) {
    if (m.rows() != rows || m.cols() != cols) {
        throw DimensionError(std::string("MvstParams: ") + name + " must be " + std::to_string(rows) + "x" +
                             std::to_string(cols) + ", got " + std::to_string(m.rows()) + "x" +
                             std::to_string(m.cols()));
    }
}

Matrix whiten_both(const SpdFactor& row, const SpdFactor& col, const Matrix& x) {
    const Matrix left = row.whiten(x);
    return col.whiten(left.transpose()).transpose();
}

Matrix checked_lambda(Matrix lambda, Eigen::Index rows, Eigen::Index cols, Variant variant) {
    if (lambda.size() == 0 && !has_skew(variant)) return Matrix::Zero(rows, cols);
    require_shape(lambda, rows, cols, "Lambda");
    if (!has_skew(variant) && !lambda.isZero(0.0)) {
        throw DomainError("MvstParams: variant " + std::string(to_string(variant)) + " requires Lambda = 0");
    }
    return lambda;
}

double checked_nu(double nu, Variant variant) {
    if (!has_nu(variant)) return std::numeric_limits<double>::infinity();
    if (!(nu > 0.0) || !std::isfinite(nu)) {
        throw DomainError("MvstParams: nu must be positive and finite, got " + std::to_string(nu));
    }
    return nu;
}

}  // namespace

MvstParams::MvstParams(Matrix location, Matrix sigma, Matrix psi, Matrix lambda, double nu, Variant variant)
    : location_(std::move(location)),
      sigma_((require_shape(sigma, location_.rows(), location_.rows(), "Sigma"), symmetrize(sigma))),
      psi_((require_shape(psi, location_.cols(), location_.cols(), "Psi"), symmetrize(psi))),
      lambda_(checked_lambda(std::move(lambda), location_.rows(), location_.cols(), variant)),
      nu_(checked_nu(nu, variant)),
      variant_(variant),
      sigma_factor_(spd_factorize(sigma_)),
      psi_factor_(spd_factorize(psi_)),
      whitened_lambda_(whiten_both(sigma_factor_, psi_factor_, lambda_)),
      rho_(whitened_lambda_.squaredNorm()) {
    if (location_.size() == 0) throw DimensionError("MvstParams: location must be non-empty");
    if (!location_.allFinite() || !lambda_.allFinite()) throw DomainError("MvstParams: non-finite entries");
}

MvstParams MvstParams::with_nu(double nu) const {
    MvstParams copy = *this;
    copy.nu_ = checked_nu(nu, variant_);
    return copy;
}

MvstParams MvstParams::with_scales(Matrix sigma, Matrix psi) const {
    return MvstParams(location_, std::move(sigma), std::move(psi), lambda_, nu_, variant_);
}

// ---------------------------------------------------------------------------

LogDensityEvaluator::LogDensityEvaluator(std::size_t rows, std::size_t cols, double log_det_sigma,
                                         double log_det_psi, double nu, Variant variant)
    : variant_(variant),
      dims_(static_cast<double>(rows * cols)),
      nu_(has_nu(variant) ? checked_nu(nu, variant) : std::numeric_limits<double>::infinity()),
      constant_(0.0),
      tcdf_(has_nu(variant) ? nu_ + dims_ : 1.0) {
    const double scales = -0.5 * static_cast<double>(cols) * log_det_sigma -
                          0.5 * static_cast<double>(rows) * log_det_psi - 0.5 * dims_ * kLogTwoPi;
    switch (variant_) {
        case Variant::Mvst:
            constant_ = kLog2 + log_gamma_ratio(0.5 * nu_, 0.5 * dims_) + scales;
            break;
        case Variant::Mvt:
            // 2 T(0) = 1
            constant_ = log_gamma_ratio(0.5 * nu_, 0.5 * dims_) + scales;
            break;
        case Variant::Rmvsn:
            constant_ = kLog2 + scales;
            break;
        case Variant::Mvn:
            constant_ = scales;
            break;
    }
}

LogDensityEvaluator::LogDensityEvaluator(const MvstParams& theta)
    : LogDensityEvaluator(theta.rows(), theta.cols(), theta.sigma_factor().log_determinant(),
                          theta.psi_factor().log_determinant(), theta.nu(), theta.variant()) {}

double LogDensityEvaluator::operator()(const QuadForms& q) const {
    // An overflowed distance means the density underflows.
    if (std::isinf(q.delta)) return -std::numeric_limits<double>::infinity();
    switch (variant_) {
        case Variant::Mvst: {
            const double res = q.residual();
            const double scale = res + nu_;
            const double arg = q.cap_delta * std::sqrt((nu_ + dims_) / scale);
            return constant_ - 0.5 * std::log1p(q.rho) - 0.5 * nu_ * std::log1p(res / nu_) -
                   0.5 * dims_ * std::log(0.5 * scale) + tcdf_.log_cdf(arg);
        }
        case Variant::Mvt:
            return constant_ - 0.5 * nu_ * std::log1p(q.delta / nu_) - 0.5 * dims_ * std::log(0.5 * (q.delta + nu_));
        case Variant::Rmvsn:
            return constant_ - 0.5 * std::log1p(q.rho) - 0.5 * q.residual() + log_normal_cdf(q.cap_delta);
        case Variant::Mvn:
            return constant_ - 0.5 * q.delta;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

double log_density(const MatrixObservation& y, const MvstParams& theta) {
    return LogDensityEvaluator(theta)(quad_forms(y, theta));
}

// ---------------------------------------------------------------------------

PosteriorMoments posterior_moments_from_forms(const QuadForms& q, double dims, double nu, Variant variant,
                                              bool& tail_underflow) {
    tail_underflow = false;
    const double rho1 = q.rho + 1.0;
    const double s = 1.0 / std::sqrt(rho1);
    PosteriorMoments out;
    if (!has_nu(variant)) {
        const TruncatedNormalMoments tn = truncated_normal_moments(q.cap_delta);
        out.w_hat = 1.0;
        out.kappa1_hat = s * tn.first;
        out.kappa2_hat = tn.second / rho1;
        return out;
    }

    const double a2 = nu + dims;  // 2a
    const double scale = q.residual() + nu;
    const double c0 = a2 / scale;
    const double c2 = (a2 + 2.0) / scale;
    const double log_t0 = log_student_t_cdf(q.cap_delta * std::sqrt(c0), a2);
    const double log_t2 = log_student_t_cdf(q.cap_delta * std::sqrt(c2), a2 + 2.0);
    tail_underflow = log_t0 < kLogUnderflow;

    const double spread = q.delta + nu;
    const double log_zeta = log_gamma_ratio(0.5 * a2, 0.5) - 0.5 * kLogTwoPi - log_t0 +
                            0.5 * a2 * std::log1p(-q.cap_delta * q.cap_delta / spread) - 0.5 * std::log(0.5 * spread);
    if (log_zeta > 700.0) {
        throw NumericalRangeError("posterior_moments: zeta log magnitude " + std::to_string(log_zeta) +
                                  " exceeds the representable range");
    }
    const double zeta_value = std::exp(log_zeta);
    const double mu = q.eta / rho1;

    out.w_hat = c0 * std::exp(log_t2 - log_t0);
    out.kappa1_hat = mu * out.w_hat + s * zeta_value;
    out.kappa2_hat = 1.0 / rho1 + mu * mu * out.w_hat + mu * s * zeta_value;
    return out;
}

PosteriorMoments posterior_moments_from_forms(const QuadForms& q, double dims, double nu, Variant variant) {
    bool ignored = false;
    return posterior_moments_from_forms(q, dims, nu, variant, ignored);
}

PosteriorMoments posterior_moments(const MatrixObservation& y, const MvstParams& theta) {
    return posterior_moments_from_forms(quad_forms(y, theta), static_cast<double>(theta.rows() * theta.cols()),
                                        theta.nu(), theta.variant());
}

double posterior_w_logpdf(double w, const MatrixObservation& y, const MvstParams& theta) {
    if (!(w > 0.0) || !std::isfinite(w)) throw DomainError("posterior_w_logpdf: w must be positive and finite");
    if (!has_nu(theta.variant())) throw DomainError("posterior_w_logpdf: W is degenerate (W = 1) for this variant");
    const QuadForms q = quad_forms(y, theta);
    const double dims = static_cast<double>(theta.rows() * theta.cols());
    const double a = 0.5 * (theta.nu() + dims);
    const double scale = q.residual() + theta.nu();
    const double log_t0 = log_student_t_cdf(q.cap_delta * std::sqrt(2.0 * a / scale), 2.0 * a);
    const double log_c = a * std::log(0.5 * scale) - log_gamma(a) - log_t0;
    return log_c + (a - 1.0) * std::log(w) - 0.5 * w * scale + log_normal_cdf(std::sqrt(w) * q.cap_delta);
}

double mean_skew_constant(double nu) {
    if (std::isinf(nu) && nu > 0.0) return std::sqrt(2.0 / std::numbers::pi);
    if (!(nu > 1.0)) throw DomainError("mean: requires nu > 1, got " + std::to_string(nu));
    const double half = 0.5 * (nu - 1.0);
    return std::sqrt(nu / std::numbers::pi) * std::exp(-log_gamma_ratio(half, 0.5));
}

Matrix mean(const MvstParams& theta) {
    if (has_nu(theta.variant()) && !(theta.nu() > 1.0)) {
        throw DomainError("mean: undefined for nu <= 1 (nu = " + std::to_string(theta.nu()) + ")");
    }
    if (!has_skew(theta.variant())) return theta.location();
    return theta.location() + mean_skew_constant(theta.nu()) * theta.lambda();
}

// ---------------------------------------------------------------------------

Matrix sample_one(const MvstParams& theta, Engine& engine) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto rows = static_cast<Eigen::Index>(theta.rows());
    const auto cols = static_cast<Eigen::Index>(theta.cols());
    Matrix x(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) x(i, j) = normal(engine);
    }
    Matrix noise = theta.sigma_factor().lower() * x * theta.psi_factor().lower().transpose();
    if (has_skew(theta.variant())) {
        const double u = std::fabs(normal(engine));
        noise += u * theta.lambda();
    }
    if (has_nu(theta.variant())) {
        std::gamma_distribution<double> gamma(0.5 * theta.nu(), 2.0 / theta.nu());
        const double w = gamma(engine);
        noise /= std::sqrt(w);
    }
    return theta.location() + noise;
}

std::vector<Matrix> sample(const MvstParams& theta, std::size_t count, std::uint64_t seed) {
    std::vector<Matrix> out(count);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(count); ++i) {
        Engine engine = make_engine(seed, static_cast<std::uint64_t>(i));
        out[static_cast<std::size_t>(i)] = sample_one(theta, engine);
    }
    return out;
}

}  // namespace mvst
