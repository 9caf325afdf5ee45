#include "mvst/ecme.hpp"
#include "mvst/errors.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace mvst;

namespace {

MvstParams truth_2x3() {
    Matrix m(2, 3);
    m << 1.0, -0.5, 2.0, 0.0, 1.5, -1.0;
    Matrix sigma(2, 2);
    sigma << 1.0, 0.4, 0.4, 1.5;
    Matrix psi(3, 3);
    psi << 1.0, 0.2, 0.0, 0.2, 0.8, 0.1, 0.0, 0.1, 1.2;
    Matrix lambda(2, 3);
    lambda << 1.5, 0.0, -1.0, 0.5, 1.0, 0.0;
    return MvstParams(m, sigma, psi, lambda, 5.0, Variant::Mvst);
}

}  // namespace

TEST_CASE("q_function agrees with the trace-form oracle") {
    const MvstParams theta = truth_2x3();
    const Dataset data(sample(theta, 40, 3));
    std::vector<PosteriorMoments> mom;
    for (const auto& y : data) mom.push_back(posterior_moments(y, theta));
    const double tails = 40.0 * 0.5 * (5.0 * std::log(2.5) - 2.0 * std::lgamma(2.5) - 5.0 * 0.0);
    double nu_term = 0.0;
    for (const auto& m : mom) nu_term -= 0.5 * 5.0 * m.w_hat;
    const double expected =
        oracle::q_function(data, mom, theta.location(), theta.sigma(), theta.psi(), theta.lambda()) + tails + nu_term;
    CHECK(q_function(data, theta, mom) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("each conditional update maximizes Q over its block") {
    std::mt19937_64 rng(8);
    const MvstParams truth(oracle::random_matrix(2, 2, rng), oracle::random_spd(2, rng), oracle::random_spd(2, rng),
                           oracle::random_matrix(2, 2, rng), 4.0, Variant::Mvst);
    const Dataset data(sample(truth, 60, 17));
    // Start somewhere else so that every block moves.
    const MvstParams current(truth.location() + oracle::random_matrix(2, 2, rng, 0.3),
                             oracle::random_spd(2, rng), oracle::random_spd(2, rng),
                             truth.lambda() + oracle::random_matrix(2, 2, rng, 0.3), 4.0, Variant::Mvst);
    std::vector<PosteriorMoments> mom;
    for (const auto& y : data) mom.push_back(posterior_moments(y, current));
    const CmUpdate upd = cm_updates(data, mom, current);

    auto check_block = [](const std::function<double(const Vector&)>& neg_q, const Vector& closed_form) {
        const Vector numeric = oracle::nelder_mead(neg_q, closed_form + Vector::Constant(closed_form.size(), 0.2), 0.3);
        CHECK(neg_q(closed_form) <= neg_q(numeric) + 1e-9 * std::fabs(neg_q(numeric)));
        CHECK((numeric - closed_form).norm() < 1e-4);
    };

    SUBCASE("M given Sigma, Psi, Lambda") {
        check_block(
            [&](const Vector& x) {
                return -oracle::q_function(data, mom, oracle::unpack(x, 2, 2), current.sigma(), current.psi(), current.lambda());
            },
            oracle::vec(upd.location));
    }
    SUBCASE("Sigma given the new M") {
        check_block(
            [&](const Vector& x) {
                return -oracle::q_function(data, mom, upd.location, oracle::spd_from(x, 2), current.psi(), current.lambda());
            },
            oracle::spd_to(upd.sigma));
    }
    SUBCASE("Psi given the new M and Sigma") {
        check_block(
            [&](const Vector& x) {
                return -oracle::q_function(data, mom, upd.location, upd.sigma, oracle::spd_from(x, 2), current.lambda());
            },
            oracle::spd_to(upd.psi));
    }
    SUBCASE("Lambda given the new M, Sigma and Psi") {
        check_block(
            [&](const Vector& x) { return -oracle::q_function(data, mom, upd.location, upd.sigma, upd.psi, oracle::unpack(x, 2, 2)); },
            oracle::vec(upd.lambda));
    }
}

TEST_CASE("golden-section search over ln nu") {
    const NuBounds bounds{0.05, 200.0};
    const auto peak = golden_section_nu([](double nu) { return -std::pow(std::log(nu) - std::log(7.0), 2); }, bounds, 1.0);
    CHECK(peak.nu == doctest::Approx(7.0).epsilon(1e-5));
    // Monotone objective: ends at the boundary.
    CHECK(golden_section_nu([](double nu) { return nu; }, bounds, 1.0).nu == doctest::Approx(200.0).epsilon(1e-5));
    CHECK(golden_section_nu([](double nu) { return -nu; }, bounds, 1.0).nu == doctest::Approx(0.05).epsilon(1e-5));
    // The incumbent wins when the bracket misses a narrow spike.
    const auto spike = golden_section_nu([](double nu) { return nu == 3.0 ? 10.0 : 0.0; }, bounds, 3.0);
    CHECK(spike.nu == 3.0);
    CHECK_THROWS_AS(golden_section_nu([](double) { return 0.0; }, NuBounds{5.0, 1.0}, 1.0), DomainError);
}

TEST_CASE("cml_nu maximizes the observed log-likelihood in nu") {
    const MvstParams theta = truth_2x3();
    const Dataset data(sample(theta, 300, 5));
    const double nu_hat = cml_nu(data, theta, NuBounds{}, ExecPolicy::Serial);
    const double best = loglik(data, theta.with_nu(nu_hat));
    for (double f : {0.8, 0.95, 1.05, 1.25}) CHECK(loglik(data, theta.with_nu(nu_hat * f)) <= best);
    CHECK(cml_nu(data, theta, NuBounds{}, ExecPolicy::Parallel) == nu_hat);
    const MvstParams sn(theta.location(), theta.sigma(), theta.psi(), theta.lambda(), 1.0, Variant::Rmvsn);
    CHECK(std::isinf(cml_nu(data, sn, NuBounds{})));
}

TEST_CASE("loglik is the sum of log densities") {
    const MvstParams theta = truth_2x3();
    const Dataset data(sample(theta, 25, 6));
    double sum = 0.0;
    for (const auto& y : data) sum += oracle::vectorized_log_density(y, theta);
    CHECK(loglik(data, theta) == doctest::Approx(sum).epsilon(1e-11));
}

TEST_CASE("fit_single ascends and recovers the generating parameters") {
    const MvstParams truth = truth_2x3();
    const Dataset data(sample(truth, 3000, 11));
    const MvstParams start(Matrix::Zero(2, 3), Matrix::Identity(2, 2), Matrix::Identity(3, 3),
                           Matrix::Constant(2, 3, 0.1), 10.0, Variant::Mvst);
    FitConfig config;
    config.tol = 1e-8;
    config.max_iter = 2000;
    const auto [fit, trace] = fit_single(data, start, config);
    CHECK(trace.converged);
    double prev = trace.initial_loglik;
    bool ascending = true;
    for (double l : trace.loglik_per_iter) {
        ascending = ascending && l >= prev - 1e-9 * std::fabs(prev);
        prev = l;
    }
    CHECK(ascending);
    CHECK(fit.sigma()(0, 0) == 1.0);
    CHECK(loglik(data, fit) >= loglik(data, truth));
    CHECK((fit.location() - truth.location()).cwiseAbs().maxCoeff() < 0.15);
    CHECK((fit.lambda() - truth.lambda()).cwiseAbs().maxCoeff() < 0.25);
    CHECK(fit.nu() == doctest::Approx(5.0).epsilon(0.3));
    const Matrix kron_fit = oracle::kron(fit.psi(), fit.sigma());
    const Matrix kron_true = oracle::kron(truth.psi(), truth.sigma());
    CHECK((kron_fit - kron_true).cwiseAbs().maxCoeff() < 0.2);

    SUBCASE("a converged estimate is a fixed point") {
        FitConfig again = config;
        again.max_iter = 3;
        again.tol = std::numeric_limits<double>::infinity();
        const auto [refit, retrace] = fit_single(data, fit, again);
        CHECK(retrace.iterations == 1);
        CHECK(retrace.loglik_per_iter.front() == doctest::Approx(trace.loglik_per_iter.back()).epsilon(1e-7));
        CHECK((refit.location() - fit.location()).norm() < 1e-3);
    }
    SUBCASE("per-iteration rescaling reaches the same fit") {
        FitConfig each = config;
        each.rescale_timing = RescaleTiming::PerIteration;
        const auto [other, other_trace] = fit_single(data, start, each);
        CHECK(other_trace.loglik_per_iter.back() == doctest::Approx(trace.loglik_per_iter.back()).epsilon(1e-7));
        CHECK((other.sigma() - fit.sigma()).norm() < 1e-3);
    }
}

TEST_CASE("fit_single for the reduced variants") {
    const MvstParams truth = truth_2x3();
    for (Variant v : {Variant::Mvn, Variant::Mvt, Variant::Rmvsn}) {
        const MvstParams gen(truth.location(), truth.sigma(), truth.psi(),
                             has_skew(v) ? truth.lambda() : Matrix::Zero(2, 3), 6.0, v);
        const Dataset data(sample(gen, 800, 21));
        const MvstParams start(Matrix::Zero(2, 3), Matrix::Identity(2, 2), Matrix::Identity(3, 3),
                               has_skew(v) ? Matrix::Constant(2, 3, 0.1) : Matrix::Zero(2, 3), 10.0, v);
        FitConfig config;
        config.variant = v;
        config.tol = 1e-9;
        config.max_iter = 3000;
        const auto [fit, trace] = fit_single(data, start, config);
        CHECK(trace.converged);
        CHECK(loglik(data, fit) >= loglik(data, gen));
        if (!has_skew(v)) CHECK(fit.lambda().norm() == 0.0);
        if (!has_nu(v)) CHECK(std::isinf(fit.nu()));
        if (v == Variant::Mvn) {
            // Closed form: M is the sample mean.
            Matrix avg = Matrix::Zero(2, 3);
            for (const auto& y : data) avg += y;
            avg /= static_cast<double>(data.size());
            CHECK((fit.location() - avg).norm() < 1e-6);
        }
    }
}

TEST_CASE("fit_single argument checks") {
    const MvstParams theta = truth_2x3();
    const Dataset data(sample(theta, 10, 1));
    FitConfig config;
    config.variant = Variant::Mvt;
    CHECK_THROWS_AS(fit_single(data, theta, config), DomainError);
    config.variant = Variant::Mvst;
    config.tol = 0.0;
    CHECK_THROWS_AS(fit_single(data, theta, config), DomainError);
    config.tol = 1e-6;
    const Dataset one(sample(theta, 1, 1));
    CHECK_THROWS_AS(fit_single(one, theta, config), DomainError);
    CHECK(converged(-100.0, -100.00001, 1e-6));
    CHECK_FALSE(converged(-100.0, -100.1, 1e-6));
}
