#include "mvst/ecme.hpp"
#include "mvst/errors.hpp"
#include "mvst/init.hpp"
#include "mvst/metrics.hpp"
#include "mvst/mixture.hpp"
#include "mvst/simulation.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>

using namespace mvst;

namespace {

bool same_bits(const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

MvstParams component(std::mt19937_64& rng, double shift, double nu) {
    return MvstParams(oracle::random_matrix(2, 2, rng) + Matrix::Constant(2, 2, shift), oracle::random_spd(2, rng),
                      oracle::random_spd(2, rng), oracle::random_matrix(2, 2, rng), nu, Variant::Mvst);
}

}  // namespace

TEST_CASE("log-likelihood and responsibilities match a linear-space oracle") {
    std::mt19937_64 rng(4);
    const MixtureParams theta({0.3, 0.5, 0.2}, {component(rng, 0.0, 3.0), component(rng, 1.0, 6.0),
                                                component(rng, -1.0, 12.0)});
    const LabeledSample s = generate_mixture_sample(theta, 50, 9);
    const EStepResult e = e_step(s.data, theta, ExecPolicy::Serial);
    double total = 0.0;
    for (std::size_t i = 0; i < s.data.size(); ++i) {
        std::vector<double> dens(3);
        double mix = 0.0;
        for (std::size_t g = 0; g < 3; ++g) {
            dens[g] = theta.weights()[g] * std::exp(oracle::vectorized_log_density(s.data[i], theta.component(g)));
            mix += dens[g];
        }
        total += std::log(mix);
        double row = 0.0;
        for (std::size_t g = 0; g < 3; ++g) {
            const double z = e.resp.z_hat(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(g));
            CHECK(z == doctest::Approx(dens[g] / mix).epsilon(1e-10));
            row += z;
        }
        CHECK(row == doctest::Approx(1.0).epsilon(1e-14));
    }
    CHECK(e.loglik == doctest::Approx(total).epsilon(1e-11));
    CHECK(mixture_loglik(s.data, theta) == doctest::Approx(total).epsilon(1e-11));
}

TEST_CASE("identical components collapse to the single model") {
    std::mt19937_64 rng(6);
    const MvstParams c = component(rng, 0.0, 4.0);
    const MixtureParams twin({0.3, 0.7}, {c, c});
    const Dataset data(sample(c, 30, 2));
    CHECK(mixture_loglik(data, twin) == doctest::Approx(loglik(data, c)).epsilon(1e-13));
    const EStepResult e = e_step(data, twin);
    CHECK((e.resp.z_hat.col(0).array() - 0.3).abs().maxCoeff() < 1e-14);
}

TEST_CASE("a one-component mixture fit is the single fit, bit for bit") {
    std::mt19937_64 rng(12);
    const MvstParams truth = component(rng, 0.0, 5.0);
    const Dataset data(sample(truth, 200, 1));
    const MvstParams start(Matrix::Zero(2, 2), Matrix::Identity(2, 2), Matrix::Identity(2, 2),
                           Matrix::Constant(2, 2, 0.2), 8.0, Variant::Mvst);
    FitConfig config;
    config.tol = 1e-7;
    for (ExecPolicy policy : {ExecPolicy::Serial, ExecPolicy::Parallel}) {
        config.policy = policy;
        const auto [single, trace] = fit_single(data, start, config);
        const FitResult mix = fit_mixture_from(data, MixtureParams({1.0}, {start}), config);
        CHECK(mix.params.weights()[0] == 1.0);
        CHECK(same_bits(mix.params.component(0).location(), single.location()));
        CHECK(same_bits(mix.params.component(0).sigma(), single.sigma()));
        CHECK(same_bits(mix.params.component(0).psi(), single.psi()));
        CHECK(same_bits(mix.params.component(0).lambda(), single.lambda()));
        CHECK(mix.params.component(0).nu() == single.nu());
        CHECK(mix.trace.iterations == trace.iterations);
        CHECK(mix.trace.loglik_per_iter == trace.loglik_per_iter);
        CHECK((mix.resp.z_hat.array() == 1.0).all());
    }
}

TEST_CASE("hard responsibilities decouple the components") {
    std::mt19937_64 rng(15);
    const MixtureParams theta({0.5, 0.5}, {component(rng, -4.0, 4.0), component(rng, 4.0, 7.0)});
    const LabeledSample s = generate_mixture_sample(theta, 80, 3);
    EStepResult e = e_step(s.data, theta);
    for (std::size_t i = 0; i < s.data.size(); ++i) {
        for (Eigen::Index g = 0; g < 2; ++g) {
            e.resp.z_hat(static_cast<Eigen::Index>(i), g) = s.labels[i] == g + 1 ? 1.0 : 0.0;
        }
    }
    const MixtureParams next = mixture_cm_steps(s.data, e, theta);
    for (int g = 0; g < 2; ++g) {
        Dataset subset;
        std::vector<PosteriorMoments> mom;
        for (std::size_t i = 0; i < s.data.size(); ++i) {
            if (s.labels[i] != g + 1) continue;
            subset.push_back(s.data[i]);
            mom.push_back(posterior_moments(s.data[i], theta.component(static_cast<std::size_t>(g))));
        }
        const CmUpdate alone = cm_updates(subset, mom, theta.component(static_cast<std::size_t>(g)));
        const MvstParams& c = next.component(static_cast<std::size_t>(g));
        CHECK((c.location() - alone.location).norm() < 1e-12);
        CHECK((c.sigma() - alone.sigma).norm() < 1e-12);
        CHECK((c.psi() - alone.psi).norm() < 1e-12);
        CHECK((c.lambda() - alone.lambda).norm() < 1e-12);
        CHECK(next.weights()[static_cast<std::size_t>(g)] ==
              doctest::Approx(static_cast<double>(subset.size()) / 80.0).epsilon(1e-14));
    }
}

TEST_CASE("nu search raises the mixture log-likelihood") {
    std::mt19937_64 rng(19);
    const MixtureParams truth({0.4, 0.6}, {component(rng, -2.0, 3.0), component(rng, 2.0, 15.0)});
    const LabeledSample s = generate_mixture_sample(truth, 400, 8);
    std::vector<MvstParams> off;
    for (const auto& c : truth.components()) off.push_back(c.with_nu(40.0));
    const MixtureParams start(truth.weights(), off);
    const auto nus = mixture_cml_nu(s.data, start, NuBounds{});
    std::vector<MvstParams> tuned;
    for (std::size_t g = 0; g < 2; ++g) tuned.push_back(off[g].with_nu(nus[g]));
    const MixtureParams after(truth.weights(), tuned);
    CHECK(mixture_loglik(s.data, after) > mixture_loglik(s.data, start));
    // Each coordinate is a local maximum.
    for (std::size_t g = 0; g < 2; ++g) {
        for (double f : {0.9, 1.1}) {
            auto bumped = tuned;
            bumped[g] = bumped[g].with_nu(nus[g] * f);
            CHECK(mixture_loglik(s.data, MixtureParams(truth.weights(), bumped)) <=
                  mixture_loglik(s.data, after) + 1e-9);
        }
    }
    CHECK(mixture_cml_nu(s.data, start, NuBounds{}, ExecPolicy::Serial) == nus);
}

TEST_CASE("fit_mixture on scenario I") {
    const MixtureParams truth = scenario_params(Scenario::I);
    const LabeledSample s = generate_mixture_sample(truth, 500, 31);
    FitConfig config;
    config.seed = 4;
    const FitResult fit = fit_mixture(s.data, 2, config);
    CHECK(fit.trace.converged);
    double prev = fit.trace.initial_loglik;
    bool ascending = true;
    for (double l : fit.trace.loglik_per_iter) {
        ascending = ascending && l >= prev - 1e-9 * std::fabs(prev);
        prev = l;
    }
    CHECK(ascending);
    CHECK(ari(s.labels, fit.labels) > 0.9);
    CHECK(fit.parameter_count == 81);
    CHECK(fit.bic == doctest::Approx(-2.0 * fit.loglik + 81.0 * std::log(500.0)));
    for (const auto& c : fit.params.components()) CHECK(c.sigma()(0, 0) == 1.0);

    SUBCASE("relabeled starting values give the relabeled fit") {
        const Matrix z0 = kmeans_partition(s.data, 2, config.init_spec());
        const MixtureParams init = initial_params(s.data, z0, config.init_spec(), Variant::Mvst);
        const MixtureParams swapped({init.weights()[1], init.weights()[0]}, {init.component(1), init.component(0)});
        const FitResult direct = fit_mixture_from(s.data, init, config);
        const FitResult other = fit_mixture_from(s.data, swapped, config);
        CHECK(direct.loglik == fit.loglik);
        CHECK(other.loglik == doctest::Approx(fit.loglik).epsilon(1e-12));
        CHECK(other.trace.iterations == fit.trace.iterations);
        bool mirrored = true;
        for (std::size_t i = 0; i < fit.labels.size(); ++i) mirrored = mirrored && other.labels[i] == 3 - fit.labels[i];
        CHECK(mirrored);
    }
    SUBCASE("same seed, same fit") {
        const FitResult again = fit_mixture(s.data, 2, config);
        CHECK(again.loglik == fit.loglik);
        CHECK(again.labels == fit.labels);
    }
}

TEST_CASE("mixture E-step range error names the observation") {
    const MixtureParams theta = scenario_params(Scenario::I);
    std::vector<Matrix> ys = sample(theta.component(0), 3, 1);
    ys[1](0, 0) = 1e200;
    const Dataset data(ys);
    try {
        e_step(data, theta);
        FAIL("expected NumericalRangeError");
    } catch (const NumericalRangeError& e) {
        CHECK(std::string(e.what()).find("observation 2") != std::string::npos);
    }
}

TEST_CASE("degenerate clusters are reported") {
    const MixtureParams theta = scenario_params(Scenario::I);
    const LabeledSample s = generate_mixture_sample(theta, 30, 2);
    EStepResult e = e_step(s.data, theta);
    e.resp.z_hat.col(0).setConstant(1.0);
    e.resp.z_hat.col(1).setZero();
    CHECK_THROWS_AS(mixture_cm_steps(s.data, e, theta), DegenerateClusterError);
}

TEST_CASE("classify, rescale and parameter counts") {
    Responsibilities r{Matrix(3, 3)};
    r.z_hat << 0.2, 0.5, 0.3, 0.4, 0.4, 0.2, 0.1, 0.1, 0.8;
    CHECK(classify(r) == LabelVector{2, 1, 3});

    std::mt19937_64 rng(2);
    const MvstParams c = component(rng, 0.0, 5.0);
    const MvstParams scaled = rescale_identifiability(c);
    CHECK(scaled.sigma()(0, 0) == 1.0);
    CHECK((oracle::kron(scaled.psi(), scaled.sigma()) - oracle::kron(c.psi(), c.sigma())).norm() < 1e-12);
    const Matrix y = oracle::random_matrix(2, 2, rng);
    CHECK(log_density(y, scaled) == doctest::Approx(log_density(y, c)).epsilon(1e-13));

    CHECK(parameter_count(3, 4, 2, Variant::Mvst) == 81);
    CHECK(parameter_count(3, 4, 2, Variant::Rmvsn) == 79);
    CHECK(parameter_count(3, 4, 2, Variant::Mvt) == 57);
    CHECK(parameter_count(3, 4, 2, Variant::Mvn) == 55);
    CHECK(parameter_count(10, 2, 1, Variant::Mvst) == 20 + 20 + 54 + 3 + 1);
}

TEST_CASE("mixture parameter validation") {
    std::mt19937_64 rng(1);
    const MvstParams a = component(rng, 0.0, 5.0);
    CHECK_THROWS_AS(MixtureParams({0.5, 0.6}, {a, a}), DomainError);
    CHECK_THROWS_AS(MixtureParams({1.2, -0.2}, {a, a}), DomainError);
    CHECK_THROWS_AS(MixtureParams({1.0}, {a, a}), DimensionError);
    const MvstParams t(a.location(), a.sigma(), a.psi(), Matrix::Zero(2, 2), 5.0, Variant::Mvt);
    CHECK_THROWS_AS(MixtureParams({0.5, 0.5}, {a, t}), DomainError);
    const MvstParams wide(Matrix::Zero(2, 3), Matrix::Identity(2, 2), Matrix::Identity(3, 3), Matrix::Zero(2, 3), 5.0,
                          Variant::Mvst);
    CHECK_THROWS_AS(MixtureParams({0.5, 0.5}, {a, wide}), DimensionError);
    const MixtureParams zero({1.0, 0.0}, {a, a});
    CHECK(std::isinf(zero.log_weights()[1]));
}
