// Acceptance checks. Usage: acceptance [criterion ...]; no arguments runs all ten.
// Prints one PASS/FAIL line per criterion and exits nonzero if any fails.

#include "mvst/distribution.hpp"
#include "mvst/ecme.hpp"
#include "mvst/errors.hpp"
#include "mvst/mixture.hpp"
#include "mvst/rng.hpp"
#include "mvst/simulation.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <optional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace mvst;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

MvstParams random_params(std::mt19937_64& rng, Eigen::Index n, Eigen::Index p, double nu, Variant v) {
    return MvstParams(oracle::random_matrix(n, p, rng), oracle::random_spd(n, rng), oracle::random_spd(p, rng),
                      has_skew(v) ? oracle::random_matrix(n, p, rng) : Matrix::Zero(n, p), nu, v);
}

// Shapes with np <= 6.
std::pair<Eigen::Index, Eigen::Index> small_shape(std::mt19937_64& rng) {
    static const std::pair<Eigen::Index, Eigen::Index> shapes[] = {{1, 1}, {1, 2}, {2, 1}, {2, 2}, {2, 3},
                                                                    {3, 2}, {1, 6}, {6, 1}, {3, 1}, {1, 3}};
    return shapes[std::uniform_int_distribution<int>(0, 9)(rng)];
}

// ---------------------------------------------------------------------------

// Importance sampling with a vectorized Student-t proposal of the same nu and doubled
// scale Psi (x) Sigma + lambda lambda'. The weight f/q is then bounded.
Outcome density_integrates_to_one() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(2024);
    const std::size_t draws = 400000;
    double worst = 0.0;
    for (int set = 0; set < 20; ++set) {
        const auto [n, p] = small_shape(rng);
        const double nu = std::uniform_real_distribution<double>(1.0, 12.0)(rng);
        const MvstParams theta = random_params(rng, n, p, nu, Variant::Mvst);
        const Vector l = oracle::vec(theta.lambda());
        const Matrix omega = 2.0 * (oracle::kron(theta.psi(), theta.sigma()) + l * l.transpose());
        const Eigen::LLT<Matrix> chol(omega);
        const Matrix lower = chol.matrixL();
        const double d = static_cast<double>(n * p);
        const double log_det = 2.0 * lower.diagonal().array().log().sum();
        const double log_norm = std::lgamma(0.5 * (nu + d)) - std::lgamma(0.5 * nu) -
                                0.5 * d * std::log(nu * std::numbers::pi) - 0.5 * log_det;
        const Vector centre = oracle::vec(theta.location());
        Engine engine = make_engine(stream_seed(77, static_cast<std::uint64_t>(set)), 0);
        std::normal_distribution<double> z;
        std::gamma_distribution<double> gam(0.5 * nu, 2.0 / nu);
        double sum = 0.0;
        double sq = 0.0;
        Vector e(n * p);
        for (std::size_t k = 0; k < draws; ++k) {
            for (Eigen::Index j = 0; j < e.size(); ++j) e(j) = z(engine);
            const double w = gam(engine);
            const Vector x = lower * e / std::sqrt(w);
            const Vector v = centre + x;
            const double quad = lower.triangularView<Eigen::Lower>().solve(x).squaredNorm();
            const double log_q = log_norm - 0.5 * (nu + d) * std::log1p(quad / nu);
            const Matrix y = Eigen::Map<const Matrix>(v.data(), n, p);
            const double ratio = std::exp(log_density(y, theta) - log_q);
            sum += ratio;
            sq += ratio * ratio;
        }
        const double mean = sum / static_cast<double>(draws);
        worst = std::max(worst, std::fabs(mean - 1.0));
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {worst < 0.01 && secs < 120.0, fmt("max |integral - 1| = %.4f over 20 sets, %.1f s", worst, secs)};
}

Outcome reduces_to_student_t() {
    double worst = 0.0;
    for (double nu : {0.5, 3.0, 30.0}) {
        const MvstParams theta(Matrix::Zero(1, 1), Matrix::Identity(1, 1), Matrix::Identity(1, 1), Matrix::Zero(1, 1),
                               nu, Variant::Mvst);
        for (int k = 0; k <= 100; ++k) {
            const double x = -10.0 + 0.2 * k;
            const double got = std::exp(log_density(Matrix::Constant(1, 1, x), theta));
            worst = std::max(worst, std::fabs(got - oracle::t_density(x, nu)));
        }
    }
    return {worst < 1e-10, fmt("max abs density error %.3g on 101 points x 3 nu", worst)};
}

Outcome posterior_moments_match_quadrature() {
    std::mt19937_64 rng(505);
    double worst = 0.0;
    for (int k = 0; k < 50; ++k) {
        const auto [n, p] = small_shape(rng);
        const double nu = std::uniform_real_distribution<double>(0.8, 20.0)(rng);
        const MvstParams theta = random_params(rng, n, p, nu, Variant::Mvst);
        const Matrix y = sample(theta, 1, 900 + static_cast<std::uint64_t>(k)).front();
        const PosteriorMoments got = posterior_moments(y, theta);
        const oracle::Moments ref = oracle::posterior_moments(y, theta);
        worst = std::max({worst, std::fabs(got.w_hat / ref.w - 1.0), std::fabs(got.kappa1_hat / ref.k1 - 1.0),
                          std::fabs(got.kappa2_hat / ref.k2 - 1.0)});
    }
    return {worst < 1e-6, fmt("max relative error %.3g over 50 cases", worst)};
}

// A decrease counts when l_t < l_{t-1} - 1e-8 (|l_{t-1}| + 1), the same scale as the
// stopping rule; absolute 1e-8 is below summation roundoff at |l| ~ 1e4.
Outcome ecme_ascent() {
    int fits = 0;
    int skipped = 0;
    int violations = 0;
    double worst_drop = 0.0;
    for (Scenario sc : {Scenario::I, Scenario::II}) {
        const MixtureParams truth = scenario_params(sc);
        int done = 0;
        for (std::uint64_t seed = 1; done < 50; ++seed) {
            const LabeledSample s = generate_mixture_sample(truth, 250, stream_seed(seed, 31));
            FitConfig config;
            config.seed = seed;
            try {
                const FitResult fit = fit_mixture(s.data, 2, config);
                double prev = fit.trace.initial_loglik;
                for (double l : fit.trace.loglik_per_iter) {
                    const double drop = (prev - l) / (std::fabs(prev) + 1.0);
                    worst_drop = std::max(worst_drop, drop);
                    if (drop > 1e-8) ++violations;
                    prev = l;
                }
                ++done;
                ++fits;
            } catch (const NumericalError&) {
                ++skipped;
            }
        }
    }
    return {violations == 0, fmt("%d fits, %d decreases, largest relative drop %.3g, %d degenerate seeds skipped",
                                 fits, violations, worst_drop, skipped)};
}

Outcome rmse_reproduction() {
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentOptions options;
    options.replications = 50;
    options.seed = 1;
    const ExperimentReport r = rmse_experiment(Scenario::I, {250, 500, 1000}, options);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const char* names[] = {"pi1", "M1", "Lambda1"};
    const double reference[] = {0.020, 0.129, 0.126};
    bool pass = secs <= 1800.0;
    std::ostringstream d;
    for (int k = 0; k < 3; ++k) {
        const double a = r.find(250, "mvst", names[k]).value;
        const double b = r.find(500, "mvst", names[k]).value;
        const double c = r.find(1000, "mvst", names[k]).value;
        const bool monotone = a >= b && b >= c;
        const bool near = b <= 2.0 * reference[k] && b >= 0.5 * reference[k];
        pass = pass && monotone && near;
        d << names[k] << ' ' << fmt("%.3f/%.3f/%.3f", a, b, c) << (monotone && near ? "" : " (!)") << "; ";
    }
    d << fmt("failed fits %zu/%zu/%zu; %.0f s", r.find(250, "mvst", "pi1").failures,
             r.find(500, "mvst", "pi1").failures, r.find(1000, "mvst", "pi1").failures, secs);
    return {pass, d.str()};
}

Outcome comparison_reproduction() {
    ExperimentOptions options;
    options.replications = 20;
    options.seed = 1;
    const ExperimentReport r = comparison_experiment(Scenario::I, 500, options);
    const double mvst = r.find(500, "mvst", "BIC").value;
    const double rmvsn = r.find(500, "rmvsn", "BIC").value;
    const double mvt = r.find(500, "mvt", "BIC").value;
    const double mvn = r.find(500, "mvn", "BIC").value;
    const double ari_mvst = r.find(500, "mvst", "ARI").value;
    const double mcr_mvst = r.find(500, "mvst", "MCR").value;
    const bool ordered = mvst < rmvsn && rmvsn < mvt && mvt < mvn;
    return {ordered && ari_mvst >= 0.9 && mcr_mvst <= 0.05,
            fmt("mean BIC mvst %.1f, rmvsn %.1f, mvt %.1f, mvn %.1f (ordering %s); mvst ARI %.3f, MCR %.3f", mvst,
                rmvsn, mvt, mvn, ordered ? "holds" : "violated", ari_mvst, mcr_mvst)};
}

// The exact gap between the t and normal log-densities is about (delta^2 - 2(d+2) delta)/(4 nu),
// so at nu = 1e8 a 1e-6 agreement holds where the limiting law puts its mass, not at
// arbitrarily distant points.
Outcome limit_chain() {
    std::mt19937_64 rng(7);
    double worst_sn = 0.0;
    double worst_n = 0.0;
    for (int set = 0; set < 10; ++set) {
        const auto [n, p] = small_shape(rng);
        const MvstParams st = random_params(rng, n, p, 1e8, Variant::Mvst);
        const MvstParams sn(st.location(), st.sigma(), st.psi(), st.lambda(), 1.0, Variant::Rmvsn);
        const MvstParams t(st.location(), st.sigma(), st.psi(), Matrix::Zero(n, p), 1e8, Variant::Mvt);
        const MvstParams gauss(st.location(), st.sigma(), st.psi(), Matrix::Zero(n, p), 1.0, Variant::Mvn);
        // Points are draws from the limiting laws; see the note above.
        const auto seed = static_cast<std::uint64_t>(set);
        for (const Matrix& y : sample(sn, 100, stream_seed(seed, 1))) {
            worst_sn = std::max(worst_sn, std::fabs(log_density(y, st) - log_density(y, sn)));
        }
        for (const Matrix& y : sample(gauss, 100, stream_seed(seed, 2))) {
            worst_n = std::max(worst_n, std::fabs(log_density(y, t) - log_density(y, gauss)));
        }
    }
    return {worst_sn < 1e-6 && worst_n < 1e-6,
            fmt("max |diff| MVST vs RMVSN %.3g, MVT vs MVN %.3g on 1000 points", worst_sn, worst_n)};
}

// Fits are re-expressed with random (Sigma c, Psi / c) per component before the rescale,
// so the rescale has work to do.
Outcome identifiability() {
    int fits = 0;
    int skipped = 0;
    double worst = 0.0;
    bool labels_equal = true;
    const MixtureParams truth = scenario_params(Scenario::II);
    for (std::uint64_t seed = 1; fits < 20; ++seed) {
        const LabeledSample s = generate_mixture_sample(truth, 200, stream_seed(seed, 8));
        FitConfig config;
        config.seed = seed;
        config.tol = 1e-5;
        std::optional<FitResult> fit;
        try {
            fit.emplace(fit_mixture(s.data, 2, config));
        } catch (const NumericalError&) {
            ++skipped;
            continue;
        }
        ++fits;
        Engine engine = make_engine(seed, 99);
        std::uniform_real_distribution<double> scale(0.2, 5.0);
        std::vector<MvstParams> comps;
        for (const auto& c : fit->params.components()) {
            const double k = scale(engine);
            comps.push_back(c.with_scales(c.sigma() * k, c.psi() / k));
        }
        const MixtureParams raw(fit->params.weights(), comps);
        const MixtureParams fixed = rescale_identifiability(raw);
        for (std::size_t g = 0; g < 2; ++g) {
            for (const auto& y : s.data) {
                const double a = log_density(y, raw.component(g));
                const double b = log_density(y, fixed.component(g));
                worst = std::max(worst, std::fabs(a - b) / std::max(1.0, std::fabs(a)));
            }
        }
        labels_equal = labels_equal && classify(e_step(s.data, raw).resp) == classify(e_step(s.data, fixed).resp);
    }
    return {worst < 1e-10 && labels_equal, fmt("max log-density change %.3g, MAP labels %s, %d fits (%d skipped)",
                                                worst, labels_equal ? "identical" : "changed", fits, skipped)};
}

Outcome cm_optimality() {
    std::mt19937_64 rng(99);
    double worst = 0.0;
    for (int inst = 0; inst < 10; ++inst) {
        const MvstParams truth = random_params(rng, 2, 2, 4.0 + inst, Variant::Mvst);
        const Dataset data(sample(truth, 40 + 5 * static_cast<std::size_t>(inst), 300 + static_cast<std::uint64_t>(inst)));
        const MvstParams current(truth.location() + oracle::random_matrix(2, 2, rng, 0.3), oracle::random_spd(2, rng),
                                 oracle::random_spd(2, rng), truth.lambda() + oracle::random_matrix(2, 2, rng, 0.3),
                                 truth.nu(), Variant::Mvst);
        std::vector<PosteriorMoments> mom;
        for (const auto& y : data) mom.push_back(posterior_moments(y, current));
        const CmUpdate upd = cm_updates(data, mom, current);
        auto gap = [&](const std::function<double(const Vector&)>& f, const Vector& closed) {
            const Vector numeric = oracle::nelder_mead(f, closed + Vector::Constant(closed.size(), 0.25), 0.3);
            return (numeric - closed).cwiseAbs().maxCoeff();
        };
        worst = std::max(worst, gap([&](const Vector& x) {
            return -oracle::q_function(data, mom, oracle::unpack(x, 2, 2), current.sigma(), current.psi(), current.lambda());
        }, oracle::vec(upd.location)));
        // Compare scale blocks on the matrices themselves.
        const Vector sig = oracle::nelder_mead([&](const Vector& x) {
            return -oracle::q_function(data, mom, upd.location, oracle::spd_from(x, 2), current.psi(), current.lambda());
        }, oracle::spd_to(upd.sigma) + Vector::Constant(3, 0.25), 0.3);
        worst = std::max(worst, (oracle::spd_from(sig, 2) - upd.sigma).cwiseAbs().maxCoeff());
        const Vector psi = oracle::nelder_mead([&](const Vector& x) {
            return -oracle::q_function(data, mom, upd.location, upd.sigma, oracle::spd_from(x, 2), current.lambda());
        }, oracle::spd_to(upd.psi) + Vector::Constant(3, 0.25), 0.3);
        worst = std::max(worst, (oracle::spd_from(psi, 2) - upd.psi).cwiseAbs().maxCoeff());
        worst = std::max(worst, gap([&](const Vector& x) {
            return -oracle::q_function(data, mom, upd.location, upd.sigma, upd.psi, oracle::unpack(x, 2, 2));
        }, oracle::vec(upd.lambda)));
    }
    return {worst < 1e-5, fmt("max |closed form - Nelder-Mead| %.3g over 10 instances x 4 blocks", worst)};
}

Outcome mean_constant() {
    const std::size_t draws = 10000000;
    bool pass = true;
    std::ostringstream d;
    for (double nu : {2.0, 3.0, 8.0}) {
        Engine engine = make_engine(4242, static_cast<std::uint64_t>(nu));
        std::gamma_distribution<double> gam(0.5 * nu, 2.0 / nu);
        std::normal_distribution<double> z;
        double sum = 0.0;
        double sq = 0.0;
        for (std::size_t k = 0; k < draws; ++k) {
            const double v = std::fabs(z(engine)) / std::sqrt(gam(engine));
            sum += v;
            sq += v * v;
        }
        const double m = sum / static_cast<double>(draws);
        const double se = std::sqrt((sq / static_cast<double>(draws) - m * m) / static_cast<double>(draws));
        const double got = mean_skew_constant(nu);
        const double zscore = (got - m) / se;
        pass = pass && std::fabs(zscore) <= 4.0;
        d << fmt("nu=%g: implemented %.5f, MC %.5f (z=%.2f); ", nu, got, m, zscore);
    }
    return {pass, d.str()};
}

struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all = {
        {1, "density integrates to one", density_integrates_to_one},
        {2, "reduction to Student t", reduces_to_student_t},
        {3, "posterior moments vs quadrature", posterior_moments_match_quadrature},
        {4, "ECME ascent", ecme_ascent},
        {5, "RMSE study, scenario I", rmse_reproduction},
        {6, "model comparison, scenario I", comparison_reproduction},
        {7, "limit chain", limit_chain},
        {8, "identifiability rescale", identifiability},
        {9, "CM-step optimality", cm_optimality},
        {10, "mean constant", mean_constant},
    };
    std::vector<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));
    if (wanted.empty()) {
        for (const auto& c : all) wanted.push_back(c.id);
    }
    bool ok = true;
    for (int id : wanted) {
        if (id < 1 || id > static_cast<int>(all.size())) {
            std::cerr << "unknown criterion " << id << '\n';
            return 2;
        }
        const Criterion& c = all[static_cast<std::size_t>(id - 1)];
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        ok = ok && o.pass;
        std::cout << "criterion " << c.id << " (" << c.name << "): " << (o.pass ? "PASS" : "FAIL") << " - " << o.detail
                  << std::endl;
    }
    return ok ? 0 : 1;
}
