#include "mvst/init.hpp"

#include "mvst/errors.hpp"
#include "mvst/rng.hpp"

#include <limits>
#include <random>
#include <string>

namespace mvst {

namespace {

// Stream tags under the init seed.
constexpr std::uint64_t kmeans_stream = 0x6b6d;
constexpr std::uint64_t lambda_stream = 0x6c61;

constexpr int lloyd_max_iter = 100;

struct KmeansRun {
    std::vector<std::size_t> assign;
    double sse = std::numeric_limits<double>::infinity();
};

// Row i = Vec(Y_i).
Matrix flatten(const Dataset& data) {
    const auto d = static_cast<Eigen::Index>(data.rows() * data.cols());
    Matrix x(static_cast<Eigen::Index>(data.size()), d);
    for (std::size_t i = 0; i < data.size(); ++i) {
        x.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Vector>(data[i].data(), d).transpose();
    }
    return x;
}

double sq_dist(const Matrix& x, Eigen::Index i, const Matrix& centers, Eigen::Index k) {
    return (x.row(i) - centers.row(k)).squaredNorm();
}

Matrix plus_plus_seeds(const Matrix& x, std::size_t groups, Engine& engine) {
    const Eigen::Index n = x.rows();
    Matrix centers(static_cast<Eigen::Index>(groups), x.cols());
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    centers.row(0) = x.row(pick(engine));
    Vector d2(n);
    for (Eigen::Index i = 0; i < n; ++i) d2(i) = sq_dist(x, i, centers, 0);
    for (Eigen::Index k = 1; k < static_cast<Eigen::Index>(groups); ++k) {
        const double total = d2.sum();
        Eigen::Index chosen = 0;
        if (total > 0.0) {
            double u = std::uniform_real_distribution<double>(0.0, total)(engine);
            chosen = n - 1;
            for (Eigen::Index i = 0; i < n; ++i) {
                u -= d2(i);
                if (u < 0.0) {
                    chosen = i;
                    break;
                }
            }
        } else {
            chosen = pick(engine);
        }
        centers.row(k) = x.row(chosen);
        for (Eigen::Index i = 0; i < n; ++i) d2(i) = std::min(d2(i), sq_dist(x, i, centers, k));
    }
    return centers;
}

KmeansRun lloyd(const Matrix& x, std::size_t groups, Engine& engine) {
    const Eigen::Index n = x.rows();
    const auto k_count = static_cast<Eigen::Index>(groups);
    Matrix centers = plus_plus_seeds(x, groups, engine);
    KmeansRun run;
    run.assign.assign(static_cast<std::size_t>(n), groups);  // sentinel: unassigned
    Vector dist(n);
    for (int it = 0; it < lloyd_max_iter; ++it) {
        bool changed = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            std::size_t best = 0;
            double best_d = sq_dist(x, i, centers, 0);
            for (Eigen::Index k = 1; k < k_count; ++k) {
                const double d = sq_dist(x, i, centers, k);
                if (d < best_d) {
                    best_d = d;
                    best = static_cast<std::size_t>(k);
                }
            }
            dist(i) = best_d;
            if (run.assign[static_cast<std::size_t>(i)] != best) {
                run.assign[static_cast<std::size_t>(i)] = best;
                changed = true;
            }
        }
        // Empty clusters take the point farthest from its center.
        std::vector<long> counts(groups, 0);
        for (auto a : run.assign) ++counts[a];
        for (std::size_t k = 0; k < groups; ++k) {
            if (counts[k] > 0) continue;
            Eigen::Index far = 0;
            double far_d = -1.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (counts[run.assign[static_cast<std::size_t>(i)]] > 1 && dist(i) > far_d) {
                    far_d = dist(i);
                    far = i;
                }
            }
            --counts[run.assign[static_cast<std::size_t>(far)]];
            run.assign[static_cast<std::size_t>(far)] = k;
            counts[k] = 1;
            dist(far) = 0.0;
            changed = true;
        }
        centers.setZero();
        for (Eigen::Index i = 0; i < n; ++i) {
            centers.row(static_cast<Eigen::Index>(run.assign[static_cast<std::size_t>(i)])) += x.row(i);
        }
        for (std::size_t k = 0; k < groups; ++k) {
            centers.row(static_cast<Eigen::Index>(k)) /= static_cast<double>(counts[k]);
        }
        if (!changed) break;
    }
    run.sse = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        run.sse += sq_dist(x, i, centers, static_cast<Eigen::Index>(run.assign[static_cast<std::size_t>(i)]));
    }
    return run;
}

}  // namespace

Matrix kmeans_partition(const Dataset& data, std::size_t groups, const InitSpec& spec) {
    spec.validate();
    if (groups == 0) throw DomainError("kmeans_partition: groups must be positive");
    if (data.size() < groups) {
        throw DomainError("kmeans_partition: " + std::to_string(data.size()) + " observations for " +
                          std::to_string(groups) + " groups");
    }
    const Matrix x = flatten(data);
    const auto restarts = static_cast<std::size_t>(spec.kmeans_restarts);
    std::vector<KmeansRun> runs(restarts);
    const std::uint64_t base = stream_seed(spec.seed, kmeans_stream);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(restarts); ++r) {
        Engine engine = make_engine(base, static_cast<std::uint64_t>(r));
        runs[static_cast<std::size_t>(r)] = lloyd(x, groups, engine);
    }
    std::size_t best = 0;
    for (std::size_t r = 1; r < restarts; ++r) {
        if (runs[r].sse < runs[best].sse) best = r;
    }
    Matrix z = Matrix::Zero(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(groups));
    for (std::size_t i = 0; i < data.size(); ++i) {
        z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(runs[best].assign[i])) = 1.0;
    }
    return z;
}

double within_cluster_sse(const Dataset& data, const Matrix& z0) {
    const Matrix x = flatten(data);
    double sse = 0.0;
    for (Eigen::Index g = 0; g < z0.cols(); ++g) {
        const double count = z0.col(g).sum();
        if (count == 0.0) continue;
        const Eigen::RowVectorXd center = (z0.col(g).transpose() * x) / count;
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            if (z0(i, g) != 0.0) sse += (x.row(i) - center).squaredNorm();
        }
    }
    return sse;
}

MixtureParams initial_params(const Dataset& data, const Matrix& z0, const InitSpec& spec, Variant variant) {
    spec.validate();
    if (static_cast<std::size_t>(z0.rows()) != data.size() || z0.cols() < 1) {
        throw DimensionError("initial_params: partition does not match the data");
    }
    const auto groups = static_cast<std::size_t>(z0.cols());
    const auto n = static_cast<Eigen::Index>(data.rows());
    const auto p = static_cast<Eigen::Index>(data.cols());
    const std::uint64_t base = stream_seed(spec.seed, lambda_stream);

    std::vector<double> weights(groups);
    std::vector<MvstParams> components;
    components.reserve(groups);
    for (std::size_t g = 0; g < groups; ++g) {
        const auto col = static_cast<Eigen::Index>(g);
        double count = 0.0;
        Matrix m = Matrix::Zero(n, p);
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double z = z0(static_cast<Eigen::Index>(i), col);
            if (z != 0.0) {
                count += z;
                m += z * data[i];
            }
        }
        if (count < 2.0) throw DegenerateClusterError(g, count, 2.0);
        m /= count;
        Matrix row_scatter = Matrix::Zero(n, n);
        Matrix col_scatter = Matrix::Zero(p, p);
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double z = z0(static_cast<Eigen::Index>(i), col);
            if (z == 0.0) continue;
            const Matrix r = data[i] - m;
            row_scatter.noalias() += z * (r * r.transpose());
            col_scatter.noalias() += z * (r.transpose() * r);
        }
        const Matrix sigma = spd_factorize_with_jitter(row_scatter / (static_cast<double>(p) * count)).matrix;
        const Matrix psi = spd_factorize_with_jitter(col_scatter / (static_cast<double>(n) * count)).matrix;

        Matrix lambda = Matrix::Zero(n, p);
        if (has_skew(variant)) {
            Engine engine = make_engine(base, g);
            std::uniform_real_distribution<double> unif(spec.lambda_lower, spec.lambda_upper);
            for (Eigen::Index j = 0; j < p; ++j) {
                for (Eigen::Index r = 0; r < n; ++r) lambda(r, j) = unif(engine);
            }
        }
        weights[g] = count / static_cast<double>(data.size());
        components.emplace_back(m, sigma, psi, lambda, spec.nu_init, variant);
    }
    double total = 0.0;
    for (double w : weights) total += w;
    for (double& w : weights) w /= total;
    return MixtureParams(std::move(weights), std::move(components));
}

}  // namespace mvst
