#pragma once

#include "mvst/kernels.hpp"
#include "mvst/types.hpp"

#include <cstdint>
#include <limits>

namespace mvst {

/// Closed search interval for nu.
struct NuBounds {
    double lower = 0.05;
    double upper = 200.0;

    void validate() const;
};

enum class RescaleTiming { PerIteration, AtConvergence };

/// Starting-value controls.
struct InitSpec {
    int kmeans_restarts = 10;
    double lambda_lower = -1.0;
    double lambda_upper = 1.0;
    double nu_init = 5.0;
    std::uint64_t seed = 1;

    void validate() const;
};

struct FitConfig {
    /// Stop when |l_new - l_old| / (|l_old| + 1) < tol. Infinity runs exactly one iteration.
    double tol = 1e-6;
    int max_iter = 500;
    NuBounds nu_bounds{};
    std::uint64_t seed = 1;
    RescaleTiming rescale_timing = RescaleTiming::AtConvergence;
    Variant variant = Variant::Mvst;
    ExecPolicy policy = ExecPolicy::Parallel;
    /// Initialization controls for fit_mixture; its seed is replaced by `seed`.
    InitSpec init{};

    void validate() const;
    InitSpec init_spec() const;
};

}  // namespace mvst
