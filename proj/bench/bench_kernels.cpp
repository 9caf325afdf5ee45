// Serial reference kernels against their OpenMP counterparts.

#include "mvst/kernels.hpp"
#include "mvst/simulation.hpp"

#include <benchmark/benchmark.h>

#include <map>

namespace {

using namespace mvst;

const LabeledSample& sample_for(std::size_t n) {
    static std::map<std::size_t, LabeledSample> cache;
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, generate_mixture_sample(scenario_params(Scenario::I), n, 11)).first;
    return it->second;
}

template <ExecPolicy P>
void BM_EvaluateComponents(benchmark::State& state) {
    const auto& s = sample_for(static_cast<std::size_t>(state.range(0)));
    const MixtureParams theta = scenario_params(Scenario::I);
    const auto lw = theta.log_weights();
    for (auto _ : state) {
        benchmark::DoNotOptimize(evaluate_components(s.data, theta.components(), lw, true, P));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <ExecPolicy P>
void BM_NuObjective(benchmark::State& state) {
    const auto& s = sample_for(static_cast<std::size_t>(state.range(0)));
    const MixtureParams theta = scenario_params(Scenario::I);
    const auto lw = theta.log_weights();
    const ComponentTable t = evaluate_components(s.data, theta.components(), lw, false, ExecPolicy::Serial);
    std::vector<QuadForms> forms(t.samples);
    std::vector<double> others(t.samples);
    for (std::size_t i = 0; i < t.samples; ++i) {
        forms[i] = t.forms[t.index(i, 0)];
        others[i] = t.log_weighted[t.index(i, 1)];
    }
    const LogDensityEvaluator density(theta.component(0));
    std::vector<double> scratch;
    for (auto _ : state) {
        benchmark::DoNotOptimize(nu_objective(forms, others, lw[0], density, scratch, P));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_EvaluateComponents<ExecPolicy::Serial>)->Arg(250)->Arg(1000)->Arg(4000);
BENCHMARK(BM_EvaluateComponents<ExecPolicy::Parallel>)->Arg(250)->Arg(1000)->Arg(4000);
BENCHMARK(BM_NuObjective<ExecPolicy::Serial>)->Arg(250)->Arg(1000)->Arg(4000);
BENCHMARK(BM_NuObjective<ExecPolicy::Parallel>)->Arg(250)->Arg(1000)->Arg(4000);

BENCHMARK_MAIN();
