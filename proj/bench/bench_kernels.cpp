// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include "dfsdca/diagnostics.hpp"
#include "dfsdca/problems.hpp"
#include "dfsdca/sdca.hpp"

using namespace dfsdca;

namespace {

struct Fixture {
    Problem problem;
    ReferenceSolution ref;
    HyperParams hp;
    SolverState state;

    static Fixture make(std::size_t n, std::size_t d) {
        GeneratorSpec spec;
        spec.family = GeneratorFamily::ridge;
        spec.n = n;
        spec.d = d;
        spec.lambda = 0.01;
        spec.seed = 1;
        Problem problem = generate(spec);
        ReferenceSolution ref = solve_reference(problem);
        const HyperParams hp =
            HyperParams::for_problem(problem, step_size_convex(problem.smoothness(), problem.lambda(), problem.n()));
        SolverState state = run(init_state_zero(problem, 2), problem, hp, n);
        return {std::move(problem), std::move(ref), hp, std::move(state)};
    }
};

const Fixture& fixture(std::size_t n) {
    static const Fixture small = Fixture::make(1000, 50);
    static const Fixture large = Fixture::make(8000, 50);
    return n <= 1000 ? small : large;
}

ExecPolicy policy_of(const benchmark::State& state) {
    return state.range(1) == 0 ? ExecPolicy::serial : ExecPolicy::parallel;
}

void BM_ExpectedNextPotential(benchmark::State& state) {
    const auto& f = fixture(static_cast<std::size_t>(state.range(0)));
    const ExecPolicy policy = policy_of(state);
    for (auto _ : state)
        benchmark::DoNotOptimize(expected_next_potential(f.state, f.problem, f.ref, f.hp, Potential::D, policy));
    state.SetLabel(policy == ExecPolicy::serial ? "serial" : "openmp");
}

void BM_FullGradient(benchmark::State& state) {
    const auto& f = fixture(static_cast<std::size_t>(state.range(0)));
    const ExecPolicy policy = policy_of(state);
    for (auto _ : state) benchmark::DoNotOptimize(full_gradient(f.problem, f.state.w, policy));
    state.SetLabel(policy == ExecPolicy::serial ? "serial" : "openmp");
}

void BM_Objective(benchmark::State& state) {
    const auto& f = fixture(static_cast<std::size_t>(state.range(0)));
    const ExecPolicy policy = policy_of(state);
    for (auto _ : state) benchmark::DoNotOptimize(objective(f.problem, f.state.w, policy));
    state.SetLabel(policy == ExecPolicy::serial ? "serial" : "openmp");
}

}  // namespace

BENCHMARK(BM_ExpectedNextPotential)->ArgsProduct({{1000, 8000}, {0, 1}})->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_FullGradient)->ArgsProduct({{1000, 8000}, {0, 1}})->Unit(benchmark::kMicrosecond)->UseRealTime();
BENCHMARK(BM_Objective)->ArgsProduct({{1000, 8000}, {0, 1}})->Unit(benchmark::kMicrosecond)->UseRealTime();

BENCHMARK_MAIN();
