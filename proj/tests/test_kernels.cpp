#include "doctest.h"

#include <atomic>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "dfsdca/kernels.hpp"
#include "test_support.hpp"

using namespace dfsdca;
using namespace dfsdca::testing;

TEST_CASE("pairwise sum examples") {
    CHECK(pairwise_sum(std::span<const double>()) == 0.0);
    const std::vector<double> one = {2.5};
    CHECK(pairwise_sum(one) == 2.5);
    std::vector<double> ints(1000);
    std::iota(ints.begin(), ints.end(), 1.0);
    CHECK(pairwise_sum(ints) == 500500.0);
}

TEST_CASE("pairwise sum tracks a naive sum") {
    Rng rng(23);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> values(1 + rng.uniform_index(5000));
        double naive = 0.0, magnitude = 0.0;
        for (double& v : values) {
            v = rng.normal();
            naive += v;
            magnitude += std::abs(v);
        }
        CHECK(std::abs(pairwise_sum(values) - naive) <= 1e-12 * magnitude);
    }
}

TEST_CASE("column sums match per-row pairwise sums") {
    Rng rng(24);
    const Matrix m = random_matrix(rng, 5, 333);
    const Vector sums = pairwise_sum_columns(m);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        std::vector<double> row(m.cols());
        for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
        CHECK(sums[r] == pairwise_sum(row));
    }
}

TEST_CASE("for_each_index visits every index once under both policies") {
    for (ExecPolicy policy : {ExecPolicy::serial, ExecPolicy::parallel}) {
        std::vector<std::atomic<int>> hits(1000);
        for_each_index(policy, 1000, [&](std::ptrdiff_t i) { ++hits[static_cast<std::size_t>(i)]; });
        for (const auto& h : hits) CHECK(h.load() == 1);
        for_each_index(policy, 0, [](std::ptrdiff_t) { FAIL("no calls expected"); });
    }
}

TEST_CASE("exceptions inside the parallel loop reach the caller") {
    for (ExecPolicy policy : {ExecPolicy::serial, ExecPolicy::parallel}) {
        CHECK_THROWS_WITH_AS(for_each_index(policy, 100,
                                            [](std::ptrdiff_t i) {
                                                if (i == 57) throw std::runtime_error("index 57");
                                            }),
                             "index 57", std::runtime_error);
    }
}

TEST_CASE("kernels give identical bits under both policies") {
    GeneratorSpec spec = desk_ridge_spec();
    spec.n = 400;
    const Problem problem = generate(spec);
    const auto ref = solve_reference(problem);
    const auto hp = HyperParams::for_problem(problem, step_size_convex(problem.smoothness(), problem.lambda(), problem.n()));
    Rng rng(25);
    const auto state = random_state(problem, ref, rng, 1.0);
    CHECK(objective(problem, state.w, ExecPolicy::serial) == objective(problem, state.w, ExecPolicy::parallel));
    CHECK(component_gradients(problem, state.w, ExecPolicy::serial) ==
          component_gradients(problem, state.w, ExecPolicy::parallel));
    CHECK(expected_direction(state, problem, ExecPolicy::serial) ==
          expected_direction(state, problem, ExecPolicy::parallel));
    CHECK(expected_next_potential(state, problem, ref, hp, Potential::D, ExecPolicy::serial) ==
          expected_next_potential(state, problem, ref, hp, Potential::D, ExecPolicy::parallel));
}
