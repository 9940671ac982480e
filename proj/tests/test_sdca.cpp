#include "doctest.h"

#include <cmath>
#include <limits>

#include "dfsdca/sdca.hpp"
#include "test_support.hpp"

using namespace dfsdca;
using namespace dfsdca::testing;

TEST_CASE("init_state examples") {
    const Problem ridge = generate(desk_ridge_spec());
    const auto zero = init_state_zero(ridge, 1);
    CHECK(zero.w == Vector::Zero(ridge.dim()));
    CHECK(zero.t == 0);

    const Problem one_d = one_d_ridge();
    CHECK(init_state(one_d, std::vector<Vector>{Vector::Constant(1, 0.5)}, 0).w[0] == 0.5);

    // n = 2, lambda = 0.5: w = (1/(0.5*2)) * (1 + 2) = 3.
    const Problem two = make_linear_problem(LossKind::squared, {{Vector::Ones(1), 0.0}, {Vector::Ones(1), 0.0}}, 0.5);
    CHECK(init_state(two, std::vector<Vector>{Vector::Constant(1, 1.0), Vector::Constant(1, 2.0)}, 0).w[0] == 3.0);
}

TEST_CASE("init_state rejects malformed dual tables") {
    const Problem two = make_linear_problem(LossKind::squared, {{Vector::Ones(2), 0.0}, {Vector::Ones(2), 0.0}}, 0.5);
    CHECK_THROWS_AS(init_state(two, std::vector<Vector>{Vector::Zero(2), Vector::Zero(3)}, 0), DimensionError);
    CHECK_THROWS_AS(init_state(two, std::vector<Vector>{Vector::Zero(2)}, 0), DimensionError);
    CHECK_THROWS_AS(init_state(two, std::vector<Vector>{}, 0), DimensionError);
    CHECK_THROWS_AS(init_state(two, Matrix::Zero(2, 0), 0), DimensionError);
}

TEST_CASE("gradient-warm initialization") {
    const Problem ridge = generate(desk_ridge_spec());
    Rng rng(4);
    const Vector w0 = random_vector(rng, ridge.dim());
    const auto state = init_state_gradient_warm(ridge, w0, 3);
    for (std::size_t i = 0; i < ridge.n(); ++i)
        CHECK((state.alpha(i) + ridge.component(i).gradient(w0)).norm() == 0.0);
    CHECK(primal_dual_residual(state, ridge.lambda()) == 0.0);
}

TEST_CASE("step sizes") {
    CHECK(step_size_convex(1.0, 1.0, 1) == 0.5);
    CHECK(step_size_convex(10.0, 0.1, 100) == doctest::Approx(0.05).epsilon(1e-15));
    CHECK(step_size_nonconvex(1.0, 1.0, 1) == 0.5);
    CHECK(step_size_nonconvex(2.0, 0.1, 50) == doctest::Approx(0.0125).epsilon(1e-15));

    Rng rng(8);
    for (int trial = 0; trial < 1000; ++trial) {
        const double L = std::exp(4.0 * rng.normal());
        const double lambda = std::exp(4.0 * rng.normal());
        const std::size_t n = 1 + rng.uniform_index(100000);
        const double beta_convex = step_size_convex(L, lambda, n) * lambda * static_cast<double>(n);
        const double beta_nonconvex = step_size_nonconvex(L, lambda, n) * lambda * static_cast<double>(n);
        CHECK(beta_convex < 1.0);
        CHECK(beta_nonconvex <= 0.5 * (1.0 + 1e-15));
        CHECK_NOTHROW(HyperParams(lambda, step_size_convex(L, lambda, n), n));
    }

    CHECK_THROWS_AS(step_size_convex(0.0, 1.0, 1), Error);
    CHECK_THROWS_AS(step_size_convex(1.0, -1.0, 1), Error);
    CHECK_THROWS_AS(step_size_nonconvex(1.0, 1.0, 0), Error);
    CHECK_THROWS_AS(step_size_nonconvex(-2.0, 1.0, 3), Error);
}

TEST_CASE("hyperparameters reject beta >= 1") {
    CHECK_THROWS_AS(HyperParams(1.0, 1.0, 1), Error);
    CHECK_THROWS_AS(HyperParams(0.5, 1.0, 4), Error);
    CHECK_THROWS_AS(HyperParams(1.0, 0.0, 1), Error);
    CHECK_THROWS_AS(HyperParams(0.0, 0.1, 1), Error);
    CHECK_THROWS_AS(HyperParams(1.0, 0.1, 0), Error);
    CHECK(HyperParams(0.1, 0.05, 100).beta() == doctest::Approx(0.5));
}

TEST_CASE("one-dimensional step reaches the minimizer") {
    const Problem problem = one_d_ridge();
    const HyperParams hp = HyperParams::for_problem(problem, step_size_convex(1.0, 1.0, 1));
    CHECK(hp.eta() == 0.5);
    SolverState state = init_state_zero(problem, 0);
    const auto report = step(state, problem, hp);
    CHECK(report.chosen_index == 0);
    CHECK(report.v[0] == -1.0);
    CHECK(report.grad_norm_sq == 1.0);
    CHECK(state.alpha(0)[0] == 0.5);
    CHECK(state.w[0] == 0.5);
    CHECK(state.t == 1);

    const auto after_run = run(init_state_zero(problem, 0), problem, hp, 1);
    CHECK(after_run.w[0] == 0.5);
    CHECK(after_run.alpha(0)[0] == 0.5);
}

TEST_CASE("a step from a matched dual is a no-op") {
    const Problem problem = generate(desk_ridge_spec());
    const auto ref = solve_reference(problem);
    const HyperParams hp =
        HyperParams::for_problem(problem, step_size_convex(problem.smoothness(), problem.lambda(), problem.n()));

    // alpha_i = -grad phi_i(w) for every i and w tied to the table: the
    // reference pair is such a point.
    SolverState state = init_state(problem, ref.alpha_star, 5);
    state.w = ref.w_star;
    for (std::size_t i = 0; i < problem.n(); ++i) {
        SolverState branch = state;
        const auto report = apply_step(branch, problem, hp, i);
        CHECK(report.grad_norm_sq == 0.0);
        CHECK(branch.w == state.w);
        CHECK(branch.alphas == state.alphas);
        CHECK(branch.t == state.t + 1);
    }
}

TEST_CASE("primal-dual relation holds after every step") {
    const Problem problem = generate(desk_ridge_spec());
    const HyperParams hp =
        HyperParams::for_problem(problem, step_size_convex(problem.smoothness(), problem.lambda(), problem.n()));
    SolverState state = init_state_zero(problem, 17);
    double max_v = 0.0;
    for (int k = 0; k < 2000; ++k) {
        const auto report = step(state, problem, hp);
        max_v = std::max(max_v, std::sqrt(report.grad_norm_sq));
        CHECK(primal_dual_residual(state, problem.lambda()) <= primal_dual_tolerance(problem.dim(), state.t, max_v));
    }
}

TEST_CASE("both forms of the dual update agree") {
    Rng rng(12);
    for (int trial = 0; trial < 1000; ++trial) {
        const Eigen::Index d = 1 + trial % 7;
        const Vector alpha = random_vector(rng, d, 3.0);
        const Vector g = random_vector(rng, d, 3.0);
        const double beta = rng.uniform();
        const Vector subtractive = alpha - beta * (g + alpha);
        const Vector convex = (1.0 - beta) * alpha + beta * (-g);
        const double scale = std::max({1.0, alpha.norm(), g.norm()});
        CHECK((subtractive - convex).norm() <= 8.0 * std::numeric_limits<double>::epsilon() * scale);
    }
}

TEST_CASE("expected direction equals the full gradient") {
    for (const Problem& problem : {generate(desk_ridge_spec()), generate(nonconvex_quadratic_spec())}) {
        const auto ref = solve_reference(problem);
        Rng rng(31);
        for (int trial = 0; trial < 50; ++trial) {
            const auto state = random_state(problem, ref, rng, 1.0);
            const Vector mean = expected_direction(state, problem);
            const Vector exact = full_gradient(problem, state.w);
            CHECK((mean - exact).norm() <= 1e-12 * std::max(1.0, exact.norm()));
        }
    }
}

TEST_CASE("runs are deterministic in the seed") {
    const Problem problem = generate(desk_ridge_spec());
    const HyperParams hp =
        HyperParams::for_problem(problem, step_size_convex(problem.smoothness(), problem.lambda(), problem.n()));
    const auto a = run(init_state_zero(problem, 99), problem, hp, 3000);
    const auto b = run(init_state_zero(problem, 99), problem, hp, 3000);
    const auto c = run(init_state_zero(problem, 100), problem, hp, 3000);
    CHECK(a == b);
    CHECK_FALSE(a == c);

    const auto unchanged = run(init_state_zero(problem, 99), problem, hp, 0);
    CHECK(unchanged == init_state_zero(problem, 99));
}

TEST_CASE("run invokes the hook once per step") {
    const Problem problem = generate(desk_ridge_spec());
    const HyperParams hp =
        HyperParams::for_problem(problem, step_size_convex(problem.smoothness(), problem.lambda(), problem.n()));
    std::uint64_t calls = 0;
    run(init_state_zero(problem, 1), problem, hp, 37, [&](const StepReport& r, const SolverState& s) {
        ++calls;
        CHECK(s.t == calls);
        CHECK(r.chosen_index < problem.n());
        CHECK(r.grad_norm_sq == doctest::Approx(r.v.squaredNorm()));
    });
    CHECK(calls == 37);
}

TEST_CASE("non-finite gradients abort the step without touching the state") {
    Matrix Q = Matrix::Constant(1, 1, 1e154);
    const Problem problem = make_quadratic_problem({Q, Q}, {Vector::Zero(1), Vector::Zero(1)}, 1e-3);
    const HyperParams hp(problem.lambda(), 0.1, problem.n());
    SolverState state = init_state(problem, Matrix::Constant(1, 2, 1e300), 2);
    REQUIRE(state.w[0] > 1.0);
    const SolverState before = state;
    CHECK_THROWS_AS(step(state, problem, hp), StepError);
    CHECK(state == before);

    try {
        run(state, problem, hp, 10);
        FAIL("run should have thrown");
    } catch (const StepError& e) {
        CHECK(e.iteration() == 1);
    }
}

TEST_CASE("uniform index sampling") {
    Rng rng(55);
    for (int k = 0; k < 100; ++k) CHECK(rng.uniform_index(1) == 0);
    std::vector<int> counts(7, 0);
    const int draws = 70000;
    for (int k = 0; k < draws; ++k) ++counts[rng.uniform_index(7)];
    for (int c : counts) CHECK(std::abs(c - draws / 7) < 500);  // ~5 standard deviations
    CHECK_THROWS_AS(rng.uniform_index(0), Error);

    Rng a(1), b(1);
    for (int k = 0; k < 100; ++k) CHECK(a.uniform_index(1000) == b.uniform_index(1000));
}
