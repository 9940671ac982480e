#include "doctest.h"

#include <cmath>

#include "dfsdca/sgd.hpp"
#include "test_support.hpp"

using namespace dfsdca;
using namespace dfsdca::testing;

namespace {

SgdSchedule constant(double eta) { return SgdSchedule{SgdSchedule::Kind::constant, eta}; }

}  // namespace

TEST_CASE("the SGD direction does not vanish at the optimum") {
    const Problem problem = generate(desk_ridge_spec());
    const auto ref = solve_reference(problem);
    bool some_nonzero = false;
    for (std::size_t i = 0; i < problem.n(); ++i) {
        SgdState state = init_sgd_state(problem, ref.w_star, 0);
        const auto report = sgd_apply_step(state, problem, constant(0.01), i);
        if (report.grad_norm_sq > 1e-6) some_nonzero = true;
    }
    CHECK(some_nonzero);
    CHECK(sgd_direction_second_moment(problem, ref.w_star) > 1e-3);
}

TEST_CASE("with one component SGD is gradient descent") {
    const Problem problem = one_d_ridge();
    SgdState state = init_sgd_state(problem, Vector::Zero(1), 3);
    const double eta = 0.25;
    Vector w = Vector::Zero(1);
    for (int k = 0; k < 20; ++k) {
        sgd_step(state, problem, constant(eta));
        w -= eta * full_gradient(problem, w);
        CHECK(state.w[0] == doctest::Approx(w[0]).epsilon(1e-15));
    }
    CHECK(state.t == 20);
}

TEST_CASE("zero components leave only the regularizer") {
    std::vector<ComponentLoss> zeros;
    for (int i = 0; i < 4; ++i) zeros.push_back(ComponentLoss::quadratic(Matrix::Zero(3, 3), Vector::Zero(3)));
    const Problem problem(zeros, 0.5, ConvexityClass::each_convex);
    Rng rng(2);
    const Vector w0 = random_vector(rng, 3);
    SgdState state = init_sgd_state(problem, w0, 1);
    const auto report = sgd_step(state, problem, constant(0.1));
    CHECK((report.v - 0.5 * w0).norm() == 0.0);
    CHECK((state.w - 0.95 * w0).norm() <= 1e-15);
}

TEST_CASE("the SGD direction is unbiased") {
    for (const Problem& problem : {generate(desk_ridge_spec()), generate(logistic_spec())}) {
        Rng rng(19);
        for (int trial = 0; trial < 20; ++trial) {
            const Vector w = random_vector(rng, problem.dim());
            Vector mean = Vector::Zero(problem.dim());
            for (std::size_t i = 0; i < problem.n(); ++i) {
                SgdState state = init_sgd_state(problem, w, 0);
                mean += sgd_apply_step(state, problem, constant(0.1), i).v;
            }
            mean /= static_cast<double>(problem.n());
            const Vector exact = full_gradient(problem, w);
            CHECK((mean - exact).norm() <= 1e-12 * std::max(1.0, exact.norm()));
        }
    }
}

TEST_CASE("schedule values") {
    CHECK(constant(0.3).at(1000, 0.1) == 0.3);
    const SgdSchedule decaying{SgdSchedule::Kind::decaying, 1.0};
    CHECK(decaying.at(0, 0.1) == 1.0);
    CHECK(decaying.at(10, 0.1) == doctest::Approx(0.5));
    CHECK(decaying.at(90, 0.1) == doctest::Approx(0.1));
}

TEST_CASE("constant-step SGD keeps a variance floor where SDCA does not") {
    const Problem problem = generate(desk_ridge_spec());
    const auto ref = solve_reference(problem);
    const double eta = step_size_convex(problem.smoothness(), problem.lambda(), problem.n());
    const auto T = static_cast<std::uint64_t>(std::ceil(20.0 / (eta * problem.lambda())));
    const double floor = sgd_direction_second_moment(problem, ref.w_star);

    std::vector<double> sgd_v;
    sgd_run(init_sgd_state(problem, Vector::Zero(problem.dim()), 6), problem, constant(eta), T,
            [&](const StepReport& r, const SgdState&) { sgd_v.push_back(r.grad_norm_sq); });
    const auto sgd_profile = variance_profile(std::span<const double>(sgd_v));
    CHECK(sgd_profile.last_window_mean() >= 0.5 * floor);

    std::vector<double> sdca_v;
    run(init_state_zero(problem, 6), problem, HyperParams::for_problem(problem, eta), T,
        [&](const StepReport& r, const SolverState&) { sdca_v.push_back(r.grad_norm_sq); });
    CHECK(variance_profile(std::span<const double>(sdca_v)).last_window_mean() < 1e-6 * floor);
}

TEST_CASE("SGD rejects bad input") {
    const Problem problem = generate(desk_ridge_spec());
    CHECK_THROWS_AS(init_sgd_state(problem, Vector::Zero(3), 0), DimensionError);
    SgdState state = init_sgd_state(problem, Vector::Zero(problem.dim()), 0);
    CHECK_THROWS_AS(sgd_apply_step(state, problem, constant(0.1), problem.n()), Error);
    CHECK_THROWS_AS(sgd_step(state, problem, constant(0.0)), Error);
    CHECK(state.t == 0);
}
