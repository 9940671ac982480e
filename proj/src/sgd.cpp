#include "dfsdca/sgd.hpp"

#include <cmath>
#include <string>

namespace dfsdca {

double SgdSchedule::at(std::uint64_t t, double lambda) const {
    if (kind == Kind::constant) return eta0;
    return eta0 / (1.0 + lambda * static_cast<double>(t));
}

SgdState init_sgd_state(const Problem& problem, const Vector& w0, std::uint64_t seed) {
    if (w0.size() != problem.dim()) throw DimensionError("init_sgd_state: dimension mismatch");
    return SgdState{w0, 0, Rng(seed)};
}

StepReport sgd_apply_step(SgdState& state, const Problem& problem, const SgdSchedule& schedule, std::size_t index) {
    if (state.w.size() != problem.dim()) throw DimensionError("sgd step: state dimension does not match the problem");
    if (index >= problem.n()) throw Error("sgd step: index out of range");
    if (!(schedule.eta0 > 0.0)) throw Error("sgd step: eta0 must be positive");

    Vector g = problem.component(index).gradient(state.w);
    if (!g.allFinite())
        throw StepError("non-finite gradient from component " + std::to_string(index) + " at iteration " +
                            std::to_string(state.t + 1),
                        state.t + 1);
    StepReport report;
    report.chosen_index = index;
    report.v = std::move(g);
    report.v += problem.lambda() * state.w;
    report.grad_norm_sq = report.v.squaredNorm();

    state.w -= schedule.at(state.t, problem.lambda()) * report.v;
    ++state.t;
    return report;
}

StepReport sgd_step(SgdState& state, const Problem& problem, const SgdSchedule& schedule) {
    Rng rng = state.rng;
    const std::size_t i = rng.uniform_index(problem.n());
    StepReport report = sgd_apply_step(state, problem, schedule, i);
    state.rng = rng;
    return report;
}

SgdState sgd_run(SgdState state, const Problem& problem, const SgdSchedule& schedule, std::uint64_t T,
                 const SgdTraceHook& hook) {
    for (std::uint64_t k = 1; k <= T; ++k) {
        StepReport report;
        try {
            report = sgd_step(state, problem, schedule);
        } catch (const StepError& e) {
            throw StepError(std::string("run stopped at iteration ") + std::to_string(k) + ": " + e.what(), k);
        }
        if (hook) hook(report, state);
    }
    return state;
}

double sgd_direction_second_moment(const Problem& problem, const Vector& w) {
    Matrix directions = component_gradients(problem, w);
    directions.colwise() += problem.lambda() * w;
    const Eigen::RowVectorXd sq = directions.colwise().squaredNorm();
    return pairwise_sum(std::span<const double>(sq.data(), static_cast<std::size_t>(sq.size()))) /
           static_cast<double>(problem.n());
}

}  // namespace dfsdca
