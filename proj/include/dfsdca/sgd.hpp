#pragma once

#include <cstdint>
#include <functional>

#include "dfsdca/common.hpp"
#include "dfsdca/losses.hpp"
#include "dfsdca/sdca.hpp"

namespace dfsdca {

// Plain SGD on P with the regularizer folded into every stochastic gradient,
// v = grad phi_i(w) + lambda w. No dual table; used as the comparator whose
// update variance does not vanish at the optimum.
struct SgdState {
    Vector w;
    std::uint64_t t = 0;
    Rng rng;
};

struct SgdSchedule {
    enum class Kind { constant, decaying };
    Kind kind = Kind::constant;
    double eta0 = 0.0;

    // eta0, or eta0 / (1 + lambda t) with t the number of completed steps.
    double at(std::uint64_t t, double lambda) const;
};

SgdState init_sgd_state(const Problem& problem, const Vector& w0, std::uint64_t seed);

StepReport sgd_apply_step(SgdState& state, const Problem& problem, const SgdSchedule& schedule, std::size_t index);
StepReport sgd_step(SgdState& state, const Problem& problem, const SgdSchedule& schedule);

using SgdTraceHook = std::function<void(const StepReport&, const SgdState&)>;
SgdState sgd_run(SgdState state, const Problem& problem, const SgdSchedule& schedule, std::uint64_t T,
                 const SgdTraceHook& hook = {});

// (1/n) sum_i |grad phi_i(w) + lambda w|^2 evaluated exactly over all i;
// at w* this is the variance floor of the SGD direction.
double sgd_direction_second_moment(const Problem& problem, const Vector& w);

}  // namespace dfsdca
