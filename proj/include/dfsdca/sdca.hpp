#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>

#include "dfsdca/common.hpp"
#include "dfsdca/losses.hpp"

namespace dfsdca {

// Seeded generator with a documented index mapping: mt19937_64 output
// reduced by rejection sampling, so index streams are identical on every
// standard library (unlike std::uniform_int_distribution).
class Rng {
public:
    Rng() : engine_(0) {}
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform draw from [0, n), n >= 1.
    std::size_t uniform_index(std::size_t n);

    // Standard normal draw (Box-Muller on two 53-bit uniforms).
    double normal();
    // Uniform draw from [0, 1).
    double uniform();

    bool operator==(const Rng&) const = default;

private:
    std::mt19937_64 engine_;
};

// Regularization, step size and component count, with beta = eta*lambda*n.
// Construction rejects beta >= 1 rather than clamping.
class HyperParams {
public:
    HyperParams(double lambda, double eta, std::size_t n);

    static HyperParams for_problem(const Problem& problem, double eta) {
        return HyperParams(problem.lambda(), eta, problem.n());
    }

    double lambda() const { return lambda_; }
    double eta() const { return eta_; }
    std::size_t n() const { return n_; }
    double beta() const { return beta_; }

private:
    double lambda_;
    double eta_;
    std::size_t n_;
    double beta_;
};

// eta = 1/(L + lambda n): the step size for individually convex components.
double step_size_convex(double L, double lambda, std::size_t n);
// eta = min(lambda/(2L^2), 1/(2 lambda n)): the step size when only the
// average of the components is convex.
double step_size_nonconvex(double L, double lambda, std::size_t n);

// Iterate w, pseudo-dual table (column i holds alpha_i, n*d reals in total),
// iteration counter and sampler. Between steps w = (1/(lambda n)) sum_i alpha_i.
struct SolverState {
    Vector w;
    Matrix alphas;
    std::uint64_t t = 0;
    Rng rng;

    Eigen::Index dim() const { return w.size(); }
    std::size_t n() const { return static_cast<std::size_t>(alphas.cols()); }
    auto alpha(std::size_t i) const { return alphas.col(static_cast<Eigen::Index>(i)); }

    bool operator==(const SolverState& other) const {
        return t == other.t && rng == other.rng && w.size() == other.w.size() && w == other.w &&
               alphas.rows() == other.alphas.rows() && alphas.cols() == other.alphas.cols() &&
               alphas == other.alphas;
    }
};

struct StepReport {
    std::size_t chosen_index = 0;
    Vector v;  // grad phi_i(w^(t-1)) + alpha_i^(t-1)
    double grad_norm_sq = 0.0;
};

class StepError : public Error {
public:
    StepError(const std::string& what, std::uint64_t iteration) : Error(what), iteration_(iteration) {}
    std::uint64_t iteration() const { return iteration_; }

private:
    std::uint64_t iteration_;
};

// alpha0 is d x n; w^(0) = (1/(lambda n)) sum_i alpha0_i.
SolverState init_state(const Problem& problem, const Matrix& alpha0, std::uint64_t seed);
SolverState init_state(const Problem& problem, const std::vector<Vector>& alpha0, std::uint64_t seed);
// Zero pseudo-duals, giving w^(0) = 0.
SolverState init_state_zero(const Problem& problem, std::uint64_t seed);
// alpha_i^(0) = -grad phi_i(w0). The resulting w^(0) is the primal image of
// those duals, which differs from w0 unless w0 is the minimizer.
SolverState init_state_gradient_warm(const Problem& problem, const Vector& w0, std::uint64_t seed);

// Applies the update for a given index without touching the sampler:
//   v       = grad phi_i(w) + alpha_i
//   alpha_i <- alpha_i - eta lambda n v
//   w       <- w - eta v
// On a non-finite gradient the state is left unchanged and StepError thrown.
StepReport apply_step(SolverState& state, const Problem& problem, const HyperParams& hp, std::size_t index);

// The same update computed without committing it: the new w and alpha_i.
struct StepPreview {
    StepReport report;
    Vector w;
    Vector alpha;
};
StepPreview preview_step(const SolverState& state, const Problem& problem, const HyperParams& hp, std::size_t index);

// Draws i uniformly from [0, n) with the state's sampler and applies it.
StepReport step(SolverState& state, const Problem& problem, const HyperParams& hp);

using TraceHook = std::function<void(const StepReport&, const SolverState&)>;

// Exactly T steps, calling hook after each. A failing step stops the run and
// surfaces as StepError carrying the 1-based iteration index.
SolverState run(SolverState state, const Problem& problem, const HyperParams& hp, std::uint64_t T,
                const TraceHook& hook = {});

// |w - (1/(lambda n)) sum_i alpha_i|
double primal_dual_residual(const SolverState& state, double lambda);

// Drift allowance for the primal-dual relation after t steps:
// c * d * t * eps * max_v_norm, with c = 4.
double primal_dual_tolerance(Eigen::Index d, std::uint64_t t, double max_v_norm);

// (1/n) sum_i (grad phi_i(w) + alpha_i), the expected update direction.
Vector expected_direction(const SolverState& state, const Problem& problem, ExecPolicy policy = ExecPolicy::serial);

}  // namespace dfsdca
