#include "dfsdca/sdca.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace dfsdca {

std::size_t Rng::uniform_index(std::size_t n) {
    if (n == 0) throw Error("uniform_index: empty range");
    const std::uint64_t range = n;
    // Smallest accepted value; drawing below it would bias the low residues.
    const std::uint64_t threshold = (0 - range) % range;
    for (;;) {
        const std::uint64_t x = engine_();
        if (x >= threshold) return static_cast<std::size_t>(x % range);
    }
}

double Rng::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

HyperParams::HyperParams(double lambda, double eta, std::size_t n) : lambda_(lambda), eta_(eta), n_(n) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw Error("hyperparameters: lambda must be positive");
    if (!(eta > 0.0) || !std::isfinite(eta)) throw Error("hyperparameters: eta must be positive");
    if (n == 0) throw Error("hyperparameters: n must be at least 1");
    beta_ = eta * lambda * static_cast<double>(n);
    if (!(beta_ < 1.0))
        throw Error("hyperparameters: beta = eta*lambda*n = " + std::to_string(beta_) + " must be < 1");
}

namespace {

void check_step_size_inputs(double L, double lambda, std::size_t n) {
    if (!(L > 0.0) || !std::isfinite(L)) throw Error("step size: L must be positive");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw Error("step size: lambda must be positive");
    if (n == 0) throw Error("step size: n must be at least 1");
}

}  // namespace

double step_size_convex(double L, double lambda, std::size_t n) {
    check_step_size_inputs(L, lambda, n);
    return 1.0 / (L + lambda * static_cast<double>(n));
}

double step_size_nonconvex(double L, double lambda, std::size_t n) {
    check_step_size_inputs(L, lambda, n);
    return std::min(lambda / (2.0 * L * L), 1.0 / (2.0 * lambda * static_cast<double>(n)));
}

SolverState init_state(const Problem& problem, const Matrix& alpha0, std::uint64_t seed) {
    if (problem.n() == 0) throw Error("init_state: n must be at least 1");
    if (alpha0.cols() != static_cast<Eigen::Index>(problem.n()))
        throw DimensionError("init_state: expected " + std::to_string(problem.n()) + " initial dual vectors, got " +
                             std::to_string(alpha0.cols()));
    if (alpha0.rows() != problem.dim())
        throw DimensionError("init_state: dual vectors have dimension " + std::to_string(alpha0.rows()) +
                             ", problem dimension is " + std::to_string(problem.dim()));
    SolverState state;
    state.alphas = alpha0;
    state.w = pairwise_sum_columns(alpha0) / (problem.lambda() * static_cast<double>(problem.n()));
    state.t = 0;
    state.rng = Rng(seed);
    return state;
}

SolverState init_state(const Problem& problem, const std::vector<Vector>& alpha0, std::uint64_t seed) {
    if (alpha0.size() != problem.n())
        throw DimensionError("init_state: expected " + std::to_string(problem.n()) + " initial dual vectors, got " +
                             std::to_string(alpha0.size()));
    Matrix table(problem.dim(), static_cast<Eigen::Index>(alpha0.size()));
    for (std::size_t i = 0; i < alpha0.size(); ++i) {
        if (alpha0[i].size() != problem.dim())
            throw DimensionError("init_state: dual vector " + std::to_string(i) + " has dimension " +
                                 std::to_string(alpha0[i].size()) + ", problem dimension is " +
                                 std::to_string(problem.dim()));
        table.col(static_cast<Eigen::Index>(i)) = alpha0[i];
    }
    return init_state(problem, table, seed);
}

SolverState init_state_zero(const Problem& problem, std::uint64_t seed) {
    return init_state(problem, Matrix::Zero(problem.dim(), static_cast<Eigen::Index>(problem.n())), seed);
}

SolverState init_state_gradient_warm(const Problem& problem, const Vector& w0, std::uint64_t seed) {
    return init_state(problem, -component_gradients(problem, w0), seed);
}

StepPreview preview_step(const SolverState& state, const Problem& problem, const HyperParams& hp,
                         std::size_t index) {
    if (hp.n() != problem.n() || state.n() != problem.n())
        throw DimensionError("step: component count mismatch between state, problem and hyperparameters");
    if (state.dim() != problem.dim()) throw DimensionError("step: state dimension does not match the problem");
    if (index >= problem.n()) throw Error("step: index out of range");

    const auto col = static_cast<Eigen::Index>(index);
    Vector g = problem.component(index).gradient(state.w);
    if (!g.allFinite())
        throw StepError("non-finite gradient from component " + std::to_string(index) + " at iteration " +
                            std::to_string(state.t + 1),
                        state.t + 1);

    StepPreview out;
    out.report.chosen_index = index;
    out.report.v = std::move(g);
    out.report.v += state.alphas.col(col);
    out.report.grad_norm_sq = out.report.v.squaredNorm();

    out.alpha = state.alphas.col(col) - (hp.eta() * hp.lambda() * static_cast<double>(hp.n())) * out.report.v;
    out.w = state.w - hp.eta() * out.report.v;
    return out;
}

StepReport apply_step(SolverState& state, const Problem& problem, const HyperParams& hp, std::size_t index) {
    StepPreview next = preview_step(state, problem, hp, index);
    state.alphas.col(static_cast<Eigen::Index>(index)) = next.alpha;
    state.w = std::move(next.w);
    ++state.t;
    return std::move(next.report);
}

StepReport step(SolverState& state, const Problem& problem, const HyperParams& hp) {
    // Draw on a copy so a failed step leaves the sampler untouched as well.
    Rng rng = state.rng;
    const std::size_t i = rng.uniform_index(problem.n());
    StepReport report = apply_step(state, problem, hp, i);
    state.rng = rng;
    return report;
}

SolverState run(SolverState state, const Problem& problem, const HyperParams& hp, std::uint64_t T,
                const TraceHook& hook) {
#ifndef NDEBUG
    constexpr std::uint64_t kCheckEvery = 1024;
    double max_v_norm = 0.0;
#endif
    for (std::uint64_t k = 1; k <= T; ++k) {
        StepReport report;
        try {
            report = step(state, problem, hp);
        } catch (const StepError& e) {
            throw StepError(std::string("run stopped at iteration ") + std::to_string(k) + ": " + e.what(), k);
        }
#ifndef NDEBUG
        max_v_norm = std::max(max_v_norm, std::sqrt(report.grad_norm_sq));
        if (k % kCheckEvery == 0) {
            const double residual = primal_dual_residual(state, hp.lambda());
            const double tol = primal_dual_tolerance(state.dim(), state.t, max_v_norm);
            if (residual > tol)
                throw StepError("primal-dual relation drifted to " + std::to_string(residual) + " (allowed " +
                                    std::to_string(tol) + ") at iteration " + std::to_string(k),
                                k);
        }
#endif
        if (hook) hook(report, state);
    }
    return state;
}

double primal_dual_residual(const SolverState& state, double lambda) {
    const Vector image = pairwise_sum_columns(state.alphas) / (lambda * static_cast<double>(state.n()));
    return (state.w - image).norm();
}

double primal_dual_tolerance(Eigen::Index d, std::uint64_t t, double max_v_norm) {
    constexpr double c = 4.0;
    const double steps = static_cast<double>(std::max<std::uint64_t>(t, 1));
    return c * static_cast<double>(std::max<Eigen::Index>(d, 1)) * steps * std::numeric_limits<double>::epsilon() *
           max_v_norm;
}

Vector expected_direction(const SolverState& state, const Problem& problem, ExecPolicy policy) {
    Matrix directions = component_gradients(problem, state.w, policy);
    directions += state.alphas;
    return pairwise_sum_columns(directions) / static_cast<double>(problem.n());
}

}  // namespace dfsdca
