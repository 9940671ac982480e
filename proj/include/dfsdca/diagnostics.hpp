#pragma once

#include <algorithm>
#include <cmath>

#include <span>
#include <string_view>
#include <vector>

#include "dfsdca/common.hpp"
#include "dfsdca/kernels.hpp"
#include "dfsdca/problems.hpp"
#include "dfsdca/sdca.hpp"

namespace dfsdca {

// Potentials measured against a reference solution:
//   A = (1/n) sum_j |alpha_j - alpha*_j|^2      B = |w - w*|^2
//   C = lambda/2 (A / L^2 + B)                  D = A / (2L) + lambda/2 B
// C is the Lyapunov function for average-convex problems, D for
// individually convex ones; both contract by (1 - eta lambda) per step in
// expectation under the matching step size.
struct PotentialSnapshot {
    std::uint64_t t = 0;
    double A = 0.0;
    double B = 0.0;
    double C = 0.0;
    double D = 0.0;
    double suboptimality = 0.0;
    double v_norm_sq = 0.0;  // of the step that produced this state; 0 at t = 0
};

enum class Potential { A, B, C, D, suboptimality };
std::string_view to_string(Potential p);
Potential parse_potential(std::string_view name);
double field(const PotentialSnapshot& s, Potential p);

PotentialSnapshot snapshot(const SolverState& state, const Problem& problem, const ReferenceSolution& ref,
                           double v_norm_sq = 0.0);

// The potential each step-size regime contracts.
Potential lyapunov_potential(ConvexityClass convexity);

double dual_potential(const Matrix& alphas, const ReferenceSolution& ref);
double lyapunov_value(Potential which, double A, double B, double lambda, double L);

inline constexpr std::size_t kMaxEnumeratedComponents = 10'000;

// Exact conditional expectation of C or D after one step from `state`: the
// step is simulated for every index i on a copy of the state and the n
// outcomes are averaged with equal weight. Throws when n exceeds
// kMaxEnumeratedComponents.
double expected_next_potential(const SolverState& state, const Problem& problem, const ReferenceSolution& ref,
                               const HyperParams& hp, Potential which, ExecPolicy policy = ExecPolicy::serial);

struct VarianceProfile {
    std::vector<double> v_norm_sq;
    std::vector<double> window_means;  // consecutive blocks of `window`, last block may be short
    std::size_t window = 50;

    double first_window_mean() const;
    // Mean over the final `window` values (fewer if the trace is shorter).
    double last_window_mean() const;
};

VarianceProfile variance_profile(std::span<const StepReport> trace, std::size_t window = 50);
VarianceProfile variance_profile(std::span<const double> v_norm_sq, std::size_t window = 50);

struct BoundCheck {
    double lhs = 0.0;
    double rhs = 0.0;
    double floor = 0.0;  // rounding resolution of lhs, where it is a difference of computed sums
    bool holds(double tol) const { return lhs <= rhs + tol + floor; }
};

// lhs = (1/n) sum_i |grad phi_i(w) - grad phi_i(w*)|^2,
// rhs = 2L (P(w) - P(w*) - lambda/2 |w - w*|^2).
// Requires individually convex components.
BoundCheck check_self_bound(const Problem& problem, const ReferenceSolution& ref, const Vector& w);

// lhs = (1/n) sum_i |v_i|^2 over all choices of i,
// rhs = 2 (1/n) sum_i |alpha_i - alpha*_i|^2 + 2 (1/n) sum_i |-grad phi_i(w) - alpha*_i|^2.
BoundCheck check_variance_bound(const SolverState& state, const Problem& problem, const ReferenceSolution& ref);

// Worst case over i of |-grad phi_i(w) - alpha*_i| against L |w - w*|.
BoundCheck check_smoothness_link(const Problem& problem, const ReferenceSolution& ref, const Vector& w);

// P(w) - P(w*) against (L + lambda)/2 |w - w*|^2.
BoundCheck check_suboptimality_bound(const Problem& problem, const ReferenceSolution& ref, const Vector& w);

// Strong convexity: lhs = lambda |w - w*|^2, rhs = (w - w*)^T grad P(w).
BoundCheck check_strong_convexity(const Problem& problem, const ReferenceSolution& ref, const Vector& w);

// Single-round evolution of A and B. `measured` is the change recomputed
// from the two full states; `predicted` is the closed form in terms of the
// pre-step state and v_t.
struct EvolutionCheck {
    double measured_dA = 0.0;
    double predicted_dA = 0.0;
    double measured_dB = 0.0;
    double predicted_dB = 0.0;
    // Rounding floor of the two changes: 4 eps M (|new + old - 2 ref| + |new - old|),
    // M the summed magnitude of the operands.
    double floor_dA = 0.0;
    double floor_dB = 0.0;

    static double relative_error(double measured, double predicted);
    static bool agrees(double measured, double predicted, double floor, double rel_tol) {
        return std::abs(measured - predicted) <= rel_tol * std::max(std::abs(measured), std::abs(predicted)) + floor;
    }
    bool holds_A(double rel_tol) const { return agrees(measured_dA, predicted_dA, floor_dA, rel_tol); }
    bool holds_B(double rel_tol) const { return agrees(measured_dB, predicted_dB, floor_dB, rel_tol); }
    bool holds(double rel_tol) const { return holds_A(rel_tol) && holds_B(rel_tol); }
};

EvolutionCheck check_evolution(const SolverState& before, const SolverState& after, const StepReport& report,
                               const Problem& problem, const ReferenceSolution& ref, const HyperParams& hp);

// Least-squares slope of log(field) against t over the positive prefix.
// Needs at least 10 snapshots and 2 positive leading values.
double fit_decay_rate(std::span<const PotentialSnapshot> snapshots, Potential which);

}  // namespace dfsdca
