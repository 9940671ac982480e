#include "dfsdca/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace dfsdca {

std::string_view to_string(Potential p) {
    switch (p) {
        case Potential::A: return "A";
        case Potential::B: return "B";
        case Potential::C: return "C";
        case Potential::D: return "D";
        case Potential::suboptimality: return "suboptimality";
    }
    return "unknown";
}

Potential parse_potential(std::string_view name) {
    if (name == "A") return Potential::A;
    if (name == "B") return Potential::B;
    if (name == "C") return Potential::C;
    if (name == "D") return Potential::D;
    if (name == "suboptimality") return Potential::suboptimality;
    throw Error("unknown potential '" + std::string(name) + "'");
}

double field(const PotentialSnapshot& s, Potential p) {
    switch (p) {
        case Potential::A: return s.A;
        case Potential::B: return s.B;
        case Potential::C: return s.C;
        case Potential::D: return s.D;
        case Potential::suboptimality: return s.suboptimality;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

Potential lyapunov_potential(ConvexityClass convexity) {
    return convexity == ConvexityClass::each_convex ? Potential::D : Potential::C;
}

double dual_potential(const Matrix& alphas, const ReferenceSolution& ref) {
    if (alphas.rows() != ref.alpha_star.rows() || alphas.cols() != ref.alpha_star.cols())
        throw DimensionError("dual potential: table shape does not match the reference");
    const Eigen::RowVectorXd sq = (alphas - ref.alpha_star).colwise().squaredNorm();
    return pairwise_sum(std::span<const double>(sq.data(), static_cast<std::size_t>(sq.size()))) /
           static_cast<double>(alphas.cols());
}

double lyapunov_value(Potential which, double A, double B, double lambda, double L) {
    // Both weights divide by L; a problem with L = 0 has no defined potential.
    if (!(L > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    switch (which) {
        case Potential::C: return 0.5 * lambda * (A / (L * L) + B);
        case Potential::D: return A / (2.0 * L) + 0.5 * lambda * B;
        default: break;
    }
    throw Error("lyapunov_value: only C and D are Lyapunov potentials");
}

PotentialSnapshot snapshot(const SolverState& state, const Problem& problem, const ReferenceSolution& ref,
                           double v_norm_sq) {
    if (state.dim() != ref.w_star.size()) throw DimensionError("snapshot: state and reference dimensions differ");
    PotentialSnapshot s;
    s.t = state.t;
    s.A = dual_potential(state.alphas, ref);
    s.B = (state.w - ref.w_star).squaredNorm();
    s.C = lyapunov_value(Potential::C, s.A, s.B, problem.lambda(), problem.smoothness());
    s.D = lyapunov_value(Potential::D, s.A, s.B, problem.lambda(), problem.smoothness());
    s.suboptimality = objective(problem, state.w) - ref.p_star;
    s.v_norm_sq = v_norm_sq;
    return s;
}

double expected_next_potential(const SolverState& state, const Problem& problem, const ReferenceSolution& ref,
                               const HyperParams& hp, Potential which, ExecPolicy policy) {
    if (which != Potential::C && which != Potential::D)
        throw Error("expected_next_potential: choose C or D");
    const std::size_t n = problem.n();
    if (n > kMaxEnumeratedComponents)
        throw Error("expected_next_potential: n = " + std::to_string(n) + " exceeds the enumeration limit of " +
                    std::to_string(kMaxEnumeratedComponents) + "; use Monte-Carlo estimation instead");

    // Branch i only changes w and alpha_i, so A moves by one column's term.
    const Eigen::RowVectorXd column_errors = (state.alphas - ref.alpha_star).colwise().squaredNorm();
    const double error_total =
        pairwise_sum(std::span<const double>(column_errors.data(), static_cast<std::size_t>(column_errors.size())));

    std::vector<double> outcomes(n);
    for_each_index(policy, static_cast<std::ptrdiff_t>(n), [&](std::ptrdiff_t i) {
        const auto next = preview_step(state, problem, hp, static_cast<std::size_t>(i));
        const double column_after = (next.alpha - ref.alpha_star.col(i)).squaredNorm();
        const double A = ((error_total - column_errors[i]) + column_after) / static_cast<double>(n);
        const double B = (next.w - ref.w_star).squaredNorm();
        outcomes[static_cast<std::size_t>(i)] = lyapunov_value(which, A, B, problem.lambda(), problem.smoothness());
    });
    return pairwise_sum(outcomes) / static_cast<double>(n);
}

double VarianceProfile::first_window_mean() const {
    if (window_means.empty()) throw Error("variance profile is empty");
    return window_means.front();
}

double VarianceProfile::last_window_mean() const {
    if (v_norm_sq.empty()) throw Error("variance profile is empty");
    const std::size_t count = std::min(window, v_norm_sq.size());
    const std::span<const double> tail(v_norm_sq.data() + (v_norm_sq.size() - count), count);
    return pairwise_sum(tail) / static_cast<double>(count);
}

VarianceProfile variance_profile(std::span<const double> v_norm_sq, std::size_t window) {
    if (v_norm_sq.empty()) throw Error("variance_profile: empty trace");
    if (window == 0) throw Error("variance_profile: window must be positive");
    VarianceProfile profile;
    profile.window = window;
    profile.v_norm_sq.assign(v_norm_sq.begin(), v_norm_sq.end());
    for (std::size_t begin = 0; begin < v_norm_sq.size(); begin += window) {
        const std::size_t count = std::min(window, v_norm_sq.size() - begin);
        profile.window_means.push_back(pairwise_sum(v_norm_sq.subspan(begin, count)) / static_cast<double>(count));
    }
    return profile;
}

VarianceProfile variance_profile(std::span<const StepReport> trace, std::size_t window) {
    std::vector<double> values;
    values.reserve(trace.size());
    for (const auto& r : trace) values.push_back(r.grad_norm_sq);
    return variance_profile(std::span<const double>(values), window);
}

BoundCheck check_self_bound(const Problem& problem, const ReferenceSolution& ref, const Vector& w) {
    if (problem.convexity() != ConvexityClass::each_convex)
        throw Error("check_self_bound: requires individually convex components");
    Matrix diffs = component_gradients(problem, w);
    diffs += ref.alpha_star;  // grad phi_i(w) - grad phi_i(w*)
    const Eigen::RowVectorXd sq = diffs.colwise().squaredNorm();
    BoundCheck out;
    out.lhs = pairwise_sum(std::span<const double>(sq.data(), static_cast<std::size_t>(sq.size()))) /
              static_cast<double>(problem.n());
    out.rhs = 2.0 * problem.smoothness() *
              (objective(problem, w) - ref.p_star - 0.5 * problem.lambda() * (w - ref.w_star).squaredNorm());
    return out;
}

BoundCheck check_variance_bound(const SolverState& state, const Problem& problem, const ReferenceSolution& ref) {
    const Matrix grads = component_gradients(problem, state.w);
    const Eigen::RowVectorXd v_sq = (grads + state.alphas).colwise().squaredNorm();
    const Eigen::RowVectorXd dual_sq = (state.alphas - ref.alpha_star).colwise().squaredNorm();
    const Eigen::RowVectorXd grad_sq = (-grads - ref.alpha_star).colwise().squaredNorm();
    const auto mean = [&](const Eigen::RowVectorXd& r) {
        return pairwise_sum(std::span<const double>(r.data(), static_cast<std::size_t>(r.size()))) /
               static_cast<double>(problem.n());
    };
    return {mean(v_sq), 2.0 * mean(dual_sq) + 2.0 * mean(grad_sq)};
}

BoundCheck check_smoothness_link(const Problem& problem, const ReferenceSolution& ref, const Vector& w) {
    const Matrix grads = component_gradients(problem, w);
    const double worst = (-grads - ref.alpha_star).colwise().norm().maxCoeff();
    return {worst, problem.smoothness() * (w - ref.w_star).norm()};
}

BoundCheck check_suboptimality_bound(const Problem& problem, const ReferenceSolution& ref, const Vector& w) {
    BoundCheck out;
    out.lhs = objective(problem, w) - ref.p_star;
    out.rhs = 0.5 * (problem.smoothness() + problem.lambda()) * (w - ref.w_star).squaredNorm();
    // P(w) - P* cannot resolve below the rounding of the summed magnitudes.
    std::vector<double> magnitudes(problem.n());
    for (std::size_t i = 0; i < problem.n(); ++i)
        magnitudes[i] = std::abs(problem.component(i).value(w)) + std::abs(problem.component(i).value(ref.w_star));
    const double M = pairwise_sum(magnitudes) / static_cast<double>(problem.n()) +
                     0.5 * problem.lambda() * (w.squaredNorm() + ref.w_star.squaredNorm());
    out.floor = 8.0 * std::numeric_limits<double>::epsilon() * M;
    return out;
}

BoundCheck check_strong_convexity(const Problem& problem, const ReferenceSolution& ref, const Vector& w) {
    const Vector delta = w - ref.w_star;
    return {problem.lambda() * delta.squaredNorm(), delta.dot(full_gradient(problem, w))};
}

double EvolutionCheck::relative_error(double measured, double predicted) {
    const double scale = std::max(std::abs(measured), std::abs(predicted));
    if (scale == 0.0) return 0.0;
    return std::abs(measured - predicted) / scale;
}

EvolutionCheck check_evolution(const SolverState& before, const SolverState& after, const StepReport& report,
                               const Problem& problem, const ReferenceSolution& ref, const HyperParams& hp) {
    if (before.n() != after.n() || before.dim() != after.dim())
        throw DimensionError("check_evolution: state shapes differ");
    EvolutionCheck out;

    // Recompute the changes termwise from the full states, as
    // |a - c|^2 - |b - c|^2 = sum (a - b)(a + b - 2c), which avoids
    // subtracting two large, nearly equal totals.
    const Matrix dual_change = after.alphas - before.alphas;
    const Matrix dual_sum = after.alphas + before.alphas - 2.0 * ref.alpha_star;
    const Eigen::RowVectorXd per_component = dual_change.cwiseProduct(dual_sum).colwise().sum();
    out.measured_dA =
        pairwise_sum(std::span<const double>(per_component.data(), static_cast<std::size_t>(per_component.size()))) /
        static_cast<double>(before.n());
    out.measured_dB = (after.w - before.w).dot(after.w + before.w - 2.0 * ref.w_star);

    const auto i = static_cast<Eigen::Index>(report.chosen_index);
    const Vector u = -problem.component(report.chosen_index).gradient(before.w);
    const Vector& v = report.v;
    const double v_sq = v.squaredNorm();
    // Same identities with the differences of squares factored.
    const Vector alpha_err = before.alphas.col(i) - ref.alpha_star.col(i);
    const Vector u_err = u - ref.alpha_star.col(i);
    out.predicted_dA =
        hp.eta() * hp.lambda() * ((u_err - alpha_err).dot(u_err + alpha_err) - (1.0 - hp.beta()) * v_sq);
    out.predicted_dB = -hp.eta() * v.dot(2.0 * (before.w - ref.w_star) - hp.eta() * v);

    // Forward-error bound for |a - c|^2 - |b - c|^2 evaluated in double
    // precision, with M the total magnitude of the operands.
    constexpr double eps = std::numeric_limits<double>::epsilon();
    const double m_dual = before.alphas.col(i).norm() + after.alphas.col(i).norm() + ref.alpha_star.col(i).norm() +
                          u.norm();
    out.floor_dA = 4.0 * eps * m_dual * (dual_sum.col(i).norm() + dual_change.col(i).norm()) /
                   static_cast<double>(before.n());
    const double m_primal = before.w.norm() + after.w.norm() + ref.w_star.norm() + hp.eta() * v.norm();
    out.floor_dB = 4.0 * eps * m_primal * ((after.w + before.w - 2.0 * ref.w_star).norm() + (after.w - before.w).norm());
    return out;
}

double fit_decay_rate(std::span<const PotentialSnapshot> snapshots, Potential which) {
    if (snapshots.size() < 10)
        throw Error("fit_decay_rate: needs at least 10 snapshots, got " + std::to_string(snapshots.size()));
    std::vector<double> ts, logs;
    for (const auto& s : snapshots) {
        const double value = field(s, which);
        if (!(value > 0.0) || !std::isfinite(value)) break;
        ts.push_back(static_cast<double>(s.t));
        logs.push_back(std::log(value));
    }
    if (ts.size() < 2)
        throw Error("fit_decay_rate: fewer than 2 positive leading values of " + std::string(to_string(which)));

    const double count = static_cast<double>(ts.size());
    const double t_mean = pairwise_sum(ts) / count;
    const double y_mean = pairwise_sum(logs) / count;
    std::vector<double> sxy(ts.size()), sxx(ts.size());
    for (std::size_t k = 0; k < ts.size(); ++k) {
        const double dt = ts[k] - t_mean;
        sxy[k] = dt * (logs[k] - y_mean);
        sxx[k] = dt * dt;
    }
    const double denom = pairwise_sum(sxx);
    if (!(denom > 0.0)) throw Error("fit_decay_rate: snapshots share a single t");
    return pairwise_sum(sxy) / denom;
}

}  // namespace dfsdca
