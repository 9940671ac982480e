#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dfsdca/common.hpp"
#include "dfsdca/losses.hpp"

namespace dfsdca {

enum class GeneratorFamily { ridge, logistic_synth, indefinite_quadratic };

std::string_view to_string(GeneratorFamily family);
GeneratorFamily parse_generator_family(std::string_view name);

struct GeneratorSpec {
    GeneratorFamily family = GeneratorFamily::ridge;
    std::size_t n = 1;
    std::size_t d = 1;
    double lambda = 1.0;
    std::uint64_t seed = 0;

    // ridge / logistic_synth: label noise standard deviation.
    double noise = 0.5;

    // indefinite_quadratic: per-component eigenvalues are drawn uniformly
    // from [eig_min, eig_max]; every Q_i is then shifted by
    // s = max(0, -lambda_min(mean Q)) + psd_margin.
    double eig_min = -1.0;
    double eig_max = 2.0;
    double psd_margin = 0.1;
    bool require_indefinite = true;
};

// Deterministic in spec.seed. Features are standard normal; ridge labels are
// x^T w_true + noise, logistic labels are sign(x^T w_true + noise).
Problem generate(const GeneratorSpec& spec);

// Number of components with a non-convex (indefinite) Hessian.
std::size_t count_nonconvex_components(const Problem& problem);

// Linear-model problem from explicit rows. For logistic and smoothed hinge
// labels are mapped to +1 (y > 0) or -1 (otherwise).
struct LabeledRow {
    Vector x;
    double y = 0.0;
};
Problem make_linear_problem(LossKind kind, const std::vector<LabeledRow>& rows, double lambda);

// Quadratic-family problem; the convexity class is each_convex when every
// Q_i is PSD and average_convex otherwise.
Problem make_quadratic_problem(const std::vector<Matrix>& Qs, const std::vector<Vector>& bs, double lambda);

enum class ReferenceMethod { closed_form, full_gradient_descent };
std::string_view to_string(ReferenceMethod method);

struct ReferenceSolution {
    Vector w_star;
    Matrix alpha_star;  // column i is -grad phi_i(w_star)
    double p_star = 0.0;
    ReferenceMethod method = ReferenceMethod::closed_form;
    double residual = 0.0;  // |grad P(w_star)|
};

inline constexpr double kReferenceGradientTolerance = 1e-12;
inline constexpr double kReferenceResidualBound = 1e-10;
inline constexpr double kReferenceDualConsistencyBound = 1e-8;

// Closed-form solve of (mean Q + lambda I) w = -mean b for quadratic
// problems, full-batch gradient descent otherwise.
ReferenceSolution solve_reference(const Problem& problem);
ReferenceSolution solve_reference_closed_form(const Problem& problem);
ReferenceSolution solve_reference_gd(const Problem& problem, std::size_t max_iterations = 2'000'000);

// LIBSVM text: "label idx:val idx:val ...", 1-based indices. Rows are
// densified to the largest index seen, or to d_override when given.
std::vector<LabeledRow> load_libsvm(const std::filesystem::path& path,
                                    std::optional<Eigen::Index> d_override = std::nullopt);
std::vector<LabeledRow> parse_libsvm(std::istream& in, std::optional<Eigen::Index> d_override = std::nullopt,
                                     const std::string& source = "<stream>");

}  // namespace dfsdca
