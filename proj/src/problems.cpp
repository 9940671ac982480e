#include "dfsdca/problems.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>

#include "dfsdca/sdca.hpp"

namespace dfsdca {

std::string_view to_string(GeneratorFamily family) {
    switch (family) {
        case GeneratorFamily::ridge: return "ridge";
        case GeneratorFamily::logistic_synth: return "logistic_synth";
        case GeneratorFamily::indefinite_quadratic: return "indefinite_quadratic";
    }
    return "unknown";
}

GeneratorFamily parse_generator_family(std::string_view name) {
    if (name == "ridge") return GeneratorFamily::ridge;
    if (name == "logistic_synth") return GeneratorFamily::logistic_synth;
    if (name == "indefinite_quadratic") return GeneratorFamily::indefinite_quadratic;
    throw Error("unknown generator family '" + std::string(name) + "'");
}

std::string_view to_string(ReferenceMethod method) {
    return method == ReferenceMethod::closed_form ? "closed_form" : "full_gradient_descent";
}

namespace {

Vector normal_vector(Rng& rng, Eigen::Index d) {
    Vector v(d);
    for (Eigen::Index k = 0; k < d; ++k) v[k] = rng.normal();
    return v;
}

Matrix random_orthogonal(Rng& rng, Eigen::Index d) {
    Matrix g(d, d);
    for (Eigen::Index j = 0; j < d; ++j)
        for (Eigen::Index k = 0; k < d; ++k) g(k, j) = rng.normal();
    Eigen::HouseholderQR<Matrix> qr(g);
    return qr.householderQ() * Matrix::Identity(d, d);
}

double min_eigenvalue(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(m, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().minCoeff();
}

Problem generate_linear(const GeneratorSpec& spec, Rng& rng) {
    const auto d = static_cast<Eigen::Index>(spec.d);
    const Vector w_true = normal_vector(rng, d);
    std::vector<LabeledRow> rows;
    rows.reserve(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        Vector x = normal_vector(rng, d);
        const double score = x.dot(w_true) + spec.noise * rng.normal();
        const double y = spec.family == GeneratorFamily::ridge ? score : (score > 0.0 ? 1.0 : -1.0);
        rows.push_back({std::move(x), y});
    }
    const LossKind kind = spec.family == GeneratorFamily::ridge ? LossKind::squared : LossKind::logistic;
    return make_linear_problem(kind, rows, spec.lambda);
}

Problem generate_quadratic(const GeneratorSpec& spec, Rng& rng) {
    if (!(spec.eig_min <= spec.eig_max)) throw Error("generator: eig_min must not exceed eig_max");
    if (spec.require_indefinite && spec.eig_min >= 0.0)
        throw Error("generator: indefinite components requested but eig_min >= 0 forces every Q_i to be PSD");
    if (!(spec.psd_margin >= 0.0)) throw Error("generator: psd_margin must be non-negative");

    const auto d = static_cast<Eigen::Index>(spec.d);
    std::vector<Matrix> Qs;
    std::vector<Vector> bs;
    Matrix mean = Matrix::Zero(d, d);
    for (std::size_t i = 0; i < spec.n; ++i) {
        const Matrix U = random_orthogonal(rng, d);
        Vector eigenvalues(d);
        for (Eigen::Index k = 0; k < d; ++k)
            eigenvalues[k] = spec.eig_min + (spec.eig_max - spec.eig_min) * rng.uniform();
        Matrix Q = U * eigenvalues.asDiagonal() * U.transpose();
        Q = 0.5 * (Q + Q.transpose());
        mean += Q;
        Qs.push_back(std::move(Q));
        bs.push_back(normal_vector(rng, d));
    }
    mean /= static_cast<double>(spec.n);

    const double shift = std::max(0.0, -min_eigenvalue(mean)) + spec.psd_margin;
    std::size_t indefinite = 0;
    for (auto& Q : Qs) {
        Q.diagonal().array() += shift;
        if (min_eigenvalue(Q) < -kPsdTolerance) ++indefinite;
    }
    if (spec.require_indefinite && indefinite == 0)
        throw Error("generator: after the PSD shift of " + std::to_string(shift) +
                    " no component remains indefinite; widen the eigenvalue range or reduce psd_margin");
    return make_quadratic_problem(Qs, bs, spec.lambda);
}

}  // namespace

Problem generate(const GeneratorSpec& spec) {
    if (spec.n == 0 || spec.d == 0) throw Error("generator: n and d must be positive");
    if (!(spec.lambda > 0.0)) throw Error("generator: lambda must be positive");
    if (!(spec.noise >= 0.0)) throw Error("generator: noise must be non-negative");
    Rng rng(spec.seed);
    if (spec.family == GeneratorFamily::indefinite_quadratic) return generate_quadratic(spec, rng);
    return generate_linear(spec, rng);
}

std::size_t count_nonconvex_components(const Problem& problem) {
    return static_cast<std::size_t>(std::count_if(problem.components().begin(), problem.components().end(),
                                                  [](const ComponentLoss& c) { return !c.is_convex(); }));
}

Problem make_linear_problem(LossKind kind, const std::vector<LabeledRow>& rows, double lambda) {
    if (kind == LossKind::indefinite_quadratic) throw Error("make_linear_problem: quadratic kind needs Q and b");
    std::vector<ComponentLoss> components;
    components.reserve(rows.size());
    for (const auto& row : rows) {
        switch (kind) {
            case LossKind::squared: components.push_back(ComponentLoss::squared(row.x, row.y)); break;
            case LossKind::logistic:
                components.push_back(ComponentLoss::logistic(row.x, row.y > 0.0 ? 1.0 : -1.0));
                break;
            case LossKind::smoothed_hinge:
                components.push_back(ComponentLoss::smoothed_hinge(row.x, row.y > 0.0 ? 1.0 : -1.0));
                break;
            default: break;
        }
    }
    return Problem(std::move(components), lambda, ConvexityClass::each_convex);
}

Problem make_quadratic_problem(const std::vector<Matrix>& Qs, const std::vector<Vector>& bs, double lambda) {
    if (Qs.size() != bs.size()) throw DimensionError("make_quadratic_problem: Q and b counts differ");
    std::vector<ComponentLoss> components;
    components.reserve(Qs.size());
    for (std::size_t i = 0; i < Qs.size(); ++i) components.push_back(ComponentLoss::quadratic(Qs[i], bs[i]));
    const bool all_convex =
        std::all_of(components.begin(), components.end(), [](const ComponentLoss& c) { return c.is_convex(); });
    return Problem(std::move(components), lambda,
                   all_convex ? ConvexityClass::each_convex : ConvexityClass::average_convex);
}

namespace {

ReferenceSolution finish_reference(const Problem& problem, Vector w, ReferenceMethod method) {
    ReferenceSolution ref;
    ref.alpha_star = -component_gradients(problem, w);
    ref.p_star = objective(problem, w);
    ref.residual = full_gradient(problem, w).norm();
    ref.method = method;
    ref.w_star = std::move(w);

    if (!(ref.residual <= kReferenceResidualBound))
        throw Error("reference solution residual " + std::to_string(ref.residual) + " exceeds bound");
    const Vector image =
        pairwise_sum_columns(ref.alpha_star) / (problem.lambda() * static_cast<double>(problem.n()));
    const double consistency = (ref.w_star - image).norm();
    if (!(consistency <= kReferenceDualConsistencyBound))
        throw Error("reference solution violates w* = (1/(lambda n)) sum alpha*_i by " + std::to_string(consistency));
    return ref;
}

}  // namespace

ReferenceSolution solve_reference_closed_form(const Problem& problem) {
    if (!problem.is_quadratic()) throw Error("closed-form reference needs a quadratic problem");
    const Eigen::Index d = problem.dim();
    Matrix H = Matrix::Zero(d, d);
    Vector b = Vector::Zero(d);
    for (const auto& c : problem.components()) {
        if (const auto* q = c.quadratic_data()) {
            H += q->Q;
            b += q->b;
        } else {
            const auto& lin = *c.linear();
            H += lin.x * lin.x.transpose();
            b -= lin.y * lin.x;
        }
    }
    const double inv_n = 1.0 / static_cast<double>(problem.n());
    H *= inv_n;
    b *= inv_n;
    H.diagonal().array() += problem.lambda();

    Eigen::LDLT<Matrix> solver(H);
    if (solver.info() != Eigen::Success) throw Error("closed-form reference: factorization failed");
    Vector w = solver.solve(-b);

    // A few rounds of iterative refinement against the exact gradient.
    double residual = full_gradient(problem, w).norm();
    for (int round = 0; round < 3 && residual > 0.0; ++round) {
        const Vector candidate = w - solver.solve(full_gradient(problem, w));
        const double next = full_gradient(problem, candidate).norm();
        if (!(next < residual)) break;
        w = candidate;
        residual = next;
    }
    return finish_reference(problem, std::move(w), ReferenceMethod::closed_form);
}

ReferenceSolution solve_reference_gd(const Problem& problem, std::size_t max_iterations) {
    // Steps never go below 1/(L + lambda), which is a guaranteed descent
    // step for the (L + lambda)-smooth objective; longer steps must pass the
    // Armijo test.
    const double safe_step = 1.0 / (problem.smoothness() + problem.lambda());
    double step = safe_step;
    Vector w = Vector::Zero(problem.dim());
    double value = objective(problem, w);
    Vector g = full_gradient(problem, w);
    double gnorm = g.norm();

    for (std::size_t it = 0; it < max_iterations; ++it) {
        if (gnorm <= kReferenceGradientTolerance) return finish_reference(problem, std::move(w), ReferenceMethod::full_gradient_descent);
        double trial = std::max(2.0 * step, safe_step);
        Vector candidate;
        double candidate_value = 0.0;
        for (;;) {
            candidate = w - trial * g;
            candidate_value = objective(problem, candidate);
            if (trial <= safe_step || candidate_value <= value - 0.5 * trial * gnorm * gnorm) break;
            trial = std::max(0.5 * trial, safe_step);
        }
        step = trial;
        w = std::move(candidate);
        value = candidate_value;
        g = full_gradient(problem, w);
        gnorm = g.norm();
    }
    throw Error("gradient-descent reference exceeded " + std::to_string(max_iterations) +
                " iterations; achieved |grad P| = " + std::to_string(gnorm));
}

ReferenceSolution solve_reference(const Problem& problem) {
    return problem.is_quadratic() ? solve_reference_closed_form(problem) : solve_reference_gd(problem);
}

namespace {

[[noreturn]] void parse_fail(const std::string& source, std::size_t line, const std::string& what) {
    throw Error(source + ":" + std::to_string(line) + ": " + what);
}

double parse_real(std::string_view token, const std::string& source, std::size_t line, const char* what) {
    if (!token.empty() && token.front() == '+') token.remove_prefix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size() || token.empty())
        parse_fail(source, line, std::string("non-numeric ") + what + " '" + std::string(token) + "'");
    return value;
}

}  // namespace

std::vector<LabeledRow> parse_libsvm(std::istream& in, std::optional<Eigen::Index> d_override,
                                     const std::string& source) {
    if (d_override && *d_override < 0) throw Error("libsvm: dimension override must be non-negative");
    struct SparseRow {
        double label;
        std::vector<std::pair<Eigen::Index, double>> entries;
    };
    std::vector<SparseRow> sparse;
    Eigen::Index max_index = 0;

    std::string text;
    std::size_t line_no = 0;
    while (std::getline(in, text)) {
        ++line_no;
        if (!text.empty() && text.back() == '\r') text.pop_back();
        std::istringstream tokens(text);
        std::string token;
        if (!(tokens >> token)) continue;

        SparseRow row{parse_real(token, source, line_no, "label"), {}};
        std::map<Eigen::Index, double> seen;
        while (tokens >> token) {
            const auto colon = token.find(':');
            if (colon == std::string::npos) parse_fail(source, line_no, "expected idx:val, got '" + token + "'");
            const std::string_view idx_text(token.data(), colon);
            long long index = 0;
            const auto [ptr, ec] = std::from_chars(idx_text.data(), idx_text.data() + idx_text.size(), index);
            if (ec != std::errc() || ptr != idx_text.data() + idx_text.size() || idx_text.empty())
                parse_fail(source, line_no, "non-numeric index '" + std::string(idx_text) + "'");
            if (index <= 0) parse_fail(source, line_no, "index " + std::to_string(index) + " must be >= 1");
            if (d_override && index > *d_override)
                parse_fail(source, line_no,
                           "index " + std::to_string(index) + " exceeds dimension " + std::to_string(*d_override));
            const double val = parse_real(std::string_view(token).substr(colon + 1), source, line_no, "value");
            if (!seen.emplace(index, val).second)
                parse_fail(source, line_no, "duplicate index " + std::to_string(index));
            max_index = std::max<Eigen::Index>(max_index, index);
        }
        row.entries.assign(seen.begin(), seen.end());
        sparse.push_back(std::move(row));
    }
    if (in.bad()) throw Error(source + ": read error");

    const Eigen::Index d = d_override.value_or(max_index);
    std::vector<LabeledRow> rows;
    rows.reserve(sparse.size());
    for (const auto& s : sparse) {
        LabeledRow row{Vector::Zero(d), s.label};
        for (const auto& [index, val] : s.entries) row.x[index - 1] = val;
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<LabeledRow> load_libsvm(const std::filesystem::path& path, std::optional<Eigen::Index> d_override) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open dataset '" + path.string() + "'");
    return parse_libsvm(in, d_override, path.string());
}

}  // namespace dfsdca
