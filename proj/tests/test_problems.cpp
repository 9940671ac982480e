#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dfsdca/problems.hpp"
#include "test_support.hpp"

using namespace dfsdca;
using namespace dfsdca::testing;

namespace {

bool same_problem(const Problem& a, const Problem& b) {
    if (a.n() != b.n() || a.dim() != b.dim() || a.lambda() != b.lambda() || a.smoothness() != b.smoothness())
        return false;
    for (std::size_t i = 0; i < a.n(); ++i) {
        const auto& ca = a.component(i);
        const auto& cb = b.component(i);
        if (ca.kind() != cb.kind()) return false;
        if (ca.linear() && (ca.linear()->x != cb.linear()->x || ca.linear()->y != cb.linear()->y)) return false;
        if (ca.quadratic_data() &&
            (ca.quadratic_data()->Q != cb.quadratic_data()->Q || ca.quadratic_data()->b != cb.quadratic_data()->b))
            return false;
    }
    return true;
}

std::vector<LabeledRow> parse(const std::string& text, std::optional<Eigen::Index> d = std::nullopt) {
    std::istringstream in(text);
    return parse_libsvm(in, d, "test");
}

}  // namespace

TEST_CASE("smallest ridge instance") {
    GeneratorSpec spec;
    spec.family = GeneratorFamily::ridge;
    spec.n = 1;
    spec.d = 1;
    spec.lambda = 1.0;
    const Problem generated = generate(spec);
    CHECK(generated.n() == 1);
    CHECK(generated.dim() == 1);

    // The same shape with the data fixed to x = 1, y = 1.
    const Problem problem = one_d_ridge();
    CHECK(problem.smoothness() == 1.0);
    CHECK(problem.convexity() == ConvexityClass::each_convex);
    CHECK(objective(problem, Vector::Zero(1)) == 0.5);
}

TEST_CASE("explicit indefinite pair averages to PSD") {
    const Problem problem = make_quadratic_problem({Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, -0.5)},
                                                   {Vector::Zero(1), Vector::Zero(1)}, 0.1);
    CHECK(problem.convexity() == ConvexityClass::average_convex);
    CHECK(problem.component(0).is_convex());
    CHECK_FALSE(problem.component(1).is_convex());
    CHECK(average_curvature_min_eigenvalue(problem.components()) == doctest::Approx(0.25));
    CHECK(count_nonconvex_components(problem) == 1);
}

TEST_CASE("generation is deterministic in the seed") {
    for (const auto& spec : {desk_ridge_spec(), nonconvex_quadratic_spec(), logistic_spec()}) {
        CHECK(same_problem(generate(spec), generate(spec)));
        auto other = spec;
        other.seed += 1;
        CHECK_FALSE(same_problem(generate(spec), generate(other)));
    }
}

TEST_CASE("indefinite generator certifies its class") {
    const Problem problem = generate(nonconvex_quadratic_spec());
    CHECK(problem.convexity() == ConvexityClass::average_convex);
    CHECK(count_nonconvex_components(problem) >= 1);
    CHECK(average_curvature_min_eigenvalue(problem.components()) >= 0.1 - 1e-9);
    for (const auto& c : problem.components()) CHECK(problem.smoothness() >= c.smoothness());

    auto spec = nonconvex_quadratic_spec();
    spec.require_indefinite = false;
    spec.eig_min = 0.5;
    CHECK(generate(spec).convexity() == ConvexityClass::each_convex);
}

TEST_CASE("infeasible generator knobs are rejected") {
    auto spec = nonconvex_quadratic_spec();
    spec.eig_min = 0.0;
    CHECK_THROWS_AS(generate(spec), Error);

    spec = nonconvex_quadratic_spec();
    spec.eig_min = -0.01;
    spec.eig_max = 0.0;
    spec.psd_margin = 1.0;
    CHECK_THROWS_AS(generate(spec), Error);

    spec = nonconvex_quadratic_spec();
    spec.eig_min = 3.0;
    spec.eig_max = 1.0;
    CHECK_THROWS_AS(generate(spec), Error);

    spec = desk_ridge_spec();
    spec.n = 0;
    CHECK_THROWS_AS(generate(spec), Error);
}

TEST_CASE("reference solution examples") {
    const auto ref = solve_reference(one_d_ridge());
    CHECK(ref.method == ReferenceMethod::closed_form);
    CHECK(ref.w_star[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(ref.alpha_star(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(ref.p_star == doctest::Approx(0.25).epsilon(1e-15));

    Rng rng(6);
    std::vector<Matrix> Qs;
    for (int i = 0; i < 4; ++i) {
        const Matrix g = random_matrix(rng, 3, 3);
        Qs.push_back(g * g.transpose());
    }
    const auto zero_b = solve_reference(make_quadratic_problem(Qs, std::vector<Vector>(4, Vector::Zero(3)), 0.3));
    CHECK(zero_b.w_star.norm() == 0.0);
}

TEST_CASE("reference solutions satisfy both invariants") {
    for (const Problem& problem :
         {generate(desk_ridge_spec()), generate(nonconvex_quadratic_spec()), generate(logistic_spec()),
          smoothed_hinge_problem()}) {
        const auto ref = solve_reference(problem);
        CHECK(ref.residual <= kReferenceResidualBound);
        CHECK(full_gradient(problem, ref.w_star).norm() <= kReferenceResidualBound);
        const Vector image =
            pairwise_sum_columns(ref.alpha_star) / (problem.lambda() * static_cast<double>(problem.n()));
        CHECK((image - ref.w_star).norm() <= kReferenceDualConsistencyBound);
        CHECK(ref.p_star == objective(problem, ref.w_star));
    }
    CHECK(solve_reference(generate(logistic_spec())).method == ReferenceMethod::full_gradient_descent);
    CHECK(solve_reference(generate(logistic_spec())).residual <= kReferenceGradientTolerance);
}

TEST_CASE("closed form and gradient descent agree on quadratic families") {
    for (const Problem& problem : {generate(desk_ridge_spec()), generate(nonconvex_quadratic_spec())}) {
        const auto closed = solve_reference_closed_form(problem);
        const auto gd = solve_reference_gd(problem);
        CHECK(gd.method == ReferenceMethod::full_gradient_descent);
        CHECK((closed.w_star - gd.w_star).norm() <= 1e-8);
    }
    CHECK_THROWS_AS(solve_reference_closed_form(generate(logistic_spec())), Error);
}

TEST_CASE("gradient descent reports an exhausted iteration cap") {
    try {
        solve_reference_gd(generate(logistic_spec()), 3);
        FAIL("expected the cap to be hit");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("achieved") != std::string::npos);
    }
}

TEST_CASE("libsvm parsing") {
    const auto rows = parse("1 1:0.5 3:2\n");
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].y == 1.0);
    CHECK(rows[0].x.size() == 3);
    CHECK(rows[0].x[0] == 0.5);
    CHECK(rows[0].x[1] == 0.0);
    CHECK(rows[0].x[2] == 2.0);

    CHECK(parse("").empty());
    CHECK(parse("\n\n").empty());

    const auto padded = parse("+1 2:1\n-1 1:-3.5e-1\n", 5);
    REQUIRE(padded.size() == 2);
    CHECK(padded[0].y == 1.0);
    CHECK(padded[1].y == -1.0);
    CHECK(padded[0].x.size() == 5);
    CHECK(padded[1].x[0] == -0.35);

    const auto crlf = parse("2 1:1\r\n3 2:4\r\n");
    REQUIRE(crlf.size() == 2);
    CHECK(crlf[1].x[1] == 4.0);
}

TEST_CASE("libsvm errors name the line") {
    auto message = [](const std::string& text, std::optional<Eigen::Index> d = std::nullopt) -> std::string {
        try {
            parse(text, d);
        } catch (const Error& e) {
            return e.what();
        }
        return "";
    };
    CHECK(message("1 0:1").find("test:1") != std::string::npos);
    CHECK(message("1 1:1\n1 0:1").find("test:2") != std::string::npos);
    CHECK(message("1 -2:1").find("must be >= 1") != std::string::npos);
    CHECK(message("abc 1:1").find("non-numeric label") != std::string::npos);
    CHECK(message("1 1:x").find("non-numeric value") != std::string::npos);
    CHECK(message("1 a:1").find("non-numeric index") != std::string::npos);
    CHECK(message("1 3").find("expected idx:val") != std::string::npos);
    CHECK(message("1 1:1 1:2").find("duplicate") != std::string::npos);
    CHECK(message("1 1:1\n1 4:1", 3).find("test:2") != std::string::npos);
    CHECK_THROWS_AS(load_libsvm("/nonexistent/path/data.libsvm"), Error);
}

TEST_CASE("libsvm file loading and problem assembly") {
    const auto path = std::filesystem::temp_directory_path() / "dfsdca_test_load.libsvm";
    {
        std::ofstream out(path);
        out << "1 1:1 2:0.5\n0 2:-1\n-1 1:0.25\n";
    }
    const auto rows = load_libsvm(path);
    REQUIRE(rows.size() == 3);
    const Problem problem = make_linear_problem(LossKind::logistic, rows, 0.1);
    CHECK(problem.component(1).linear()->y == -1.0);  // 0 maps to the negative class
    CHECK(problem.component(0).linear()->y == 1.0);
    const Problem ridge = make_linear_problem(LossKind::squared, rows, 0.1);
    CHECK(ridge.component(1).linear()->y == 0.0);
    std::filesystem::remove(path);
}
