#pragma once

#include <string_view>
#include <variant>
#include <vector>

#include "dfsdca/common.hpp"
#include "dfsdca/kernels.hpp"

namespace dfsdca {

enum class LossKind { squared, logistic, smoothed_hinge, indefinite_quadratic };

std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view name);

// Feature/label payload of the linear-model losses; the loss depends on w
// only through the margin x^T w.
struct LinearData {
    Vector x;
    double y = 0.0;
};

// phi(w) = 1/2 w^T Q w + b^T w with Q symmetric, possibly indefinite.
struct QuadraticData {
    Matrix Q;
    Vector b;
};

// One smooth component phi_i of the finite sum, with its smoothness
// constant computed once at construction.
//
//   squared         1/2 (x^T w - y)^2                       L = |x|^2
//   logistic        log(1 + exp(-y x^T w))                  L = y^2 |x|^2 / 4
//   smoothed_hinge  h(y x^T w), h(z) = 0 for z >= 1,
//                   (1 - z)^2 / 2 on [0, 1], 1/2 - z below  L = y^2 |x|^2
//   quadratic       1/2 w^T Q w + b^T w                     L = |Q|_2
//
// For +/-1 labels the classification constants reduce to |x|^2/4 and |x|^2.
// The hinge smoothing parameter is fixed at 1.
class ComponentLoss {
public:
    static ComponentLoss squared(Vector x, double y);
    static ComponentLoss logistic(Vector x, double y);
    static ComponentLoss smoothed_hinge(Vector x, double y);
    static ComponentLoss quadratic(Matrix Q, Vector b);

    LossKind kind() const { return kind_; }
    Eigen::Index dim() const { return dim_; }
    double smoothness() const { return smoothness_; }

    double value(const Vector& w) const;
    Vector gradient(const Vector& w) const;

    // False only for a quadratic component whose Q has a negative eigenvalue.
    bool is_convex() const { return convex_; }

    const LinearData* linear() const { return std::get_if<LinearData>(&payload_); }
    const QuadraticData* quadratic_data() const { return std::get_if<QuadraticData>(&payload_); }

private:
    ComponentLoss(LossKind kind, std::variant<LinearData, QuadraticData> payload);

    void check_dim(const Vector& w) const;

    LossKind kind_;
    std::variant<LinearData, QuadraticData> payload_;
    Eigen::Index dim_ = 0;
    double smoothness_ = 0.0;
    bool convex_ = true;
};

inline double value(const ComponentLoss& loss, const Vector& w) { return loss.value(w); }
inline Vector grad(const ComponentLoss& loss, const Vector& w) { return loss.gradient(w); }

// Smoothness constant of a component. For quadratics this is the spectral
// norm of Q found by power iteration on Q^2; throws if the iteration does
// not settle to relative tolerance 1e-10 within the iteration cap.
double smoothness_constant(const ComponentLoss& loss);
double spectral_norm(const Matrix& Q, double tolerance = 1e-10, int max_iterations = 200000);

enum class ConvexityClass { each_convex, average_convex };

std::string_view to_string(ConvexityClass c);

// Tolerance on the smallest eigenvalue when certifying PSD matrices.
inline constexpr double kPsdTolerance = 1e-10;

// P(w) = (1/n) sum_i phi_i(w) + lambda/2 |w|^2 together with its global
// smoothness constant L = max_i L_i and a certified convexity class.
//
// Construction verifies the declared class: each_convex requires every
// component to be convex; average_convex requires the averaged quadratic
// curvature (1/n) sum_i Q_i to be PSD (linear-model components are convex
// and only add curvature).
class Problem {
public:
    Problem(std::vector<ComponentLoss> components, double lambda, ConvexityClass convexity);

    std::size_t n() const { return components_.size(); }
    Eigen::Index dim() const { return dim_; }
    double lambda() const { return lambda_; }
    double smoothness() const { return smoothness_; }
    ConvexityClass convexity() const { return convexity_; }

    const ComponentLoss& component(std::size_t i) const { return components_[i]; }
    const std::vector<ComponentLoss>& components() const { return components_; }

    // True when every component is a squared or quadratic loss, so P is a
    // quadratic with a closed-form minimizer.
    bool is_quadratic() const;

private:
    std::vector<ComponentLoss> components_;
    double lambda_;
    double smoothness_ = 0.0;
    ConvexityClass convexity_;
    Eigen::Index dim_ = 0;
};

double objective(const Problem& problem, const Vector& w, ExecPolicy policy = ExecPolicy::serial);
Vector full_gradient(const Problem& problem, const Vector& w, ExecPolicy policy = ExecPolicy::serial);

// Per-component gradients at w as the columns of a d x n matrix.
Matrix component_gradients(const Problem& problem, const Vector& w, ExecPolicy policy = ExecPolicy::serial);

// Smallest eigenvalue of (1/n) sum of the quadratic components' Q_i.
double average_curvature_min_eigenvalue(const std::vector<ComponentLoss>& components);

}  // namespace dfsdca
