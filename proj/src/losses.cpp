#include "dfsdca/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dfsdca {

std::string_view to_string(LossKind kind) {
    switch (kind) {
        case LossKind::squared: return "squared";
        case LossKind::logistic: return "logistic";
        case LossKind::smoothed_hinge: return "smoothed_hinge";
        case LossKind::indefinite_quadratic: return "indefinite_quadratic";
    }
    return "unknown";
}

LossKind parse_loss_kind(std::string_view name) {
    if (name == "squared") return LossKind::squared;
    if (name == "logistic") return LossKind::logistic;
    if (name == "smoothed_hinge") return LossKind::smoothed_hinge;
    if (name == "indefinite_quadratic") return LossKind::indefinite_quadratic;
    throw Error("unknown loss kind '" + std::string(name) + "'");
}

std::string_view to_string(ConvexityClass c) {
    return c == ConvexityClass::each_convex ? "each_convex" : "average_convex";
}

namespace {

// log(1 + exp(t)) without overflow.
double softplus(double t) {
    return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

double sigmoid(double t) {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

double hinge_value(double z) {
    if (z >= 1.0) return 0.0;
    if (z <= 0.0) return 0.5 - z;
    return 0.5 * (1.0 - z) * (1.0 - z);
}

double hinge_derivative(double z) {
    if (z >= 1.0) return 0.0;
    if (z <= 0.0) return -1.0;
    return z - 1.0;
}

}  // namespace

double spectral_norm(const Matrix& Q, double tolerance, int max_iterations) {
    if (Q.rows() != Q.cols()) throw DimensionError("spectral_norm: matrix is not square");
    const Eigen::Index d = Q.rows();
    if (d == 0) return 0.0;

    // Fixed, non-symmetric start so no coordinate direction is missed.
    Vector x(d);
    for (Eigen::Index k = 0; k < d; ++k) x[k] = 1.0 + std::fmod(0.7548776662466927 * static_cast<double>(k + 1), 1.0);
    x.normalize();

    double rayleigh = 0.0;
    for (int it = 0; it < max_iterations; ++it) {
        const Vector y = Q * (Q * x);
        const double next = x.dot(y);
        const double norm = y.norm();
        if (norm == 0.0) return 0.0;
        x = y / norm;
        if (it > 0 && std::abs(next - rayleigh) <= tolerance * next) return std::sqrt(next);
        rayleigh = next;
    }
    throw Error("spectral_norm: power iteration did not converge within " + std::to_string(max_iterations) +
                " iterations");
}

ComponentLoss::ComponentLoss(LossKind kind, std::variant<LinearData, QuadraticData> payload)
    : kind_(kind), payload_(std::move(payload)) {
    if (const auto* lin = linear()) {
        dim_ = lin->x.size();
        if (!lin->x.allFinite() || !std::isfinite(lin->y)) throw Error("loss data contains non-finite values");
        const double xx = lin->x.squaredNorm();
        switch (kind_) {
            case LossKind::squared: smoothness_ = xx; break;
            case LossKind::logistic: smoothness_ = lin->y * lin->y * xx / 4.0; break;
            case LossKind::smoothed_hinge: smoothness_ = lin->y * lin->y * xx; break;
            default: break;
        }
    } else {
        auto& q = std::get<QuadraticData>(payload_);
        if (q.Q.rows() != q.Q.cols()) throw DimensionError("quadratic loss: Q is not square");
        if (q.b.size() != q.Q.rows()) throw DimensionError("quadratic loss: b and Q dimensions differ");
        if (!q.Q.allFinite() || !q.b.allFinite()) throw Error("quadratic loss: non-finite entries");
        const double asym = (q.Q - q.Q.transpose()).cwiseAbs().maxCoeff();
        if (q.Q.size() > 0 && asym > 1e-12 * std::max(1.0, q.Q.cwiseAbs().maxCoeff()))
            throw Error("quadratic loss: Q is not symmetric");
        q.Q = 0.5 * (q.Q + q.Q.transpose());
        dim_ = q.Q.rows();
        smoothness_ = spectral_norm(q.Q);
        if (dim_ > 0) {
            Eigen::SelfAdjointEigenSolver<Matrix> eig(q.Q, Eigen::EigenvaluesOnly);
            convex_ = eig.eigenvalues().minCoeff() >= -kPsdTolerance;
        }
    }
}

ComponentLoss ComponentLoss::squared(Vector x, double y) {
    return ComponentLoss(LossKind::squared, LinearData{std::move(x), y});
}

ComponentLoss ComponentLoss::logistic(Vector x, double y) {
    return ComponentLoss(LossKind::logistic, LinearData{std::move(x), y});
}

ComponentLoss ComponentLoss::smoothed_hinge(Vector x, double y) {
    return ComponentLoss(LossKind::smoothed_hinge, LinearData{std::move(x), y});
}

ComponentLoss ComponentLoss::quadratic(Matrix Q, Vector b) {
    return ComponentLoss(LossKind::indefinite_quadratic, QuadraticData{std::move(Q), std::move(b)});
}

void ComponentLoss::check_dim(const Vector& w) const {
    if (w.size() != dim_)
        throw DimensionError("loss expects dimension " + std::to_string(dim_) + ", got " + std::to_string(w.size()));
}

double ComponentLoss::value(const Vector& w) const {
    check_dim(w);
    if (const auto* q = quadratic_data()) return 0.5 * w.dot(q->Q * w) + q->b.dot(w);
    const auto& lin = *linear();
    const double margin = lin.x.dot(w);
    switch (kind_) {
        case LossKind::squared: {
            const double r = margin - lin.y;
            return 0.5 * r * r;
        }
        case LossKind::logistic: return softplus(-lin.y * margin);
        case LossKind::smoothed_hinge: return hinge_value(lin.y * margin);
        default: break;
    }
    throw Error("unreachable loss kind");
}

Vector ComponentLoss::gradient(const Vector& w) const {
    check_dim(w);
    if (const auto* q = quadratic_data()) return q->Q * w + q->b;
    const auto& lin = *linear();
    const double margin = lin.x.dot(w);
    switch (kind_) {
        case LossKind::squared: return (margin - lin.y) * lin.x;
        case LossKind::logistic: return (-lin.y * sigmoid(-lin.y * margin)) * lin.x;
        case LossKind::smoothed_hinge: return (lin.y * hinge_derivative(lin.y * margin)) * lin.x;
        default: break;
    }
    throw Error("unreachable loss kind");
}

double smoothness_constant(const ComponentLoss& loss) {
    if (const auto* q = loss.quadratic_data()) return spectral_norm(q->Q);
    return loss.smoothness();
}

double average_curvature_min_eigenvalue(const std::vector<ComponentLoss>& components) {
    if (components.empty()) throw Error("average curvature of an empty component set");
    const Eigen::Index d = components.front().dim();
    Matrix H = Matrix::Zero(d, d);
    for (const auto& c : components) {
        if (const auto* q = c.quadratic_data()) {
            H += q->Q;
        } else if (c.kind() == LossKind::squared) {
            H += c.linear()->x * c.linear()->x.transpose();
        }
    }
    H /= static_cast<double>(components.size());
    if (d == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(H, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().minCoeff();
}

Problem::Problem(std::vector<ComponentLoss> components, double lambda, ConvexityClass convexity)
    : components_(std::move(components)), lambda_(lambda), convexity_(convexity) {
    if (components_.empty()) throw Error("problem needs at least one component (n >= 1)");
    if (!(lambda_ > 0.0) || !std::isfinite(lambda_)) throw Error("problem regularization lambda must be positive");
    dim_ = components_.front().dim();
    for (std::size_t i = 0; i < components_.size(); ++i) {
        if (components_[i].dim() != dim_)
            throw DimensionError("component " + std::to_string(i) + " has dimension " +
                                 std::to_string(components_[i].dim()) + ", expected " + std::to_string(dim_));
        smoothness_ = std::max(smoothness_, components_[i].smoothness());
    }
    if (convexity_ == ConvexityClass::each_convex) {
        for (std::size_t i = 0; i < components_.size(); ++i)
            if (!components_[i].is_convex())
                throw Error("component " + std::to_string(i) + " is not convex; declare average_convex instead");
    } else {
        const double min_eig = average_curvature_min_eigenvalue(components_);
        if (min_eig < -kPsdTolerance)
            throw Error("average curvature is not PSD (smallest eigenvalue " + std::to_string(min_eig) + ")");
    }
}

bool Problem::is_quadratic() const {
    return std::all_of(components_.begin(), components_.end(), [](const ComponentLoss& c) {
        return c.kind() == LossKind::squared || c.kind() == LossKind::indefinite_quadratic;
    });
}

double objective(const Problem& problem, const Vector& w, ExecPolicy policy) {
    if (w.size() != problem.dim()) throw DimensionError("objective: dimension mismatch");
    std::vector<double> values(problem.n());
    for_each_index(policy, static_cast<std::ptrdiff_t>(problem.n()),
                   [&](std::ptrdiff_t i) { values[i] = problem.component(i).value(w); });
    return pairwise_sum(values) / static_cast<double>(problem.n()) + 0.5 * problem.lambda() * w.squaredNorm();
}

Matrix component_gradients(const Problem& problem, const Vector& w, ExecPolicy policy) {
    if (w.size() != problem.dim()) throw DimensionError("gradient: dimension mismatch");
    Matrix grads(problem.dim(), static_cast<Eigen::Index>(problem.n()));
    for_each_index(policy, static_cast<std::ptrdiff_t>(problem.n()),
                   [&](std::ptrdiff_t i) { grads.col(i) = problem.component(i).gradient(w); });
    return grads;
}

Vector full_gradient(const Problem& problem, const Vector& w, ExecPolicy policy) {
    const Matrix grads = component_gradients(problem, w, policy);
    return pairwise_sum_columns(grads) / static_cast<double>(problem.n()) + problem.lambda() * w;
}

}  // namespace dfsdca
