#include "latent/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "latent/error.hpp"
#include "latent/kernels/kernels.hpp"

namespace latent {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::SingularSystem: return "SingularSystem";
        case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorKind::TooFewPoints: return "TooFewPoints";
        case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
        case ErrorKind::NoEligibleCentroid: return "NoEligibleCentroid";
        case ErrorKind::LinearizationBreakdown: return "LinearizationBreakdown";
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::InconsistentDim: return "InconsistentDim";
        case ErrorKind::EmptyGroup: return "EmptyGroup";
        case ErrorKind::SpecInvalid: return "SpecInvalid";
        case ErrorKind::Io: return "Io";
    }
    return "Unknown";
}

Mat::Mat(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    require(data_.size() == rows * cols, ErrorKind::DimensionMismatch,
            "matrix data size " + std::to_string(data_.size()) + " != " + std::to_string(rows) + "x" +
                std::to_string(cols));
}

Mat Mat::identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

double norm(std::span<const double> x) noexcept { return std::sqrt(kernels::dot(x, x)); }

bool all_finite(std::span<const double> x) noexcept {
    return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

Vec multiply(const Mat& a, std::span<const double> x) {
    require(x.size() == a.cols(), ErrorKind::DimensionMismatch, "multiply: vector length does not match columns");
    Vec y(a.rows());
    for (std::size_t r = 0; r < a.rows(); ++r) y[r] = kernels::dot(a.row(r), x);
    return y;
}

Vec multiply_transposed(const Mat& a, std::span<const double> x) {
    require(x.size() == a.rows(), ErrorKind::DimensionMismatch, "multiply_transposed: vector length does not match rows");
    Vec y(a.cols(), 0.0);
    for (std::size_t r = 0; r < a.rows(); ++r) kernels::axpy(x[r], a.row(r), y);
    return y;
}

Mat gram_rows(const Mat& a) {
    Mat g(a.rows(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            const double v = kernels::dot(a.row(i), a.row(j));
            g(i, j) = v;
            g(j, i) = v;
        }
    }
    return g;
}

Cholesky::Cholesky(const Mat& spd) : lower_(spd.rows(), spd.rows()) {
    require(spd.rows() == spd.cols(), ErrorKind::DimensionMismatch, "Cholesky: matrix is not square");
    const std::size_t n = spd.rows();
    double largest = 0.0;
    for (std::size_t i = 0; i < n; ++i) largest = std::max(largest, std::abs(spd(i, i)));
    const double cutoff = kRankCutoff * largest;
    for (std::size_t j = 0; j < n; ++j) {
        double pivot = spd(j, j);
        for (std::size_t k = 0; k < j; ++k) pivot -= lower_(j, k) * lower_(j, k);
        if (!(pivot > cutoff) || largest == 0.0) {
            fail(ErrorKind::SingularSystem,
                 "Gram matrix is rank deficient at row " + std::to_string(j) + " (pivot " + std::to_string(pivot) + ")");
        }
        const double diag = std::sqrt(pivot);
        lower_(j, j) = diag;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = spd(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= lower_(i, k) * lower_(j, k);
            lower_(i, j) = s / diag;
        }
    }
}

Vec Cholesky::solve(std::span<const double> b) const {
    const std::size_t n = dim();
    require(b.size() == n, ErrorKind::DimensionMismatch, "Cholesky::solve: rhs length mismatch");
    Vec y(b.begin(), b.end());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < i; ++k) y[i] -= lower_(i, k) * y[k];
        y[i] /= lower_(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
        for (std::size_t k = ii + 1; k < n; ++k) y[ii] -= lower_(k, ii) * y[k];
        y[ii] /= lower_(ii, ii);
    }
    return y;
}

namespace {

Vec subtract(std::span<const double> a, std::span<const double> b) {
    Vec out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

// Minimum-norm x with V x = rhs, given a factorization of V V^T; one round of
// iterative refinement recovers most of the accuracy lost to squaring the
// condition number.
Vec least_norm_with(const Mat& v, const Cholesky& gram, std::span<const double> rhs) {
    Vec x = multiply_transposed(v, gram.solve(rhs));
    const Vec r = subtract(rhs, multiply(v, x));
    const Vec dx = multiply_transposed(v, gram.solve(r));
    kernels::axpy(1.0, dx, x);
    return x;
}

}  // namespace

namespace {

// Scaling a row of V and its rhs entry by the same positive factor leaves the
// solution set, and so the minimum-norm point, unchanged. Unit rows make the
// relative pivot cutoff a test of linear independence rather than of scale.
Mat equilibrate(Mat v, Vec& rhs) {
    require(rhs.size() == v.rows(), ErrorKind::DimensionMismatch, "constraint rhs length does not match rows");
    for (std::size_t r = 0; r < v.rows(); ++r) {
        const double n = norm(v.row(r));
        if (n == 0.0) continue;
        for (double& x : v.row(r)) x /= n;
        rhs[r] /= n;
    }
    return v;
}

}  // namespace

AffineConstraint::AffineConstraint(Mat v_matrix, Vec rhs)
    : rhs_(std::move(rhs)), v_(equilibrate(std::move(v_matrix), rhs_)), gram_(gram_rows(v_)) {}

Vec AffineConstraint::project_to_nullspace(std::span<const double> g) const {
    const Vec y = gram_.solve(multiply(v_, g));
    Vec out(g.begin(), g.end());
    const Vec back = multiply_transposed(v_, y);
    kernels::axpy(-1.0, back, out);
    return out;
}

Vec AffineConstraint::least_norm_point() const { return least_norm_with(v_, gram_, rhs_); }

Vec AffineConstraint::restore(std::span<const double> x) const {
    const Vec r = subtract(rhs_, multiply(v_, x));
    Vec out(x.begin(), x.end());
    kernels::axpy(1.0, multiply_transposed(v_, gram_.solve(r)), out);
    return out;
}

double AffineConstraint::residual(std::span<const double> x) const { return norm(subtract(multiply(v_, x), rhs_)); }

Vec least_norm_solve(const Mat& v_matrix, std::span<const double> rhs, double tol) {
    require(tol > 0.0, ErrorKind::InvalidArgument, "least_norm_solve: tol must be positive");
    require(v_matrix.rows() >= 1 && v_matrix.cols() >= 1, ErrorKind::DimensionMismatch, "least_norm_solve: empty matrix");
    require(rhs.size() == v_matrix.rows(), ErrorKind::DimensionMismatch,
            "least_norm_solve: rhs has " + std::to_string(rhs.size()) + " entries, matrix has " +
                std::to_string(v_matrix.rows()) + " rows");
    const AffineConstraint constraint(v_matrix, Vec(rhs.begin(), rhs.end()));
    Vec x = constraint.least_norm_point();
    const double residual = norm(subtract(multiply(v_matrix, x), rhs));
    if (!(residual <= tol)) {
        fail(ErrorKind::SingularSystem, "least_norm_solve: residual " + std::to_string(residual) + " exceeds tol");
    }
    return x;
}

ProjectionResult gradient_projection(const Objective& objective, const AffineConstraint& constraint,
                                     std::span<const double> x0, const ProjectionOptions& options) {
    require(options.step > 0.0, ErrorKind::InvalidArgument, "gradient_projection: step must be positive");
    require(options.tol > 0.0, ErrorKind::InvalidArgument, "gradient_projection: tol must be positive");
    require(x0.size() == constraint.matrix().cols(), ErrorKind::DimensionMismatch,
            "gradient_projection: x0 length does not match constraint columns");

    ProjectionResult result;
    result.x.assign(x0.begin(), x0.end());
    result.max_constraint_violation = constraint.residual(result.x);
    require(result.max_constraint_violation <= options.tol, ErrorKind::InvalidArgument,
            "gradient_projection: x0 violates the constraint");

    double f = objective.value(result.x);
    result.objective_history.push_back(f);
    for (; result.iterations < options.max_iter; ++result.iterations) {
        const Vec pg = constraint.project_to_nullspace(objective.gradient(result.x));
        result.projected_gradient_norm = norm(pg);
        if (result.projected_gradient_norm <= options.tol) {
            result.converged = true;
            return result;
        }
        double step = options.step;
        bool accepted = false;
        for (std::size_t h = 0; h <= options.max_halvings; ++h, step *= 0.5) {
            Vec candidate = result.x;
            kernels::axpy(-step, pg, candidate);
            candidate = constraint.restore(candidate);
            const double fc = objective.value(candidate);
            if (fc < f) {
                result.x = std::move(candidate);
                f = fc;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            result.stalled = true;
            return result;
        }
        result.objective_history.push_back(f);
        result.max_constraint_violation = std::max(result.max_constraint_violation, constraint.residual(result.x));
    }
    const Vec pg = constraint.project_to_nullspace(objective.gradient(result.x));
    result.projected_gradient_norm = norm(pg);
    result.converged = result.projected_gradient_norm <= options.tol;
    return result;
}

}  // namespace latent
