#pragma once

// Dense linear algebra for the retraining solver: a row-major matrix type,
// the minimum-norm solve of an underdetermined system V x = v, and a
// gradient-projection minimizer over the affine set {x : V x = v}.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace latent {

using Vec = std::vector<double>;

class Mat {
public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Mat(std::size_t rows, std::size_t cols, std::vector<double> data);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    static Mat identity(std::size_t n);

    friend bool operator==(const Mat&, const Mat&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

double norm(std::span<const double> x) noexcept;
bool all_finite(std::span<const double> x) noexcept;

// y = A x
Vec multiply(const Mat& a, std::span<const double> x);
// y = A^T x
Vec multiply_transposed(const Mat& a, std::span<const double> x);
// A A^T
Mat gram_rows(const Mat& a);

// Cholesky factor of a symmetric positive-definite matrix, with the
// rank cutoff used throughout: a pivot below kRankCutoff times the largest
// diagonal entry of the input marks the matrix as singular.
class Cholesky {
public:
    static constexpr double kRankCutoff = 1e-10;

    explicit Cholesky(const Mat& spd);

    Vec solve(std::span<const double> b) const;
    std::size_t dim() const noexcept { return lower_.rows(); }

private:
    Mat lower_;
};

// The affine set {x : V x = rhs} with V of full row rank. Rows are scaled to
// unit norm on construction (same set, better-conditioned Gram matrix), and
// the Gram factorization is kept so repeated projections are cheap. Throws
// SingularSystem if the rows are numerically dependent.
class AffineConstraint {
public:
    AffineConstraint(Mat v_matrix, Vec rhs);

    const Mat& matrix() const noexcept { return v_; }
    const Vec& rhs() const noexcept { return rhs_; }

    // g - V^T (V V^T)^{-1} V g
    Vec project_to_nullspace(std::span<const double> g) const;
    // Minimum-norm x with V x = rhs.
    Vec least_norm_point() const;
    // Smallest correction c such that V (x + c) = rhs; returns x + c.
    Vec restore(std::span<const double> x) const;
    double residual(std::span<const double> x) const;

private:
    // Rows of V (and rhs) rescaled to unit norm; declaration order matters.
    Vec rhs_;
    Mat v_;
    Cholesky gram_;
};

// Minimum Euclidean-norm solution of V x = v via the Gram system V V^T y = v,
// x = V^T y (rows equilibrated first), with one step of iterative refinement.
// Throws DimensionMismatch on shape errors, SingularSystem if V V^T is
// numerically rank deficient or the final residual exceeds tol.
Vec least_norm_solve(const Mat& v_matrix, std::span<const double> rhs, double tol);

struct Objective {
    std::function<double(std::span<const double>)> value;
    std::function<Vec(std::span<const double>)> gradient;
};

struct ProjectionOptions {
    double step = 1.0;
    std::size_t max_iter = 500;
    double tol = 1e-8;
    std::size_t max_halvings = 30;
};

struct ProjectionResult {
    Vec x;
    std::size_t iterations = 0;
    double projected_gradient_norm = 0.0;
    // Largest ||V x - v|| over every accepted iterate, including x0.
    double max_constraint_violation = 0.0;
    bool converged = false;
    // Line search exhausted its halvings without decrease.
    bool stalled = false;
    std::vector<double> objective_history;
};

// Fixed-step gradient projection with backtracking: each iteration moves
// along the negative projected gradient, halving the step (factor 0.5, at
// most max_halvings times) until the objective decreases. Iterates are
// pulled back onto the affine set after each move to stop rounding drift.
// x0 must satisfy the constraint within tol; InvalidArgument otherwise.
ProjectionResult gradient_projection(const Objective& objective, const AffineConstraint& constraint,
                                     std::span<const double> x0, const ProjectionOptions& options);

}  // namespace latent
