#pragma once

// Retraining the head on a small new dataset without losing the annotated
// atlas. The new samples, plus the training exemplar of every centroid, become hard
// output constraints. The head's outputs are linearized in the weights
// around the current operating point, which turns the constraints into an
// underdetermined system V dW = v. The least-norm solution is the starting
// point; gradient projection then trades weight-change norm against the
// change of old-data outputs while staying on the constraint set.
//
// solve_retrain repeats that solve around the updated weights until the true
// outputs meet the targets. The repeated passes linearize the output
// pre-activation z rather than y (y' = t and z' = logit(t) are the same
// condition) and take each pass only as far as it reduces the summed squared
// logit gap.

#include <cstddef>
#include <string>
#include <vector>

#include "latent/dataset.hpp"
#include "latent/dense_head.hpp"
#include "latent/latent_atlas.hpp"
#include "latent/numerics.hpp"

namespace latent {

struct RetrainProblem {
    DenseHead base_model;
    Dataset new_data;
    // One sample per centroid: the training input whose latent is nearest it.
    Dataset centroid_exemplars;
    double lambda = 1.0;
    // The original training set P.
    Dataset old_data;
    CentroidAtlas atlas;

    // s' = s + k
    std::size_t augmented_size() const noexcept { return new_data.size() + centroid_exemplars.size(); }
    // New samples followed by the exemplars, in that order.
    Dataset augmented() const;
};

// Picks atlas.exemplar_indices out of old_data as the exemplar set.
RetrainProblem make_retrain_problem(DenseHead base_model, Dataset new_data, Dataset old_data, CentroidAtlas atlas,
                                    double lambda = 1.0);

struct RetrainOptions {
    // Desired outputs 0/1 are moved to clamp / 1 - clamp before forming v,
    // unless the current output is already further out on the correct side,
    // in which case it is kept as its own target. A correctly classified
    // exemplar always keeps its current output. Must lie in (0, 0.5).
    double clamp = 0.02;
    // Constraint tolerance for the least-norm solve and gradient projection.
    double tol = 1e-6;
    std::size_t max_iter = 300;
    double step = 1.0;
    // Accepted |y'(j) - d(j)| after the update under the true forward pass.
    double linearization_tol = 0.05;
    // Above this max |y'(j) - target(j)| the first-order hypothesis is
    // considered broken.
    double breakdown_threshold = 0.25;
    // Number of linearize-and-solve passes.
    std::size_t max_passes = 60;

    void validate() const;
};

struct LinearSystem {
    // s' x parameter_count; row j is dy(j)/dW at the linearization point.
    Mat jacobian;
    // v(j) = clamped d(j) - y(j)
    Vec rhs;
    Vec targets;
    Vec outputs;
    std::vector<std::string> warnings;
};

// Output Jacobian (one row per sample) of the head at its current weights.
Mat output_jacobian(const DenseHead& model, const Dataset& data);

// Linear system over the augmented set at problem.base_model.
LinearSystem build_linear_system(const RetrainProblem& problem, double clamp = 0.02);

struct RetrainResult {
    DenseHead updated_model;
    Vec delta;
    double delta_norm = 0.0;
    // max_j |y'(j) - d(j)| over the s' constraint samples, true forward pass.
    double constraint_residual = 0.0;
    // Same, measured against the clamped targets.
    double clamped_residual = 0.0;
    double old_accuracy_before = 0.0;
    double old_accuracy_after = 0.0;
    // Accuracy on the s' constraint samples after the update.
    double new_accuracy = 0.0;
    std::vector<double> centroid_drift;
    std::vector<bool> exemplar_self_assigned;
    std::size_t augmented_size = 0;
    std::size_t passes = 0;
    std::size_t projection_iterations = 0;
    bool projection_converged = true;
    std::vector<std::string> warnings;
};

// Single linearized solve: least-norm solution of V dW = v refined by
// gradient projection on 0.5 ||dW||^2 + lambda * mean_i (J_old,i dW)^2.
// With old_jacobian empty (or lambda = 0) the least-norm point is returned.
struct LinearizedSolve {
    Vec delta;
    std::size_t iterations = 0;
    bool converged = true;
    double max_constraint_violation = 0.0;
};
LinearizedSolve solve_linearized(const Mat& v_matrix, std::span<const double> rhs, const Mat& old_jacobian, double lambda,
                                 std::span<const double> start, const RetrainOptions& options);

// Throws SingularSystem if the constraint rows are dependent and
// LinearizationBreakdown if the final residual against the imposed targets
// exceeds options.breakdown_threshold.
RetrainResult solve_retrain(const RetrainProblem& problem, const RetrainOptions& options = {});

// Re-extracts latents of `test` with the updated head and assigns them to the
// original atlas.
Assignment evaluate_drift(const RetrainResult& result, const CentroidAtlas& atlas, const Dataset& test);

// Comparator: plain MSE fine-tuning of a copy of the base model on the
// augmented set for the base config's epoch count.
DenseHead naive_finetune(const RetrainProblem& problem);

}  // namespace latent
