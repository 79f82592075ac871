#include "latent/retrain.hpp"

#include <algorithm>
#include <cmath>

#include "latent/error.hpp"
#include "latent/kernels/kernels.hpp"
#include "latent/parallel.hpp"

namespace latent {

namespace {

// Clamped residual below which another linearization pass is pointless.
constexpr double kPassTolerance = 1e-4;
// Smallest fraction of a pass's step tried before giving up.
constexpr double kMinPassStep = 1.0 / 1024.0;

// The clamped target, except that an output already past the clamp on the
// correct side is its own target: pulling a confident correct output back to
// the clamp would spend weight change on nothing. Exemplars are anchors for
// the atlas, so a correctly classified exemplar keeps its current output.
double clamp_target(int label, double clamp, double output, bool exemplar) {
    if (exemplar && predict_label(output) == label) return output;
    return label == 1 ? std::max(1.0 - clamp, output) : std::min(clamp, output);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace

Dataset RetrainProblem::augmented() const {
    Dataset out;
    out.modality = new_data.modality;
    out.split = Split::Train;
    out.samples = new_data.samples;
    out.samples.insert(out.samples.end(), centroid_exemplars.samples.begin(), centroid_exemplars.samples.end());
    return out;
}

RetrainProblem make_retrain_problem(DenseHead base_model, Dataset new_data, Dataset old_data, CentroidAtlas atlas,
                                    double lambda) {
    atlas.validate();
    RetrainProblem p{.base_model = std::move(base_model),
                     .new_data = std::move(new_data),
                     .centroid_exemplars = {},
                     .lambda = lambda,
                     .old_data = std::move(old_data),
                     .atlas = std::move(atlas)};
    p.centroid_exemplars.modality = p.old_data.modality;
    for (std::size_t idx : p.atlas.exemplar_indices) {
        require(idx < p.old_data.size(), ErrorKind::IndexOutOfRange,
                "atlas exemplar index " + std::to_string(idx) + " outside the old dataset");
        p.centroid_exemplars.samples.push_back(p.old_data.samples[idx]);
    }
    return p;
}

void RetrainOptions::validate() const {
    require(clamp > 0.0 && clamp < 0.5, ErrorKind::InvalidArgument, "retrain: clamp must lie in (0, 0.5)");
    require(tol > 0.0, ErrorKind::InvalidArgument, "retrain: tol must be positive");
    require(step > 0.0, ErrorKind::InvalidArgument, "retrain: step must be positive");
    require(max_passes >= 1, ErrorKind::InvalidArgument, "retrain: max_passes must be at least 1");
    require(linearization_tol > 0.0 && breakdown_threshold >= linearization_tol, ErrorKind::InvalidArgument,
            "retrain: need 0 < linearization_tol <= breakdown_threshold");
}

Mat output_jacobian(const DenseHead& model, const Dataset& data) {
    data.validate(model.input_dim());
    Mat j(data.size(), model.parameter_count());
    parallel_for(data.size(), [&](std::size_t r) {
        const ForwardTrace t = model.trace(data.samples[r].features);
        model.accumulate_gradient(t, 1.0, {}, j.row(r));
    });
    return j;
}

LinearSystem build_linear_system(const RetrainProblem& problem, double clamp) {
    const Dataset aug = problem.augmented();
    require(!aug.empty(), ErrorKind::InvalidArgument, "retrain: augmented set is empty");
    aug.validate(problem.base_model.input_dim());
    LinearSystem sys;
    const auto params = problem.base_model.parameters();
    if (std::all_of(params.begin(), params.end(), [](double w) { return w == 0.0; })) {
        sys.warnings.emplace_back("ModelNotTrained: base model weights are all zero");
    }
    sys.jacobian = output_jacobian(problem.base_model, aug);
    for (std::size_t j = 0; j < aug.size(); ++j) {
        const Sample& s = aug.samples[j];
        const double y = problem.base_model.forward(s.features).output;
        const double d = clamp_target(s.label, clamp, y, j >= problem.new_data.size());
        sys.outputs.push_back(y);
        sys.targets.push_back(d);
        sys.rhs.push_back(d - y);
    }
    return sys;
}

LinearizedSolve solve_linearized(const Mat& v_matrix, std::span<const double> rhs, const Mat& old_jacobian, double lambda,
                                 std::span<const double> start, const RetrainOptions& options) {
    require(start.size() == v_matrix.cols(), ErrorKind::DimensionMismatch, "solve_linearized: start length mismatch");
    const AffineConstraint constraint(v_matrix, Vec(rhs.begin(), rhs.end()));
    Vec x0 = constraint.restore(start);
    if (constraint.residual(x0) > options.tol) x0 = constraint.restore(x0);
    LinearizedSolve out;
    out.max_constraint_violation = constraint.residual(x0);
    if (out.max_constraint_violation > options.tol) {
        fail(ErrorKind::SingularSystem, "retrain: constraint system too ill-conditioned to satisfy tol");
    }
    if (lambda == 0.0 || old_jacobian.rows() == 0) {
        // The minimum-norm objective is already optimal at x0 when starting from zero.
        ProjectionResult r = gradient_projection(
            Objective{[](std::span<const double> x) { return 0.5 * kernels::dot(x, x); },
                      [](std::span<const double> x) { return Vec(x.begin(), x.end()); }},
            constraint, x0, {options.step, options.max_iter, options.tol, 30});
        out.delta = std::move(r.x);
        out.iterations = r.iterations;
        out.converged = r.converged;
        out.max_constraint_violation = std::max(out.max_constraint_violation, r.max_constraint_violation);
        return out;
    }
    require(old_jacobian.cols() == v_matrix.cols(), ErrorKind::DimensionMismatch, "solve_linearized: old Jacobian width");
    const double weight = lambda / static_cast<double>(old_jacobian.rows());
    Objective objective{
        [&](std::span<const double> x) {
            const Vec jx = multiply(old_jacobian, x);
            return 0.5 * kernels::dot(x, x) + weight * kernels::dot(jx, jx);
        },
        [&](std::span<const double> x) {
            Vec g(x.begin(), x.end());
            const Vec jx = multiply(old_jacobian, x);
            kernels::axpy(2.0 * weight, multiply_transposed(old_jacobian, jx), g);
            return g;
        }};
    ProjectionResult r = gradient_projection(objective, constraint, x0, {options.step, options.max_iter, options.tol, 30});
    out.delta = std::move(r.x);
    out.iterations = r.iterations;
    out.converged = r.converged;
    out.max_constraint_violation = std::max(out.max_constraint_violation, r.max_constraint_violation);
    return out;
}

RetrainResult solve_retrain(const RetrainProblem& problem, const RetrainOptions& options) {
    options.validate();
    require(problem.lambda >= 0.0 && std::isfinite(problem.lambda), ErrorKind::InvalidArgument,
            "retrain: lambda must be non-negative");
    const DenseHead& base = problem.base_model;
    const Dataset aug = problem.augmented();
    require(!aug.empty(), ErrorKind::InvalidArgument, "retrain: augmented set is empty");
    aug.validate(base.input_dim());
    problem.old_data.validate(base.input_dim());
    require(problem.centroid_exemplars.size() == problem.atlas.k(), ErrorKind::InvalidArgument,
            "retrain: need one exemplar per centroid");

    RetrainResult result{.updated_model = base, .delta = Vec(base.parameter_count(), 0.0)};
    result.augmented_size = problem.augmented_size();
    result.old_accuracy_before = accuracy(base, problem.old_data);

    // Passes work on the output pre-activation z. Since the sigmoid is
    // monotone, y' = t is the same condition as z' = logit(t), and z is far
    // closer to linear in the weights than y once outputs saturate.
    Vec targets;
    Vec logit_targets;
    for (std::size_t j = 0; j < aug.size(); ++j) {
        const Sample& s = aug.samples[j];
        const ForwardTrace t = base.trace(s.features);
        const bool exemplar = j >= problem.new_data.size();
        targets.push_back(clamp_target(s.label, options.clamp, t.output, exemplar));
        double z = t.output_preactivation;
        if (!(exemplar && predict_label(t.output) == s.label)) {
            z = s.label == 1 ? std::max(logit(1.0 - options.clamp), z) : std::min(logit(options.clamp), z);
        }
        logit_targets.push_back(z);
    }
    const Mat old_jacobian = problem.lambda > 0.0 ? output_jacobian(base, problem.old_data) : Mat();

    auto model_at = [&](const Vec& delta) {
        DenseHead m = base;
        kernels::axpy(1.0, delta, m.parameters());
        return m;
    };
    auto clamped_residual = [&](const DenseHead& m) {
        double worst = 0.0;
        for (std::size_t j = 0; j < aug.size(); ++j) {
            worst = std::max(worst, std::abs(m.forward(aug.samples[j].features).output - targets[j]));
        }
        return worst;
    };

    // Sum of squared logit gaps; a pass only moves as far along its solution
    // as keeps this decreasing, which stops full steps from oscillating
    // across ReLU kinks.
    auto merit = [&](const DenseHead& m) {
        double total = 0.0;
        for (std::size_t j = 0; j < aug.size(); ++j) {
            const double e = m.trace(aug.samples[j].features).output_preactivation - logit_targets[j];
            total += e * e;
        }
        return total;
    };

    double current_merit = merit(base);
    for (std::size_t pass = 0; pass < options.max_passes; ++pass) {
        const DenseHead current = model_at(result.delta);
        if (clamped_residual(current) <= kPassTolerance) break;
        // Constraint on the total increment: J_t (dW - dW_t) = z* - z_t.
        Mat v_matrix(aug.size(), base.parameter_count());
        Vec gap(aug.size());
        parallel_for(aug.size(), [&](std::size_t j) {
            const ForwardTrace t = current.trace(aug.samples[j].features);
            current.accumulate_logit_gradient(t, 1.0, {}, v_matrix.row(j));
            gap[j] = logit_targets[j] - t.output_preactivation;
        });
        Vec rhs = multiply(v_matrix, result.delta);
        kernels::axpy(1.0, gap, rhs);
        LinearizedSolve sol;
        try {
            sol = solve_linearized(v_matrix, rhs, old_jacobian, problem.lambda, result.delta, options);
        } catch (const Error& e) {
            // Rows can become dependent after an update (e.g. two samples whose
            // latents all went to zero); keep the last good increment.
            if (pass == 0 || e.kind() != ErrorKind::SingularSystem) throw;
            result.warnings.emplace_back("pass " + std::to_string(pass + 1) +
                                         ": constraint rows became dependent; stopped refining");
            break;
        }
        result.projection_iterations += sol.iterations;
        result.projection_converged = result.projection_converged && sol.converged;
        result.passes = pass + 1;

        Vec step = sol.delta;
        kernels::axpy(-1.0, result.delta, step);
        bool moved = false;
        for (double alpha = 1.0; alpha >= kMinPassStep; alpha *= 0.5) {
            Vec trial = result.delta;
            kernels::axpy(alpha, step, trial);
            const double m = merit(model_at(trial));
            if (m < current_merit) {
                result.delta = std::move(trial);
                current_merit = m;
                moved = true;
                break;
            }
        }
        if (!moved) break;
    }

    result.updated_model = model_at(result.delta);
    result.delta_norm = norm(result.delta);
    const DenseHead& updated = result.updated_model;
    std::size_t correct = 0;
    for (std::size_t j = 0; j < aug.size(); ++j) {
        const double y = updated.forward(aug.samples[j].features).output;
        result.constraint_residual = std::max(result.constraint_residual, std::abs(y - aug.samples[j].label));
        result.clamped_residual = std::max(result.clamped_residual, std::abs(y - targets[j]));
        correct += predict_label(y) == aug.samples[j].label ? 1 : 0;
    }
    result.new_accuracy = static_cast<double>(correct) / static_cast<double>(aug.size());
    result.old_accuracy_after = accuracy(updated, problem.old_data);

    for (std::size_t i = 0; i < problem.centroid_exemplars.size(); ++i) {
        const Vec latent = updated.forward(problem.centroid_exemplars.samples[i].features).latent;
        result.centroid_drift.push_back(std::sqrt(kernels::squared_distance(latent, problem.atlas.centroids[i])));
        result.exemplar_self_assigned.push_back(nearest_centroid(problem.atlas.centroids, latent) == i);
    }

    if (!result.projection_converged) {
        result.warnings.emplace_back("NonConvergence: gradient projection hit max_iter before the tolerance");
    }
    if (result.constraint_residual > options.linearization_tol) {
        result.warnings.emplace_back("constraint residual " + std::to_string(result.constraint_residual) +
                                     " exceeds the linearization tolerance");
    }
    // Breakdown is judged against the targets actually imposed: an anchored
    // exemplar may sit well inside (0, 1) and still be met exactly.
    if (result.clamped_residual > options.breakdown_threshold) {
        fail(ErrorKind::LinearizationBreakdown,
             "retrain: post-update residual " + std::to_string(result.clamped_residual) +
                 " exceeds " + std::to_string(options.breakdown_threshold) +
                 "; reduce the new batch or fine-tune the base model first");
    }
    return result;
}

Assignment evaluate_drift(const RetrainResult& result, const CentroidAtlas& atlas, const Dataset& test) {
    return assign_nearest(atlas, extract_latents(result.updated_model, test));
}

DenseHead naive_finetune(const RetrainProblem& problem) {
    DenseHead model = problem.base_model;
    const Dataset aug = problem.augmented();
    train_mse(model, aug);
    return model;
}

}  // namespace latent
