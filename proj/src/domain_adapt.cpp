#include "latent/domain_adapt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "latent/error.hpp"
#include "latent/kernels/kernels.hpp"
#include "training.hpp"

namespace latent {

void AdaptConfig::validate(std::size_t latent_dim) const {
    require(eta >= 0.0 && eta <= 1.0, ErrorKind::InvalidArgument, "adapt: eta must lie in [0, 1]");
    atlas.validate();
    require(atlas.dim() == latent_dim, ErrorKind::DimensionMismatch,
            "adapt: atlas dim " + std::to_string(atlas.dim()) + " != model latent dim " + std::to_string(latent_dim));
}

AssignmentMatrix::AssignmentMatrix(std::size_t k, std::vector<std::size_t> assigned) : k_(k), assigned_(std::move(assigned)) {
    for (std::size_t a : assigned_) require(a < k_, ErrorKind::IndexOutOfRange, "assignment row out of range");
}

AssignmentMatrix compute_z(const CentroidAtlas& atlas, const LatentSet& latents, bool class_constrained) {
    require(atlas.k() >= 1, ErrorKind::InvalidArgument, "compute_z: atlas is empty");
    require(latents.labels.size() == latents.size(), ErrorKind::InvalidArgument, "compute_z: latent labels missing");
    std::vector<std::size_t> assigned(latents.size());
    for (std::size_t j = 0; j < latents.size(); ++j) {
        const Vec& r = latents.vectors[j];
        require(r.size() == atlas.dim(), ErrorKind::DimensionMismatch, "compute_z: latent/atlas dimension mismatch");
        std::optional<std::size_t> best;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < atlas.k(); ++i) {
            if (class_constrained && atlas.class_labels[i] != latents.labels[j]) continue;
            const double d = kernels::squared_distance(atlas.centroids[i], r);
            if (!best || d < best_d) {
                best = i;
                best_d = d;
            }
        }
        if (!best) {
            fail(ErrorKind::NoEligibleCentroid,
                 "compute_z: no centroid carries class " + std::to_string(latents.labels[j]) + " (sample " + std::to_string(j) + ")");
        }
        assigned[j] = *best;
    }
    return AssignmentMatrix(atlas.k(), std::move(assigned));
}

double attraction_term(const std::vector<Vec>& centroids, std::span<const double> r, std::size_t assigned,
                       std::span<double> grad) {
    const std::size_t k = centroids.size();
    Vec g(k);
    for (std::size_t i = 0; i < k; ++i) g[i] = kernels::squared_distance(centroids[i], r);
    const double top = *std::max_element(g.begin(), g.end());
    Vec f(k);
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        f[i] = std::exp(g[i] - top);
        sum += f[i];
    }
    for (double& v : f) v /= sum;

    double loss = 0.0;
    Vec a(k);
    for (std::size_t i = 0; i < k; ++i) {
        const double e = (i == assigned ? 1.0 : 0.0) - 1.0 + f[i];
        loss += e * e;
        a[i] = 2.0 * e;
    }
    if (grad.empty()) return loss;

    // dL/dG_m = f_m (a_m - sum_i a_i f_i);  dG_m/dr = 2 (r - u_m)
    const double mean_a = kernels::dot(a, f);
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t m = 0; m < k; ++m) {
        const double coeff = 2.0 * f[m] * (a[m] - mean_a);
        if (coeff == 0.0) continue;
        kernels::axpy(coeff, r, grad);
        kernels::axpy(-coeff, centroids[m], grad);
    }
    return loss;
}

double loss_e2(const CentroidAtlas& atlas, const LatentSet& latents, const AssignmentMatrix& z) {
    require(z.n() == latents.size() && z.k() == atlas.k(), ErrorKind::DimensionMismatch, "loss_e2: assignment shape mismatch");
    if (latents.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t j = 0; j < latents.size(); ++j) {
        require(latents.vectors[j].size() == atlas.dim(), ErrorKind::DimensionMismatch, "loss_e2: latent dimension mismatch");
        total += attraction_term(atlas.centroids, latents.vectors[j], z.assigned(j));
    }
    return total / (static_cast<double>(atlas.k()) * static_cast<double>(latents.size()));
}

EpochLoss adapted_loss(const DenseHead& model, const Dataset& data, const AdaptConfig& config, const AssignmentMatrix& z) {
    EpochLoss loss;
    loss.e1 = mse_loss(model, data);
    loss.e2 = loss_e2(config.atlas, extract_latents(model, data), z);
    loss.total = config.eta * loss.e1 + (1.0 - config.eta) * loss.e2;
    return loss;
}

Vec adapted_gradient(const DenseHead& model, const Dataset& data, const AdaptConfig& config, const AssignmentMatrix& z) {
    config.validate(model.latent_dim());
    require(z.n() == data.size(), ErrorKind::DimensionMismatch, "adapted_gradient: assignment does not match dataset");
    Vec grad(model.parameter_count(), 0.0);
    if (data.empty()) return grad;
    const double n = static_cast<double>(data.size());
    const double e2_weight = (1.0 - config.eta) / (static_cast<double>(config.atlas.k()) * n);
    Vec d_latent(model.latent_dim());
    for (std::size_t j = 0; j < data.size(); ++j) {
        const Sample& s = data.samples[j];
        const ForwardTrace t = model.trace(s.features);
        const double d_output = config.eta * (-2.0 * (static_cast<double>(s.label) - t.output) / n);
        if (e2_weight == 0.0) {
            model.accumulate_gradient(t, d_output, {}, grad);
            continue;
        }
        attraction_term(config.atlas.centroids, t.latent(), z.assigned(j), d_latent);
        for (double& v : d_latent) v *= e2_weight;
        model.accumulate_gradient(t, d_output, d_latent, grad);
    }
    return grad;
}

TrainReport train_adapted(DenseHead& model, const Dataset& data, const AdaptConfig& config) {
    config.validate(model.latent_dim());
    std::optional<AssignmentMatrix> z;
    const double e2_scale = (1.0 - config.eta) / static_cast<double>(config.atlas.k());

    detail::TrainingHooks hooks;
    hooks.e1_weight = config.eta;
    hooks.on_epoch_start = [&](const DenseHead& m) {
        z = compute_z(config.atlas, extract_latents(m, data), config.class_constrained);
    };
    if (e2_scale != 0.0) {
        hooks.latent_gradient = [&](std::size_t index, const ForwardTrace& t, double scale, std::span<double> d_latent) {
            Vec g(d_latent.size());
            attraction_term(config.atlas.centroids, t.latent(), z->assigned(index), g);
            kernels::axpy(e2_scale * scale, g, d_latent);
        };
    }
    hooks.evaluate = [&](const DenseHead& m) {
        const AssignmentMatrix current = compute_z(config.atlas, extract_latents(m, data), config.class_constrained);
        return adapted_loss(m, data, config, current);
    };
    return detail::run_minibatch_sgd(model, data, hooks);
}

double grad_check_adapt(const DenseHead& model, const Dataset& data, const AdaptConfig& config, double eps) {
    require(eps > 0.0 && eps <= 1e-2, ErrorKind::InvalidArgument, "grad_check_adapt: eps must lie in (0, 1e-2]");
    config.validate(model.latent_dim());
    data.validate(model.input_dim());
    const AssignmentMatrix z = compute_z(config.atlas, extract_latents(model, data), config.class_constrained);
    const Vec analytic = adapted_gradient(model, data, config, z);
    DenseHead probe = model;
    Vec numeric(model.parameter_count());
    for (std::size_t i = 0; i < numeric.size(); ++i) {
        const double original = probe.parameters()[i];
        probe.parameters()[i] = original + eps;
        const double plus = adapted_loss(probe, data, config, z).total;
        probe.parameters()[i] = original - eps;
        const double minus = adapted_loss(probe, data, config, z).total;
        probe.parameters()[i] = original;
        numeric[i] = (plus - minus) / (2.0 * eps);
    }
    return gradient_discrepancy(analytic, numeric);
}

}  // namespace latent
