#pragma once

// Training a reduced-modality head whose latents are attracted to the
// centroid atlas of the full-modality head.
//
// For a latent r and centroids u(1..k): G(i) = ||u(i) - r||^2,
// f = softmax over i of G, and the per-sample attraction loss is
// sum_i (z(i) - [1 - f(i)])^2 with z the one-hot nearest (same-class)
// centroid. E2 averages this over k and the n samples, and the trained
// criterion is E_new = eta * E1 + (1 - eta) * E2 with E1 the output MSE.

#include <cstddef>
#include <span>
#include <vector>

#include "latent/dataset.hpp"
#include "latent/dense_head.hpp"
#include "latent/latent_atlas.hpp"

namespace latent {

struct AdaptConfig {
    double eta = 0.5;
    CentroidAtlas atlas;
    bool class_constrained = true;

    // InvalidArgument unless 0 <= eta <= 1; DimensionMismatch unless the
    // atlas dimension equals latent_dim.
    void validate(std::size_t latent_dim) const;
};

// k x n one-hot matrix stored as the selected row of each column.
class AssignmentMatrix {
public:
    AssignmentMatrix(std::size_t k, std::vector<std::size_t> assigned);

    std::size_t k() const noexcept { return k_; }
    std::size_t n() const noexcept { return assigned_.size(); }
    std::size_t assigned(std::size_t column) const { return assigned_.at(column); }
    const std::vector<std::size_t>& columns() const noexcept { return assigned_; }
    int operator()(std::size_t i, std::size_t j) const { return assigned_.at(j) == i ? 1 : 0; }

private:
    std::size_t k_;
    std::vector<std::size_t> assigned_;
};

// Nearest centroid per latent, restricted to centroids of the sample's class
// when class_constrained. Ties go to the lowest index. Throws
// NoEligibleCentroid if no centroid carries a sample's class and
// DimensionMismatch on dimension errors.
AssignmentMatrix compute_z(const CentroidAtlas& atlas, const LatentSet& latents, bool class_constrained);

// Unnormalized per-sample term sum_i (z(i) - [1 - f(i)])^2. When grad is
// non-empty, writes its gradient with respect to r there.
double attraction_term(const std::vector<Vec>& centroids, std::span<const double> r, std::size_t assigned,
                       std::span<double> grad = {});

// E2 = (1 / (k n)) sum_j attraction_term(j); 0 for an empty set.
double loss_e2(const CentroidAtlas& atlas, const LatentSet& latents, const AssignmentMatrix& z);

// E1, E2 and E_new of the model on the dataset at a fixed assignment.
EpochLoss adapted_loss(const DenseHead& model, const Dataset& data, const AdaptConfig& config, const AssignmentMatrix& z);
// Full-batch gradient of E_new at a fixed assignment (flat layout).
Vec adapted_gradient(const DenseHead& model, const Dataset& data, const AdaptConfig& config, const AssignmentMatrix& z);

// Mini-batch descent on E_new using the model's HeadConfig hyperparameters;
// the assignment is recomputed from the current latents at the start of
// every epoch. With eta = 1 this performs exactly the updates of train_mse.
TrainReport train_adapted(DenseHead& model, const Dataset& data, const AdaptConfig& config);

// gradient_discrepancy between adapted_gradient and central differences of
// E_new with z frozen at the model's current latents.
double grad_check_adapt(const DenseHead& model, const Dataset& data, const AdaptConfig& config, double eps);

}  // namespace latent
