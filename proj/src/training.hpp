#pragma once

#include <functional>
#include <span>

#include "latent/dense_head.hpp"

namespace latent::detail {

// Shared mini-batch loop behind train_mse and train_adapted. The MSE term is
// always present with weight e1_weight; an optional hook adds a gradient
// with respect to the latent vector of each sample.
struct TrainingHooks {
    double e1_weight = 1.0;
    std::function<void(const DenseHead&)> on_epoch_start;
    // Adds scale * dL_j/dlatent for sample `index` into d_latent.
    std::function<void(std::size_t index, const ForwardTrace& trace, double scale, std::span<double> d_latent)>
        latent_gradient;
    // Loss over the full dataset for the report.
    std::function<EpochLoss(const DenseHead&)> evaluate;
};

TrainReport run_minibatch_sgd(DenseHead& model, const Dataset& data, const TrainingHooks& hooks);

}  // namespace latent::detail
