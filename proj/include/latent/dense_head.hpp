#pragma once

// Fully-connected prediction head over precomputed backbone features:
// ReLU hidden layers followed by a single sigmoid output unit. The last
// hidden layer's activations are the latent vectors that the atlas clusters.
//
// Parameters are stored in one contiguous vector, layer by layer, each layer
// as its row-major weight matrix (out x in) followed by its bias vector.
// Gradients, retraining increments and finite-difference probes all use
// this same flat layout.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "latent/dataset.hpp"
#include "latent/numerics.hpp"

namespace latent {

struct HeadConfig {
    std::size_t input_dim = 0;
    // Last entry is the latent dimension.
    std::vector<std::size_t> hidden_dims;
    std::uint64_t seed = 0;
    double learning_rate = 0.05;
    std::size_t epochs = 50;
    std::size_t batch_size = 32;

    void validate() const;
    std::size_t latent_dim() const { return hidden_dims.empty() ? 0 : hidden_dims.back(); }

    friend bool operator==(const HeadConfig&, const HeadConfig&) = default;
};

struct LayerShape {
    std::size_t inputs = 0;
    std::size_t outputs = 0;
    std::size_t weight_offset = 0;
    std::size_t bias_offset = 0;

    friend bool operator==(const LayerShape&, const LayerShape&) = default;
};

struct ForwardResult {
    double output = 0.0;
    Vec latent;
};

// Everything backpropagation needs from one forward pass.
struct ForwardTrace {
    // activations[0] is the input; activations[i] is hidden layer i post-ReLU.
    std::vector<Vec> activations;
    // Hidden-layer pre-activations, one per hidden layer.
    std::vector<Vec> preactivations;
    double output_preactivation = 0.0;
    double output = 0.0;

    std::span<const double> latent() const { return activations.back(); }
};

class DenseHead {
public:
    // Glorot-uniform weights seeded from config.seed, zero biases.
    explicit DenseHead(HeadConfig config);
    // Explicit parameters in the flat layout described above.
    DenseHead(HeadConfig config, Vec parameters);

    static DenseHead zeros(HeadConfig config);

    const HeadConfig& config() const noexcept { return config_; }
    std::size_t input_dim() const noexcept { return config_.input_dim; }
    std::size_t latent_dim() const noexcept { return config_.latent_dim(); }
    // Hidden layers plus the output layer.
    std::size_t layer_count() const noexcept { return shapes_.size(); }
    const LayerShape& shape(std::size_t layer) const { return shapes_.at(layer); }

    std::size_t parameter_count() const noexcept { return params_.size(); }
    std::span<const double> parameters() const noexcept { return params_; }
    std::span<double> parameters() noexcept { return params_; }

    std::span<const double> weight_row(std::size_t layer, std::size_t row) const;
    std::span<const double> biases(std::size_t layer) const;

    // Throws DimensionMismatch unless x has input_dim entries.
    ForwardResult forward(std::span<const double> x) const;
    ForwardTrace trace(std::span<const double> x) const;

    // Adds to grad (flat layout) the gradient of a loss L with respect to all
    // parameters, given dL/dy and an optional extra dL/dlatent term.
    void accumulate_gradient(const ForwardTrace& trace, double d_output, std::span<const double> d_latent,
                             std::span<double> grad) const;
    // Same, given dL/dz for the output pre-activation z instead of dL/dy.
    void accumulate_logit_gradient(const ForwardTrace& trace, double d_logit, std::span<const double> d_latent,
                                   std::span<double> grad) const;

    friend bool operator==(const DenseHead&, const DenseHead&) = default;

private:
    void build_shapes();

    HeadConfig config_;
    std::vector<LayerShape> shapes_;
    Vec params_;
};

struct EpochLoss {
    double e1 = 0.0;
    double e2 = 0.0;
    double total = 0.0;
};

struct TrainReport {
    // Entry 0 is the loss before training, entry e the loss after epoch e.
    std::vector<EpochLoss> history;
    double final_accuracy = 0.0;

    double initial_loss() const { return history.front().total; }
    double final_loss() const { return history.back().total; }
};

// Mean squared error (1/n) sum (d - y)^2 over the dataset.
double mse_loss(const DenseHead& model, const Dataset& data);
double accuracy(const DenseHead& model, const Dataset& data);
// Full-batch gradient of mse_loss in the flat parameter layout.
Vec mse_gradient(const DenseHead& model, const Dataset& data);

// Mini-batch gradient descent on the MSE, samples reshuffled each epoch from
// a stream derived from config.seed. Throws NonFiniteLoss if the loss
// diverges and DimensionMismatch on feature-size errors.
TrainReport train_mse(DenseHead& model, const Dataset& data);

LatentSet extract_latents(const DenseHead& model, const Dataset& data);

// Largest per-parameter disagreement between two gradients. Entries where
// both magnitudes are below 1e-6 are scored by absolute difference scaled so
// that an absolute error of 1e-8 counts as 1e-5; all others by relative
// error |a - n| / max(|a|, |n|).
double gradient_discrepancy(std::span<const double> analytic, std::span<const double> numeric);

// Compares mse_gradient against central finite differences of mse_loss over
// every parameter. eps must lie in (0, 1e-2].
double grad_check(const DenseHead& model, const Dataset& data, double eps);

}  // namespace latent
