#include "latent/dense_head.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "latent/error.hpp"
#include "latent/kernels/kernels.hpp"
#include "latent/rng.hpp"
#include "training.hpp"

namespace latent {

namespace {

double sigmoid(double z) noexcept {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

}  // namespace

void HeadConfig::validate() const {
    require(input_dim >= 1, ErrorKind::InvalidArgument, "head config: input_dim must be positive");
    require(!hidden_dims.empty(), ErrorKind::InvalidArgument, "head config: hidden_dims must be non-empty");
    for (std::size_t h : hidden_dims) require(h >= 1, ErrorKind::InvalidArgument, "head config: hidden sizes must be positive");
    require(learning_rate > 0.0 && std::isfinite(learning_rate), ErrorKind::InvalidArgument,
            "head config: learning_rate must be positive");
    require(batch_size >= 1, ErrorKind::InvalidArgument, "head config: batch_size must be positive");
}

void DenseHead::build_shapes() {
    config_.validate();
    shapes_.clear();
    std::size_t offset = 0;
    std::size_t inputs = config_.input_dim;
    auto add = [&](std::size_t outputs) {
        LayerShape s{inputs, outputs, offset, offset + inputs * outputs};
        offset = s.bias_offset + outputs;
        shapes_.push_back(s);
        inputs = outputs;
    };
    for (std::size_t h : config_.hidden_dims) add(h);
    add(1);
    params_.assign(offset, 0.0);
}

DenseHead::DenseHead(HeadConfig config) : config_(std::move(config)) {
    build_shapes();
    Rng rng(derive_seed(config_.seed, Stream::WeightInit));
    for (const LayerShape& s : shapes_) {
        const double limit = std::sqrt(6.0 / static_cast<double>(s.inputs + s.outputs));
        for (std::size_t i = 0; i < s.inputs * s.outputs; ++i) params_[s.weight_offset + i] = rng.uniform(-limit, limit);
    }
}

DenseHead::DenseHead(HeadConfig config, Vec parameters) : config_(std::move(config)) {
    build_shapes();
    require(parameters.size() == params_.size(), ErrorKind::DimensionMismatch,
            "model has " + std::to_string(params_.size()) + " parameters, got " + std::to_string(parameters.size()));
    require(all_finite(parameters), ErrorKind::InvalidArgument, "model parameters must be finite");
    params_ = std::move(parameters);
}

DenseHead DenseHead::zeros(HeadConfig config) {
    DenseHead head(std::move(config));
    std::fill(head.params_.begin(), head.params_.end(), 0.0);
    return head;
}

std::span<const double> DenseHead::weight_row(std::size_t layer, std::size_t row) const {
    const LayerShape& s = shapes_.at(layer);
    return {params_.data() + s.weight_offset + row * s.inputs, s.inputs};
}

std::span<const double> DenseHead::biases(std::size_t layer) const {
    const LayerShape& s = shapes_.at(layer);
    return {params_.data() + s.bias_offset, s.outputs};
}

ForwardTrace DenseHead::trace(std::span<const double> x) const {
    require(x.size() == config_.input_dim, ErrorKind::DimensionMismatch,
            "input has " + std::to_string(x.size()) + " features, model expects " + std::to_string(config_.input_dim));
    ForwardTrace t;
    const std::size_t hidden = shapes_.size() - 1;
    t.activations.reserve(hidden + 1);
    t.preactivations.reserve(hidden);
    t.activations.emplace_back(x.begin(), x.end());
    for (std::size_t l = 0; l < hidden; ++l) {
        const LayerShape& s = shapes_[l];
        const auto b = biases(l);
        Vec z(s.outputs);
        Vec a(s.outputs);
        for (std::size_t r = 0; r < s.outputs; ++r) {
            z[r] = kernels::dot(weight_row(l, r), t.activations.back()) + b[r];
            a[r] = z[r] > 0.0 ? z[r] : 0.0;
        }
        t.preactivations.push_back(std::move(z));
        t.activations.push_back(std::move(a));
    }
    t.output_preactivation = kernels::dot(weight_row(hidden, 0), t.activations.back()) + biases(hidden)[0];
    t.output = sigmoid(t.output_preactivation);
    return t;
}

ForwardResult DenseHead::forward(std::span<const double> x) const {
    ForwardTrace t = trace(x);
    return {t.output, std::move(t.activations.back())};
}

void DenseHead::accumulate_gradient(const ForwardTrace& t, double d_output, std::span<const double> d_latent,
                                    std::span<double> grad) const {
    accumulate_logit_gradient(t, d_output * t.output * (1.0 - t.output), d_latent, grad);
}

void DenseHead::accumulate_logit_gradient(const ForwardTrace& t, double dz_out, std::span<const double> d_latent,
                                          std::span<double> grad) const {
    const std::size_t hidden = shapes_.size() - 1;

    const LayerShape& out = shapes_[hidden];
    kernels::axpy(dz_out, t.activations[hidden], grad.subspan(out.weight_offset, out.inputs));
    grad[out.bias_offset] += dz_out;

    // delta = dL/d(post-activation) of the current hidden layer.
    Vec delta(weight_row(hidden, 0).begin(), weight_row(hidden, 0).end());
    for (double& v : delta) v *= dz_out;
    if (!d_latent.empty()) kernels::axpy(1.0, d_latent, delta);

    for (std::size_t l = hidden; l-- > 0;) {
        const LayerShape& s = shapes_[l];
        const Vec& z = t.preactivations[l];
        for (std::size_t r = 0; r < s.outputs; ++r) delta[r] = z[r] > 0.0 ? delta[r] : 0.0;
        const Vec& input = t.activations[l];
        for (std::size_t r = 0; r < s.outputs; ++r) {
            if (delta[r] == 0.0) continue;
            kernels::axpy(delta[r], input, grad.subspan(s.weight_offset + r * s.inputs, s.inputs));
            grad[s.bias_offset + r] += delta[r];
        }
        if (l == 0) break;
        Vec previous(s.inputs, 0.0);
        for (std::size_t r = 0; r < s.outputs; ++r) {
            if (delta[r] != 0.0) kernels::axpy(delta[r], weight_row(l, r), previous);
        }
        delta = std::move(previous);
    }
}

double mse_loss(const DenseHead& model, const Dataset& data) {
    if (data.empty()) return 0.0;
    double total = 0.0;
    for (const Sample& s : data.samples) {
        const double e = static_cast<double>(s.label) - model.forward(s.features).output;
        total += e * e;
    }
    return total / static_cast<double>(data.size());
}

double accuracy(const DenseHead& model, const Dataset& data) {
    if (data.empty()) return 0.0;
    std::size_t correct = 0;
    for (const Sample& s : data.samples) correct += predict_label(model.forward(s.features).output) == s.label ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

Vec mse_gradient(const DenseHead& model, const Dataset& data) {
    Vec grad(model.parameter_count(), 0.0);
    if (data.empty()) return grad;
    const double n = static_cast<double>(data.size());
    for (const Sample& s : data.samples) {
        const ForwardTrace t = model.trace(s.features);
        model.accumulate_gradient(t, -2.0 * (static_cast<double>(s.label) - t.output) / n, {}, grad);
    }
    return grad;
}

namespace detail {

TrainReport run_minibatch_sgd(DenseHead& model, const Dataset& data, const TrainingHooks& hooks) {
    require(!data.empty(), ErrorKind::InvalidArgument, "training dataset is empty");
    data.validate(model.input_dim());
    const HeadConfig& config = model.config();

    auto evaluate = [&] {
        EpochLoss loss = hooks.evaluate ? hooks.evaluate(model) : EpochLoss{};
        if (!hooks.evaluate) {
            loss.e1 = mse_loss(model, data);
            loss.total = loss.e1;
        }
        if (!std::isfinite(loss.total) || !std::isfinite(loss.e1) || !std::isfinite(loss.e2)) {
            fail(ErrorKind::NonFiniteLoss, "training loss became non-finite; lower the learning rate");
        }
        return loss;
    };

    TrainReport report;
    Rng rng(derive_seed(config.seed, Stream::Shuffle));
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Vec grad(model.parameter_count());
    Vec d_latent(model.latent_dim());

    if (hooks.on_epoch_start && config.epochs > 0) hooks.on_epoch_start(model);
    report.history.push_back(evaluate());

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        if (epoch > 0 && hooks.on_epoch_start) hooks.on_epoch_start(model);
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            const double batch = static_cast<double>(end - start);
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t b = start; b < end; ++b) {
                const Sample& s = data.samples[order[b]];
                const ForwardTrace t = model.trace(s.features);
                const double d_output = hooks.e1_weight * (-2.0 * (static_cast<double>(s.label) - t.output) / batch);
                if (hooks.latent_gradient) {
                    std::fill(d_latent.begin(), d_latent.end(), 0.0);
                    hooks.latent_gradient(order[b], t, 1.0 / batch, d_latent);
                    model.accumulate_gradient(t, d_output, d_latent, grad);
                } else {
                    model.accumulate_gradient(t, d_output, {}, grad);
                }
            }
            kernels::axpy(-config.learning_rate, grad, model.parameters());
        }
        report.history.push_back(evaluate());
    }
    report.final_accuracy = accuracy(model, data);
    return report;
}

}  // namespace detail

TrainReport train_mse(DenseHead& model, const Dataset& data) { return detail::run_minibatch_sgd(model, data, {}); }

LatentSet extract_latents(const DenseHead& model, const Dataset& data) {
    LatentSet out;
    out.vectors.reserve(data.size());
    out.labels.reserve(data.size());
    out.subject_ids.reserve(data.size());
    for (const Sample& s : data.samples) {
        out.vectors.push_back(model.forward(s.features).latent);
        out.labels.push_back(s.label);
        out.subject_ids.push_back(s.subject_id);
    }
    return out;
}

double gradient_discrepancy(std::span<const double> analytic, std::span<const double> numeric) {
    require(analytic.size() == numeric.size(), ErrorKind::DimensionMismatch, "gradient lengths differ");
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double a = std::abs(analytic[i]);
        const double n = std::abs(numeric[i]);
        const double diff = std::abs(analytic[i] - numeric[i]);
        const double score = (a < 1e-6 && n < 1e-6) ? diff * (1e-5 / 1e-8) : diff / std::max(a, n);
        worst = std::max(worst, score);
    }
    return worst;
}

double grad_check(const DenseHead& model, const Dataset& data, double eps) {
    require(eps > 0.0 && eps <= 1e-2, ErrorKind::InvalidArgument, "grad_check: eps must lie in (0, 1e-2]");
    data.validate(model.input_dim());
    const Vec analytic = mse_gradient(model, data);
    DenseHead probe = model;
    Vec numeric(model.parameter_count());
    for (std::size_t i = 0; i < numeric.size(); ++i) {
        const double original = probe.parameters()[i];
        probe.parameters()[i] = original + eps;
        const double plus = mse_loss(probe, data);
        probe.parameters()[i] = original - eps;
        const double minus = mse_loss(probe, data);
        probe.parameters()[i] = original;
        numeric[i] = (plus - minus) / (2.0 * eps);
    }
    return gradient_discrepancy(analytic, numeric);
}

}  // namespace latent
