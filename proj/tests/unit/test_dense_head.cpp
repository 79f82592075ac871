#include <doctest.h>

#include <cmath>
#include <random>

#include "latent/dense_head.hpp"
#include "latent/error.hpp"
#include "oracles.hpp"

using namespace latent;

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

HeadConfig small_config(std::uint64_t seed = 3) { return HeadConfig{4, {6, 3}, seed, 0.1, 20, 8}; }

}  // namespace

TEST_CASE("layout and Glorot bounds") {
    const DenseHead h(small_config());
    CHECK(h.layer_count() == 3);
    CHECK(h.parameter_count() == (4 * 6 + 6) + (6 * 3 + 3) + (3 + 1));
    CHECK(h.shape(1).weight_offset == 30);
    CHECK(h.shape(1).bias_offset == 48);
    for (std::size_t l = 0; l < h.layer_count(); ++l) {
        const LayerShape& s = h.shape(l);
        const double limit = std::sqrt(6.0 / static_cast<double>(s.inputs + s.outputs));
        for (std::size_t i = 0; i < s.inputs * s.outputs; ++i)
            CHECK(std::abs(h.parameters()[s.weight_offset + i]) <= limit);
        for (double b : h.biases(l)) CHECK(b == 0.0);
    }
    CHECK(DenseHead(small_config()) == h);
    CHECK_FALSE(DenseHead(small_config(4)) == h);
}

TEST_CASE("config validation") {
    CHECK_THROWS_AS(DenseHead(HeadConfig{0, {4}, 1, 0.1, 1, 1}), Error);
    CHECK_THROWS_AS(DenseHead(HeadConfig{3, {}, 1, 0.1, 1, 1}), Error);
    CHECK_THROWS_AS(DenseHead(HeadConfig{3, {4}, 1, 0.1, 1, 0}), Error);
    CHECK_THROWS_AS(DenseHead(HeadConfig{3, {4}, 1, 0.1, 1, 1}, Vec(3, 0.0)), Error);
}

TEST_CASE("hand-computed forward and gradient for a 1-1-1 chain") {
    // x -> relu(w1 x + b1) -> sigmoid(w2 h + b2)
    const HeadConfig cfg{1, {1}, 0, 0.1, 1, 1};
    const double w1 = 0.7, b1 = 0.1, w2 = -1.3, b2 = 0.2, x = 2.0, d = 1.0;
    const DenseHead h(cfg, Vec{w1, b1, w2, b2});
    const double hid = w1 * x + b1;
    const double y = sigmoid(w2 * hid + b2);
    const ForwardResult f = h.forward(Vec{x});
    CHECK(f.output == doctest::Approx(y).epsilon(1e-14));
    CHECK(f.latent[0] == doctest::Approx(hid));

    Dataset data;
    data.samples.push_back(Sample{Vec{x}, 1, "S", Modality::Full});
    const Vec g = mse_gradient(h, data);
    const double dy = -2.0 * (d - y);
    const double dz = dy * y * (1 - y);
    CHECK(g[0] == doctest::Approx(dz * w2 * x));
    CHECK(g[1] == doctest::Approx(dz * w2));
    CHECK(g[2] == doctest::Approx(dz * hid));
    CHECK(g[3] == doctest::Approx(dz));
    CHECK(mse_loss(h, data) == doctest::Approx((d - y) * (d - y)));

    // A negative pre-activation blocks the gradient into the first layer.
    const DenseHead dead(cfg, Vec{-1.0, 0.0, w2, b2});
    const Vec gd = mse_gradient(dead, data);
    CHECK(gd[0] == 0.0);
    CHECK(gd[1] == 0.0);
}

TEST_CASE("logit gradient equals output gradient scaled by y(1-y)") {
    const DenseHead h(small_config());
    const Vec x{0.3, -0.2, 1.1, 0.5};
    const ForwardTrace t = h.trace(x);
    Vec a(h.parameter_count(), 0.0), b(h.parameter_count(), 0.0);
    h.accumulate_gradient(t, 1.0, {}, a);
    h.accumulate_logit_gradient(t, t.output * (1 - t.output), {}, b);
    CHECK(oracle::rel_diff(a, b) < 1e-14);
}

TEST_CASE("analytic gradient matches finite differences") {
    std::mt19937_64 gen(21);
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const Dataset data = oracle::two_blobs(gen, 10, 4, 2.0);
        const DenseHead h = oracle::jittered(DenseHead(HeadConfig{4, {7, 5}, seed, 0.1, 1, 4}), gen);
        CHECK(grad_check(h, data, 1e-5) < 1e-5);
    }
}

TEST_CASE("gradient_discrepancy scoring") {
    CHECK(gradient_discrepancy(Vec{1.0}, Vec{1.0}) == 0.0);
    CHECK(gradient_discrepancy(Vec{1.0}, Vec{1.1}) == doctest::Approx(0.1 / 1.1));
    CHECK(gradient_discrepancy(Vec{0.0}, Vec{1e-8}) == doctest::Approx(1e-5));
}

TEST_CASE("training") {
    std::mt19937_64 gen(9);
    const Dataset data = oracle::two_blobs(gen, 100, 5, 4.0);

    SUBCASE("zero epochs leave weights untouched") {
        HeadConfig cfg{5, {8, 4}, 2, 0.1, 0, 16};
        DenseHead h(cfg);
        const DenseHead before = h;
        const TrainReport r = train_mse(h, data);
        CHECK(h == before);
        CHECK(r.history.size() == 1);
    }
    SUBCASE("loss decreases and separable data is learned") {
        DenseHead h(HeadConfig{5, {8, 4}, 2, 0.1, 40, 16});
        const TrainReport r = train_mse(h, data);
        CHECK(r.history.size() == 41);
        CHECK(r.final_loss() < r.initial_loss());
        CHECK(accuracy(h, data) >= 0.98);
        DenseHead again(HeadConfig{5, {8, 4}, 2, 0.1, 40, 16});
        train_mse(again, data);
        CHECK(again == h);
    }
    SUBCASE("divergence raises NonFiniteLoss") {
        DenseHead h(HeadConfig{5, {8, 4}, 2, 1e300, 3, 16});
        try {
            train_mse(h, data);
            FAIL("expected NonFiniteLoss");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::NonFiniteLoss);
        }
    }
    SUBCASE("feature size mismatch") {
        DenseHead h(HeadConfig{3, {4}, 2, 0.1, 1, 16});
        CHECK_THROWS_AS(train_mse(h, data), Error);
        CHECK_THROWS_AS(h.forward(Vec{1.0}), Error);
    }
}

TEST_CASE("extract_latents keeps order and labels") {
    std::mt19937_64 gen(4);
    const Dataset data = oracle::two_blobs(gen, 5, 4, 2.0);
    const DenseHead h(small_config());
    const LatentSet z = extract_latents(h, data);
    REQUIRE(z.size() == data.size());
    CHECK(z.dim() == 3);
    for (std::size_t i = 0; i < z.size(); ++i) {
        CHECK(z.labels[i] == data.samples[i].label);
        CHECK(z.subject_ids[i] == data.samples[i].subject_id);
        CHECK(z.vectors[i] == h.forward(data.samples[i].features).latent);
        for (double v : z.vectors[i]) CHECK(v >= 0.0);
    }
}
