#include <doctest.h>

#include <cmath>

#include "latent/error.hpp"
#include "latent/retrain.hpp"
#include "latent/scenarios.hpp"
#include "oracles.hpp"

using namespace latent;

namespace {

const ContinualScenario& scenario() {
    static const ContinualScenario s = make_continual_scenario(ContinualSpec{});
    return s;
}

Dataset confident_samples(const DenseHead& model, const Dataset& data, std::size_t count) {
    Dataset out;
    for (const Sample& s : data.samples) {
        const double y = model.forward(s.features).output;
        if ((s.label == 1 && y > 0.99) || (s.label == 0 && y < 0.01)) out.samples.push_back(s);
        if (out.size() == count) break;
    }
    return out;
}

}  // namespace

TEST_CASE("augmented set is the new data followed by one exemplar per centroid") {
    const ContinualScenario& sc = scenario();
    const RetrainProblem& p = sc.problem;
    CHECK(p.augmented_size() == sc.new_data.size() + sc.clusters.atlas.k());
    const Dataset aug = p.augmented();
    REQUIRE(aug.size() == p.augmented_size());
    CHECK(aug.samples.front() == sc.new_data.samples.front());
    for (std::size_t c = 0; c < sc.clusters.atlas.k(); ++c) {
        CHECK(aug.samples[sc.new_data.size() + c] == sc.data.full_train.samples[sc.clusters.atlas.exemplar_indices[c]]);
    }
}

TEST_CASE("output Jacobian rows match finite differences and the linearization error is second order") {
    const DenseHead h(HeadConfig{3, {5, 4}, 7, 0.1, 1, 1});
    Dataset d;
    d.samples.push_back(Sample{Vec{0.4, -0.3, 1.2}, 1, "a", Modality::Full});
    d.samples.push_back(Sample{Vec{-0.8, 0.1, 0.5}, 0, "b", Modality::Full});
    const Mat j = output_jacobian(h, d);
    REQUIRE(j.rows() == 2);
    REQUIRE(j.cols() == h.parameter_count());
    const double eps = 1e-6;
    for (std::size_t r = 0; r < 2; ++r) {
        Vec numeric(h.parameter_count());
        for (std::size_t p = 0; p < h.parameter_count(); ++p) {
            DenseHead plus = h, minus = h;
            plus.parameters()[p] += eps;
            minus.parameters()[p] -= eps;
            numeric[p] = (plus.forward(d.samples[r].features).output - minus.forward(d.samples[r].features).output) / (2 * eps);
        }
        CHECK(gradient_discrepancy(j.row(r), numeric) < 1e-5);
    }

    std::mt19937_64 gen(4);
    const Vec dir = oracle::random_vec(gen, h.parameter_count());
    auto lin_error = [&](double t) {
        DenseHead moved = h;
        for (std::size_t p = 0; p < dir.size(); ++p) moved.parameters()[p] += t * dir[p];
        const Vec jd = multiply(j, dir);
        return std::abs(moved.forward(d.samples[0].features).output - h.forward(d.samples[0].features).output - t * jd[0]);
    };
    const double e1 = lin_error(1e-2);
    const double e2 = lin_error(5e-3);
    CHECK(e2 / e1 == doctest::Approx(0.25).epsilon(0.1));
}

TEST_CASE("linear system targets follow the clamp and anchor rules") {
    const ContinualScenario& sc = scenario();
    const LinearSystem sys = build_linear_system(sc.problem, 0.02);
    const Dataset aug = sc.problem.augmented();
    for (std::size_t j = 0; j < aug.size(); ++j) {
        const double y = sys.outputs[j];
        const int label = aug.samples[j].label;
        const bool exemplar = j >= sc.new_data.size();
        if (exemplar && predict_label(y) == label) {
            CHECK(sys.targets[j] == y);
        } else if (label == 1) {
            CHECK(sys.targets[j] == std::max(y, 0.98));
        } else {
            CHECK(sys.targets[j] == std::min(y, 0.02));
        }
        CHECK(sys.rhs[j] == doctest::Approx(sys.targets[j] - y));
    }
}

TEST_CASE("linearized solve") {
    std::mt19937_64 gen(10);
    const Mat v = oracle::random_mat(gen, 6, 40);
    const Vec rhs = oracle::random_vec(gen, 6);
    const Mat old = oracle::random_mat(gen, 15, 40);
    const Vec zero(40, 0.0);
    RetrainOptions opt;
    opt.tol = 1e-9;
    opt.max_iter = 2000;

    SUBCASE("lambda = 0 gives the pseudoinverse solution") {
        const LinearizedSolve s = solve_linearized(v, rhs, old, 0.0, zero, opt);
        CHECK(oracle::rel_diff(s.delta, oracle::pseudoinverse_solve(v, rhs)) < 1e-9);
        const LinearizedSolve e = solve_linearized(v, rhs, Mat{}, 5.0, zero, opt);
        CHECK(oracle::rel_diff(e.delta, oracle::pseudoinverse_solve(v, rhs)) < 1e-9);
    }
    SUBCASE("lambda > 0 stays feasible, trades norm for old-output change, and is linear in rhs") {
        const LinearizedSolve s = solve_linearized(v, rhs, old, 1.0, zero, opt);
        const Vec pinv = oracle::pseudoinverse_solve(v, rhs);
        CHECK(s.max_constraint_violation <= 1e-6);
        const Vec res = multiply(v, s.delta);
        for (std::size_t i = 0; i < rhs.size(); ++i) CHECK(res[i] == doctest::Approx(rhs[i]).epsilon(1e-6));
        CHECK(norm(s.delta) >= norm(pinv) - 1e-9);
        CHECK(norm(multiply(old, s.delta)) <= norm(multiply(old, pinv)) + 1e-9);

        Vec scaled = rhs;
        for (double& x : scaled) x *= 3.0;
        const LinearizedSolve t = solve_linearized(v, scaled, old, 1.0, zero, opt);
        Vec expect = s.delta;
        for (double& x : expect) x *= 3.0;
        CHECK(oracle::rel_diff(t.delta, expect) < 1e-5);
    }
}

TEST_CASE("retrain options validation") {
    RetrainOptions o;
    o.clamp = 0.0;
    CHECK_THROWS_AS(o.validate(), Error);
    o.clamp = 0.5;
    CHECK_THROWS_AS(o.validate(), Error);
    o.clamp = 0.02;
    CHECK_NOTHROW(o.validate());
}

TEST_CASE("confidently classified new data leaves the weights unchanged") {
    const ContinualScenario& sc = scenario();
    const Dataset easy = confident_samples(sc.base, sc.data.full_train, 5);
    REQUIRE(easy.size() == 5);
    const RetrainProblem p = make_retrain_problem(sc.base, easy, sc.data.full_train, sc.clusters.atlas, 1.0);
    const RetrainResult r = solve_retrain(p);
    CHECK(r.delta_norm == 0.0);
    CHECK(r.updated_model == sc.base);
    const Assignment before = assign_nearest(sc.clusters.atlas, extract_latents(sc.base, sc.data.full_test));
    const Assignment after = evaluate_drift(r, sc.clusters.atlas, sc.data.full_test);
    CHECK(after.indices == before.indices);
    CHECK(after.report.accuracy == before.report.accuracy);
    for (std::size_t c = 0; c < r.centroid_drift.size(); ++c) {
        const Vec z = sc.base.forward(p.centroid_exemplars.samples[c].features).latent;
        double d = 0.0;
        for (std::size_t e = 0; e < z.size(); ++e) d += std::pow(z[e] - sc.clusters.atlas.centroids[c][e], 2);
        CHECK(r.centroid_drift[c] == doctest::Approx(std::sqrt(d)));
    }
}

TEST_CASE("continual scenario: new records learned, atlas kept") {
    const ContinualScenario& sc = scenario();
    const RetrainResult r = solve_retrain(sc.problem);
    CHECK(r.augmented_size == sc.new_data.size() + sc.clusters.atlas.k());
    CHECK(r.constraint_residual <= 0.05);
    CHECK(r.new_accuracy == 1.0);
    for (bool self : r.exemplar_self_assigned) CHECK(self);
    CHECK(r.old_accuracy_before - r.old_accuracy_after <= 0.02);
    CHECK(r.delta.size() == sc.base.parameter_count());
    CHECK(r.delta_norm == doctest::Approx(norm(r.delta)));

    const DenseHead naive = naive_finetune(sc.problem);
    CHECK(accuracy(naive, sc.data.full_train) < r.old_accuracy_after);
}

TEST_CASE("rows that become dependent after an update stop the passes with a warning") {
    std::mt19937_64 gen(1);
    const Dataset data = oracle::two_blobs(gen, 30, 6, 3.0);
    DenseHead teacher(HeadConfig{6, {10, 4}, 1, 0.1, 10, 8});
    train_mse(teacher, data);
    const CentroidAtlas atlas = kmeans_pp(extract_latents(teacher, data), {3, 1, 100, 1e-10}).atlas;
    const Dataset draws = oracle::two_blobs(gen, 2, 6, 3.0);
    const RetrainProblem p = make_retrain_problem(teacher, draws, data, atlas, 1.0);
    const RetrainResult r = solve_retrain(p);
    CHECK(r.augmented_size == 7);
    CHECK(r.clamped_residual <= RetrainOptions{}.breakdown_threshold);
    bool warned = false;
    for (const std::string& w : r.warnings) warned = warned || w.find("dependent") != std::string::npos;
    CHECK(warned);
}
