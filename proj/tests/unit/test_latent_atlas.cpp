#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "latent/atlas_io.hpp"
#include "latent/error.hpp"
#include "latent/latent_atlas.hpp"
#include "oracles.hpp"

using namespace latent;

namespace {

LatentSet blobs(std::mt19937_64& gen, const std::vector<Vec>& centres, std::size_t per, double sigma,
                const std::vector<int>& labels) {
    std::normal_distribution<double> n(0.0, sigma);
    LatentSet z;
    for (std::size_t c = 0; c < centres.size(); ++c) {
        for (std::size_t i = 0; i < per; ++i) {
            Vec v = centres[c];
            for (double& x : v) x += n(gen);
            z.vectors.push_back(std::move(v));
            z.labels.push_back(labels[c]);
            z.subject_ids.push_back("S" + std::to_string(c) + "_" + std::to_string(i % 3));
        }
    }
    return z;
}

}  // namespace

TEST_CASE("kmeans recovers well separated blobs") {
    std::mt19937_64 gen(2);
    const std::vector<Vec> centres{{0, 0, 0}, {10, 0, 0}, {0, 10, 0}};
    const LatentSet z = blobs(gen, centres, 40, 0.3, {0, 1, 1});
    const ClusterResult r = kmeans_pp(z, {3, 11, 300, 1e-10});
    CHECK(r.converged);
    for (const Vec& c : centres) {
        const std::size_t j = oracle::brute_nearest(r.atlas.centroids, c);
        for (std::size_t d = 0; d < 3; ++d) CHECK(std::abs(r.atlas.centroids[j][d] - c[d]) < 0.2);
        CHECK(r.atlas.purity[j] == 1.0);
        CHECK(r.atlas.member_counts[j] == 40);
    }
    for (std::size_t i = 1; i < r.objective_history.size(); ++i)
        CHECK(r.objective_history[i] <= r.objective_history[i - 1] + 1e-9);
    CHECK(kmeans_objective(z, r.atlas.centroids, r.assignments) == doctest::Approx(r.objective_history.back()));
    r.atlas.validate();

    const ClusterResult again = kmeans_pp(z, {3, 11, 300, 1e-10});
    CHECK(again.atlas == r.atlas);
}

TEST_CASE("exemplar is the member nearest its centroid") {
    std::mt19937_64 gen(6);
    const LatentSet z = blobs(gen, {{0, 0}, {8, 8}}, 20, 1.0, {0, 1});
    const ClusterResult r = kmeans_pp(z, {2, 1, 300, 1e-10});
    for (std::size_t c = 0; c < 2; ++c) {
        const std::size_t e = r.atlas.exemplar_indices[c];
        CHECK(r.assignments[e] == c);
        CHECK(r.atlas.exemplar_ids[c] == z.subject_ids[e]);
        const auto dist = [&](std::size_t i) {
            double s = 0;
            for (std::size_t d = 0; d < 2; ++d) s += std::pow(z.vectors[i][d] - r.atlas.centroids[c][d], 2);
            return s;
        };
        for (std::size_t i = 0; i < z.size(); ++i)
            if (r.assignments[i] == c) CHECK(dist(e) <= dist(i));
    }
}

TEST_CASE("an evenly split cluster is labeled 1") {
    LatentSet z;
    z.vectors = {{0.0}, {0.1}, {10.0}, {10.1}};
    z.labels = {0, 1, 0, 0};
    z.subject_ids = {"a", "b", "c", "d"};
    const ClusterResult r = kmeans_pp(z, {2, 3, 100, 1e-12});
    const std::size_t mixed = r.assignments[0];
    CHECK(r.atlas.class_labels[mixed] == 1);
    CHECK(r.atlas.purity[mixed] == doctest::Approx(0.5));
    CHECK(r.atlas.class_labels[1 - mixed] == 0);
}

TEST_CASE("k = 1 puts everything in one cluster") {
    std::mt19937_64 gen(8);
    const LatentSet z = blobs(gen, {{0, 0}, {5, 5}}, 10, 1.0, {0, 1});
    const ClusterResult r = kmeans_pp(z, {1, 0, 50, 1e-10});
    CHECK(r.atlas.member_counts[0] == 20);
    std::ostringstream csv;
    write_membership_csv(csv, r.atlas);
    CHECK(csv.str().find("t1,1,20,100.0,0.5000,") != std::string::npos);
}

TEST_CASE("kmeans argument errors") {
    LatentSet z;
    z.vectors = {{0.0}, {1.0}};
    z.labels = {0, 1};
    z.subject_ids = {"a", "b"};
    try {
        kmeans_pp(z, {3, 0, 10, 1e-8});
        FAIL("expected TooFewPoints");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::TooFewPoints);
    }
    CHECK_THROWS_AS(kmeans_pp(z, {0, 0, 10, 1e-8}), Error);
}

TEST_CASE("nearest centroid: brute-force agreement and ties") {
    std::mt19937_64 gen(12);
    for (int t = 0; t < 200; ++t) {
        std::vector<Vec> cs;
        for (int c = 0; c < 6; ++c) cs.push_back(oracle::random_vec(gen, 4));
        const Vec x = oracle::random_vec(gen, 4);
        CHECK(nearest_centroid(cs, x) == oracle::brute_nearest(cs, x));
    }
    const std::vector<Vec> tied{{1, 0}, {-1, 0}, {0, 1}};
    CHECK(nearest_centroid(tied, Vec{0, 0}) == 0);
    const std::vector<Vec> dup{{2, 2}, {0, 0}, {0, 0}};
    CHECK(nearest_centroid(dup, Vec{0, 0}) == 1);
}

TEST_CASE("assign_nearest aggregates per subject") {
    CentroidAtlas a;
    a.centroids = {{0.0}, {10.0}};
    a.class_labels = {0, 1};
    a.annotations = {"", ""};
    a.member_counts = {1, 1};
    a.purity = {1.0, 1.0};
    a.exemplar_ids = {"x", "y"};
    a.exemplar_indices = {0, 1};
    LatentSet z;
    z.vectors = {{1.0}, {9.0}, {2.0}, {11.0}};
    z.labels = {0, 0, 0, 1};
    z.subject_ids = {"p", "p", "q", "q"};
    const Assignment r = assign_nearest(a, z);
    CHECK(r.indices == std::vector<std::size_t>{0, 1, 0, 1});
    REQUIRE(r.report.rows.size() == 2);
    CHECK(r.report.rows[0].subject_id == "p");
    CHECK(r.report.rows[0].counts == std::vector<std::size_t>{1, 1});
    CHECK(r.report.correct == 3);
    CHECK(r.report.accuracy == doctest::Approx(0.75));
    std::ostringstream csv;
    write_assignment_csv(csv, r.report, 2);
    CHECK(csv.str() == std::string(kCsvSchemaLine) + "\nsubject_id,t1,t2\np,1,1\nq,1,1\n");

    const Assignment empty = assign_nearest(a, LatentSet{});
    CHECK(empty.report.accuracy == 0.0);
    std::ostringstream header_only;
    write_assignment_csv(header_only, empty.report, 2);
    CHECK(header_only.str() == std::string(kCsvSchemaLine) + "\nsubject_id,t1,t2\n");

    LatentSet wrong = z;
    wrong.vectors[0] = {1.0, 2.0};
    CHECK_THROWS_AS(assign_nearest(a, wrong), Error);
}

TEST_CASE("PCA projection follows the dominant directions") {
    std::mt19937_64 gen(14);
    std::normal_distribution<double> n;
    LatentSet z;
    for (int i = 0; i < 200; ++i) {
        z.vectors.push_back({5 * n(gen), 2 * n(gen), 0.5 * n(gen), 0.0});
        z.labels.push_back(i % 2);
        z.subject_ids.push_back("s");
    }
    const ClusterResult r = kmeans_pp(z, {2, 0, 100, 1e-10});
    const Projection p = project_3d(r.atlas, z);
    CHECK(p.rows.size() == 202);
    CHECK(std::abs(p.basis(0, 0)) > 0.99);
    CHECK(std::abs(p.basis(1, 1)) > 0.99);
    CHECK(std::abs(p.basis(2, 2)) > 0.99);
    CHECK(p.explained_variance[0] > p.explained_variance[1]);
    CHECK(p.explained_variance[1] > p.explained_variance[2]);
    CHECK(std::count_if(p.rows.begin(), p.rows.end(), [](const auto& q) { return q.is_centroid; }) == 2);

    LatentSet flat;
    for (int i = 0; i < 10; ++i) {
        flat.vectors.push_back({static_cast<double>(i), 0.0, 0.0});
        flat.labels.push_back(0);
        flat.subject_ids.push_back("f");
    }
    const Projection pf = project_3d(kmeans_pp(flat, {1, 0, 10, 1e-10}).atlas, flat);
    CHECK_FALSE(pf.warnings.empty());
    for (const auto& q : pf.rows) {
        CHECK(q.y == 0.0);
        CHECK(q.z == 0.0);
    }

    LatentSet two;
    two.vectors = {{0, 1}, {1, 0}};
    two.labels = {0, 1};
    two.subject_ids = {"a", "b"};
    CHECK_THROWS_AS(project_3d(kmeans_pp(two, {1, 0, 10, 1e-10}).atlas, two), Error);
}

TEST_CASE("silhouette is high for separated clusters") {
    std::mt19937_64 gen(15);
    const LatentSet z = blobs(gen, {{0, 0}, {20, 0}}, 15, 0.5, {0, 1});
    const ClusterResult r = kmeans_pp(z, {2, 0, 100, 1e-10});
    CHECK(silhouette_score(z, r.assignments, 2) > 0.9);
}

TEST_CASE("atlas JSON round trip and annotations") {
    std::mt19937_64 gen(16);
    const LatentSet z = blobs(gen, {{0, 0, 1}, {4, 4, 1}}, 10, 0.5, {0, 1});
    const CentroidAtlas a = annotate(kmeans_pp(z, {2, 0, 100, 1e-10}).atlas, 1, "needs review, \"odd\"");
    CHECK(atlas_from_json(atlas_to_json(a)) == a);
    CHECK_THROWS_AS(annotate(a, 2, "x"), Error);
    CHECK_THROWS_AS(atlas_from_json("{\"version\": 1}"), Error);
    CHECK_THROWS_AS(atlas_from_json("not json"), Error);

    std::ostringstream csv;
    write_membership_csv(csv, a);
    CHECK(csv.str().find("\"needs review, \"\"odd\"\"\"") != std::string::npos);
    CHECK(csv_escape("plain") == "plain");
    CHECK(csv_escape("a,b") == "\"a,b\"");
}

TEST_CASE("five-mode data yields five clusters of purity at least 0.95") {
    std::mt19937_64 gen(21);
    const std::vector<Vec> modes{{0, 0, 0}, {6, 0, 0}, {0, 6, 0}, {0, 0, 6}, {6, 6, 6}};
    const LatentSet z = blobs(gen, modes, 60, 1.0, {0, 0, 1, 1, 1});
    const ClusterResult r = kmeans_pp(z, {5, 4, 300, 1e-10});
    REQUIRE(r.atlas.k() == 5);
    for (std::size_t c = 0; c < 5; ++c) {
        CHECK(r.atlas.member_counts[c] > 0);
        CHECK(r.atlas.purity[c] >= 0.95);
    }
}
