#pragma once

// Centroid atlas over latent vectors: k-means++ clustering with mode-class
// labels and membership statistics, nearest-centroid classification, and a
// PCA view for plotting.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "latent/dataset.hpp"
#include "latent/numerics.hpp"

namespace latent {

struct CentroidAtlas {
    std::vector<Vec> centroids;
    std::vector<int> class_labels;
    std::vector<std::string> annotations;
    std::vector<std::size_t> member_counts;
    std::vector<double> purity;
    // Subject id and row index of the clustered sample nearest each centroid.
    std::vector<std::string> exemplar_ids;
    std::vector<std::size_t> exemplar_indices;

    std::size_t k() const noexcept { return centroids.size(); }
    std::size_t dim() const noexcept { return centroids.empty() ? 0 : centroids.front().size(); }

    // Throws InvalidArgument when the parallel lists disagree or values are
    // out of range.
    void validate() const;

    friend bool operator==(const CentroidAtlas&, const CentroidAtlas&) = default;
};

struct KMeansOptions {
    std::size_t k = 5;
    std::uint64_t seed = 0;
    std::size_t max_iter = 300;
    double tol = 1e-8;
};

struct ClusterResult {
    CentroidAtlas atlas;
    std::vector<std::size_t> assignments;
    // Sum of squared distances to the assigned centroid, recorded after each
    // assignment step.
    std::vector<double> objective_history;
    std::size_t iterations = 0;
    bool converged = false;
    std::vector<std::string> warnings;
};

// k-means++ seeding (first centroid uniform, the rest drawn proportionally to
// squared distance) followed by Lloyd iterations until no centroid moves
// more than tol. Empty clusters are reseeded at the point farthest from its
// nearest centroid. A cluster whose members split evenly is labeled 1.
// Throws TooFewPoints when k exceeds the number of vectors.
ClusterResult kmeans_pp(const LatentSet& latents, const KMeansOptions& options);

// Index of the nearest centroid; ties go to the lowest index.
std::size_t nearest_centroid(const std::vector<Vec>& centroids, std::span<const double> x);

struct SubjectCounts {
    std::string subject_id;
    std::vector<std::size_t> counts;
};

struct AssignmentReport {
    // One row per subject, in order of first appearance.
    std::vector<SubjectCounts> rows;
    // Fraction of vectors whose centroid carries their label; 0 when empty.
    double accuracy = 0.0;
    std::size_t total = 0;
    std::size_t correct = 0;
};

struct Assignment {
    std::vector<std::size_t> indices;
    AssignmentReport report;
};

// Throws DimensionMismatch when vector and centroid dimensions differ.
Assignment assign_nearest(const CentroidAtlas& atlas, const LatentSet& latents);

struct ProjectedPoint {
    std::string id;
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    std::size_t cluster = 0;
    int label = 0;
    bool is_centroid = false;
};

struct Projection {
    std::vector<ProjectedPoint> rows;
    // Principal directions (3 x l); missing directions are zero rows.
    Mat basis;
    Vec mean;
    Vec explained_variance;
    std::vector<std::string> warnings;
};

// Projects the latent set and the centroids onto the top three principal
// components of the latent set. Fewer than three directions with non-zero
// variance leave the remaining coordinates at zero and add a warning.
// Requires l >= 3 (DimensionMismatch otherwise).
Projection project_3d(const CentroidAtlas& atlas, const LatentSet& latents);

// Copy of the atlas with annotation `index` replaced; IndexOutOfRange if
// index >= k.
CentroidAtlas annotate(const CentroidAtlas& atlas, std::size_t index, std::string text);

double kmeans_objective(const LatentSet& latents, const std::vector<Vec>& centroids,
                        const std::vector<std::size_t>& assignments);

// Mean silhouette coefficient of a clustering. Offered to help pick k;
// never applied automatically. Singleton clusters score 0.
double silhouette_score(const LatentSet& latents, const std::vector<std::size_t>& assignments, std::size_t k);

}  // namespace latent
