#include "latent/latent_atlas.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include <Eigen/Dense>

#include "latent/error.hpp"
#include "latent/kernels/kernels.hpp"
#include "latent/parallel.hpp"
#include "latent/rng.hpp"

namespace latent {

void CentroidAtlas::validate() const {
    const std::size_t n = centroids.size();
    require(n >= 1, ErrorKind::InvalidArgument, "atlas has no centroids");
    require(class_labels.size() == n && annotations.size() == n && member_counts.size() == n && purity.size() == n &&
                exemplar_ids.size() == n && exemplar_indices.size() == n,
            ErrorKind::InvalidArgument, "atlas lists have inconsistent lengths");
    const std::size_t l = centroids.front().size();
    require(l >= 1, ErrorKind::InvalidArgument, "atlas centroids are empty");
    for (std::size_t i = 0; i < n; ++i) {
        require(centroids[i].size() == l, ErrorKind::InconsistentDim, "atlas centroid dimensions differ");
        require(all_finite(centroids[i]), ErrorKind::InvalidArgument, "atlas centroid is not finite");
        require(class_labels[i] == 0 || class_labels[i] == 1, ErrorKind::InvalidArgument, "atlas class label not binary");
        require(purity[i] >= 0.0 && purity[i] <= 1.0, ErrorKind::InvalidArgument, "atlas purity outside [0,1]");
    }
}

std::size_t nearest_centroid(const std::vector<Vec>& centroids, std::span<const double> x) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < centroids.size(); ++i) {
        const double d = kernels::squared_distance(centroids[i], x);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

double kmeans_objective(const LatentSet& latents, const std::vector<Vec>& centroids,
                        const std::vector<std::size_t>& assignments) {
    double total = 0.0;
    for (std::size_t i = 0; i < latents.size(); ++i) {
        total += kernels::squared_distance(latents.vectors[i], centroids[assignments[i]]);
    }
    return total;
}

namespace {

void check_latents(const LatentSet& latents) {
    require(latents.labels.size() == latents.size() && latents.subject_ids.size() == latents.size(),
            ErrorKind::InvalidArgument, "latent set lists have different lengths");
    const std::size_t l = latents.dim();
    for (const Vec& v : latents.vectors) {
        require(v.size() == l, ErrorKind::InconsistentDim, "latent vectors have different dimensions");
    }
}

struct AssignStep {
    std::vector<std::size_t> assignments;
    std::vector<double> distances;
    double objective = 0.0;
};

AssignStep assign_all(const LatentSet& latents, const std::vector<Vec>& centroids) {
    AssignStep step;
    const std::size_t n = latents.size();
    step.assignments.resize(n);
    step.distances.resize(n);
    parallel_for(n, [&](std::size_t i) {
        const std::size_t c = nearest_centroid(centroids, latents.vectors[i]);
        step.assignments[i] = c;
        step.distances[i] = kernels::squared_distance(latents.vectors[i], centroids[c]);
    });
    for (double d : step.distances) step.objective += d;
    return step;
}

std::vector<Vec> seed_plus_plus(const LatentSet& latents, std::size_t k, Rng& rng, std::vector<std::string>& warnings) {
    const std::size_t n = latents.size();
    std::vector<Vec> centroids;
    std::vector<bool> chosen(n, false);
    const std::size_t first = rng.index(n);
    centroids.push_back(latents.vectors[first]);
    chosen[first] = true;
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = kernels::squared_distance(latents.vectors[i], centroids[0]);

    bool warned = false;
    while (centroids.size() < k) {
        double total = 0.0;
        for (double d : d2) total += d;
        std::size_t next = 0;
        if (total > 0.0) {
            next = rng.weighted_index(d2);
        } else {
            if (!warned) {
                warnings.emplace_back("DegenerateData: fewer distinct points than k; duplicate centroids seeded");
                warned = true;
            }
            while (chosen[next]) ++next;
        }
        chosen[next] = true;
        centroids.push_back(latents.vectors[next]);
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], kernels::squared_distance(latents.vectors[i], centroids.back()));
        }
    }
    return centroids;
}

std::vector<Vec> update_centroids(const LatentSet& latents, const AssignStep& step, const std::vector<Vec>& previous) {
    const std::size_t k = previous.size();
    const std::size_t l = latents.dim();
    std::vector<Vec> sums(k, Vec(l, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < latents.size(); ++i) {
        kernels::axpy(1.0, latents.vectors[i], sums[step.assignments[i]]);
        ++counts[step.assignments[i]];
    }
    std::vector<double> distances = step.distances;
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] > 0) {
            const double inv = 1.0 / static_cast<double>(counts[c]);
            for (double& v : sums[c]) v *= inv;
            continue;
        }
        // Empty cluster: move it onto the worst-served point.
        std::size_t far = 0;
        for (std::size_t i = 1; i < distances.size(); ++i) {
            if (distances[i] > distances[far]) far = i;
        }
        sums[c] = latents.vectors[far];
        distances[far] = 0.0;
    }
    return sums;
}

}  // namespace

ClusterResult kmeans_pp(const LatentSet& latents, const KMeansOptions& options) {
    check_latents(latents);
    require(options.k >= 1, ErrorKind::InvalidArgument, "kmeans: k must be positive");
    require(options.max_iter >= 1, ErrorKind::InvalidArgument, "kmeans: max_iter must be positive");
    require(options.k <= latents.size(), ErrorKind::TooFewPoints,
            "kmeans: k = " + std::to_string(options.k) + " exceeds " + std::to_string(latents.size()) + " points");

    ClusterResult result;
    Rng rng(derive_seed(options.seed, Stream::KMeans));
    std::vector<Vec> centroids = seed_plus_plus(latents, options.k, rng, result.warnings);

    AssignStep step = assign_all(latents, centroids);
    result.objective_history.push_back(step.objective);
    while (result.iterations < options.max_iter) {
        std::vector<Vec> next = update_centroids(latents, step, centroids);
        double movement = 0.0;
        for (std::size_t c = 0; c < centroids.size(); ++c) {
            movement = std::max(movement, std::sqrt(kernels::squared_distance(next[c], centroids[c])));
        }
        centroids = std::move(next);
        ++result.iterations;
        step = assign_all(latents, centroids);
        result.objective_history.push_back(step.objective);
        if (movement < options.tol) {
            result.converged = true;
            break;
        }
    }

    const std::size_t k = centroids.size();
    CentroidAtlas& atlas = result.atlas;
    atlas.member_counts.assign(k, 0);
    std::vector<std::size_t> positives(k, 0);
    for (std::size_t i = 0; i < latents.size(); ++i) {
        ++atlas.member_counts[step.assignments[i]];
        if (latents.labels[i] == 1) ++positives[step.assignments[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
        const std::size_t members = atlas.member_counts[c];
        const std::size_t negatives = members - positives[c];
        const int label = positives[c] >= negatives ? 1 : 0;
        atlas.class_labels.push_back(label);
        atlas.purity.push_back(members == 0 ? 0.0
                                            : static_cast<double>(label == 1 ? positives[c] : negatives) /
                                                  static_cast<double>(members));
        const std::size_t exemplar = [&] {
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < latents.size(); ++i) {
                const double d = kernels::squared_distance(latents.vectors[i], centroids[c]);
                if (d < best_d) {
                    best_d = d;
                    best = i;
                }
            }
            return best;
        }();
        atlas.exemplar_indices.push_back(exemplar);
        atlas.exemplar_ids.push_back(latents.subject_ids[exemplar]);
    }
    atlas.annotations.assign(k, "");
    atlas.centroids = std::move(centroids);
    result.assignments = std::move(step.assignments);
    return result;
}

Assignment assign_nearest(const CentroidAtlas& atlas, const LatentSet& latents) {
    check_latents(latents);
    require(atlas.k() >= 1, ErrorKind::InvalidArgument, "assign_nearest: atlas is empty");
    if (!latents.empty()) {
        require(latents.dim() == atlas.dim(), ErrorKind::DimensionMismatch,
                "latent dim " + std::to_string(latents.dim()) + " != atlas dim " + std::to_string(atlas.dim()));
    }
    Assignment out;
    out.indices.resize(latents.size());
    parallel_for(latents.size(), [&](std::size_t i) { out.indices[i] = nearest_centroid(atlas.centroids, latents.vectors[i]); });

    std::unordered_map<std::string, std::size_t> row_of;
    for (std::size_t i = 0; i < latents.size(); ++i) {
        const std::string& id = latents.subject_ids[i];
        auto [it, inserted] = row_of.try_emplace(id, out.report.rows.size());
        if (inserted) out.report.rows.push_back({id, std::vector<std::size_t>(atlas.k(), 0)});
        ++out.report.rows[it->second].counts[out.indices[i]];
        if (atlas.class_labels[out.indices[i]] == latents.labels[i]) ++out.report.correct;
    }
    out.report.total = latents.size();
    out.report.accuracy = latents.empty() ? 0.0 : static_cast<double>(out.report.correct) / static_cast<double>(latents.size());
    return out;
}

Projection project_3d(const CentroidAtlas& atlas, const LatentSet& latents) {
    check_latents(latents);
    const std::size_t l = atlas.dim();
    require(l >= 3, ErrorKind::DimensionMismatch, "project_3d: latent dimension must be at least 3");
    if (!latents.empty()) require(latents.dim() == l, ErrorKind::DimensionMismatch, "project_3d: latent/atlas dims differ");

    Projection p;
    const std::size_t n = latents.size();
    p.mean.assign(l, 0.0);
    for (const Vec& v : latents.vectors) kernels::axpy(1.0, v, p.mean);
    if (n > 0) {
        for (double& m : p.mean) m /= static_cast<double>(n);
    }

    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(l));
    for (const Vec& v : latents.vectors) {
        Eigen::VectorXd c(static_cast<Eigen::Index>(l));
        for (std::size_t j = 0; j < l; ++j) c(static_cast<Eigen::Index>(j)) = v[j] - p.mean[j];
        cov.noalias() += c * c.transpose();
    }
    if (n > 0) cov /= static_cast<double>(n);

    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    const Eigen::VectorXd values = solver.eigenvalues();  // ascending
    const Eigen::MatrixXd vectors = solver.eigenvectors();
    const double largest = std::max(0.0, values(values.size() - 1));

    p.basis = Mat(3, l);
    p.explained_variance.assign(3, 0.0);
    std::size_t kept = 0;
    for (std::size_t comp = 0; comp < 3; ++comp) {
        const Eigen::Index col = values.size() - 1 - static_cast<Eigen::Index>(comp);
        const double lambda = values(col);
        if (!(largest > 0.0) || lambda <= 1e-12 * largest) continue;
        // Fix the sign so the largest-magnitude loading is positive.
        Eigen::Index pivot = 0;
        vectors.col(col).cwiseAbs().maxCoeff(&pivot);
        const double sign = vectors(pivot, col) < 0.0 ? -1.0 : 1.0;
        for (std::size_t j = 0; j < l; ++j) p.basis(comp, j) = sign * vectors(static_cast<Eigen::Index>(j), col);
        p.explained_variance[comp] = lambda;
        ++kept;
    }
    if (kept < 3) {
        p.warnings.push_back("DegenerateCovariance: only " + std::to_string(kept) +
                             " directions with non-zero variance; remaining coordinates are zero");
    }

    auto project = [&](std::span<const double> v, ProjectedPoint& out) {
        Vec centered(v.begin(), v.end());
        kernels::axpy(-1.0, p.mean, centered);
        out.x = kernels::dot(p.basis.row(0), centered);
        out.y = kernels::dot(p.basis.row(1), centered);
        out.z = kernels::dot(p.basis.row(2), centered);
    };

    for (std::size_t c = 0; c < atlas.k(); ++c) {
        ProjectedPoint row;
        row.id = "centroid_" + std::to_string(c);
        row.cluster = c;
        row.label = atlas.class_labels[c];
        row.is_centroid = true;
        project(atlas.centroids[c], row);
        p.rows.push_back(std::move(row));
    }
    for (std::size_t i = 0; i < n; ++i) {
        ProjectedPoint row;
        row.id = latents.subject_ids[i] + "#" + std::to_string(i);
        row.cluster = nearest_centroid(atlas.centroids, latents.vectors[i]);
        row.label = latents.labels[i];
        project(latents.vectors[i], row);
        p.rows.push_back(std::move(row));
    }
    return p;
}

CentroidAtlas annotate(const CentroidAtlas& atlas, std::size_t index, std::string text) {
    require(index < atlas.k(), ErrorKind::IndexOutOfRange,
            "annotate: index " + std::to_string(index) + " out of range for k = " + std::to_string(atlas.k()));
    CentroidAtlas out = atlas;
    out.annotations[index] = std::move(text);
    return out;
}

double silhouette_score(const LatentSet& latents, const std::vector<std::size_t>& assignments, std::size_t k) {
    require(assignments.size() == latents.size(), ErrorKind::DimensionMismatch, "silhouette: assignment count mismatch");
    const std::size_t n = latents.size();
    if (k < 2 || n < 2) return 0.0;
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t a : assignments) {
        require(a < k, ErrorKind::IndexOutOfRange, "silhouette: assignment out of range");
        ++sizes[a];
    }
    std::vector<double> scores(n, 0.0);
    parallel_for(n, [&](std::size_t i) {
        const std::size_t own = assignments[i];
        if (sizes[own] <= 1) return;
        std::vector<double> sums(k, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) sums[assignments[j]] += std::sqrt(kernels::squared_distance(latents.vectors[i], latents.vectors[j]));
        }
        const double a = sums[own] / static_cast<double>(sizes[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
            if (c != own && sizes[c] > 0) b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
        }
        if (!std::isfinite(b)) return;
        const double denom = std::max(a, b);
        scores[i] = denom > 0.0 ? (b - a) / denom : 0.0;
    });
    double total = 0.0;
    for (double s : scores) total += s;
    return total / static_cast<double>(n);
}

}  // namespace latent
