#pragma once

// Independent reference computations used by the unit and acceptance tests.
// They deliberately go through Eigen or brute force rather than the library.

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <unistd.h>

#include "latent/dataset.hpp"
#include "latent/dense_head.hpp"
#include "latent/numerics.hpp"

namespace oracle {

inline Eigen::MatrixXd to_eigen(const latent::Mat& m) {
    Eigen::MatrixXd out(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) = m(r, c);
    return out;
}

inline Eigen::VectorXd to_eigen(const latent::Vec& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()); }

inline latent::Vec from_eigen(const Eigen::VectorXd& v) { return latent::Vec(v.data(), v.data() + v.size()); }

// Minimum-norm solution through a complete orthogonal decomposition.
inline latent::Vec pseudoinverse_solve(const latent::Mat& v, const latent::Vec& rhs) {
    const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(to_eigen(v));
    return from_eigen(cod.solve(to_eigen(rhs)));
}

// argmin 0.5 x'Qx + c'x subject to A x = b, from the KKT system.
inline latent::Vec kkt_solve(const Eigen::MatrixXd& q, const Eigen::VectorXd& c, const Eigen::MatrixXd& a,
                             const Eigen::VectorXd& b) {
    const Eigen::Index n = q.rows();
    const Eigen::Index m = a.rows();
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n + m, n + m);
    k.topLeftCorner(n, n) = q;
    k.topRightCorner(n, m) = a.transpose();
    k.bottomLeftCorner(m, n) = a;
    Eigen::VectorXd rhs(n + m);
    rhs << -c, b;
    const Eigen::VectorXd sol = k.fullPivLu().solve(rhs);
    return from_eigen(sol.head(n));
}

// Index of the nearest centroid by a plain scan; first minimum wins.
inline std::size_t brute_nearest(const std::vector<latent::Vec>& centroids, const latent::Vec& x) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < centroids.size(); ++i) {
        double d = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) d += (centroids[i][j] - x[j]) * (centroids[i][j] - x[j]);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

inline double rel_diff(const latent::Vec& a, const latent::Vec& b) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

inline latent::Mat random_mat(std::mt19937_64& gen, std::size_t rows, std::size_t cols) {
    std::normal_distribution<double> n;
    latent::Mat m(rows, cols);
    for (double& x : m.data()) x = n(gen);
    return m;
}

inline latent::Vec random_vec(std::mt19937_64& gen, std::size_t size) {
    std::normal_distribution<double> n;
    latent::Vec v(size);
    for (double& x : v) x = n(gen);
    return v;
}

// Two Gaussian classes in `dim` dimensions, centred at -+sep/2 on the first axis.
inline latent::Dataset two_blobs(std::mt19937_64& gen, std::size_t per_class, std::size_t dim, double sep) {
    std::normal_distribution<double> n;
    latent::Dataset d;
    for (int label = 0; label <= 1; ++label) {
        for (std::size_t i = 0; i < per_class; ++i) {
            latent::Sample s;
            s.label = label;
            s.subject_id = (label ? "P" : "N") + std::to_string(i % 4);
            s.features.resize(dim);
            for (double& x : s.features) x = n(gen);
            s.features[0] += label ? sep / 2 : -sep / 2;
            d.samples.push_back(std::move(s));
        }
    }
    return d;
}

// Freshly initialized heads have zero biases, so a sample whose hidden units
// are all inactive puts the next layer exactly on the ReLU kink, where central
// differences are meaningless. Gradient checks probe a jittered copy instead.
inline latent::DenseHead jittered(const latent::DenseHead& model, std::mt19937_64& gen, double scale = 0.1) {
    std::normal_distribution<double> n(0.0, scale);
    latent::Vec p(model.parameters().begin(), model.parameters().end());
    for (double& x : p) x += n(gen);
    return latent::DenseHead(model.config(), std::move(p));
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("latent_atlas_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace oracle
