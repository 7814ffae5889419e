#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <vector>

#include <Eigen/SVD>

#include "core_math.hpp"
#include "dataset.hpp"
#include "error.hpp"

/// @file cluster.hpp
/// @brief Small clustering and shape-comparison tools used to score embeddings.

namespace trimap {

struct KMeansResult {
    std::vector<int> assignment;
    Matrix centers;
    double inertia = 0.0;
};

/// Lloyd's algorithm with k-means++ seeding; the best of `restarts` runs by inertia.
inline KMeansResult kmeans(const Matrix& points, Index k, std::uint64_t seed = 0, Index restarts = 10,
                           Index max_iter = 300) {
    const Index n = static_cast<Index>(points.rows());
    if (k == 0 || k > n) {
        throw ParameterError("k-means needs 1 <= k <= N");
    }
    std::mt19937_64 rng(seed);
    KMeansResult best;
    best.inertia = std::numeric_limits<double>::infinity();

    for (Index run = 0; run < std::max<Index>(1, restarts); ++run) {
        Matrix centers(static_cast<Eigen::Index>(k), points.cols());
        std::vector<double> closest(n, std::numeric_limits<double>::infinity());
        std::uniform_int_distribution<Index> first(0, n - 1);
        centers.row(0) = points.row(static_cast<Eigen::Index>(first(rng)));
        for (Index c = 1; c < k; ++c) {
            double total = 0.0;
            for (Index i = 0; i < n; ++i) {
                closest[i] = std::min(closest[i], squared_distance(row_span(points, i), row_span(centers, c - 1)));
                total += closest[i];
            }
            Index pick = n - 1;
            if (total > 0.0) {
                double target = std::uniform_real_distribution<double>(0.0, total)(rng);
                for (Index i = 0; i < n; ++i) {
                    target -= closest[i];
                    if (target <= 0.0) {
                        pick = i;
                        break;
                    }
                }
            } else {
                pick = first(rng);
            }
            centers.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(pick));
        }

        std::vector<int> assign(n, -1);
        double inertia = 0.0;
        for (Index iter = 0; iter < max_iter; ++iter) {
            bool changed = false;
            inertia = 0.0;
            for (Index i = 0; i < n; ++i) {
                int arg = 0;
                double dist = std::numeric_limits<double>::infinity();
                for (Index c = 0; c < k; ++c) {
                    const double v = squared_distance(row_span(points, i), row_span(centers, c));
                    if (v < dist) {
                        dist = v;
                        arg = static_cast<int>(c);
                    }
                }
                changed |= assign[i] != arg;
                assign[i] = arg;
                inertia += dist;
            }
            if (!changed) {
                break;
            }
            Matrix sums = Matrix::Zero(centers.rows(), centers.cols());
            std::vector<Index> counts(k, 0);
            for (Index i = 0; i < n; ++i) {
                sums.row(assign[i]) += points.row(static_cast<Eigen::Index>(i));
                ++counts[static_cast<Index>(assign[i])];
            }
            for (Index c = 0; c < k; ++c) {
                if (counts[c] > 0) {
                    centers.row(static_cast<Eigen::Index>(c)) = sums.row(static_cast<Eigen::Index>(c)) /
                                                                static_cast<double>(counts[c]);
                }
            }
        }
        if (inertia < best.inertia) {
            best = {assign, centers, inertia};
        }
    }
    return best;
}

/// Maximum-weight assignment on a square matrix (Hungarian method, O(n^3)).
/// Returns column index matched to each row.
inline std::vector<Index> max_weight_matching(const Eigen::MatrixXd& weight) {
    const Index n = static_cast<Index>(weight.rows());
    if (weight.cols() != weight.rows()) {
        throw ShapeError("matching needs a square matrix");
    }
    const double big = weight.size() > 0 ? weight.maxCoeff() : 0.0;
    // potentials formulation on cost = big - weight, 1-indexed
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<Index> p(n + 1, 0), way(n + 1, 0);
    for (Index i = 1; i <= n; ++i) {
        p[0] = i;
        Index j0 = 0;
        std::vector<double> minv(n + 1, std::numeric_limits<double>::infinity());
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            const Index i0 = p[j0];
            double delta = std::numeric_limits<double>::infinity();
            Index j1 = 0;
            for (Index j = 1; j <= n; ++j) {
                if (!used[j]) {
                    const double cur = (big - weight(static_cast<Eigen::Index>(i0 - 1),
                                                     static_cast<Eigen::Index>(j - 1))) - u[i0] - v[j];
                    if (cur < minv[j]) {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if (minv[j] < delta) {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for (Index j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const Index j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<Index> match(n, 0);
    for (Index j = 1; j <= n; ++j) {
        if (p[j] != 0) {
            match[p[j] - 1] = j - 1;
        }
    }
    return match;
}

/// Fraction of points whose cluster id agrees with the label under the best one-to-one relabeling.
inline double label_agreement(const std::vector<int>& clusters, const std::vector<int>& labels) {
    if (clusters.size() != labels.size()) {
        throw ShapeError("cluster and label vectors differ in length");
    }
    if (clusters.empty()) {
        return 1.0;
    }
    std::map<int, Index> cluster_ids, label_ids;
    for (const int c : clusters) {
        cluster_ids.emplace(c, cluster_ids.size());
    }
    for (const int l : labels) {
        label_ids.emplace(l, label_ids.size());
    }
    const Index size = std::max(cluster_ids.size(), label_ids.size());
    Eigen::MatrixXd table = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(size), static_cast<Eigen::Index>(size));
    for (Index i = 0; i < clusters.size(); ++i) {
        table(static_cast<Eigen::Index>(cluster_ids[clusters[i]]), static_cast<Eigen::Index>(label_ids[labels[i]])) +=
            1.0;
    }
    const auto match = max_weight_matching(table);
    double hits = 0.0;
    for (Index r = 0; r < size; ++r) {
        hits += table(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(match[r]));
    }
    return hits / static_cast<double>(clusters.size());
}

/// k-means on `points` with k = number of distinct labels, scored by label_agreement.
inline double kmeans_agreement(const Matrix& points, const std::vector<int>& labels, std::uint64_t seed = 0) {
    std::vector<int> distinct(labels.begin(), labels.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    const auto result = kmeans(points, distinct.size(), seed);
    return label_agreement(result.assignment, labels);
}

/// Normalized misfit between two matched point constellations after the best
/// translation, uniform scale and orthogonal transform (reflections allowed).
///
/// Both sets are centered and scaled to unit Frobenius norm; the result is
/// |A - s B R| / |A| in [0, 1], 0 for identical shapes.
inline double procrustes_residual(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError("procrustes: constellations differ in shape");
    }
    if (a.rows() < 2) {
        throw ParameterError("procrustes: need at least 2 points");
    }
    Eigen::MatrixXd ca = a.rowwise() - a.colwise().mean();
    Eigen::MatrixXd cb = b.rowwise() - b.colwise().mean();
    const double na = ca.norm();
    const double nb = cb.norm();
    if (na == 0.0 || nb == 0.0) {
        return na == nb ? 0.0 : 1.0;
    }
    ca /= na;
    cb /= nb;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(cb.transpose() * ca);
    const double trace = svd.singularValues().sum();
    return std::sqrt(std::max(0.0, 1.0 - trace * trace));
}

} // namespace trimap
