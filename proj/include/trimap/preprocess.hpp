#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "core_math.hpp"
#include "dataset.hpp"
#include "error.hpp"
#include "parallel.hpp"

/// @file preprocess.hpp
/// @brief PCA reduction, exact k-nearest neighbors and per-point scales.

namespace trimap {

/// Principal axes of a point cloud, ordered by decreasing variance.
struct PcaModel {
    Vector mean;
    Matrix components;   ///< D x k, column c is the c-th principal axis
    Vector eigenvalues;  ///< k covariance eigenvalues, descending

    Matrix project(const Matrix& points) const {
        return (points.rowwise() - mean.transpose()) * components;
    }

    Matrix back_project(const Matrix& scores) const {
        Matrix out = scores * components.transpose();
        out.rowwise() += mean.transpose();
        return out;
    }
};

/// Fits the top `target_dim` principal axes by eigendecomposition of the sample covariance.
/// Each axis is sign-fixed so that its largest-magnitude entry is positive.
inline PcaModel pca_fit(const Matrix& points, Index target_dim) {
    const auto n = points.rows();
    const auto d = points.cols();
    if (n < 2) {
        throw ParameterError("PCA needs at least 2 points");
    }
    if (target_dim == 0) {
        throw ParameterError("PCA target dimension must be positive");
    }
    const Index k = std::min<Index>(target_dim, static_cast<Index>(d));

    PcaModel model;
    model.mean = points.colwise().mean().transpose();
    const Matrix centered = points.rowwise() - model.mean.transpose();
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) {
        throw NumericError("PCA eigendecomposition failed");
    }
    // eigenvalues come back ascending
    model.components.resize(d, static_cast<Eigen::Index>(k));
    model.eigenvalues.resize(static_cast<Eigen::Index>(k));
    for (Index c = 0; c < k; ++c) {
        const auto src = d - 1 - static_cast<Eigen::Index>(c);
        Eigen::VectorXd axis = solver.eigenvectors().col(src);
        Eigen::Index arg = 0;
        axis.cwiseAbs().maxCoeff(&arg);
        if (axis[arg] < 0.0) {
            axis = -axis;
        }
        model.components.col(static_cast<Eigen::Index>(c)) = axis;
        model.eigenvalues[static_cast<Eigen::Index>(c)] = std::max(0.0, solver.eigenvalues()[src]);
    }
    return model;
}

/// Projects the data onto its top `target_dim` principal components.
/// Returns the input unchanged when it already has at most `target_dim` columns.
inline Dataset pca_reduce(const Dataset& data, Index target_dim) {
    if (target_dim == 0) {
        throw ParameterError("PCA target dimension must be positive");
    }
    if (data.size() < 2) {
        throw ParameterError("PCA needs at least 2 points");
    }
    if (data.dims() <= target_dim) {
        return data;
    }
    const PcaModel model = pca_fit(data.points, target_dim);
    return Dataset(model.project(data.points), data.labels, data.ids);
}

/// Per-point sorted neighbor lists and adaptive scales.
struct NeighborGraph {
    Index n = 0;
    Index k = 0;
    std::vector<Index> indices;     ///< n x k, row-major
    std::vector<double> distances;  ///< n x k Euclidean distances, non-decreasing per row
    std::vector<double> sigma;      ///< n scales, filled by compute_sigma

    std::span<const Index> neighbors(Index i) const { return {indices.data() + i * k, k}; }
    std::span<const double> neighbor_distances(Index i) const { return {distances.data() + i * k, k}; }
};

/// Exact Euclidean k-nearest neighbors of every point, self excluded.
/// Ties are broken by ascending point index.
inline NeighborGraph exact_knn(const Matrix& points, Index k, std::size_t threads = 1) {
    const Index n = static_cast<Index>(points.rows());
    if (k == 0) {
        throw ParameterError("k must be positive");
    }
    if (k >= n) {
        throw ParameterError("k = " + std::to_string(k) + " must be smaller than N = " + std::to_string(n));
    }
    NeighborGraph graph;
    graph.n = n;
    graph.k = k;
    graph.indices.resize(n * k);
    graph.distances.resize(n * k);

    parallel_chunks(n, threads, [&](Index begin, Index end, Index) {
        std::vector<std::pair<double, Index>> candidates(n - 1);
        for (Index i = begin; i < end; ++i) {
            const auto xi = row_span(points, i);
            Index c = 0;
            for (Index j = 0; j < n; ++j) {
                if (j != i) {
                    candidates[c++] = {squared_distance(xi, row_span(points, j)), j};
                }
            }
            std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k),
                              candidates.end());
            for (Index r = 0; r < k; ++r) {
                graph.indices[i * k + r] = candidates[r].second;
                graph.distances[i * k + r] = std::sqrt(candidates[r].first);
            }
        }
    });
    return graph;
}

inline NeighborGraph exact_knn(const Dataset& data, Index k, std::size_t threads = 1) {
    return exact_knn(data.points, k, threads);
}

/// Ranks (1-indexed, self excluded) whose distances are averaged into sigma.
inline constexpr Index sigma_first_rank = 10;
inline constexpr Index sigma_last_rank = 20;
inline constexpr double sigma_floor = 1e-12;

/// Sets sigma[i] to the mean distance from point i to its 10th..20th nearest neighbors.
/// With fewer than 20 neighbors, ranks min(10, K)..K are used.
inline NeighborGraph compute_sigma(NeighborGraph graph) {
    if (graph.k == 0 || graph.n == 0 || graph.distances.size() != graph.n * graph.k) {
        throw ParameterError("malformed neighbor graph: empty neighbor rows");
    }
    const Index first = std::min(sigma_first_rank, graph.k);
    const Index last = std::min(sigma_last_rank, graph.k);
    graph.sigma.assign(graph.n, 0.0);
    for (Index i = 0; i < graph.n; ++i) {
        const auto row = graph.neighbor_distances(i);
        double acc = 0.0;
        for (Index r = first; r <= last; ++r) {
            acc += row[r - 1];
        }
        graph.sigma[i] = std::max(sigma_floor, acc / static_cast<double>(last - first + 1));
    }
    return graph;
}

} // namespace trimap
