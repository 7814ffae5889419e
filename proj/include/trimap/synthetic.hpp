#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "dataset.hpp"

namespace trimap {

/// Isotropic Gaussian blobs with centers drawn on a sphere of radius `separation / sqrt(2)`,
/// so that blob centers sit about `separation` apart. Points are grouped by blob, labels 0..blobs-1.
inline Dataset gaussian_blobs(Index n, Index dims, Index blobs, double separation, std::uint64_t seed,
                              double stddev = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> unit(0.0, 1.0);
    Matrix centers(static_cast<Eigen::Index>(blobs), static_cast<Eigen::Index>(dims));
    for (Index b = 0; b < blobs; ++b) {
        Eigen::VectorXd v(static_cast<Eigen::Index>(dims));
        for (auto& x : v) {
            x = unit(rng);
        }
        centers.row(static_cast<Eigen::Index>(b)) = v.normalized().transpose() * (separation / std::sqrt(2.0));
    }
    Matrix pts(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dims));
    std::vector<int> labels(n);
    for (Index i = 0; i < n; ++i) {
        const Index b = i * blobs / n;
        labels[i] = static_cast<int>(b);
        for (Index c = 0; c < dims; ++c) {
            pts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
                centers(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(c)) + stddev * unit(rng);
        }
    }
    return Dataset(std::move(pts), std::move(labels));
}

/// Gaussian blobs around the given centers (one row per blob, N split evenly in blob order).
inline Dataset blobs_at(const Matrix& centers, Index n, std::uint64_t seed, double stddev = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> unit(0.0, 1.0);
    const Index blobs = static_cast<Index>(centers.rows());
    Matrix pts(static_cast<Eigen::Index>(n), centers.cols());
    std::vector<int> labels(n);
    for (Index i = 0; i < n; ++i) {
        const Index b = i * blobs / n;
        labels[i] = static_cast<int>(b);
        for (Eigen::Index c = 0; c < centers.cols(); ++c) {
            pts(static_cast<Eigen::Index>(i), c) = centers(static_cast<Eigen::Index>(b), c) + stddev * unit(rng);
        }
    }
    return Dataset(std::move(pts), std::move(labels));
}

/// Three blobs in `dims` dimensions whose centers form a scalene triangle with sides
/// 10, 20 and about 22.4 (in units of the blob standard deviation), so the arrangement
/// of the clusters is unambiguous.
inline Dataset three_blobs(Index n, Index dims, std::uint64_t seed) {
    Matrix centers = Matrix::Zero(3, static_cast<Eigen::Index>(dims));
    centers(1, 0) = 10.0;
    centers(2, 1) = 20.0;
    return blobs_at(centers, n, seed);
}

} // namespace trimap
