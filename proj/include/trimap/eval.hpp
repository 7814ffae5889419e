#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "error.hpp"
#include "parallel.hpp"
#include "preprocess.hpp"

/// @file eval.hpp
/// @brief Mean precision-recall of neighborhood retrieval and its area under the curve.

namespace trimap {

struct PRCurve {
    Index relevant_k = 20;
    Index k_max = 100;
    std::vector<Index> ks;
    std::vector<double> mean_precision;
    std::vector<double> mean_recall;
    double auc = 0.0;
};

/// Trapezoidal area under the polyline (recall[k], precision[k]) taken in k order.
inline double trapezoid_auc(const std::vector<double>& recall, const std::vector<double>& precision) {
    double area = 0.0;
    for (Index k = 1; k < recall.size(); ++k) {
        area += 0.5 * (recall[k] - recall[k - 1]) * (precision[k] + precision[k - 1]);
    }
    return area;
}

/// For every point, the `relevant_k` exact neighbors in `high` are the relevant set and
/// the k = 1..k_max neighbors in `low` are the retrieved sets. Per-point precision and
/// recall are averaged over points in index order.
inline PRCurve precision_recall(const Matrix& high, const Matrix& low, Index relevant_k = 20, Index k_max = 100,
                                std::size_t threads = 1) {
    const Index n = static_cast<Index>(high.rows());
    if (static_cast<Index>(low.rows()) != n) {
        throw ShapeError("high and low point counts differ: " + std::to_string(n) + " vs " +
                         std::to_string(low.rows()));
    }
    if (relevant_k == 0 || relevant_k >= n) {
        throw ParameterError("relevant_k must be in [1, N-1]");
    }
    if (k_max == 0 || k_max >= n) {
        throw ParameterError("k_max must be in [1, N-1]");
    }
    const NeighborGraph high_nn = exact_knn(high, relevant_k, threads);
    const NeighborGraph low_nn = exact_knn(low, k_max, threads);

    // hits[i * k_max + (k-1)] = |relevant(i) ∩ retrieved_k(i)|
    std::vector<Index> hits(n * k_max, 0);
    parallel_chunks(n, threads, [&](Index begin, Index end, Index) {
        std::vector<char> relevant(n, 0);
        for (Index i = begin; i < end; ++i) {
            for (const Index j : high_nn.neighbors(i)) {
                relevant[j] = 1;
            }
            Index count = 0;
            const auto retrieved = low_nn.neighbors(i);
            for (Index k = 0; k < k_max; ++k) {
                count += relevant[retrieved[k]] ? 1 : 0;
                hits[i * k_max + k] = count;
            }
            for (const Index j : high_nn.neighbors(i)) {
                relevant[j] = 0;
            }
        }
    });

    PRCurve curve;
    curve.relevant_k = relevant_k;
    curve.k_max = k_max;
    curve.ks.resize(k_max);
    curve.mean_precision.assign(k_max, 0.0);
    curve.mean_recall.assign(k_max, 0.0);
    for (Index k = 0; k < k_max; ++k) {
        curve.ks[k] = k + 1;
        Index total = 0;
        for (Index i = 0; i < n; ++i) {
            total += hits[i * k_max + k];
        }
        const double mean_hits = static_cast<double>(total) / static_cast<double>(n);
        curve.mean_precision[k] = mean_hits / static_cast<double>(k + 1);
        curve.mean_recall[k] = mean_hits / static_cast<double>(relevant_k);
    }
    curve.auc = trapezoid_auc(curve.mean_recall, curve.mean_precision);
    return curve;
}

} // namespace trimap
