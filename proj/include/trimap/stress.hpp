#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "cluster.hpp"
#include "dataset.hpp"
#include "error.hpp"
#include "eval.hpp"
#include "optimizer.hpp"

/// @file stress.hpp
/// @brief Dataset transformations that probe global structure, and a runner that scores them.

namespace trimap {

enum class StressTest { subset_random, subset_classes, outlier, multiple_scales };

inline std::string to_string(StressTest test) {
    switch (test) {
    case StressTest::subset_random: return "subset_random";
    case StressTest::subset_classes: return "subset_classes";
    case StressTest::outlier: return "outlier";
    case StressTest::multiple_scales: return "multiple_scales";
    }
    return "unknown";
}

inline StressTest parse_stress_test(const std::string& name) {
    for (auto t : {StressTest::subset_random, StressTest::subset_classes, StressTest::outlier,
                   StressTest::multiple_scales}) {
        if (to_string(t) == name) {
            return t;
        }
    }
    throw ParameterError("unknown stress test '" + name + "'");
}

/// Twice the largest distance from the centroid.
inline double diameter_estimate(const Matrix& points) {
    const Eigen::RowVectorXd centroid = points.colwise().mean();
    double radius = 0.0;
    for (Eigen::Index r = 0; r < points.rows(); ++r) {
        radius = std::max(radius, (points.row(r) - centroid).norm());
    }
    return 2.0 * radius;
}

inline Eigen::RowVectorXd random_unit_vector(Index dims, std::mt19937_64& rng) {
    std::normal_distribution<double> unit(0.0, 1.0);
    Eigen::RowVectorXd v(static_cast<Eigen::Index>(dims));
    do {
        for (auto& x : v) {
            x = unit(rng);
        }
    } while (v.norm() == 0.0);
    return v.normalized();
}

/// Keeps ceil(fraction * N) points drawn uniformly without replacement, in original order.
/// fraction = 1 keeps everything.
inline Dataset subset_random(const Dataset& data, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0) || fraction > 1.0) {
        throw ParameterError("subset fraction must be in (0, 1], got " + std::to_string(fraction));
    }
    const Index n = data.size();
    const auto keep = static_cast<Index>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
    if (keep < 3) {
        throw ParameterError("subset would keep fewer than 3 points");
    }
    std::vector<Index> order(n);
    std::iota(order.begin(), order.end(), Index{0});
    std::mt19937_64 rng(seed);
    for (Index s = 0; s < keep; ++s) {
        std::uniform_int_distribution<Index> tail(s, n - 1);
        std::swap(order[s], order[tail(rng)]);
    }
    order.resize(keep);
    std::sort(order.begin(), order.end());
    return data.select(order);
}

/// Keeps the points whose label is in `keep_labels`, in original order.
inline Dataset subset_classes(const Dataset& data, const std::set<int>& keep_labels) {
    if (!data.has_labels()) {
        throw ParameterError("class subset needs a labeled dataset");
    }
    if (keep_labels.empty()) {
        throw ParameterError("class subset needs at least one label to keep");
    }
    const std::set<int> present(data.labels->begin(), data.labels->end());
    for (const int l : keep_labels) {
        if (!present.count(l)) {
            throw ParameterError("label " + std::to_string(l) + " does not occur in the dataset");
        }
    }
    std::vector<Index> rows;
    for (Index i = 0; i < data.size(); ++i) {
        if (keep_labels.count((*data.labels)[i])) {
            rows.push_back(i);
        }
    }
    return data.select(rows);
}

/// Moves one point by magnitude_factor * diameter_estimate in a uniformly random direction.
inline Dataset inject_outlier(const Dataset& data, Index point_index, double magnitude_factor, std::uint64_t seed) {
    if (point_index >= data.size()) {
        throw ParameterError("outlier index " + std::to_string(point_index) + " out of range");
    }
    if (!(magnitude_factor >= 0.0) || !std::isfinite(magnitude_factor)) {
        throw ParameterError("magnitude factor must be non-negative");
    }
    Dataset out = data;
    std::mt19937_64 rng(seed);
    const Eigen::RowVectorXd direction = random_unit_vector(data.dims(), rng);
    const double radius = magnitude_factor * diameter_estimate(data.points);
    out.points.row(static_cast<Eigen::Index>(point_index)) += radius * direction;
    return out;
}

/// Appends a copy of every point shifted by one shared random vector of length
/// magnitude_factor * diameter_estimate. Copies carry ids with copy = 1.
inline Dataset duplicate_shift(const Dataset& data, double magnitude_factor, std::uint64_t seed) {
    if (!(magnitude_factor >= 0.0) || !std::isfinite(magnitude_factor)) {
        throw ParameterError("magnitude factor must be non-negative");
    }
    const Index n = data.size();
    std::mt19937_64 rng(seed);
    const Eigen::RowVectorXd shift =
        magnitude_factor * diameter_estimate(data.points) * random_unit_vector(data.dims(), rng);
    Matrix pts(static_cast<Eigen::Index>(2 * n), data.points.cols());
    pts.topRows(static_cast<Eigen::Index>(n)) = data.points;
    pts.bottomRows(static_cast<Eigen::Index>(n)) = data.points.rowwise() + shift;

    std::vector<PointId> ids = data.ids;
    for (Index i = 0; i < n; ++i) {
        ids.push_back({data.ids[i].source, 1});
    }
    std::optional<std::vector<int>> labels;
    if (data.labels) {
        labels = *data.labels;
        labels->insert(labels->end(), data.labels->begin(), data.labels->end());
    }
    return Dataset(std::move(pts), std::move(labels), std::move(ids));
}

struct StressOptions {
    double subset_fraction = 0.5;
    /// labels kept by subset_classes; defaults to the even labels present
    std::optional<std::set<int>> keep_labels;
    Index outlier_index = 0;
    double outlier_factor = 5.0;
    double duplicate_factor = 3.0;
    std::uint64_t seed = 0;
};

struct StressReport {
    StressTest test = StressTest::subset_random;
    Dataset transformed_data;
    Embedding baseline;
    PRCurve baseline_curve;
    Embedding transformed;
    PRCurve transformed_curve;
    std::map<std::string, double> verdict_metrics;
};

namespace detail {

inline PRCurve default_curve(const Matrix& high, const Matrix& low, std::size_t threads) {
    const Index n = static_cast<Index>(high.rows());
    return precision_recall(high, low, std::min<Index>(20, n - 1), std::min<Index>(100, n - 1), threads);
}

/// Nearest-neighbor distance of every point.
inline std::vector<double> nn_distances(const Matrix& coords) {
    const NeighborGraph g = exact_knn(coords, 1);
    return g.distances;
}

inline double median(std::vector<double> v) {
    if (v.empty()) {
        throw ParameterError("median of empty set");
    }
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2 == 1) {
        return *mid;
    }
    const double upper = *mid;
    const double lower = *std::max_element(v.begin(), mid);
    return 0.5 * (lower + upper);
}

/// Centroid per group id, keyed by id.
inline std::map<int, Eigen::RowVectorXd> group_centroids(const Matrix& coords, const std::vector<int>& groups) {
    std::map<int, Eigen::RowVectorXd> sums;
    std::map<int, double> counts;
    for (Index i = 0; i < groups.size(); ++i) {
        auto [it, inserted] = sums.try_emplace(groups[i], Eigen::RowVectorXd::Zero(coords.cols()));
        it->second += coords.row(static_cast<Eigen::Index>(i));
        counts[groups[i]] += 1.0;
    }
    for (auto& [g, s] : sums) {
        s /= counts[g];
    }
    return sums;
}

} // namespace detail

/// Procrustes residual between the group-centroid constellations of two embeddings,
/// restricted to the groups present in both.
inline double centroid_procrustes(const Matrix& base_coords, const std::vector<int>& base_groups,
                                  const Matrix& other_coords, const std::vector<int>& other_groups,
                                  Index* shared_count = nullptr) {
    const auto a = detail::group_centroids(base_coords, base_groups);
    const auto b = detail::group_centroids(other_coords, other_groups);
    std::vector<int> shared;
    for (const auto& [g, _] : a) {
        if (b.count(g)) {
            shared.push_back(g);
        }
    }
    if (shared_count != nullptr) {
        *shared_count = shared.size();
    }
    if (shared.size() < 2) {
        throw ParameterError("Procrustes comparison needs at least 2 shared groups");
    }
    Matrix ca(static_cast<Eigen::Index>(shared.size()), base_coords.cols());
    Matrix cb(static_cast<Eigen::Index>(shared.size()), other_coords.cols());
    for (Index r = 0; r < shared.size(); ++r) {
        ca.row(static_cast<Eigen::Index>(r)) = a.at(shared[r]);
        cb.row(static_cast<Eigen::Index>(r)) = b.at(shared[r]);
    }
    return procrustes_residual(ca, cb);
}

/// Ratio of a point's nearest-neighbor distance to the median nearest-neighbor distance of the others.
inline double outlier_nn_ratio(const Matrix& coords, Index point) {
    const auto nn = detail::nn_distances(coords);
    std::vector<double> others;
    others.reserve(nn.size() - 1);
    for (Index i = 0; i < nn.size(); ++i) {
        if (i != point) {
            others.push_back(nn[i]);
        }
    }
    const double med = detail::median(others);
    return med > 0.0 ? nn[point] / med : std::numeric_limits<double>::infinity();
}

/// Groups used to compare cluster layouts: ground-truth labels, else two-means ids on the
/// high-dimensional baseline, looked up by source id.
inline std::vector<int> stress_groups(const Dataset& baseline, const Dataset& subset, std::uint64_t seed) {
    if (baseline.has_labels()) {
        return *subset.labels;
    }
    const auto clusters = kmeans(baseline.points, 2, seed).assignment;
    std::map<std::int64_t, int> by_source;
    for (Index i = 0; i < baseline.size(); ++i) {
        by_source[baseline.ids[i].source] = clusters[i];
    }
    std::vector<int> out;
    out.reserve(subset.size());
    for (const auto& id : subset.ids) {
        out.push_back(by_source.at(id.source));
    }
    return out;
}

/// Embeds the dataset and each transformed version with the same configuration and scores them.
inline std::vector<StressReport> run_stress_suite(const Dataset& data, const EmbedConfig& config,
                                                  const std::vector<StressTest>& tests,
                                                  const StressOptions& options = {}) {
    for (const auto t : tests) {
        if (t == StressTest::subset_classes && !data.has_labels()) {
            throw ParameterError("subset_classes needs labels");
        }
    }
    std::vector<StressReport> reports;
    if (tests.empty()) {
        return reports;
    }
    const Embedding baseline = embed(data, config);
    const PRCurve baseline_curve = detail::default_curve(data.points, baseline.coords, config.threads);
    const std::vector<int> baseline_groups = stress_groups(data, data, options.seed);

    for (const auto test : tests) {
        StressReport report;
        report.test = test;
        report.baseline = baseline;
        report.baseline_curve = baseline_curve;
        switch (test) {
        case StressTest::subset_random:
            report.transformed_data = subset_random(data, options.subset_fraction, options.seed);
            break;
        case StressTest::subset_classes: {
            std::set<int> keep;
            if (options.keep_labels) {
                keep = *options.keep_labels;
            } else {
                for (const int l : *data.labels) {
                    if (l % 2 == 0) {
                        keep.insert(l);
                    }
                }
            }
            report.transformed_data = subset_classes(data, keep);
            break;
        }
        case StressTest::outlier:
            report.transformed_data =
                inject_outlier(data, options.outlier_index, options.outlier_factor, options.seed);
            break;
        case StressTest::multiple_scales:
            report.transformed_data = duplicate_shift(data, options.duplicate_factor, options.seed);
            break;
        }
        const Dataset& moved = report.transformed_data;
        report.transformed = embed(moved, config);
        report.transformed_curve = detail::default_curve(moved.points, report.transformed.coords, config.threads);
        auto& metrics = report.verdict_metrics;
        metrics["baseline_auc"] = baseline_curve.auc;
        metrics["transformed_auc"] = report.transformed_curve.auc;

        switch (test) {
        case StressTest::subset_random:
        case StressTest::subset_classes: {
            Index shared = 0;
            const auto groups = stress_groups(data, moved, options.seed);
            metrics["procrustes_residual"] =
                centroid_procrustes(baseline.coords, baseline_groups, report.transformed.coords, groups, &shared);
            metrics["shared_groups"] = static_cast<double>(shared);
            break;
        }
        case StressTest::outlier:
            metrics["outlier_nn_ratio"] = outlier_nn_ratio(report.transformed.coords, options.outlier_index);
            metrics["outlier_nn_ratio_high"] = outlier_nn_ratio(moved.points, options.outlier_index);
            break;
        case StressTest::multiple_scales: {
            std::vector<int> copy(moved.size());
            for (Index i = 0; i < moved.size(); ++i) {
                copy[i] = moved.ids[i].copy;
            }
            metrics["copy_agreement"] = kmeans_agreement(report.transformed.coords, copy, options.seed);
            if (moved.has_labels()) {
                const Index n = data.size();
                double worst = 1.0;
                for (Index c = 0; c < 2; ++c) {
                    const Matrix part = report.transformed.coords.middleRows(static_cast<Eigen::Index>(c * n),
                                                                             static_cast<Eigen::Index>(n));
                    worst = std::min(worst, kmeans_agreement(part, *data.labels, options.seed));
                }
                metrics["within_copy_agreement"] = worst;
            }
            break;
        }
        }
        reports.push_back(std::move(report));
    }
    return reports;
}

} // namespace trimap
