#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"

namespace trimap {

/// Row-major so that every point is a contiguous span.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = std::size_t;

inline std::span<const double> row_span(const Matrix& m, Index row) {
    return {m.data() + row * static_cast<Index>(m.cols()), static_cast<Index>(m.cols())};
}

/// Stable identifier of a point: the row it came from in the original input, plus the
/// copy channel used by the duplicate-and-shift transformation (0 = original, 1 = copy).
struct PointId {
    std::int64_t source = 0;
    int copy = 0;

    friend bool operator==(const PointId&, const PointId&) = default;
};

/// N points in D dimensions with optional integer class labels.
struct Dataset {
    Matrix points;
    std::optional<std::vector<int>> labels;
    std::vector<PointId> ids;

    Dataset() = default;

    /// Validates N >= 2, finite coordinates and label length; ids default to 0..N-1.
    explicit Dataset(Matrix pts, std::optional<std::vector<int>> lbls = std::nullopt,
                     std::vector<PointId> point_ids = {})
        : points(std::move(pts)), labels(std::move(lbls)), ids(std::move(point_ids)) {
        if (ids.empty()) {
            ids.resize(size());
            for (Index i = 0; i < size(); ++i) {
                ids[i].source = static_cast<std::int64_t>(i);
            }
        }
        validate();
    }

    Index size() const { return static_cast<Index>(points.rows()); }
    Index dims() const { return static_cast<Index>(points.cols()); }
    std::span<const double> point(Index i) const { return row_span(points, i); }
    bool has_labels() const { return labels.has_value(); }

    void validate() const {
        if (size() < 2) {
            throw ParameterError("dataset needs at least 2 points, got " + std::to_string(size()));
        }
        if (dims() < 1) {
            throw ShapeError("dataset has zero columns");
        }
        if (!points.allFinite()) {
            throw DomainError("dataset contains non-finite coordinates");
        }
        if (labels && labels->size() != size()) {
            throw ShapeError("labels length " + std::to_string(labels->size()) +
                             " does not match " + std::to_string(size()) + " points");
        }
        if (ids.size() != size()) {
            throw ShapeError("ids length does not match number of points");
        }
    }

    /// Rows `rows` in the given order, with labels and ids sliced alongside.
    Dataset select(const std::vector<Index>& rows) const {
        Matrix out(static_cast<Eigen::Index>(rows.size()), points.cols());
        std::vector<PointId> out_ids;
        out_ids.reserve(rows.size());
        std::optional<std::vector<int>> out_labels;
        if (labels) {
            out_labels.emplace();
            out_labels->reserve(rows.size());
        }
        for (Index r = 0; r < rows.size(); ++r) {
            if (rows[r] >= size()) {
                throw ParameterError("row index out of range");
            }
            out.row(static_cast<Eigen::Index>(r)) = points.row(static_cast<Eigen::Index>(rows[r]));
            out_ids.push_back(ids[rows[r]]);
            if (labels) {
                out_labels->push_back((*labels)[rows[r]]);
            }
        }
        return Dataset(std::move(out), std::move(out_labels), std::move(out_ids));
    }
};

} // namespace trimap
