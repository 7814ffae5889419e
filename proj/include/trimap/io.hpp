#pragma once

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dataset.hpp"
#include "error.hpp"
#include "eval.hpp"
#include "triplets.hpp"

/// @file io.hpp
/// @brief CSV datasets and embeddings, label files, diagnostic dumps and SVG scatter plots.

namespace trimap {

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split(std::string_view line, char delimiter) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(delimiter, start);
        cells.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) {
            break;
        }
        start = pos + 1;
    }
    return cells;
}

inline bool parse_double(std::string_view cell, double& out) {
    if (cell.empty()) {
        return false;
    }
    if (cell.front() == '+') {
        cell.remove_prefix(1);
    }
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
    return ec == std::errc() && ptr == cell.data() + cell.size();
}

inline std::ofstream open_for_write(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open '" + path + "' for writing");
    }
    return out;
}

inline void finish_write(std::ofstream& out, const std::string& path) {
    out.flush();
    if (!out) {
        throw IoError("write to '" + path + "' failed");
    }
}

inline std::string format_double(double v, const char* fmt = "%.17g") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), fmt, v);
    return buf;
}

} // namespace detail

/// Reads a rectangular numeric table, one point per row. A first row containing any
/// non-numeric cell is treated as a header and skipped. Blank lines are ignored.
inline Matrix read_csv_matrix(const std::string& path, char delimiter = ',') {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path + "'");
    }
    std::vector<double> values;
    std::size_t cols = 0;
    std::size_t rows = 0;
    std::size_t line_no = 0;
    bool first_content = true;
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) {
            continue;
        }
        const auto cells = detail::split(line, delimiter);
        std::vector<double> parsed(cells.size());
        std::optional<std::size_t> bad;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (!detail::parse_double(cells[c], parsed[c])) {
                bad = c;
                break;
            }
        }
        if (first_content) {
            first_content = false;
            if (bad) {
                continue;  // header row
            }
        }
        if (bad) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": non-numeric cell in column " +
                             std::to_string(*bad + 1) + " ('" + std::string(cells[*bad]) + "')");
        }
        if (rows == 0 && cols == 0) {
            cols = cells.size();
        } else if (cells.size() != cols) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(cols) +
                             " columns, found " + std::to_string(cells.size()));
        }
        values.insert(values.end(), parsed.begin(), parsed.end());
        ++rows;
    }
    if (rows == 0) {
        throw ParseError(path + ": empty input, no data rows");
    }
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    std::copy(values.begin(), values.end(), m.data());
    return m;
}

/// One integer label per line.
inline std::vector<int> load_labels(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path + "'");
    }
    std::vector<int> labels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto cell = detail::trim(line);
        if (cell.empty()) {
            continue;
        }
        int value = 0;
        const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
        if (ec != std::errc() || ptr != cell.data() + cell.size()) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": label is not an integer");
        }
        labels.push_back(value);
    }
    return labels;
}

inline Dataset load_csv(const std::string& path, char delimiter = ',',
                        const std::optional<std::string>& labels_path = std::nullopt) {
    Matrix points = read_csv_matrix(path, delimiter);
    std::optional<std::vector<int>> labels;
    if (labels_path) {
        labels = load_labels(*labels_path);
    }
    return Dataset(std::move(points), std::move(labels));
}

/// Writes one row per point with 17 significant digits, no header.
inline void save_csv(const Matrix& data, const std::string& path) {
    if (data.rows() == 0 || data.cols() == 0) {
        throw ParameterError("refusing to write an empty array to '" + path + "'");
    }
    auto out = detail::open_for_write(path);
    for (Eigen::Index r = 0; r < data.rows(); ++r) {
        for (Eigen::Index c = 0; c < data.cols(); ++c) {
            if (c > 0) {
                out << ',';
            }
            out << detail::format_double(data(r, c));
        }
        out << '\n';
    }
    detail::finish_write(out, path);
}

inline void save_labels(const std::vector<int>& labels, const std::string& path) {
    auto out = detail::open_for_write(path);
    for (const int l : labels) {
        out << l << '\n';
    }
    detail::finish_write(out, path);
}

/// `i,j,k,weight` diagnostic dump.
inline void save_triplets_csv(const TripletSet& set, const std::string& path) {
    auto out = detail::open_for_write(path);
    out << "i,j,k,weight\n";
    for (const auto& t : set.triplets) {
        out << t.i << ',' << t.j << ',' << t.k << ',' << detail::format_double(t.weight) << '\n';
    }
    detail::finish_write(out, path);
}

/// `iteration,loss,learning_rate`, iteration 0 being the starting point.
inline void save_trace_csv(const std::vector<double>& loss, const std::vector<double>& lr, const std::string& path) {
    if (loss.size() != lr.size()) {
        throw ShapeError("loss and learning-rate traces differ in length");
    }
    auto out = detail::open_for_write(path);
    out << "iteration,loss,learning_rate\n";
    for (std::size_t i = 0; i < loss.size(); ++i) {
        out << i << ',' << detail::format_double(loss[i]) << ',' << detail::format_double(lr[i]) << '\n';
    }
    detail::finish_write(out, path);
}

/// Fixed 20-color categorical palette; label l uses entry l mod 20.
inline constexpr std::string_view palette[20] = {
    "#1f77b4", "#aec7e8", "#ff7f0e", "#ffbb78", "#2ca02c", "#98df8a", "#d62728", "#ff9896", "#9467bd", "#c5b0d5",
    "#8c564b", "#c49c94", "#e377c2", "#f7b6d2", "#7f7f7f", "#c7c7c7", "#bcbd22", "#dbdb8d", "#17becf", "#9edae5"};

inline std::string_view label_color(int label) {
    const int idx = ((label % 20) + 20) % 20;
    return palette[idx];
}

struct ScatterPanel {
    const Matrix* coords = nullptr;
    std::string title;
};

namespace detail {

inline constexpr double panel_size = 400.0;
inline constexpr double panel_margin = 20.0;
inline constexpr double title_height = 24.0;
inline constexpr double legend_width = 110.0;

inline std::string escape_xml(std::string_view s) {
    std::string out;
    for (const char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

/// One equal-aspect scatter panel whose top-left corner is at (x0, y0).
inline void write_panel(std::ostream& out, const Matrix& coords, const std::optional<std::vector<int>>& labels,
                        const std::string& title, double x0, double y0, double point_size) {
    if (coords.cols() != 2) {
        throw ShapeError("scatter plots need 2-D coordinates, got " + std::to_string(coords.cols()));
    }
    if (coords.rows() < 1) {
        throw ParameterError("scatter plot needs at least one point");
    }
    if (labels && labels->size() != static_cast<std::size_t>(coords.rows())) {
        throw ShapeError("label count does not match point count");
    }
    const double min_x = coords.col(0).minCoeff();
    const double max_x = coords.col(0).maxCoeff();
    const double min_y = coords.col(1).minCoeff();
    const double max_y = coords.col(1).maxCoeff();
    double span = std::max(max_x - min_x, max_y - min_y);
    if (!(span > 0.0)) {
        span = 1.0;
    }
    const double cx = 0.5 * (min_x + max_x);
    const double cy = 0.5 * (min_y + max_y);
    const double inner = panel_size - 2.0 * panel_margin;
    const double scale = inner / span;
    const double ox = x0 + panel_size / 2.0;
    const double oy = y0 + title_height + panel_size / 2.0;

    out << "<g class=\"panel\">\n";
    if (!title.empty()) {
        out << "<text x=\"" << format_double(ox, "%.2f") << "\" y=\"" << format_double(y0 + 17.0, "%.2f")
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" << escape_xml(title)
            << "</text>\n";
    }
    out << "<rect x=\"" << format_double(x0, "%.2f") << "\" y=\"" << format_double(y0 + title_height, "%.2f")
        << "\" width=\"" << format_double(panel_size, "%.2f") << "\" height=\"" << format_double(panel_size, "%.2f")
        << "\" fill=\"none\" stroke=\"#cccccc\"/>\n";
    for (Eigen::Index r = 0; r < coords.rows(); ++r) {
        const double px = ox + (coords(r, 0) - cx) * scale;
        const double py = oy - (coords(r, 1) - cy) * scale;  // y axis points up
        const std::string_view color = labels ? label_color((*labels)[static_cast<std::size_t>(r)]) : palette[0];
        out << "<circle cx=\"" << format_double(px, "%.3f") << "\" cy=\"" << format_double(py, "%.3f") << "\" r=\""
            << format_double(point_size, "%.3f") << "\" fill=\"" << color << "\"/>\n";
    }
    out << "</g>\n";
}

inline void write_legend(std::ostream& out, const std::set<int>& labels, double x0, double y0) {
    out << "<g class=\"legend\">\n";
    double y = y0;
    for (const int l : labels) {
        out << "<g class=\"legend-entry\"><rect x=\"" << format_double(x0, "%.2f") << "\" y=\""
            << format_double(y, "%.2f") << "\" width=\"10\" height=\"10\" fill=\"" << label_color(l)
            << "\"/><text x=\"" << format_double(x0 + 16.0, "%.2f") << "\" y=\"" << format_double(y + 9.0, "%.2f")
            << "\" font-family=\"sans-serif\" font-size=\"11\">" << l << "</text></g>\n";
        y += 16.0;
    }
    out << "</g>\n";
}

} // namespace detail

/// Grid of equal-aspect scatter panels sharing one label vector, laid out row by row.
inline std::string scatter_grid_svg(const std::vector<ScatterPanel>& panels, Index columns,
                                    const std::optional<std::vector<int>>& labels, double point_size = 1.5) {
    if (panels.empty() || columns == 0) {
        throw ParameterError("scatter grid needs at least one panel and one column");
    }
    const Index rows = (panels.size() + columns - 1) / columns;
    const Index cols = std::min<Index>(columns, panels.size());
    std::set<int> distinct;
    if (labels) {
        distinct.insert(labels->begin(), labels->end());
    }
    const double cell_h = detail::panel_size + detail::title_height;
    const double width = static_cast<double>(cols) * detail::panel_size + (labels ? detail::legend_width : 0.0);
    const double height = std::max(static_cast<double>(rows) * cell_h, 16.0 * static_cast<double>(distinct.size()) + 20.0);

    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << detail::format_double(width, "%.0f")
        << "\" height=\"" << detail::format_double(height, "%.0f") << "\" viewBox=\"0 0 "
        << detail::format_double(width, "%.0f") << ' ' << detail::format_double(height, "%.0f") << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (Index p = 0; p < panels.size(); ++p) {
        const double x0 = static_cast<double>(p % columns) * detail::panel_size;
        const double y0 = static_cast<double>(p / columns) * cell_h;
        detail::write_panel(out, *panels[p].coords, labels, panels[p].title, x0, y0, point_size);
    }
    if (labels) {
        detail::write_legend(out, distinct, static_cast<double>(cols) * detail::panel_size + 10.0, detail::title_height);
    }
    out << "</svg>\n";
    return out.str();
}

inline std::string scatter_svg(const Matrix& coords, const std::optional<std::vector<int>>& labels,
                               double point_size = 1.5) {
    return scatter_grid_svg({ScatterPanel{&coords, ""}}, 1, labels, point_size);
}

inline void write_text(const std::string& text, const std::string& path) {
    auto out = detail::open_for_write(path);
    out << text;
    detail::finish_write(out, path);
}

/// Self-contained, byte-deterministic SVG scatter plot of 2-D coordinates.
inline void render_scatter_svg(const Matrix& coords, const std::optional<std::vector<int>>& labels,
                               const std::string& path, double point_size = 1.5) {
    write_text(scatter_svg(coords, labels, point_size), path);
}

} // namespace trimap
