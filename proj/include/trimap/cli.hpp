#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cluster.hpp"
#include "dataset.hpp"
#include "error.hpp"
#include "eval.hpp"
#include "io.hpp"
#include "optimizer.hpp"
#include "preprocess.hpp"
#include "stress.hpp"

/// @file cli.hpp
/// @brief The `trimap` command line: embed, eval, test, plot and sweep.

namespace trimap::cli {

using json = nlohmann::ordered_json;

inline std::string to_string(InitMethod m) { return m == InitMethod::pca ? "pca" : "random"; }
inline std::string to_string(GradientMode m) { return m == GradientMode::deterministic ? "deterministic" : "chunked"; }

inline json config_json(const EmbedConfig& c) {
    return json{{"out_dims", c.out_dims},   {"t", c.t},
                {"t_prime", c.t_prime},     {"m", c.m},
                {"m_prime", c.m_prime},     {"s", c.s},
                {"gamma", c.gamma},         {"iterations", c.iterations},
                {"seed", c.seed},           {"init", to_string(c.init)},
                {"lr_initial", c.lr_initial}, {"pca_dim", c.pca_dim},
                {"threads", c.threads},     {"gradient_mode", to_string(c.gradient_mode)}};
}

inline json curve_json(const PRCurve& curve) {
    json points = json::array();
    for (std::size_t k = 0; k < curve.ks.size(); ++k) {
        points.push_back(json::array({curve.ks[k], curve.mean_precision[k], curve.mean_recall[k]}));
    }
    return json{{"relevant_k", curve.relevant_k}, {"k_max", curve.k_max}, {"curve", points}, {"auc", curve.auc}};
}

inline std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Record written next to every output so a run can be replayed.
struct RunManifest {
    std::string command;
    std::vector<std::string> argv;
    std::optional<EmbedConfig> config;
    std::vector<std::string> input_paths;
    std::vector<std::string> output_paths;
    std::string started;
    std::string finished;
    std::optional<std::uint64_t> seed;

    json to_json() const {
        json j{{"command", command}, {"argv", argv}};
        j["config"] = config ? config_json(*config) : json(nullptr);
        j["input_paths"] = input_paths;
        j["output_paths"] = output_paths;
        j["timestamps"] = {{"start", started}, {"end", finished}};
        j["seed"] = seed ? json(*seed) : json(nullptr);
        return j;
    }

    void write(const std::string& path) const { write_text(to_json().dump(2) + "\n", path); }
};

/// Scales the whole array linearly to [0, 1] (one global range, as for pixel intensities).
inline void normalize_minmax(Matrix& points) {
    const double lo = points.minCoeff();
    const double hi = points.maxCoeff();
    if (hi > lo) {
        points = (points.array() - lo) / (hi - lo);
    } else {
        points.setZero();
    }
}

/// Raised for invalid flag values detected after parsing; maps to exit code 2.
class UsageError : public Error {
public:
    using Error::Error;
};

/// Config flags shared by embed, test and sweep.
struct ConfigFlags {
    EmbedConfig config;
    std::string init = "pca";
    std::string gradient_mode = "deterministic";

    void add(CLI::App& app, bool with_kernel = true) {
        app.add_option("--dims", config.out_dims, "output dimensions")->capture_default_str();
        if (with_kernel) {
            app.add_option("--t", config.t, "loss transformation parameter t")->capture_default_str();
            app.add_option("--t-prime", config.t_prime, "similarity tail parameter t'")->capture_default_str();
        }
        app.add_option("--m", config.m, "nearest neighbors per point used as near points")->capture_default_str();
        app.add_option("--m-prime", config.m_prime, "far points sampled per near point")->capture_default_str();
        app.add_option("--s", config.s, "random triplets per point")->capture_default_str();
        app.add_option("--gamma", config.gamma, "weight bias")->capture_default_str();
        app.add_option("--iters", config.iterations, "descent iterations")->capture_default_str();
        app.add_option("--seed", config.seed, "random seed")->capture_default_str();
        app.add_option("--init", init, "initialization")
            ->check(CLI::IsMember({"pca", "random"}))
            ->capture_default_str();
        app.add_option("--pca", config.pca_dim, "PCA pre-reduction dimension (0 disables)")->capture_default_str();
        app.add_option("--lr", config.lr_initial, "initial learning rate")->capture_default_str();
        app.add_option("--threads", config.threads, "worker threads (0 = all available)")->capture_default_str();
        app.add_option("--gradient-mode", gradient_mode, "loss/gradient accumulation")
            ->check(CLI::IsMember({"deterministic", "chunked"}))
            ->capture_default_str();
    }

    EmbedConfig resolve() const {
        EmbedConfig c = config;
        c.init = init == "random" ? InitMethod::random : InitMethod::pca;
        c.gradient_mode = gradient_mode == "chunked" ? GradientMode::chunked : GradientMode::deterministic;
        try {
            c.validate();
        } catch (const ParameterError& e) {
            throw UsageError(e.what());
        }
        return c;
    }
};

struct InputFlags {
    std::string input;
    std::string labels;
    std::string normalize = "none";
    char delimiter = ',';

    void add(CLI::App& app) {
        app.add_option("--input", input, "dataset CSV, one point per row")->required()->check(CLI::ExistingFile);
        app.add_option("--labels", labels, "labels file, one integer per line")->check(CLI::ExistingFile);
        app.add_option("--normalize", normalize, "input normalization")
            ->check(CLI::IsMember({"none", "minmax"}))
            ->capture_default_str();
        app.add_option("--delimiter", delimiter, "CSV delimiter")->capture_default_str();
    }

    Dataset load() const {
        Dataset data = load_csv(input, delimiter, labels.empty() ? std::nullopt : std::optional<std::string>(labels));
        if (normalize == "minmax") {
            normalize_minmax(data.points);
        }
        return data;
    }

    std::vector<std::string> paths() const {
        std::vector<std::string> p{input};
        if (!labels.empty()) {
            p.push_back(labels);
        }
        return p;
    }
};

inline std::vector<double> parse_list(const std::string& text, const std::string& flag) {
    std::vector<double> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        double v = 0.0;
        if (!detail::parse_double(detail::trim(item), v)) {
            throw UsageError(flag + ": '" + item + "' is not a number");
        }
        values.push_back(v);
    }
    if (values.empty()) {
        throw UsageError(flag + ": empty list");
    }
    return values;
}

inline std::string cell_tag(double t, double t_prime) {
    return "t" + detail::format_double(t, "%g") + "_tp" + detail::format_double(t_prime, "%g");
}

inline void ensure_directory(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create directory '" + dir + "': " + ec.message());
    }
}

inline std::string join_path(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

/// Entry point; returns the process exit code. Diagnostics go to `err`, summaries to `out`.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Triplet-based dimensionality reduction", "trimap"};
    app.require_subcommand(1);
    RunManifest manifest;
    manifest.argv.assign(argv, argv + argc);
    manifest.started = utc_now();

    // embed
    auto* embed_cmd = app.add_subcommand("embed", "embed a dataset");
    InputFlags embed_in;
    ConfigFlags embed_cfg;
    std::string embed_output, embed_trace, embed_dump, embed_svg;
    embed_in.add(*embed_cmd);
    embed_cfg.add(*embed_cmd);
    embed_cmd->add_option("--output", embed_output, "embedding CSV")->required();
    embed_cmd->add_option("--trace", embed_trace, "loss trace CSV");
    embed_cmd->add_option("--dump-triplets", embed_dump, "triplet CSV (i,j,k,weight)");
    embed_cmd->add_option("--svg", embed_svg, "scatter plot of a 2-D embedding");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "mean precision-recall of an embedding");
    std::string eval_high, eval_low, eval_output;
    Index eval_relevant = 20, eval_kmax = 100;
    std::string eval_normalize = "none";
    eval_cmd->add_option("--input", eval_high, "high-dimensional CSV")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--embedding", eval_low, "embedding CSV")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--output", eval_output, "PR JSON (stdout when omitted)");
    eval_cmd->add_option("--relevant-k", eval_relevant, "high-dimensional neighborhood size")->capture_default_str();
    eval_cmd->add_option("--k-max", eval_kmax, "largest low-dimensional neighborhood")->capture_default_str();
    eval_cmd->add_option("--normalize", eval_normalize, "input normalization")
        ->check(CLI::IsMember({"none", "minmax"}))
        ->capture_default_str();
    std::size_t eval_threads = 0;
    eval_cmd->add_option("--threads", eval_threads, "worker threads (0 = all available)")->capture_default_str();

    // test
    auto* test_cmd = app.add_subcommand("test", "run the global-structure stress tests");
    InputFlags test_in;
    ConfigFlags test_cfg;
    StressOptions test_opts;
    std::string test_dir, test_list = "subset_random,subset_classes,outlier,multiple_scales", test_keep;
    test_in.add(*test_cmd);
    test_cfg.add(*test_cmd);
    test_cmd->add_option("--output-dir", test_dir, "directory for report JSON and SVGs")->required();
    test_cmd->add_option("--tests", test_list, "comma-separated tests")->capture_default_str();
    test_cmd->add_option("--fraction", test_opts.subset_fraction, "subset_random fraction")->capture_default_str();
    test_cmd->add_option("--keep-labels", test_keep, "subset_classes labels (default: even labels)");
    test_cmd->add_option("--outlier-index", test_opts.outlier_index, "point moved by the outlier test")
        ->capture_default_str();
    test_cmd->add_option("--outlier-factor", test_opts.outlier_factor, "outlier shift / diameter")
        ->capture_default_str();
    test_cmd->add_option("--duplicate-factor", test_opts.duplicate_factor, "copy shift / diameter")
        ->capture_default_str();
    test_cmd->add_option("--transform-seed", test_opts.seed, "seed of the dataset transformations")
        ->capture_default_str();

    // plot
    auto* plot_cmd = app.add_subcommand("plot", "scatter plot of a 2-D embedding");
    std::string plot_input, plot_labels, plot_output;
    double point_size = 1.5;
    plot_cmd->add_option("--input", plot_input, "embedding CSV")->required()->check(CLI::ExistingFile);
    plot_cmd->add_option("--labels", plot_labels, "labels file")->check(CLI::ExistingFile);
    plot_cmd->add_option("--output", plot_output, "SVG path")->required();
    plot_cmd->add_option("--point-size", point_size, "marker radius")->capture_default_str();

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "grid of embeddings over t and t'");
    InputFlags sweep_in;
    ConfigFlags sweep_cfg;
    std::string sweep_dir, sweep_t = "0,0.5,1,2", sweep_tp = "1,2,4";
    sweep_in.add(*sweep_cmd);
    sweep_cfg.add(*sweep_cmd, false);
    sweep_cmd->add_option("--output-dir", sweep_dir, "directory for cell SVGs and the grid")->required();
    sweep_cmd->add_option("--t", sweep_t, "comma-separated t values")->capture_default_str();
    sweep_cmd->add_option("--t-prime", sweep_tp, "comma-separated t' values")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "trimap: usage error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (*embed_cmd) {
            manifest.command = "embed";
            const EmbedConfig config = embed_cfg.resolve();
            const Dataset data = embed_in.load();
            const Embedding result = embed(data, config);
            save_csv(result.coords, embed_output);
            manifest.output_paths.push_back(embed_output);
            if (!embed_trace.empty()) {
                save_trace_csv(result.loss_trace, result.lr_trace, embed_trace);
                manifest.output_paths.push_back(embed_trace);
            }
            if (!embed_dump.empty()) {
                save_triplets_csv(result.triplets, embed_dump);
                manifest.output_paths.push_back(embed_dump);
            }
            if (!embed_svg.empty()) {
                render_scatter_svg(result.coords, data.labels, embed_svg);
                manifest.output_paths.push_back(embed_svg);
            }
            manifest.config = config;
            manifest.seed = config.seed;
            manifest.input_paths = embed_in.paths();
            out << "embedded " << data.size() << " points, " << result.triplets.size() << " triplets, loss "
                << result.loss_trace.front() << " -> " << result.loss_trace.back() << "\n";
            manifest.finished = utc_now();
            manifest.write(embed_output + ".manifest.json");
        } else if (*eval_cmd) {
            manifest.command = "eval";
            Matrix high = read_csv_matrix(eval_high);
            if (eval_normalize == "minmax") {
                normalize_minmax(high);
            }
            const Matrix low = read_csv_matrix(eval_low);
            if (high.rows() != low.rows()) {
                throw ShapeError("input has " + std::to_string(high.rows()) + " rows, embedding has " +
                                 std::to_string(low.rows()));
            }
            const Index n = static_cast<Index>(high.rows());
            if (eval_relevant == 0 || eval_relevant >= n || eval_kmax == 0) {
                throw UsageError("--relevant-k must be in [1, N-1] and --k-max positive");
            }
            const PRCurve curve = precision_recall(high, low, eval_relevant, std::min(eval_kmax, n - 1), eval_threads);
            const std::string text = curve_json(curve).dump(2) + "\n";
            manifest.input_paths = {eval_high, eval_low};
            if (eval_output.empty()) {
                out << text;
            } else {
                write_text(text, eval_output);
                manifest.output_paths.push_back(eval_output);
                manifest.finished = utc_now();
                manifest.write(eval_output + ".manifest.json");
                out << "AUC " << curve.auc << "\n";
            }
        } else if (*test_cmd) {
            manifest.command = "test";
            const EmbedConfig config = test_cfg.resolve();
            const Dataset data = test_in.load();
            std::vector<StressTest> tests;
            for (std::stringstream ss(test_list); std::getline(ss, test_list, ',');) {
                try {
                    tests.push_back(parse_stress_test(std::string(detail::trim(test_list))));
                } catch (const ParameterError& e) {
                    throw UsageError(e.what());
                }
            }
            if (!test_keep.empty()) {
                std::set<int> keep;
                for (const double v : parse_list(test_keep, "--keep-labels")) {
                    keep.insert(static_cast<int>(v));
                }
                test_opts.keep_labels = keep;
            }
            ensure_directory(test_dir);
            const auto reports = run_stress_suite(data, config, tests, test_opts);
            json doc = json::array();
            if (!reports.empty()) {
                const std::string base_svg = join_path(test_dir, "baseline.svg");
                if (config.out_dims == 2) {
                    render_scatter_svg(reports.front().baseline.coords, data.labels, base_svg);
                    manifest.output_paths.push_back(base_svg);
                }
            }
            for (const auto& r : reports) {
                json metrics = json::object();
                for (const auto& [k, v] : r.verdict_metrics) {
                    metrics[k] = v;
                }
                json entry{{"test_name", to_string(r.test)},
                           {"baseline_auc", r.baseline_curve.auc},
                           {"transformed_auc", r.transformed_curve.auc},
                           {"baseline_points", r.baseline.coords.rows()},
                           {"transformed_points", r.transformed.coords.rows()},
                           {"verdict_metrics", metrics}};
                if (config.out_dims == 2) {
                    const std::string svg = join_path(test_dir, to_string(r.test) + ".svg");
                    std::optional<std::vector<int>> colors = r.transformed_data.labels;
                    if (r.test == StressTest::multiple_scales && !colors) {
                        colors.emplace();
                        for (const auto& id : r.transformed_data.ids) {
                            colors->push_back(id.copy);
                        }
                    }
                    render_scatter_svg(r.transformed.coords, colors, svg);
                    entry["svg"] = svg;
                    manifest.output_paths.push_back(svg);
                }
                doc.push_back(entry);
            }
            const std::string report_path = join_path(test_dir, "stress.json");
            write_text(doc.dump(2) + "\n", report_path);
            manifest.output_paths.push_back(report_path);
            manifest.config = config;
            manifest.seed = config.seed;
            manifest.input_paths = test_in.paths();
            manifest.finished = utc_now();
            manifest.write(join_path(test_dir, "manifest.json"));
            for (const auto& r : reports) {
                out << to_string(r.test);
                for (const auto& [k, v] : r.verdict_metrics) {
                    out << " " << k << "=" << v;
                }
                out << "\n";
            }
        } else if (*plot_cmd) {
            manifest.command = "plot";
            const Matrix coords = read_csv_matrix(plot_input);
            std::optional<std::vector<int>> labels;
            if (!plot_labels.empty()) {
                labels = load_labels(plot_labels);
            }
            render_scatter_svg(coords, labels, plot_output, point_size);
            manifest.input_paths.push_back(plot_input);
            manifest.output_paths.push_back(plot_output);
            manifest.finished = utc_now();
            manifest.write(plot_output + ".manifest.json");
        } else if (*sweep_cmd) {
            manifest.command = "sweep";
            const auto ts = parse_list(sweep_t, "--t");
            const auto tps = parse_list(sweep_tp, "--t-prime");
            EmbedConfig base = sweep_cfg.resolve();
            for (const double t : ts) {
                for (const double tp : tps) {
                    try {
                        KernelParams{t, tp}.validate();
                    } catch (const ParameterError& e) {
                        throw UsageError(e.what());
                    }
                }
            }
            if (base.out_dims != 2) {
                throw UsageError("sweep renders 2-D embeddings; --dims must be 2");
            }
            const Dataset data = sweep_in.load();
            ensure_directory(sweep_dir);
            std::vector<Matrix> cells;
            std::vector<std::string> titles;
            json doc = json::array();
            // rows follow t', columns follow t
            for (const double tp : tps) {
                for (const double t : ts) {
                    EmbedConfig config = base;
                    config.t = t;
                    config.t_prime = tp;
                    const Embedding result = embed(data, config);
                    const std::string tag = cell_tag(t, tp);
                    const std::string csv = join_path(sweep_dir, tag + ".csv");
                    const std::string svg = join_path(sweep_dir, tag + ".svg");
                    save_csv(result.coords, csv);
                    render_scatter_svg(result.coords, data.labels, svg);
                    manifest.output_paths.push_back(csv);
                    manifest.output_paths.push_back(svg);
                    json cell{{"t", t},
                              {"t_prime", tp},
                              {"embedding", csv},
                              {"svg", svg},
                              {"initial_loss", result.loss_trace.front()},
                              {"final_loss", result.loss_trace.back()}};
                    if (data.labels) {
                        cell["label_agreement"] = kmeans_agreement(result.coords, *data.labels, config.seed);
                    }
                    doc.push_back(cell);
                    out << tag << " loss " << result.loss_trace.back() << "\n";
                    cells.push_back(result.coords);
                    titles.push_back("t = " + detail::format_double(t, "%g") +
                                     ", t' = " + detail::format_double(tp, "%g"));
                }
            }
            std::vector<ScatterPanel> panels;
            for (std::size_t c = 0; c < cells.size(); ++c) {
                panels.push_back({&cells[c], titles[c]});
            }
            const std::string grid = join_path(sweep_dir, "grid.svg");
            write_text(scatter_grid_svg(panels, ts.size(), data.labels), grid);
            const std::string summary = join_path(sweep_dir, "sweep.json");
            write_text(doc.dump(2) + "\n", summary);
            manifest.output_paths.push_back(grid);
            manifest.output_paths.push_back(summary);
            manifest.config = base;
            manifest.seed = base.seed;
            manifest.input_paths = sweep_in.paths();
            manifest.finished = utc_now();
            manifest.write(join_path(sweep_dir, "manifest.json"));
        }
    } catch (const UsageError& e) {
        err << "trimap: usage error: " << e.what() << "\n";
        return 2;
    } catch (const ParameterError& e) {
        err << "trimap: usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "trimap: error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

} // namespace trimap::cli
