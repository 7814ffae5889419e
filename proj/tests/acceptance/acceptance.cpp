// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include <trimap/trimap.hpp>

#include "oracles.hpp"

using namespace trimap;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

struct Criterion {
    int id;
    std::string name;
    double budget_seconds;
    std::function<Outcome()> run;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

fs::path work_dir() {
    static const fs::path dir = [] {
        const fs::path d = fs::temp_directory_path() / "trimap_acceptance";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int shell(const std::string& cmd) {
    const int status = std::system((cmd + " > /dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome function_family() {
    Outcome o;
    double worst_log = 0.0, worst_exp = 0.0;
    for (double x = 1e-6; x < 1e6; x *= 1.37) {
        worst_log = std::max(worst_log, std::abs(log_t(x, 1.0) - std::log(x)));
    }
    for (double x = -30.0; x < 30.0; x += 0.173) {
        worst_exp = std::max(worst_exp, std::abs(exp_t(x, 1.0) - std::exp(x)) / std::max(1.0, std::exp(x)));
    }
    o.pass = worst_log <= 1e-12 && worst_exp <= 1e-12;

    double prev = -1.0;
    for (double x = 1.0; x <= 1e12; x *= 10.0) {
        const double v = log_t(x, 2.0);
        if (!(v < 1.0) || !(v >= prev)) {
            o.pass = false;
        }
        prev = v;
    }
    const double at_max = log_t(1e12, 2.0);
    o.pass = o.pass && std::abs(at_max - 1.0) < 1e-11;

    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> lx(-8.0, 8.0), lt(0.0, 4.0);
    int violations = 0;
    for (int d = 0; d < 1000; ++d) {
        const double t = lt(rng);
        double a = std::exp(lx(rng)), b = std::exp(lx(rng));
        if (a > b) {
            std::swap(a, b);
        }
        if (a == b) {
            continue;
        }
        const double la = log_t(a, t), lb = log_t(b, t), lm = log_t(0.5 * (a + b), t);
        const double tol = 1e-12 * std::max({1.0, std::abs(la), std::abs(lb)});
        if (!(lb > la) || lm + tol < 0.5 * (la + lb) || std::abs(exp_t(la, t) - a) > 1e-8 * a) {
            ++violations;
        }
    }
    o.pass = o.pass && violations == 0;
    o.detail = "max|log_1-log|=" + fmt("%.2e", worst_log) + " max rel|exp_1-exp|=" + fmt("%.2e", worst_exp) +
               " log_2(1e12)=" + fmt("%.15f", at_max) + " property violations=" + std::to_string(violations);
    return o;
}

Outcome gradient_oracle() {
    Outcome o;
    double worst = 0.0;
    int instances = 0;
    for (std::uint64_t inst = 0; inst < 20; ++inst) {
        const Matrix y = oracle::random_matrix(50, 2, 1000 + inst);
        std::mt19937_64 rng(inst);
        std::uniform_int_distribution<Index> pick(0, 49);
        std::uniform_real_distribution<double> w(0.01, 1.0);
        std::vector<Triplet> ts;
        while (ts.size() < 500) {
            const Index i = pick(rng), j = pick(rng), k = pick(rng);
            if (i != j && i != k && j != k) {
                ts.push_back({i, j, k, w(rng)});
            }
        }
        for (double t : {0.5, 1.0, 2.0, 4.0}) {
            for (double tp : {1.0, 2.0, 4.0}) {
                const KernelParams params{t, tp};
                const Matrix g = loss_gradient(y, ts, params);
                const Matrix fd = oracle::central_difference([&](const Matrix& p) { return total_loss(p, ts, params); },
                                                             y, 1e-5);
                const double rel = (g - fd).norm() / std::max(fd.norm(), 1e-12);
                worst = std::max(worst, rel);
                ++instances;
            }
        }
    }
    o.pass = worst < 1e-5;
    o.detail = std::to_string(instances) + " (instance, t, t') checks, max relative error " + fmt("%.2e", worst);
    return o;
}

Outcome sampling_law() {
    Outcome o;
    const Dataset data(oracle::random_matrix(1000, 10, 77));
    EmbedConfig config;
    const PreparedProblem prep = prepare(data, config);
    const auto& ts = prep.triplets.triplets;
    Index misordered = 0, bad_weight = 0;
    for (const auto& t : ts) {
        const double dj = squared_distance(data.point(t.i), data.point(t.j));
        const double dk = squared_distance(data.point(t.i), data.point(t.k));
        misordered += dj < dk ? 0 : 1;
        bad_weight += (t.weight > config.gamma && t.weight <= 1.0 + config.gamma) ? 0 : 1;
    }
    o.pass = ts.size() == 505000 && misordered == 0 && bad_weight == 0;
    o.detail = "triplets=" + std::to_string(ts.size()) + " (nn " + std::to_string(prep.triplets.counts.nn) +
               ", random " + std::to_string(prep.triplets.counts.random) + "), misordered=" +
               std::to_string(misordered) + ", weights outside (gamma, 1+gamma]=" + std::to_string(bad_weight);
    return o;
}

Outcome two_blobs() {
    Outcome o;
    Matrix centers = Matrix::Zero(2, 50);
    centers(1, 0) = 10.0;
    std::string per_seed;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Dataset data = blobs_at(centers, 200, seed);
        EmbedConfig config;
        config.seed = seed;
        const Embedding e = embed(data, config);
        const double agree = kmeans_agreement(e.coords, *data.labels, seed);
        const bool decreased = e.loss_trace.back() < e.loss_trace.front();
        o.pass = o.pass && agree >= 0.99 && decreased;
        per_seed += " " + fmt("%.3f", agree) + (decreased ? "" : "(loss not decreased)");
    }
    o.detail = "two-means agreement per seed:" + per_seed;
    return o;
}

std::vector<StressReport> stress(StressTest test, std::uint64_t seed, const StressOptions& base = {}) {
    const Dataset data = three_blobs(300, 50, seed);
    EmbedConfig config;
    config.seed = seed;
    StressOptions options = base;
    options.seed = seed;
    return run_stress_suite(data, config, {test}, options);
}

Outcome multiple_scales() {
    Outcome o;
    StressOptions options;
    options.duplicate_factor = 3.0;
    const auto r = stress(StressTest::multiple_scales, 0, options).front();
    const double copy = r.verdict_metrics.at("copy_agreement");
    const double within = r.verdict_metrics.at("within_copy_agreement");
    o.pass = copy >= 0.95 && within >= 0.90;
    o.detail = "copy agreement " + fmt("%.3f", copy) + ", worst within-copy 3-means agreement " + fmt("%.3f", within);
    return o;
}

Outcome outlier() {
    Outcome o;
    StressOptions options;
    options.outlier_factor = 5.0;
    std::string per_seed;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const double ratio = stress(StressTest::outlier, seed, options).front().verdict_metrics.at("outlier_nn_ratio");
        o.pass = o.pass && ratio >= 5.0;
        per_seed += " " + fmt("%.1f", ratio);
    }
    o.detail = "outlier NN distance / median NN distance per seed:" + per_seed;
    return o;
}

Outcome partial_observation() {
    Outcome o;
    StressOptions options;
    options.subset_fraction = 0.5;
    std::string per_seed;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto m = stress(StressTest::subset_random, seed, options).front().verdict_metrics;
        const double residual = m.at("procrustes_residual");
        o.pass = o.pass && residual <= 0.25 && m.at("shared_groups") == 3.0;
        per_seed += " " + fmt("%.3f", residual);
    }
    o.detail = "centroid Procrustes residual per seed:" + per_seed;
    return o;
}

Outcome metric_sanity() {
    Outcome o;
    const Index n = 200;
    const Matrix x = oracle::random_matrix(n, 10, 5);
    const PRCurve id = precision_recall(x, x);
    bool identity = id.mean_recall[19] == 1.0;
    for (Index k = 0; k < 20; ++k) {
        identity = identity && id.mean_precision[k] == 1.0;
    }
    std::vector<double> samples;
    for (std::uint64_t s = 0; s < 50; ++s) {
        std::vector<Eigen::Index> perm(n);
        std::iota(perm.begin(), perm.end(), Eigen::Index{0});
        std::shuffle(perm.begin(), perm.end(), std::mt19937_64(s));
        Matrix y(static_cast<Eigen::Index>(n), x.cols());
        for (Eigen::Index r = 0; r < y.rows(); ++r) {
            y.row(r) = x.row(perm[static_cast<std::size_t>(r)]);
        }
        samples.push_back(precision_recall(x, y).mean_precision[19]);
    }
    const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / samples.size();
    double var = 0.0;
    for (double v : samples) {
        var += (v - mean) * (v - mean) / (samples.size() - 1);
    }
    const double se = std::sqrt(var / samples.size());
    const double expected = 20.0 / (n - 1);
    o.pass = identity && std::abs(mean - expected) <= 3.0 * se;
    o.detail = std::string("identity ") + (identity ? "ok" : "FAILED") + ", permuted precision@20 " +
               fmt("%.5f", mean) + " vs " + fmt("%.5f", expected) + " (3 SE = " + fmt("%.5f", 3.0 * se) + ")";
    return o;
}

Outcome determinism() {
    Outcome o;
    const fs::path dir = work_dir() / "determinism";
    fs::create_directories(dir);
    const Dataset data = three_blobs(300, 50, 9);
    save_csv(data.points, (dir / "data.csv").string());
    save_labels(*data.labels, (dir / "labels.txt").string());
    const std::string bin = TRIMAP_CLI_PATH;
    int codes = 0;
    for (const char* run : {"a", "b"}) {
        const std::string prefix = (dir / run).string();
        codes += shell(bin + " embed --input " + (dir / "data.csv").string() + " --labels " +
                       (dir / "labels.txt").string() + " --output " + prefix + ".csv --trace " + prefix +
                       "_trace.csv --svg " + prefix + ".svg");
    }
    const bool csv = slurp(dir / "a.csv") == slurp(dir / "b.csv") && !slurp(dir / "a.csv").empty();
    const bool trace = slurp(dir / "a_trace.csv") == slurp(dir / "b_trace.csv") && !slurp(dir / "a_trace.csv").empty();
    const bool svg = slurp(dir / "a.svg") == slurp(dir / "b.svg") && !slurp(dir / "a.svg").empty();
    o.pass = codes == 0 && csv && trace && svg;
    o.detail = std::string("exit codes ") + (codes == 0 ? "0" : "nonzero") + ", csv " + (csv ? "identical" : "DIFFER") +
               ", trace " + (trace ? "identical" : "DIFFER") + ", svg " + (svg ? "identical" : "DIFFER");
    return o;
}

Outcome parameter_sweep() {
    Outcome o;
    const fs::path dir = work_dir() / "sweep";
    fs::create_directories(dir);
    const Dataset data = gaussian_blobs(500, 256, 10, 9.0, 0);
    save_csv(data.points, (dir / "usps_like.csv").string());
    save_labels(*data.labels, (dir / "usps_like_labels.txt").string());
    const std::string bin = TRIMAP_CLI_PATH;
    const int code = shell(bin + " sweep --input " + (dir / "usps_like.csv").string() + " --labels " +
                           (dir / "usps_like_labels.txt").string() + " --output-dir " + (dir / "out").string() +
                           " --t 0,1,2 --t-prime 1,2");
    if (code != 0) {
        o.pass = false;
        o.detail = "sweep exited with " + std::to_string(code);
        return o;
    }
    int valid_svgs = 0;
    for (const char* tag : {"t0_tp1", "t0_tp2", "t1_tp1", "t1_tp2", "t2_tp1", "t2_tp2"}) {
        const std::string svg = slurp(dir / "out" / (std::string(tag) + ".svg"));
        if (svg.rfind("<?xml", 0) == 0 && svg.find("</svg>") != std::string::npos &&
            svg.find("<circle") != std::string::npos) {
            ++valid_svgs;
        }
    }
    const auto doc = nlohmann::json::parse(slurp(dir / "out" / "sweep.json"));
    double target = -1.0, best_other = -1.0;
    std::string table;
    for (const auto& cell : doc) {
        const double t = cell.at("t"), tp = cell.at("t_prime"), a = cell.at("label_agreement");
        table += " (" + fmt("%g", t) + "," + fmt("%g", tp) + ")=" + fmt("%.3f", a);
        if (t == 2.0 && tp == 2.0) {
            target = a;
        } else {
            best_other = std::max(best_other, a);
        }
    }
    o.pass = valid_svgs == 6 && doc.size() == 6 && target >= best_other;
    o.detail = std::to_string(valid_svgs) + " valid SVGs; 10-means agreement (t,t'):" + table;
    return o;
}

} // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "function family", 1.0, function_family},
        {2, "gradient oracle", 30.0, gradient_oracle},
        {3, "sampling law", 30.0, sampling_law},
        {4, "two-blob embedding quality", 60.0, two_blobs},
        {5, "multiple-scales test", 120.0, multiple_scales},
        {6, "outlier test", 120.0, outlier},
        {7, "partial-observation test", 120.0, partial_observation},
        {8, "metric sanity", 30.0, metric_sanity},
        {9, "CLI determinism", 60.0, determinism},
        {10, "parameter sweep", 300.0, parameter_sweep},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = secs < c.budget_seconds;
        const bool pass = o.pass && in_time;
        failures += pass ? 0 : 1;
        std::cout << (pass ? "PASS" : "FAIL") << "  criterion " << c.id << " (" << c.name << "): " << o.detail << " ["
                  << fmt("%.2f", secs) << " s of " << fmt("%g", c.budget_seconds) << " s"
                  << (in_time ? "" : ", OVER BUDGET") << "]" << std::endl;
    }
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
