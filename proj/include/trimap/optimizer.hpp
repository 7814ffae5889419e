#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "core_math.hpp"
#include "dataset.hpp"
#include "error.hpp"
#include "parallel.hpp"
#include "preprocess.hpp"
#include "triplets.hpp"

/// @file optimizer.hpp
/// @brief The robust triplet objective, its gradient, and the descent loop producing an embedding.

namespace trimap {

enum class InitMethod { pca, random };

/// How loss and gradient are accumulated over triplets.
///  - deterministic: one pass in stored triplet order (bit-reproducible, the default)
///  - chunked: per-thread partial sums joined in chunk order; agrees with deterministic
///    to about 1e-12 relative and is reproducible for a fixed thread count
enum class GradientMode { deterministic, chunked };

struct EmbedConfig {
    Index out_dims = 2;
    double t = 2.0;
    double t_prime = 2.0;
    Index m = 50;
    Index m_prime = 10;
    Index s = 5;
    double gamma = 0.001;
    Index iterations = 400;
    std::uint64_t seed = 42;
    InitMethod init = InitMethod::pca;
    double lr_initial = 1.0;
    /// 0 disables the PCA pre-reduction
    Index pca_dim = 50;
    std::size_t threads = 1;
    GradientMode gradient_mode = GradientMode::deterministic;

    KernelParams kernel() const { return {t, t_prime}; }
    SamplingParams sampling() const { return {m, m_prime, s, gamma}; }

    void validate() const {
        kernel().validate();
        if (out_dims == 0) {
            throw ParameterError("output dimension must be positive");
        }
        if (m == 0 || m_prime == 0 || s == 0) {
            throw ParameterError("m, m_prime and s must be positive");
        }
        if (!(gamma > 0.0) || !std::isfinite(gamma)) {
            throw ParameterError("gamma must be positive");
        }
        if (iterations == 0) {
            throw ParameterError("iterations must be positive");
        }
        if (!(lr_initial > 0.0) || !std::isfinite(lr_initial)) {
            throw ParameterError("initial learning rate must be positive");
        }
    }
};

/// Learning-rate schedule constants.
inline constexpr double lr_growth = 1.05;
inline constexpr double lr_shrink = 0.5;
inline constexpr double lr_max_factor = 50.0;
inline constexpr double early_stop_tolerance = 1e-7;
inline constexpr Index early_stop_patience = 20;
inline constexpr double divergence_factor = 1e3;

struct Embedding {
    Matrix coords;
    /// loss before the first step, then the recorded loss after every iteration
    std::vector<double> loss_trace;
    /// learning rate in effect after every trace entry
    std::vector<double> lr_trace;
    EmbedConfig config;
    TripletCounts triplet_counts;
    TripletSet triplets;
};

/// Raised when the recorded loss exceeds 1e3 times its initial value.
class DivergenceError : public NumericError {
public:
    DivergenceError(const std::string& what, std::vector<double> trace)
        : NumericError(what), trace_(std::move(trace)) {}

    const std::vector<double>& trace() const { return trace_; }

private:
    std::vector<double> trace_;
};

namespace detail {

/// log_t(1 + l) without argument checks; l >= 0.
inline double log_t_one_plus(double l, double t) {
    if (t == 2.0) {
        return l / (1.0 + l);
    }
    const double lp = std::log1p(l);
    if (is_unit_t(t)) {
        return lp;
    }
    return std::expm1((1.0 - t) * lp) / (1.0 - t);
}

/// q^t' for the similarity kernel derivative dq/d(d2) = -q^t'.
inline double kernel_power(double q, double t_prime) {
    if (is_unit_t(t_prime)) {
        return q;
    }
    if (t_prime == 2.0) {
        return q * q;
    }
    return std::pow(q, t_prime);
}

struct TripletTerm {
    double loss;
    double d_near;  ///< dL / d|y_i - y_j|^2
    double d_far;   ///< dL / d|y_i - y_k|^2
};

inline TripletTerm triplet_term(double sq_near, double sq_far, double weight, const KernelParams& p) {
    const double q_near = similarity_q_sq(sq_near, p.t_prime);
    const double q_far = similarity_q_sq(sq_far, p.t_prime);
    const bool floored = q_near < similarity_floor;
    const double denom = floored ? similarity_floor : q_near;
    const double ratio = q_far / denom;
    double outer = weight;  // w (1 + l)^-t
    if (p.t == 2.0) {
        const double inv = 1.0 / (1.0 + ratio);
        outer *= inv * inv;
    } else if (p.t != 0.0) {
        outer *= std::exp(-p.t * std::log1p(ratio));
    }
    const double d_ratio_near = floored ? 0.0 : q_far * kernel_power(q_near, p.t_prime) / (denom * denom);
    const double d_ratio_far = -kernel_power(q_far, p.t_prime) / denom;
    return {weight * log_t_one_plus(ratio, p.t), outer * d_ratio_near, outer * d_ratio_far};
}

inline void check_finite(const Matrix& coords) {
    for (Eigen::Index r = 0; r < coords.rows(); ++r) {
        if (!coords.row(r).allFinite()) {
            throw NumericError("non-finite coordinates at point " + std::to_string(r));
        }
    }
}

inline void check_indices(const std::vector<Triplet>& triplets, Index n) {
    for (const auto& t : triplets) {
        if (t.i >= n || t.j >= n || t.k >= n) {
            throw ParameterError("triplet index out of range for " + std::to_string(n) + " points");
        }
    }
}

/// Accumulates loss (and optionally gradient) of triplets [begin, end) in stored order.
inline double accumulate(const Matrix& coords, const std::vector<Triplet>& triplets, Index begin, Index end,
                         const KernelParams& params, Matrix* grad) {
    const Index d = static_cast<Index>(coords.cols());
    const double* y = coords.data();
    double total = 0.0;
    for (Index idx = begin; idx < end; ++idx) {
        const Triplet& t = triplets[idx];
        const double* yi = y + t.i * d;
        const double* yj = y + t.j * d;
        const double* yk = y + t.k * d;
        double sq_near = 0.0;
        double sq_far = 0.0;
        for (Index c = 0; c < d; ++c) {
            const double a = yi[c] - yj[c];
            const double b = yi[c] - yk[c];
            sq_near += a * a;
            sq_far += b * b;
        }
        const TripletTerm term = triplet_term(sq_near, sq_far, t.weight, params);
        total += term.loss;
        if (grad != nullptr) {
            double* g = grad->data();
            for (Index c = 0; c < d; ++c) {
                const double gn = 2.0 * term.d_near * (yi[c] - yj[c]);
                const double gf = 2.0 * term.d_far * (yi[c] - yk[c]);
                g[t.i * d + c] += gn + gf;
                g[t.j * d + c] -= gn;
                g[t.k * d + c] -= gf;
            }
        }
    }
    return total;
}

inline double evaluate(const Matrix& coords, const std::vector<Triplet>& triplets, const KernelParams& params,
                       Matrix* grad, GradientMode mode, std::size_t threads) {
    params.validate();
    check_finite(coords);
    check_indices(triplets, static_cast<Index>(coords.rows()));
    if (grad != nullptr) {
        grad->setZero(coords.rows(), coords.cols());
    }
    if (mode == GradientMode::deterministic || chunk_count(triplets.size(), threads) <= 1) {
        return accumulate(coords, triplets, 0, triplets.size(), params, grad);
    }
    const std::size_t chunks = chunk_count(triplets.size(), threads);
    std::vector<double> partial_loss(chunks, 0.0);
    std::vector<Matrix> partial_grad(grad != nullptr ? chunks : 0);
    parallel_chunks(triplets.size(), threads, [&](Index begin, Index end, Index c) {
        Matrix* g = nullptr;
        if (grad != nullptr) {
            partial_grad[c].setZero(coords.rows(), coords.cols());
            g = &partial_grad[c];
        }
        partial_loss[c] = accumulate(coords, triplets, begin, end, params, g);
    });
    double total = 0.0;
    for (std::size_t c = 0; c < chunks; ++c) {
        total += partial_loss[c];
        if (grad != nullptr) {
            *grad += partial_grad[c];
        }
    }
    return total;
}

} // namespace detail

/// Sum over triplets of w * log_t(1 + q_ik / q_ij), q from the heavy-tailed kernel.
inline double total_loss(const Matrix& coords, const std::vector<Triplet>& triplets, const KernelParams& params,
                         GradientMode mode = GradientMode::deterministic, std::size_t threads = 1) {
    return detail::evaluate(coords, triplets, params, nullptr, mode, threads);
}

inline double total_loss(const Matrix& coords, const TripletSet& set, const KernelParams& params) {
    return total_loss(coords, set.triplets, params);
}

/// Analytic gradient of total_loss with respect to every coordinate.
inline Matrix loss_gradient(const Matrix& coords, const std::vector<Triplet>& triplets, const KernelParams& params,
                            GradientMode mode = GradientMode::deterministic, std::size_t threads = 1) {
    Matrix grad;
    detail::evaluate(coords, triplets, params, &grad, mode, threads);
    return grad;
}

inline Matrix loss_gradient(const Matrix& coords, const TripletSet& set, const KernelParams& params) {
    return loss_gradient(coords, set.triplets, params);
}

/// Loss and gradient in a single pass.
inline double loss_and_gradient(const Matrix& coords, const std::vector<Triplet>& triplets,
                                const KernelParams& params, Matrix& grad,
                                GradientMode mode = GradientMode::deterministic, std::size_t threads = 1) {
    return detail::evaluate(coords, triplets, params, &grad, mode, threads);
}

inline constexpr double init_scale = 1e-2;

/// Starting coordinates with per-coordinate standard deviation 1e-2.
///
/// `pca` uses the top principal-component scores of `points`, each column rescaled
/// independently; columns without variance (out_dims above the data rank) get seeded
/// Gaussian noise instead. `random` draws everything from N(0, 1e-4).
inline Matrix init_embedding(const Matrix& points, Index out_dims, InitMethod init, std::uint64_t seed) {
    if (out_dims == 0) {
        throw ParameterError("output dimension must be positive");
    }
    const auto n = points.rows();
    const auto d = static_cast<Eigen::Index>(out_dims);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, init_scale);
    Matrix out(n, d);

    if (init == InitMethod::random) {
        for (Eigen::Index r = 0; r < n; ++r) {
            for (Eigen::Index c = 0; c < d; ++c) {
                out(r, c) = noise(rng);
            }
        }
        return out;
    }

    const PcaModel model = pca_fit(points, out_dims);
    const Matrix scores = model.project(points);
    for (Eigen::Index c = 0; c < d; ++c) {
        double stddev = 0.0;
        if (c < scores.cols()) {
            const auto col = scores.col(c);
            const double mean = col.mean();
            stddev = std::sqrt((col.array() - mean).square().sum() / static_cast<double>(n - 1));
        }
        // relative to the leading component so round-off in a rank-deficient tail is ignored
        const double lead = model.eigenvalues.size() > 0 ? std::sqrt(model.eigenvalues[0]) : 0.0;
        if (c < scores.cols() && stddev > 1e-10 * std::max(1.0, lead)) {
            out.col(c) = scores.col(c) * (init_scale / stddev);
        } else {
            for (Eigen::Index r = 0; r < n; ++r) {
                out(r, c) = noise(rng);
            }
        }
    }
    return out;
}

/// Full-batch gradient descent with a multiplicative step-size schedule:
/// accepted (non-increasing) steps grow the rate by 5%, capped at 50x the initial rate;
/// steps that would increase the loss are reverted and halve the rate.
inline void optimize(Matrix& coords, const std::vector<Triplet>& triplets, const EmbedConfig& config,
                     std::vector<double>& loss_trace, std::vector<double>& lr_trace) {
    const KernelParams params = config.kernel();
    Matrix grad;
    double loss = loss_and_gradient(coords, triplets, params, grad, config.gradient_mode, config.threads);
    const double initial = loss;
    double lr = config.lr_initial;
    const double lr_cap = config.lr_initial * lr_max_factor;
    loss_trace.assign(1, loss);
    lr_trace.assign(1, lr);

    Matrix trial_grad;
    Index small_steps = 0;
    for (Index it = 0; it < config.iterations; ++it) {
        Matrix trial = coords - lr * grad;
        detail::check_finite(trial);
        const double trial_loss =
            loss_and_gradient(trial, triplets, params, trial_grad, config.gradient_mode, config.threads);
        if (std::isfinite(trial_loss) && trial_loss <= loss) {
            const double improvement = (loss - trial_loss) / std::max(std::abs(loss), 1e-300);
            coords = std::move(trial);
            grad.swap(trial_grad);
            loss = trial_loss;
            lr = std::min(lr * lr_growth, lr_cap);
            small_steps = improvement < early_stop_tolerance ? small_steps + 1 : 0;
        } else {
            lr *= lr_shrink;
        }
        loss_trace.push_back(loss);
        lr_trace.push_back(lr);
        if (!std::isfinite(loss) || loss > divergence_factor * initial) {
            throw DivergenceError("optimization diverged at iteration " + std::to_string(it + 1), loss_trace);
        }
        if (small_steps >= early_stop_patience) {
            break;
        }
    }
}

/// Everything embed() derives from the data before optimization starts.
struct PreparedProblem {
    Dataset reduced;
    NeighborGraph graph;
    TripletSet triplets;
};

inline PreparedProblem prepare(const Dataset& data, const EmbedConfig& config) {
    config.validate();
    data.validate();
    const Index n = data.size();
    if (n < 3) {
        throw ParameterError("embedding needs at least 3 points, got " + std::to_string(n));
    }
    PreparedProblem prep;
    prep.reduced = config.pca_dim > 0 ? pca_reduce(data, config.pca_dim) : data;
    SamplingParams sampling = config.sampling();
    sampling.m = std::min(sampling.m, n - 2);
    const Index k = std::min(n - 1, std::max(sampling.m, sigma_last_rank));
    prep.graph = compute_sigma(exact_knn(prep.reduced.points, k, config.threads));
    prep.triplets = sample_triplets(prep.reduced.points, prep.graph, sampling, config.seed, config.threads);
    return prep;
}

/// PCA reduction, neighbor graph, triplet sampling and weighting, then descent.
inline Embedding embed(const Dataset& data, const EmbedConfig& config) {
    PreparedProblem prep = prepare(data, config);
    Embedding result;
    result.config = config;
    result.triplet_counts = prep.triplets.counts;
    result.coords = init_embedding(prep.reduced.points, config.out_dims, config.init, config.seed);
    optimize(result.coords, prep.triplets.triplets, config, result.loss_trace, result.lr_trace);
    result.triplets = std::move(prep.triplets);
    return result;
}

} // namespace trimap
