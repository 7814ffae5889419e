#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "core_math.hpp"
#include "dataset.hpp"
#include "error.hpp"
#include "parallel.hpp"
#include "preprocess.hpp"

/// @file triplets.hpp
/// @brief Linear-size triplet sampling and weighting.

namespace trimap {

/// Constraint "i is closer to j than to k", with its loss weight.
struct Triplet {
    Index i = 0;
    Index j = 0;
    Index k = 0;
    double weight = 1.0;

    friend bool operator==(const Triplet&, const Triplet&) = default;
};

struct TripletCounts {
    Index nn = 0;
    Index random = 0;
    /// (anchor, near) pairs that could not supply all requested far points
    Index nn_shortfall = 0;
    /// random draws abandoned because every candidate pair was tied
    Index random_shortfall = 0;
};

struct TripletSet {
    std::vector<Triplet> triplets;
    std::uint64_t seed = 0;
    TripletCounts counts;

    Index size() const { return triplets.size(); }
};

namespace detail {

inline constexpr std::uint64_t nn_stream = 0x6e6e;
inline constexpr std::uint64_t random_stream = 0x726e64;
inline constexpr int max_rejections = 100;

/// Independent generator per (seed, anchor, stream) so sampling order does not depend on threading.
inline std::mt19937_64 anchor_rng(std::uint64_t seed, Index anchor, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(anchor), static_cast<std::uint32_t>(anchor >> 32),
                      static_cast<std::uint32_t>(stream)};
    return std::mt19937_64(seq);
}

template <class Fn>
std::vector<Triplet> per_anchor(Index n, std::size_t threads, Fn&& fn) {
    std::vector<std::vector<Triplet>> parts(n);
    parallel_chunks(n, threads, [&](Index begin, Index end, Index) {
        for (Index i = begin; i < end; ++i) {
            parts[i] = fn(i);
        }
    });
    std::vector<Triplet> out;
    std::size_t total = 0;
    for (const auto& p : parts) {
        total += p.size();
    }
    out.reserve(total);
    for (auto& p : parts) {
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

} // namespace detail

struct SampledTriplets {
    std::vector<Triplet> triplets;
    Index shortfall = 0;
};

/// For each point i and each of its m nearest neighbors j, draws m' distinct far points k
/// uniformly among the points strictly farther from i than j.
///
/// Rejection sampling is tried first; after 100 rejected draws the qualifying set is
/// enumerated explicitly. Pairs whose qualifying set is smaller than m' contribute fewer
/// triplets and are counted in the shortfall.
inline SampledTriplets sample_nn_triplets(const Matrix& points, const NeighborGraph& graph, Index m,
                                          Index m_prime, std::uint64_t seed, std::size_t threads = 1) {
    const Index n = static_cast<Index>(points.rows());
    if (m == 0 || m_prime == 0) {
        throw ParameterError("m and m_prime must be positive");
    }
    if (graph.n != n) {
        throw ShapeError("neighbor graph does not match the data");
    }
    if (graph.k < m) {
        throw ParameterError("neighbor graph has " + std::to_string(graph.k) + " neighbors, need m = " +
                             std::to_string(m));
    }
    std::vector<Index> shortfalls(n, 0);
    auto triplets = detail::per_anchor(n, threads, [&](Index i) {
        auto rng = detail::anchor_rng(seed, i, detail::nn_stream);
        std::uniform_int_distribution<Index> pick(0, n - 1);
        const auto xi = row_span(points, i);
        const auto near = graph.neighbors(i);

        std::vector<Triplet> out;
        out.reserve(m * m_prime);
        std::vector<Index> chosen;
        std::vector<Index> pool;
        for (Index r = 0; r < m; ++r) {
            const Index j = near[r];
            const double d_ij = squared_distance(xi, row_span(points, j));
            chosen.clear();
            int rejections = 0;
            while (chosen.size() < m_prime && rejections < detail::max_rejections) {
                const Index k = pick(rng);
                if (k == i || k == j || std::find(chosen.begin(), chosen.end(), k) != chosen.end() ||
                    squared_distance(xi, row_span(points, k)) <= d_ij) {
                    ++rejections;
                    continue;
                }
                chosen.push_back(k);
            }
            if (chosen.size() < m_prime) {
                pool.clear();
                for (Index k = 0; k < n; ++k) {
                    if (k != i && k != j && std::find(chosen.begin(), chosen.end(), k) == chosen.end() &&
                        squared_distance(xi, row_span(points, k)) > d_ij) {
                        pool.push_back(k);
                    }
                }
                // partial Fisher-Yates over the remaining qualifying points
                const Index want = std::min<Index>(m_prime - chosen.size(), pool.size());
                for (Index s = 0; s < want; ++s) {
                    std::uniform_int_distribution<Index> tail(s, pool.size() - 1);
                    std::swap(pool[s], pool[tail(rng)]);
                    chosen.push_back(pool[s]);
                }
                shortfalls[i] += chosen.size() < m_prime ? 1 : 0;
            }
            for (const Index k : chosen) {
                out.push_back({i, j, k, 1.0});
            }
        }
        return out;
    });
    SampledTriplets result{std::move(triplets), 0};
    for (const Index s : shortfalls) {
        result.shortfall += s;
    }
    return result;
}

/// Draws s triplets per anchor with (j, k) uniform among distinct non-anchor pairs,
/// ordered so that j is the closer point. Exactly tied pairs are redrawn.
inline SampledTriplets sample_random_triplets(const Matrix& points, Index s, std::uint64_t seed,
                                              std::size_t threads = 1) {
    const Index n = static_cast<Index>(points.rows());
    if (n < 3) {
        throw ParameterError("random triplets need at least 3 points, got " + std::to_string(n));
    }
    if (s == 0) {
        throw ParameterError("s must be positive");
    }
    std::vector<Index> shortfalls(n, 0);
    auto triplets = detail::per_anchor(n, threads, [&](Index i) {
        auto rng = detail::anchor_rng(seed, i, detail::random_stream);
        std::uniform_int_distribution<Index> pick_first(0, n - 2);
        std::uniform_int_distribution<Index> pick_second(0, n - 3);
        const auto xi = row_span(points, i);
        std::vector<Triplet> out;
        out.reserve(s);
        for (Index draw = 0; draw < s; ++draw) {
            bool placed = false;
            for (int attempt = 0; attempt < detail::max_rejections && !placed; ++attempt) {
                // j uniform over the n-1 points other than i, k over the n-2 others
                Index j = pick_first(rng);
                j += j >= i ? 1 : 0;
                Index k = pick_second(rng);
                const Index lo = std::min(i, j);
                const Index hi = std::max(i, j);
                k += k >= lo ? 1 : 0;
                k += k >= hi ? 1 : 0;
                double d_ij = squared_distance(xi, row_span(points, j));
                double d_ik = squared_distance(xi, row_span(points, k));
                if (d_ij == d_ik) {
                    continue;
                }
                if (d_ij > d_ik) {
                    std::swap(j, k);
                }
                out.push_back({i, j, k, 1.0});
                placed = true;
            }
            if (!placed) {
                ++shortfalls[i];
            }
        }
        return out;
    });
    SampledTriplets result{std::move(triplets), 0};
    for (const Index v : shortfalls) {
        result.shortfall += v;
    }
    return result;
}

/// Natural log of p_ij / p_ik, evaluated without forming the (possibly underflowing) p values.
inline double log_weight_ratio(const Matrix& points, const std::vector<double>& sigma, const Triplet& t) {
    const auto xi = row_span(points, t.i);
    const double d_ij = squared_distance(xi, row_span(points, t.j));
    const double d_ik = squared_distance(xi, row_span(points, t.k));
    return d_ik / (sigma[t.i] * sigma[t.k]) - d_ij / (sigma[t.i] * sigma[t.j]);
}

/// Sets each weight to (p_ij/p_ik) / max over all triplets + gamma, so weights lie in (gamma, 1 + gamma].
inline void assign_weights(std::vector<Triplet>& triplets, const Matrix& points, const NeighborGraph& graph,
                           double gamma) {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) {
        throw ParameterError("gamma must be positive");
    }
    if (graph.sigma.size() != static_cast<Index>(points.rows())) {
        throw ParameterError("neighbor graph has no sigma; call compute_sigma first");
    }
    if (triplets.empty()) {
        return;
    }
    std::vector<double> log_ratio(triplets.size());
    double max_log = -std::numeric_limits<double>::infinity();
    for (Index t = 0; t < triplets.size(); ++t) {
        log_ratio[t] = log_weight_ratio(points, graph.sigma, triplets[t]);
        if (!std::isfinite(log_ratio[t])) {
            throw NumericError("triplet weight ratio overflowed for anchor " + std::to_string(triplets[t].i));
        }
        max_log = std::max(max_log, log_ratio[t]);
    }
    for (Index t = 0; t < triplets.size(); ++t) {
        triplets[t].weight = std::exp(log_ratio[t] - max_log) + gamma;
    }
}

/// Same normalization for raw ratios given directly.
inline std::vector<double> normalize_ratios(const std::vector<double>& raw, double gamma) {
    if (!(gamma > 0.0)) {
        throw ParameterError("gamma must be positive");
    }
    const double max_ratio = raw.empty() ? 1.0 : *std::max_element(raw.begin(), raw.end());
    std::vector<double> out(raw.size());
    for (Index t = 0; t < raw.size(); ++t) {
        out[t] = raw[t] / max_ratio + gamma;
    }
    return out;
}

struct SamplingParams {
    Index m = 50;
    Index m_prime = 10;
    Index s = 5;
    double gamma = 0.001;
};

/// Nearest-neighbor triplets followed by random triplets, weighted with a single global
/// max-ratio normalization. `graph` must carry sigma.
inline TripletSet sample_triplets(const Matrix& points, const NeighborGraph& graph, const SamplingParams& params,
                                  std::uint64_t seed, std::size_t threads = 1) {
    TripletSet set;
    set.seed = seed;
    auto nn = sample_nn_triplets(points, graph, params.m, params.m_prime, seed, threads);
    auto rnd = sample_random_triplets(points, params.s, seed, threads);
    set.counts = {nn.triplets.size(), rnd.triplets.size(), nn.shortfall, rnd.shortfall};
    set.triplets = std::move(nn.triplets);
    set.triplets.insert(set.triplets.end(), rnd.triplets.begin(), rnd.triplets.end());
    assign_weights(set.triplets, points, graph, params.gamma);
    return set;
}

} // namespace trimap
