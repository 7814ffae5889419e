#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <span>
#include <string>

#include "error.hpp"

/// @file core_math.hpp
/// @brief Generalized logarithm/exponential and the similarity kernels built on them.
///
/// Every function here is pure and may be called concurrently.

namespace trimap {

/// Width of the window around t = 1 inside which log_t and exp_t fall back to log and exp.
inline constexpr double unit_t_tolerance = 1e-9;

/// Floor applied to a near-point similarity before it is used as a denominator.
inline constexpr double similarity_floor = 1e-12;

/// Parameters of the robust triplet loss.
///
/// `t` controls the loss transformation (t = 1 is the plain logarithm, t > 1 bounds each
/// triplet's contribution by 1/(t-1)). `t_prime` controls the tail of the low-dimensional
/// similarity (1 is Gaussian, 2 is Student-t with one degree of freedom).
struct KernelParams {
    double t = 2.0;
    double t_prime = 2.0;

    void validate() const {
        if (!std::isfinite(t) || t < 0.0) {
            throw ParameterError("t must be finite and >= 0, got " + std::to_string(t));
        }
        if (!std::isfinite(t_prime) || t_prime < 1.0) {
            throw ParameterError("t_prime must be finite and >= 1, got " + std::to_string(t_prime));
        }
    }
};

inline bool is_unit_t(double t) { return std::abs(t - 1.0) < unit_t_tolerance; }

/// Generalized logarithm: log(x) at t = 1, (x^(1-t) - 1)/(1-t) otherwise.
inline double log_t(double x, double t) {
    if (!std::isfinite(x) || !std::isfinite(t)) {
        throw DomainError("log_t: non-finite input");
    }
    if (x <= 0.0) {
        throw DomainError("log_t: x must be positive, got " + std::to_string(x));
    }
    if (t < 0.0) {
        throw DomainError("log_t: t must be >= 0, got " + std::to_string(t));
    }
    if (is_unit_t(t)) {
        return std::log(x);
    }
    const double one_minus_t = 1.0 - t;
    return std::expm1(one_minus_t * std::log(x)) / one_minus_t;
}

/// Generalized exponential: exp(x) at t = 1, max(0, 1 + (1-t)x)^(1/(1-t)) otherwise.
inline double exp_t(double x, double t) {
    if (!std::isfinite(x) || !std::isfinite(t)) {
        throw DomainError("exp_t: non-finite input");
    }
    if (t < 0.0) {
        throw DomainError("exp_t: t must be >= 0, got " + std::to_string(t));
    }
    if (is_unit_t(t)) {
        return std::exp(x);
    }
    const double one_minus_t = 1.0 - t;
    const double base = 1.0 + one_minus_t * x;
    if (base <= 0.0) {
        if (t < 1.0) {
            return 0.0;
        }
        // t > 1: the function has a pole at x = 1/(t-1)
        throw DomainError("exp_t: x = " + std::to_string(x) + " at or beyond the pole 1/(t-1)");
    }
    return std::pow(base, 1.0 / one_minus_t);
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw ShapeError("dimension mismatch: " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
    }
    double acc = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) {
        const double diff = a[c] - b[c];
        acc += diff * diff;
    }
    return acc;
}

/// Low-dimensional similarity exp_{t'}(-d2) given a squared distance.
/// For t' >= 1 the base 1 + (t'-1) d2 is at least 1, so the clamp never triggers.
inline double similarity_q_sq(double sq_dist, double t_prime) {
    assert(t_prime >= 1.0);
    assert(1.0 + (t_prime - 1.0) * sq_dist >= 1.0);
    if (is_unit_t(t_prime)) {
        return std::exp(-sq_dist);
    }
    if (t_prime == 2.0) {
        return 1.0 / (1.0 + sq_dist);
    }
    return std::pow(1.0 + (t_prime - 1.0) * sq_dist, -1.0 / (t_prime - 1.0));
}

inline double similarity_q(std::span<const double> y_i, std::span<const double> y_j, double t_prime) {
    if (!(t_prime >= 1.0)) {
        throw ParameterError("similarity_q: t_prime must be >= 1");
    }
    return similarity_q_sq(squared_distance(y_i, y_j), t_prime);
}

/// High-dimensional similarity exp(-|x_i - x_j|^2 / (sigma_i sigma_j)).
inline double similarity_p(std::span<const double> x_i, std::span<const double> x_j, double sigma_i,
                           double sigma_j) {
    if (!(sigma_i > 0.0) || !(sigma_j > 0.0)) {
        throw DomainError("similarity_p: sigma must be positive");
    }
    return std::exp(-squared_distance(x_i, x_j) / (sigma_i * sigma_j));
}

/// Satisfaction probability q_ij / (q_ij + q_ik) of the triplet (i, j, k).
inline double triplet_probability(double q_ij, double q_ik) {
    if (q_ij < 0.0 || q_ik < 0.0 || !std::isfinite(q_ij) || !std::isfinite(q_ik)) {
        throw DomainError("triplet_probability: similarities must be finite and non-negative");
    }
    const double total = q_ij + q_ik;
    if (total <= 0.0) {
        throw DomainError("triplet_probability: degenerate pair, both similarities are zero");
    }
    return q_ij / total;
}

} // namespace trimap
