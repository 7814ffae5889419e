#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include <trimap/cluster.hpp>
#include <trimap/optimizer.hpp>
#include <trimap/synthetic.hpp>

#include "oracles.hpp"

using namespace trimap;

namespace {

std::vector<Triplet> random_triplets(Index n, Index count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<Index> pick(0, n - 1);
    std::uniform_real_distribution<double> weight(0.001, 1.001);
    std::vector<Triplet> out;
    while (out.size() < count) {
        const Index i = pick(rng), j = pick(rng), k = pick(rng);
        if (i != j && j != k && i != k) {
            out.push_back({i, j, k, weight(rng)});
        }
    }
    return out;
}

/// Triplets that touch point p; their loss is the part of the total that depends on p.
std::vector<Triplet> touching(const std::vector<Triplet>& all, Index p) {
    std::vector<Triplet> out;
    for (const auto& t : all) {
        if (t.i == p || t.j == p || t.k == p) {
            out.push_back(t);
        }
    }
    return out;
}

} // namespace

TEST(TotalLoss, EqualDistancesGiveLogTOfTwo) {
    Matrix y(3, 2);
    y << 0, 0, 1, 0, 0, 1;
    const std::vector<Triplet> ts{{0, 1, 2, 1.0}};
    EXPECT_NEAR(total_loss(y, ts, {2.0, 2.0}), 0.5, 1e-15);
    EXPECT_NEAR(total_loss(y, ts, {1.0, 2.0}), std::log(2.0), 1e-15);
}

TEST(TotalLoss, SatisfiedTripletVanishes) {
    Matrix y(3, 1);
    y << 0.0, 0.1, 1e6;
    const std::vector<Triplet> ts{{0, 1, 2, 1.0}};
    EXPECT_LT(total_loss(y, ts, {2.0, 2.0}), 1e-11);
    EXPECT_LT(total_loss(y, ts, {1.0, 1.0}), 1e-300);
}

TEST(TotalLoss, BoundedByWeightOverTMinusOne) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Matrix y = oracle::random_matrix(40, 2, seed, 3.0);
        const auto ts = random_triplets(40, 300, seed);
        double weight_sum = 0.0;
        for (const auto& t : ts) {
            weight_sum += t.weight;
        }
        for (double t : {1.5, 2.0, 4.0}) {
            EXPECT_LE(total_loss(y, ts, {t, 2.0}), weight_sum / (t - 1.0));
        }
    }
    // a single badly violated triplet stays below its weight at t = 2
    Matrix y(3, 1);
    y << 0.0, 1e4, 1e-3;
    EXPECT_LT(total_loss(y, {{0, 1, 2, 0.7}}, {2.0, 2.0}), 0.7);
}

TEST(TotalLoss, CoincidentNearPointIsFinite) {
    Matrix y(3, 1);
    y << 0.0, 0.0, 1e9;
    const double loss = total_loss(y, {{0, 2, 1, 1.0}}, {2.0, 1.0});  // q_ij underflows for t' = 1
    EXPECT_TRUE(std::isfinite(loss));
    EXPECT_TRUE(loss_gradient(y, {{0, 2, 1, 1.0}}, {2.0, 1.0}).allFinite());
}

TEST(TotalLoss, InvariantToRigidMotion) {
    const Matrix y = oracle::random_matrix(30, 3, 4);
    const auto ts = random_triplets(30, 400, 4);
    const double base = total_loss(y, ts, {2.0, 2.0});
    // orthogonal matrix from a QR decomposition of a random matrix
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(oracle::random_matrix(3, 3, 9)).householderQ();
    Matrix moved = y * q;
    moved.rowwise() += Eigen::RowVector3d(5.0, -2.0, 0.25);
    EXPECT_NEAR(total_loss(moved, ts, {2.0, 2.0}), base, 1e-9 * base);
}

TEST(TotalLoss, Errors) {
    Matrix y = oracle::random_matrix(5, 2, 1);
    EXPECT_THROW(total_loss(y, {{0, 1, 5, 1.0}}, {2.0, 2.0}), ParameterError);
    y(3, 1) = std::numeric_limits<double>::quiet_NaN();
    try {
        total_loss(y, {{0, 1, 2, 1.0}}, {2.0, 2.0});
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("point 3"), std::string::npos);
    }
    EXPECT_THROW(total_loss(oracle::random_matrix(5, 2, 1), {{0, 1, 2, 1.0}}, {2.0, 0.5}), ParameterError);
}

TEST(LossGradient, StationaryAtSymmetricConfiguration) {
    Matrix y(3, 2);
    y << 0.3, -0.2, 1.3, -0.2, 0.3, 0.8;
    const std::vector<Triplet> ts{{0, 1, 2, 0.6}, {0, 2, 1, 0.6}};
    for (double t : {0.5, 1.0, 2.0}) {
        EXPECT_LT(loss_gradient(y, ts, {t, 2.0}).norm(), 1e-6);
    }
}

TEST(LossGradient, MatchesCentralDifferences) {
    std::uint64_t seed = 100;
    for (double t : {0.5, 1.0, 2.0, 4.0}) {
        for (double tp : {1.0, 2.0, 4.0}) {
            const KernelParams params{t, tp};
            const Matrix y = oracle::random_matrix(50, 2, ++seed);
            const auto ts = random_triplets(50, 500, seed);
            const Matrix grad = loss_gradient(y, ts, params);
            double worst = 0.0;
            for (Index p = 0; p < 50; ++p) {
                const auto local = touching(ts, p);
                Matrix probe = y;
                for (Eigen::Index c = 0; c < 2; ++c) {
                    const double h = 1e-5;
                    const double saved = probe(static_cast<Eigen::Index>(p), c);
                    probe(static_cast<Eigen::Index>(p), c) = saved + h;
                    const double up = total_loss(probe, local, params);
                    probe(static_cast<Eigen::Index>(p), c) = saved - h;
                    const double down = total_loss(probe, local, params);
                    probe(static_cast<Eigen::Index>(p), c) = saved;
                    const double fd = (up - down) / (2.0 * h);
                    const double g = grad(static_cast<Eigen::Index>(p), c);
                    worst = std::max(worst, std::abs(g - fd) / std::max(std::abs(fd), 1e-3));
                }
            }
            EXPECT_LT(worst, 1e-5) << "t=" << t << " t'=" << tp;
        }
    }
}

TEST(LossGradient, RowsSumToZero) {
    const Matrix y = oracle::random_matrix(40, 3, 17);
    const auto ts = random_triplets(40, 600, 17);
    const Matrix g = loss_gradient(y, ts, {2.0, 2.0});
    EXPECT_LT(g.colwise().sum().cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, g.cwiseAbs().maxCoeff()));
}

TEST(LossGradient, ChunkedModeAgreesWithDeterministic) {
    const Matrix y = oracle::random_matrix(200, 2, 23);
    const auto ts = random_triplets(200, 20000, 23);
    const KernelParams params{2.0, 2.0};
    Matrix g_det, g_chunk;
    const double l_det = loss_and_gradient(y, ts, params, g_det, GradientMode::deterministic, 4);
    const double l_chunk = loss_and_gradient(y, ts, params, g_chunk, GradientMode::chunked, 4);
    EXPECT_NEAR(l_chunk, l_det, 1e-6 * l_det);
    EXPECT_LT((g_chunk - g_det).norm(), 1e-6 * g_det.norm());
    Matrix again;
    loss_and_gradient(y, ts, params, again, GradientMode::chunked, 4);
    EXPECT_EQ(again, g_chunk);
}

TEST(InitEmbedding, RandomIsSeeded) {
    const Matrix x = oracle::random_matrix(100, 5, 1);
    const Matrix a = init_embedding(x, 2, InitMethod::random, 3);
    const Matrix b = init_embedding(x, 2, InitMethod::random, 3);
    const Matrix c = init_embedding(x, 2, InitMethod::random, 4);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
}

TEST(InitEmbedding, PerCoordinateScale) {
    const Matrix x = oracle::random_matrix(500, 6, 2) * 40.0;
    for (auto method : {InitMethod::pca, InitMethod::random}) {
        const Matrix y = init_embedding(x, 3, method, 8);
        for (Eigen::Index c = 0; c < 3; ++c) {
            const double mean = y.col(c).mean();
            const double sd = std::sqrt((y.col(c).array() - mean).square().sum() / (y.rows() - 1));
            EXPECT_NEAR(sd, 1e-2, 1e-3);
        }
    }
}

TEST(InitEmbedding, PcaReproducesPrincipalScores) {
    // rank-2 data in 5-D
    const Matrix x = oracle::random_matrix(60, 2, 5) * oracle::random_matrix(2, 5, 6);
    const Matrix y = init_embedding(x, 2, InitMethod::pca, 1);
    const auto [values, vectors] = oracle::jacobi_eigen(oracle::covariance(x));
    const Eigen::RowVectorXd mean = x.colwise().mean();
    for (Eigen::Index c = 0; c < 2; ++c) {
        Eigen::VectorXd axis(5);
        for (int k = 0; k < 5; ++k) {
            axis[k] = vectors[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)];
        }
        Eigen::Index arg = 0;
        axis.cwiseAbs().maxCoeff(&arg);
        if (axis[arg] < 0) {
            axis = -axis;
        }
        const Eigen::VectorXd scores = (x.rowwise() - mean) * axis;
        const double scale = y.col(c).norm() / scores.norm();
        EXPECT_GT(scale, 0.0);
        EXPECT_LT((y.col(c) - scale * scores).norm(), 1e-8 * y.col(c).norm());
    }
}

TEST(InitEmbedding, RankDeficientColumnsFallBackToNoise) {
    Matrix x(20, 3);
    for (int r = 0; r < 20; ++r) {
        x.row(r) << r, 2.0 * r, -r;  // rank 1
    }
    const Matrix y = init_embedding(x, 2, InitMethod::pca, 1);
    EXPECT_GT(y.col(1).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_TRUE(y.allFinite());
}

TEST(Optimize, TraceIsMonotoneAndCoordsFinite) {
    const Dataset data = gaussian_blobs(120, 10, 3, 8.0, 3);
    EmbedConfig config;
    config.iterations = 150;
    const Embedding e = embed(data, config);
    ASSERT_GE(e.loss_trace.size(), 2u);
    EXPECT_EQ(e.loss_trace.size(), e.lr_trace.size());
    for (std::size_t i = 1; i < e.loss_trace.size(); ++i) {
        EXPECT_LE(e.loss_trace[i], e.loss_trace[i - 1]);
        EXPECT_GE(e.loss_trace[i], 0.0);
    }
    EXPECT_LT(e.loss_trace.back(), e.loss_trace.front());
    EXPECT_TRUE(e.coords.allFinite());
    for (double lr : e.lr_trace) {
        EXPECT_LE(lr, config.lr_initial * lr_max_factor);
    }
}

TEST(Optimize, EarlyStopsOnceProgressStalls) {
    Matrix y(3, 2);
    y << 0.0, 0.0, 1.0, 0.1, 0.2, 1.3;
    const std::vector<Triplet> ts{{0, 1, 2, 1.0}, {0, 2, 1, 1.0}};
    EmbedConfig config;
    config.t = 1.0;
    config.lr_initial = 0.05;
    config.iterations = 5000;
    std::vector<double> loss, lr;
    optimize(y, ts, config, loss, lr);
    EXPECT_LT(loss.size(), 500u);
    // log(1 + r) + log(1 + 1/r) is minimized at r = 1
    EXPECT_NEAR(loss.back(), std::log(4.0), 1e-12);
    for (std::size_t i = 1; i < loss.size(); ++i) {
        EXPECT_LE(loss[i], loss[i - 1]);
    }
}

TEST(Optimize, StationaryStartStopsAfterPatience) {
    // zero gradient: every step is accepted with zero improvement
    Matrix y(3, 2);
    y << 0.0, 0.0, 1.0, 0.0, 0.0, 1.0;
    const std::vector<Triplet> ts{{0, 1, 2, 1.0}, {0, 2, 1, 1.0}};
    EmbedConfig config;
    config.t = 1.0;
    config.iterations = 300;
    std::vector<double> loss, lr;
    optimize(y, ts, config, loss, lr);
    EXPECT_EQ(loss.size(), early_stop_patience + 1);
    EXPECT_NEAR(loss.back(), std::log(4.0), 1e-12);
}

TEST(Embed, SeparatesTwoBlobs) {
    const Dataset data = gaussian_blobs(200, 50, 2, 10.0, 1);
    EmbedConfig config;
    config.seed = 1;
    const Embedding e = embed(data, config);
    EXPECT_GE(kmeans_agreement(e.coords, *data.labels), 0.99);
    EXPECT_LT(e.loss_trace.back(), e.loss_trace.front());
    EXPECT_EQ(e.coords.rows(), 200);
    EXPECT_EQ(e.coords.cols(), 2);
}

TEST(Embed, TripletCountsFollowSamplingSizes) {
    const Dataset data(oracle::random_matrix(1000, 60, 2));
    EmbedConfig config;
    config.iterations = 1;
    const Embedding e = embed(data, config);
    EXPECT_EQ(e.triplet_counts.nn, 500000u);
    EXPECT_EQ(e.triplet_counts.random, 5000u);
    EXPECT_EQ(e.triplets.size(), 505000u);
}

TEST(Embed, DeterministicGivenSeed) {
    const Dataset data = gaussian_blobs(80, 12, 2, 6.0, 4);
    EmbedConfig config;
    config.iterations = 60;
    config.threads = 3;
    const Embedding a = embed(data, config);
    config.threads = 1;
    const Embedding b = embed(data, config);
    EXPECT_EQ(a.coords, b.coords);
    EXPECT_EQ(a.loss_trace, b.loss_trace);
}

TEST(Embed, SmallInputsAndValidation) {
    const Dataset tiny(oracle::random_matrix(5, 3, 1));
    EmbedConfig config;
    config.iterations = 20;
    const Embedding e = embed(tiny, config);  // m is capped at N - 2
    EXPECT_LT(e.triplet_counts.nn, 5u * 3u * 10u);  // at most 2 far points qualify per pair
    EXPECT_GT(e.triplet_counts.nn_shortfall, 0u);
    EXPECT_EQ(e.triplet_counts.random, 5u * 5u);
    EXPECT_TRUE(e.coords.allFinite());

    EXPECT_THROW(embed(Dataset(oracle::random_matrix(2, 3, 1)), config), ParameterError);
    config.t_prime = 0.5;
    EXPECT_THROW(embed(tiny, config), ParameterError);
    config.t_prime = 2.0;
    config.gamma = 0.0;
    EXPECT_THROW(embed(tiny, config), ParameterError);
}

TEST(DivergenceError, CarriesTrace) {
    const DivergenceError e("diverged", {1.0, 2.0, 5e3});
    EXPECT_EQ(e.trace().size(), 3u);
    EXPECT_THROW(throw e, NumericError);
}
