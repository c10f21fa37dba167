#include <gtest/gtest.h>

#include <cmath>

#include "mtfs/objective.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace mtfs;

TEST(LeastSquares, ZeroCase) {
    Dataset d = testutil::random_dataset(2, 1, 1);
    d.features.setZero();
    d.rul.setZero();
    ModelParams p(1);
    EXPECT_DOUBLE_EQ(least_squares_loss(d, p), 0.0);
}

TEST(LeastSquares, HandEvaluatedTwoRows) {
    Dataset d = testutil::random_dataset(2, 1, 2);
    d.features << 1, 2;
    d.rul << 1.5, 2.0;
    ModelParams p(1);
    p.A << 1;
    p.a0 = 0.5;
    // predictions 1.5 and 2.5 -> residuals 0 and -0.5 -> 0.25
    EXPECT_DOUBLE_EQ(least_squares_loss(d, p), 0.25);
}

TEST(LeastSquares, MatchesLoopOracle) {
    for (std::uint64_t seed : {10u, 11u, 12u}) {
        Dataset d = testutil::random_dataset(23, 5, seed);
        ModelParams p = testutil::random_params(5, seed + 100);
        double got = least_squares_loss(d, p);
        double want = oracle::loop_least_squares(d, p);
        EXPECT_NEAR(got, want, 1e-12 * std::max(1.0, std::abs(want)));
    }
}

TEST(LeastSquares, RejectsDimensionMismatch) {
    Dataset d = testutil::random_dataset(4, 3, 5);
    ModelParams p(2);
    EXPECT_THROW(least_squares_loss(d, p), ValidationError);
}

TEST(LogisticNll, ZeroWeightsGiveLogTwo) {
    Dataset d = testutil::random_dataset(1, 1, 3);
    d.failure_type << 1;
    ModelParams p(1);
    EXPECT_NEAR(logistic_nll(d, p), std::log(2.0), 1e-15);
}

TEST(LogisticNll, SaturatedEtaDoesNotOverflow) {
    Dataset d = testutil::random_dataset(1, 1, 4);
    d.features << 1.0;
    d.failure_type << 1;
    ModelParams p(1);
    p.B << 50.0;
    double v = logistic_nll(d, p);
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_LE(v, 1e-15);
    EXPECT_GE(v, 0.0);
}

TEST(LogisticNll, MatchesHighPrecisionOracle) {
    for (std::uint64_t seed : {20u, 21u, 22u}) {
        Dataset d = testutil::random_dataset(31, 4, seed);
        ModelParams p = testutil::random_params(4, seed + 200, 2.0);
        double got = logistic_nll(d, p);
        double want = oracle::loop_logistic_nll(d, p);
        EXPECT_NEAR(got, want, 1e-10 * std::max(1.0, std::abs(want)));
    }
}

TEST(Penalty, ThreeFourFiveTriple) {
    ModelParams p(1);
    p.A << 3;
    p.B << 4;
    EXPECT_DOUBLE_EQ(penalty(p, PenaltyMode::Ridge), 25.0);
    EXPECT_DOUBLE_EQ(penalty(p, PenaltyMode::GroupLasso), 5.0);
}

TEST(Penalty, ZeroParams) {
    ModelParams p(3);
    EXPECT_DOUBLE_EQ(penalty(p, PenaltyMode::Ridge), 0.0);
    EXPECT_DOUBLE_EQ(penalty(p, PenaltyMode::GroupLasso), 0.0);
}

TEST(Penalty, AxisAlignedPairs) {
    ModelParams p(2);
    p.A << 1, 0;
    p.B << 0, 1;
    EXPECT_DOUBLE_EQ(penalty(p, PenaltyMode::GroupLasso), 2.0);
    EXPECT_DOUBLE_EQ(penalty(p, PenaltyMode::Ridge), 2.0);
}

TEST(Penalty, InterceptsAreNeverPenalized) {
    ModelParams p(2);
    p.a0 = 1e6;
    p.b0 = -1e6;
    EXPECT_DOUBLE_EQ(penalty(p, PenaltyMode::Ridge), 0.0);
    EXPECT_DOUBLE_EQ(penalty(p, PenaltyMode::GroupLasso), 0.0);
}

TEST(Penalty, ScalingStrictlyIncreases) {
    for (std::uint64_t seed : {31u, 32u, 33u, 34u}) {
        ModelParams p = testutil::random_params(4, seed);
        ModelParams q = p;
        q.A *= 1.7;
        q.B *= 1.7;
        EXPECT_GT(penalty(q, PenaltyMode::Ridge), penalty(p, PenaltyMode::Ridge));
        EXPECT_GT(penalty(q, PenaltyMode::GroupLasso), penalty(p, PenaltyMode::GroupLasso));
    }
}

TEST(JointObjective, PenaltyOffIdentity) {
    Dataset d = testutil::random_dataset(12, 3, 40);
    ModelParams p = testutil::random_params(3, 41);
    Hyperparams h;
    h.theta = 1.0;
    h.lambda = 0.0;
    LossBreakdown b = joint_objective(d, p, h);
    EXPECT_DOUBLE_EQ(b.total, b.l_r + b.l_c);
}

TEST(JointObjective, BreakdownRecomposes) {
    for (std::uint64_t seed : {50u, 51u, 52u, 53u, 54u}) {
        Dataset d = testutil::random_dataset(19, 4, seed);
        ModelParams p = testutil::random_params(4, seed + 1);
        Hyperparams h;
        h.theta = 0.5 + double(seed % 5);
        h.lambda = 0.25 * double(seed % 3);
        h.penalty = seed % 2 ? PenaltyMode::Ridge : PenaltyMode::GroupLasso;
        LossBreakdown b = joint_objective(d, p, h);
        double recomposed = h.theta * b.l_r + b.l_c + h.lambda * b.l_n;
        EXPECT_NEAR(b.total, recomposed, 1e-10 * std::max(1.0, std::abs(b.total)));
    }
}

TEST(GradientSmooth, ZeroDataMatrix) {
    Dataset d = testutil::random_dataset(9, 3, 60);
    d.features.setZero();
    ModelParams p = testutil::random_params(3, 61);
    Hyperparams h;
    h.theta = 2.0;
    h.lambda = 0.0;
    Gradient g = gradient_smooth(d, p, h);
    EXPECT_DOUBLE_EQ(g.A.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_DOUBLE_EQ(g.B.cwiseAbs().maxCoeff(), 0.0);
    double resid_sum = (d.rul.array() - p.a0).sum();
    EXPECT_NEAR(g.a0, -2.0 * h.theta * resid_sum, 1e-10 * std::max(1.0, std::abs(g.a0)));
    double pi0 = 1.0 / (1.0 + std::exp(-p.b0));
    EXPECT_NEAR(g.b0, d.n() * pi0 - d.failure_type.sum(), 1e-10);
}

TEST(GradientSmooth, MatchesFiniteDifferences) {
    for (std::uint64_t seed : {70u, 71u, 72u, 73u, 74u, 75u, 76u, 77u, 78u, 79u}) {
        Dataset d = testutil::random_dataset(15 + seed % 20, 2 + seed % 5, seed);
        ModelParams p = testutil::random_params(d.m(), seed + 7);
        Hyperparams h;
        h.theta = 0.1 + double(seed % 4);
        h.lambda = 0.5 * double(seed % 3);
        h.penalty = seed % 2 ? PenaltyMode::Ridge : PenaltyMode::GroupLasso;
        Gradient analytic = gradient_smooth(d, p, h);
        Gradient fd = oracle::fd_gradient(d, p, h);
        EXPECT_LT(oracle::max_gradient_rel_error(analytic, fd), 1e-5) << "seed " << seed;
    }
}

TEST(GradientSmooth, VanishesAtUnregularizedOptimum) {
    Dataset d = testutil::random_dataset(40, 2, 90);
    ModelParams opt(2);
    auto [a0, A] = oracle::normal_equations(d);
    auto [b0, B] = oracle::newton_logistic(d);
    opt.a0 = a0;
    opt.A = A;
    opt.b0 = b0;
    opt.B = B;
    Hyperparams h;
    h.theta = 1.0;
    h.lambda = 0.0;
    Gradient g = gradient_smooth(d, opt, h);
    EXPECT_LT(g.norm(), 1e-6);
}

TEST(HessianBlocks, IdentityDesignHandValues) {
    Dataset d = testutil::random_dataset(2, 2, 100);
    d.features.setIdentity();
    ModelParams p(2);
    Hyperparams h;
    h.theta = 1.0;
    h.lambda = 0.0;
    h.penalty = PenaltyMode::Ridge;
    HessianBlocks hb = hessian_blocks(d, p, h);
    EXPECT_LT((hb.p1 - 2.0 * Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT((hb.p4 - 0.25 * Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_DOUBLE_EQ(hb.p2.cwiseAbs().maxCoeff(), 0.0);
}

TEST(HessianBlocks, PenaltyOnlyCase) {
    Dataset d = testutil::random_dataset(3, 2, 101);
    d.features.setZero();
    ModelParams p(2);
    Hyperparams h;
    h.theta = 1.0;
    h.lambda = 1.0;
    h.penalty = PenaltyMode::Ridge;
    HessianBlocks hb = hessian_blocks(d, p, h);
    EXPECT_LT((hb.p1 - 2.0 * Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT((hb.p4 - 2.0 * Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(HessianBlocks, PositiveSemidefiniteOnRandomInstances) {
    for (std::uint64_t seed : {110u, 111u, 112u, 113u}) {
        Dataset d = testutil::random_dataset(20, 5, seed);
        ModelParams p = testutil::random_params(5, seed + 9);
        Hyperparams h;
        h.theta = 0.5 + double(seed % 3);
        h.lambda = 0.1 * double(seed % 4);
        h.penalty = PenaltyMode::Ridge;
        HessianBlocks hb = hessian_blocks(d, p, h);
        EXPECT_GE(oracle::min_eigenvalue(hb.p1), -1e-10);
        EXPECT_GE(oracle::min_eigenvalue(hb.p4), -1e-10);
    }
}

TEST(HessianBlocks, GroupModeIsUnsupported) {
    Dataset d = testutil::random_dataset(4, 2, 120);
    ModelParams p(2);
    Hyperparams h;
    h.penalty = PenaltyMode::GroupLasso;
    EXPECT_THROW(hessian_blocks(d, p, h), ValidationError);
}

TEST(JointObjective, ConvexAlongSegments) {
    for (std::uint64_t seed : {130u, 131u, 132u, 133u, 134u}) {
        Dataset d = testutil::random_dataset(14, 3, seed);
        ModelParams p1 = testutil::random_params(3, seed + 1);
        ModelParams p2 = testutil::random_params(3, seed + 2);
        for (PenaltyMode mode : {PenaltyMode::Ridge, PenaltyMode::GroupLasso}) {
            Hyperparams h;
            h.theta = 1.5;
            h.lambda = 0.7;
            h.penalty = mode;
            double f1 = joint_objective(d, p1, h).total;
            double f2 = joint_objective(d, p2, h).total;
            for (double t : {0.25, 0.5, 0.75}) {
                ModelParams mid(3);
                mid.a0 = t * p1.a0 + (1 - t) * p2.a0;
                mid.b0 = t * p1.b0 + (1 - t) * p2.b0;
                mid.A = t * p1.A + (1 - t) * p2.A;
                mid.B = t * p1.B + (1 - t) * p2.B;
                double fm = joint_objective(d, mid, h).total;
                EXPECT_LE(fm, t * f1 + (1 - t) * f2 + 1e-9);
            }
        }
    }
}

TEST(JointObjective, FiniteAtExtremeEta) {
    Dataset d = testutil::random_dataset(5, 1, 140);
    d.features << 1, -1, 2, -2, 0.5;
    ModelParams p(1);
    p.B << 1e4;
    p.b0 = 1e4;
    p.A << 1e4;
    p.a0 = -1e4;
    Hyperparams h;
    h.theta = 1.0;
    h.lambda = 1.0;
    for (PenaltyMode mode : {PenaltyMode::Ridge, PenaltyMode::GroupLasso}) {
        h.penalty = mode;
        EXPECT_TRUE(std::isfinite(joint_objective(d, p, h).total));
        Gradient g = gradient_smooth(d, p, h);
        EXPECT_TRUE(std::isfinite(g.norm()));
    }
}
