#include <gtest/gtest.h>

#include <cmath>

#include "mtfs/selection_path.hpp"
#include "mtfs/solver.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace mtfs;

namespace {

// One observation, zero features: the smooth objective reduces to
// theta * (y - a0)^2 plus a constant in b0, a clean 1-d quadratic.
Dataset quadratic_instance() {
    Dataset d;
    d.features.resize(1, 0);
    d.rul.resize(1);
    d.rul << 0.0;
    d.failure_type.resize(1);
    d.failure_type << 0.0;
    d.standardized = true;
    return d;
}

Gradient quadratic_gradient(double ga0) {
    Gradient g;
    g.a0 = ga0;
    g.b0 = 0.0;
    g.A.resize(0);
    g.B.resize(0);
    return g;
}

}  // namespace

TEST(BlockSoftThreshold, ShrinksOutsideBall) {
    auto [a, b] = block_soft_threshold(3.0, 4.0, 1.0);
    EXPECT_DOUBLE_EQ(a, 2.4);
    EXPECT_DOUBLE_EQ(b, 3.2);
}

TEST(BlockSoftThreshold, ZeroesInsideBall) {
    auto [a, b] = block_soft_threshold(0.3, 0.4, 1.0);
    EXPECT_DOUBLE_EQ(a, 0.0);
    EXPECT_DOUBLE_EQ(b, 0.0);
}

TEST(BlockSoftThreshold, ZeroThresholdIsIdentity) {
    auto [a, b] = block_soft_threshold(-1.25, 0.5, 0.0);
    EXPECT_DOUBLE_EQ(a, -1.25);
    EXPECT_DOUBLE_EQ(b, 0.5);
}

TEST(BacktrackingStep, QuadraticStepSequence) {
    // f(a0) = a0^2 from a0 = 1 with gradient 2: gamma=1 lands at a0=-1 with no
    // decrease (1 > 1 - 4e-4), so the first accepted step is gamma=0.5.
    Dataset d = quadratic_instance();
    ModelParams p(0);
    p.a0 = 1.0;
    Hyperparams h;
    h.theta = 1.0;
    h.lambda = 0.0;
    h.penalty = PenaltyMode::Ridge;
    SolverConfig cfg;
    cfg.gamma = 1.0;
    double step = backtracking_step(d, h, cfg, p, quadratic_gradient(2.0));
    EXPECT_DOUBLE_EQ(step, 0.5);
}

TEST(BacktrackingStep, ZeroGradientAcceptsInitialStep) {
    Dataset d = quadratic_instance();
    ModelParams p(0);
    p.a0 = 1.0;
    Hyperparams h;
    SolverConfig cfg;
    cfg.gamma = 7.25;
    EXPECT_DOUBLE_EQ(backtracking_step(d, h, cfg, p, quadratic_gradient(0.0)), 7.25);
}

TEST(BacktrackingStep, PathologicalInitialStepShrinks) {
    Dataset d = quadratic_instance();
    ModelParams p(0);
    p.a0 = 1.0;
    Hyperparams h;
    SolverConfig cfg;
    cfg.gamma = 1e12;
    Gradient g = quadratic_gradient(2.0);
    double step = backtracking_step(d, h, cfg, p, g);
    EXPECT_LT(step, 1e12);
    // accepted step satisfies the sufficient-decrease inequality ...
    auto smooth = [&](double a0) {
        ModelParams q(0);
        q.a0 = a0;
        return smooth_objective(d, q, h);
    };
    double f0 = smooth(1.0);
    EXPECT_LE(smooth(1.0 - step * 2.0), f0 - cfg.sufficient_decrease * step * 4.0);
    // ... and the next-larger candidate does not
    double prev = step / cfg.shrink;
    EXPECT_GT(smooth(1.0 - prev * 2.0), f0 - cfg.sufficient_decrease * prev * 4.0);
}

TEST(BacktrackingStep, AscentDirectionFailsAfterSixtyShrinks) {
    Dataset d = quadratic_instance();
    ModelParams p(0);
    p.a0 = 1.0;
    Hyperparams h;
    SolverConfig cfg;
    cfg.gamma = 1.0;
    EXPECT_THROW(backtracking_step(d, h, cfg, p, quadratic_gradient(-2.0)), NumericError);
}

TEST(Fit, MatchesClosedFormLeastSquares) {
    Dataset d = testutil::random_dataset(5, 2, 200);
    Hyperparams h;
    h.theta = 1.0;
    h.lambda = 0.0;
    h.penalty = PenaltyMode::Ridge;
    SolverConfig cfg;
    cfg.gamma = 1.0;
    cfg.tolerance = 1e-10;
    cfg.trace_every = 0;
    cfg.max_iters = 50000;
    // Unpenalized logistic block may drift on separable labels; the example
    // pins the regression block only.
    FitResult res = fit(d, h, cfg);
    auto [a0, A] = oracle::normal_equations(d);
    EXPECT_NEAR(res.params.a0, a0, 1e-3);
    EXPECT_LT((res.params.A - A).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(Fit, NoiselessOptimumInitConvergesInOneIteration) {
    // Identical feature rows with opposite labels put the logistic optimum at
    // exactly zero weights; a noiseless linear rul makes the regression
    // gradient exactly zero at the truth.
    Dataset d;
    d.features.resize(2, 1);
    d.features << 0.7, 0.7;
    d.failure_type.resize(2);
    d.failure_type << 1, 0;
    d.feature_names = {"x"};
    d.standardized = true;
    ModelParams truth(1);
    truth.a0 = 3.0;
    truth.A << 2.0;
    d.rul = (d.features * truth.A).array() + truth.a0;

    Hyperparams h;
    h.theta = 1.0;
    h.lambda = 0.0;
    h.penalty = PenaltyMode::Ridge;
    SolverConfig cfg;
    cfg.gamma = 0.05;
    FitResult res = fit(d, h, cfg, truth);
    EXPECT_TRUE(res.converged);
    EXPECT_LE(res.iterations, 2u);
    EXPECT_EQ(res.params.A, truth.A);
}

TEST(Fit, OptimumInitConvergesImmediately) {
    Dataset d = testutil::random_dataset(30, 2, 201);
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
    h.penalty = PenaltyMode::Ridge;
    SolverConfig cfg;
    cfg.gamma = 1e-3;
    FitResult res = fit(d, h, cfg, opt);
    EXPECT_TRUE(res.converged);
    EXPECT_LE(res.iterations, 2u);
}

TEST(Fit, LambdaAtOrAboveLambdaMaxZeroesEveryGroup) {
    Dataset raw = generate_synthetic([] {
        SynthSpec s;
        s.n = 60;
        s.m = 8;
        s.k_shared = 3;
        s.seed = 17;
        return s;
    }()).data;
    Dataset d = standardize(raw);
    double lmax = lambda_max(d, 1.0);
    for (double factor : {1.0, 1.01}) {
        Hyperparams h;
        h.theta = 1.0;
        h.lambda = factor * lmax;
        h.penalty = PenaltyMode::GroupLasso;
        SolverConfig cfg;
        cfg.gamma = suggested_fixed_step(d, h);
        cfg.line_search = LineSearch::Fixed;
        cfg.trace_every = 0;
        FitResult res = fit(d, h, cfg);
        EXPECT_EQ(res.params.A.cwiseAbs().maxCoeff(), 0.0) << "factor " << factor;
        EXPECT_EQ(res.params.B.cwiseAbs().maxCoeff(), 0.0) << "factor " << factor;
    }
}

TEST(Fit, BacktrackingTraceIsMonotone) {
    for (std::uint64_t seed : {210u, 211u, 212u}) {
        Dataset d = testutil::random_dataset(25, 4, seed);
        for (PenaltyMode mode : {PenaltyMode::Ridge, PenaltyMode::GroupLasso}) {
            Hyperparams h;
            h.theta = 2.0;
            h.lambda = 0.5;
            h.penalty = mode;
            SolverConfig cfg;
            cfg.gamma = 1.0;
            cfg.tolerance = 1e-8;
            cfg.max_iters = 3000;
            FitResult res = fit(d, h, cfg);
            ASSERT_GE(res.trace.size(), 2u);
            for (std::size_t i = 1; i < res.trace.size(); ++i)
                EXPECT_LE(res.trace[i].total, res.trace[i - 1].total)
                    << "seed " << seed << " step " << i;
        }
    }
}

TEST(Fit, FixedStepTrajectoryIsDeterministic) {
    Dataset d = testutil::random_dataset(20, 3, 220);
    Hyperparams h;
    h.theta = 1.0;
    h.lambda = 0.3;
    h.penalty = PenaltyMode::GroupLasso;
    SolverConfig cfg;
    cfg.line_search = LineSearch::Fixed;
    cfg.gamma = 1e-4;
    cfg.max_iters = 500;
    cfg.tolerance = 1e-9;
    FitResult r1 = fit(d, h, cfg);
    FitResult r2 = fit(d, h, cfg);
    EXPECT_EQ(r1.iterations, r2.iterations);
    EXPECT_EQ(r1.params.A, r2.params.A);
    EXPECT_EQ(r1.params.B, r2.params.B);
    ASSERT_EQ(r1.trace.size(), r2.trace.size());
    for (std::size_t i = 0; i < r1.trace.size(); ++i)
        EXPECT_EQ(r1.trace[i].total, r2.trace[i].total);
}

TEST(Fit, DivergenceRaisesNumericError) {
    Dataset d = testutil::random_dataset(10, 2, 230);
    Hyperparams h;
    h.theta = 1.0;
    h.penalty = PenaltyMode::Ridge;
    SolverConfig cfg;
    cfg.line_search = LineSearch::Fixed;
    cfg.gamma = 1e6;
    cfg.trace_every = 1;
    try {
        fit(d, h, cfg);
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("iteration"), std::string::npos);
    }
}

TEST(Fit, MaxItersStopsWithoutConvergence) {
    Dataset d = testutil::random_dataset(15, 3, 240);
    Hyperparams h;
    h.penalty = PenaltyMode::Ridge;
    SolverConfig cfg;
    cfg.line_search = LineSearch::Fixed;
    cfg.gamma = 1e-5;
    cfg.max_iters = 3;
    cfg.tolerance = 1e-30;
    FitResult res = fit(d, h, cfg);
    EXPECT_FALSE(res.converged);
    EXPECT_EQ(res.stop_reason, StopReason::MaxIters);
    EXPECT_EQ(res.iterations, 3u);
}

TEST(Fit, GroupLassoKktConditionsAtConvergence) {
    Dataset raw = generate_synthetic([] {
        SynthSpec s;
        s.n = 40;
        s.m = 6;
        s.k_shared = 2;
        s.seed = 31;
        s.noise_std = 0.3;
        return s;
    }()).data;
    Dataset d = standardize(raw);
    Hyperparams h;
    h.theta = 1.0;
    h.lambda = 0.5 * lambda_max(d, 1.0);
    h.penalty = PenaltyMode::GroupLasso;
    SolverConfig cfg;
    cfg.line_search = LineSearch::Fixed;
    cfg.gamma = suggested_fixed_step(d, h);
    cfg.tolerance = 1e-11;
    cfg.max_iters = 2000000;
    cfg.trace_every = 0;
    FitResult res = fit(d, h, cfg);
    ASSERT_TRUE(res.converged);

    Gradient g = gradient_smooth(d, res.params, h);
    for (Eigen::Index j = 0; j < d.m(); ++j) {
        double wa = res.params.A[j], wb = res.params.B[j];
        double norm = std::hypot(wa, wb);
        if (norm == 0.0) {
            EXPECT_LE(std::hypot(g.A[j], g.B[j]), h.lambda * (1.0 + 1e-6)) << "group " << j;
        } else {
            double ra = g.A[j] + h.lambda * wa / norm;
            double rb = g.B[j] + h.lambda * wb / norm;
            EXPECT_LE(std::hypot(ra, rb), 1e-4) << "group " << j;
        }
    }
}

TEST(Fit, RidgeStationarityAtConvergence) {
    Dataset d = testutil::random_dataset(30, 4, 260);
    Hyperparams h;
    h.theta = 1.0;
    h.lambda = 0.2;
    h.penalty = PenaltyMode::Ridge;
    double g0 = gradient_smooth(d, default_init(d), h).norm();
    SolverConfig cfg;
    cfg.line_search = LineSearch::Fixed;
    cfg.gamma = suggested_fixed_step(d, h);
    cfg.tolerance = 1e-11;
    cfg.max_iters = 1000000;
    cfg.trace_every = 0;
    FitResult res = fit(d, h, cfg);
    ASSERT_TRUE(res.converged);
    EXPECT_LE(gradient_smooth(d, res.params, h).norm(), 1e-4 * (1.0 + g0));
}

TEST(FitSingleTask, RegressionMatchesNormalEquationsAtZeroLambda) {
    Dataset d = testutil::random_dataset(30, 3, 270);
    SolverConfig cfg;
    cfg.gamma = 1.0;
    cfg.tolerance = 1e-10;
    FitResult res = fit_single_task(d, Task::Regression, 0.0, 1.0, cfg);
    auto [a0, A] = oracle::normal_equations(d);
    EXPECT_NEAR(res.params.a0, a0, 1e-3);
    EXPECT_LT((res.params.A - A).cwiseAbs().maxCoeff(), 1e-3);
    EXPECT_EQ(res.params.B.cwiseAbs().maxCoeff(), 0.0);  // other task untouched
}

TEST(FitSingleTask, LambdaAboveMaxGivesZeroCoefficients) {
    Dataset d = standardize(generate_synthetic([] {
        SynthSpec s;
        s.n = 50;
        s.m = 6;
        s.k_shared = 2;
        s.seed = 5;
        return s;
    }()).data);
    SolverConfig cfg;
    cfg.gamma = 1.0;
    for (Task task : {Task::Regression, Task::Classification}) {
        double lmax = single_task_lambda_max(d, task, 1.0);
        FitResult res = fit_single_task(d, task, 1.01 * lmax, 1.0, cfg);
        const Eigen::VectorXd& coef = task == Task::Regression ? res.params.A : res.params.B;
        EXPECT_EQ(coef.cwiseAbs().maxCoeff(), 0.0);
    }
}

TEST(SuggestedFixedStep, ConvergesOnStandardizedData) {
    Dataset d = standardize(generate_synthetic([] {
        SynthSpec s;
        s.n = 80;
        s.m = 10;
        s.k_shared = 4;
        s.seed = 77;
        return s;
    }()).data);
    Hyperparams h;
    h.theta = 1.0;
    h.lambda = 0.1 * lambda_max(d, 1.0);
    h.penalty = PenaltyMode::GroupLasso;
    SolverConfig cfg;
    cfg.line_search = LineSearch::Fixed;
    cfg.gamma = suggested_fixed_step(d, h);
    cfg.trace_every = 1;
    FitResult res = fit(d, h, cfg);
    EXPECT_TRUE(res.converged);
    for (std::size_t i = 1; i < res.trace.size(); ++i)
        EXPECT_LE(res.trace[i].total, res.trace[i - 1].total + 1e-9);
}
