#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iostream>
#include <string>
#include <vector>

#include "mtfs/dataset.hpp"
#include "mtfs/errors.hpp"
#include "mtfs/objective.hpp"
#include "mtfs/params.hpp"

namespace mtfs {

enum class LineSearch { Fixed, Backtracking };
enum class StopReason { Tolerance, MaxIters };

struct SolverConfig {
    double gamma = 1e-4;               // initial step size
    LineSearch line_search = LineSearch::Backtracking;
    double shrink = 0.5;               // backtracking shrink factor
    double sufficient_decrease = 1e-4; // Armijo constant
    double tolerance = 1e-6;           // mean relative-change threshold
    std::size_t max_iters = 100000;
    double denom_floor = 1e-8;         // zero-safe denominator in the stop rule
    std::size_t trace_every = 1;       // 0 disables the breakdown trace

    void validate() const {
        if (!(gamma > 0.0)) throw ValidationError("solver: gamma must be > 0");
        if (!(shrink > 0.0 && shrink < 1.0))
            throw ValidationError("solver: shrink must be in (0, 1)");
        if (!(tolerance > 0.0)) throw ValidationError("solver: tolerance must be > 0");
        if (!(denom_floor > 0.0)) throw ValidationError("solver: denom_floor must be > 0");
        if (max_iters == 0) throw ValidationError("solver: max_iters must be >= 1");
    }
};

struct FitResult {
    ModelParams params;
    std::size_t iterations = 0;
    std::vector<LossBreakdown> trace;
    bool converged = false;
    StopReason stop_reason = StopReason::MaxIters;
};

/// Proximal map of the group norm on one coefficient pair: shrink the pair
/// toward the origin by `threshold` in Euclidean length, to exactly zero once
/// inside the ball.
inline std::pair<double, double> block_soft_threshold(double a, double b, double threshold) {
    if (!(threshold >= 0.0)) throw ValidationError("block_soft_threshold: threshold must be >= 0");
    if (threshold == 0.0) return {a, b};
    double norm = std::hypot(a, b);
    if (norm <= threshold) return {0.0, 0.0};
    double scale = 1.0 - threshold / norm;
    return {a * scale, b * scale};
}

inline double soft_threshold(double x, double threshold) {
    if (x > threshold) return x - threshold;
    if (x < -threshold) return x + threshold;
    return 0.0;
}

/// Zero-coefficient start with intercepts at their marginal optima:
/// a0 = mean(rul), b0 = logit of the (clamped) positive-class rate.
inline ModelParams default_init(const Dataset& d) {
    ModelParams p(d.m());
    p.a0 = d.rul.mean();
    double pbar = d.failure_type.mean();
    pbar = std::clamp(pbar, 0.01, 0.99);
    p.b0 = std::log(pbar / (1.0 - pbar));
    return p;
}

/// Largest step gamma0 * shrink^k (k <= 60) meeting the sufficient-decrease
/// condition on the smooth objective:
///   L(p - gamma*g) <= L(p) - c * gamma * ||g||^2.
inline double backtracking_step(const Dataset& d, const Hyperparams& h, const SolverConfig& cfg,
                                const ModelParams& p, const Gradient& g) {
    const double f0 = smooth_objective(d, p, h);
    const double gsq = g.squared_norm();
    double step = cfg.gamma;
    for (int k = 0; k <= 60; ++k) {
        ModelParams cand = p;
        cand.a0 -= step * g.a0;
        cand.A -= step * g.A;
        cand.b0 -= step * g.b0;
        cand.B -= step * g.B;
        double f = smooth_objective(d, cand, h);
        // The strictness guard rejects no-op "decreases" where both sides of
        // the Armijo inequality round to f0 (ascent or underflowed steps);
        // a genuinely zero gradient still accepts immediately.
        if (std::isfinite(f) && f <= f0 - cfg.sufficient_decrease * step * gsq &&
            (f < f0 || gsq == 0.0))
            return step;
        step *= cfg.shrink;
    }
    throw NumericError("step-failure: no step satisfied sufficient decrease after 60 shrinks "
                       "(bad gradient or scaling)");
}

namespace detail {

inline ModelParams prox_gradient_update(const ModelParams& p, const Gradient& g, double step,
                                        double lambda) {
    ModelParams next(p.size());
    next.a0 = p.a0 - step * g.a0;
    next.b0 = p.b0 - step * g.b0;
    const double threshold = step * lambda;
    for (Eigen::Index j = 0; j < p.size(); ++j) {
        double za = p.A[j] - step * g.A[j];
        double zb = p.B[j] - step * g.B[j];
        auto [na, nb] = block_soft_threshold(za, zb, threshold);
        next.A[j] = na;
        next.B[j] = nb;
    }
    return next;
}

inline double mean_relative_change(const ModelParams& prev, const ModelParams& next,
                                   double floor_) {
    double acc = std::abs(next.a0 - prev.a0) / std::max(std::abs(prev.a0), floor_);
    acc += std::abs(next.b0 - prev.b0) / std::max(std::abs(prev.b0), floor_);
    for (Eigen::Index j = 0; j < prev.size(); ++j) {
        acc += std::abs(next.A[j] - prev.A[j]) / std::max(std::abs(prev.A[j]), floor_);
        acc += std::abs(next.B[j] - prev.B[j]) / std::max(std::abs(prev.B[j]), floor_);
    }
    return acc / static_cast<double>(2 * prev.size() + 2);
}

inline double gradient_dot_difference(const Gradient& g, const ModelParams& from,
                                      const ModelParams& to) {
    double acc = g.a0 * (to.a0 - from.a0) + g.b0 * (to.b0 - from.b0);
    acc += g.A.dot(to.A - from.A) + g.B.dot(to.B - from.B);
    return acc;
}

inline double squared_distance(const ModelParams& x, const ModelParams& y) {
    double acc = (x.a0 - y.a0) * (x.a0 - y.a0) + (x.b0 - y.b0) * (x.b0 - y.b0);
    acc += (x.A - y.A).squaredNorm() + (x.B - y.B).squaredNorm();
    return acc;
}

}  // namespace detail

/// Minimize theta*L_r + L_c + lambda*L_n from `init`. Ridge mode takes plain
/// gradient steps; GroupLasso mode takes a gradient step on the smooth part
/// followed by a block soft-threshold on every coefficient pair (intercepts
/// move by plain gradient). Stops when the mean relative parameter change,
/// with a floored denominator, falls below cfg.tolerance.
inline FitResult fit(const Dataset& d, const Hyperparams& h, const SolverConfig& cfg,
                     ModelParams p) {
    h.validate();
    cfg.validate();
    detail::check_dims(d, p, "fit");
    if (!d.standardized)
        std::cerr << "warning: fitting on unstandardized data; coefficient scales and the "
                     "penalty are not comparable across features\n";

    const bool ridge = h.penalty == PenaltyMode::Ridge;
    FitResult res;

    LossBreakdown cur = joint_objective(d, p, h);
    if (!std::isfinite(cur.total)) throw NumericError("objective not finite at initialization");
    if (cfg.trace_every > 0) res.trace.push_back(cur);
    bool last_traced = true;

    for (std::size_t iter = 1; iter <= cfg.max_iters; ++iter) {
        Gradient g = gradient_smooth(d, p, h);
        ModelParams next;

        if (ridge) {
            double step;
            if (cfg.line_search == LineSearch::Fixed) {
                step = cfg.gamma;
            } else {
                try {
                    step = backtracking_step(d, h, cfg, p, g);
                } catch (const NumericError&) {
                    // g is the true gradient here, so exhausting the search
                    // means no representable decrease exists: stationary at
                    // floating-point resolution.
                    res.converged = true;
                    res.stop_reason = StopReason::Tolerance;
                    break;
                }
            }
            next = p;
            next.a0 -= step * g.a0;
            next.A -= step * g.A;
            next.b0 -= step * g.b0;
            next.B -= step * g.B;
        } else if (cfg.line_search == LineSearch::Fixed) {
            next = detail::prox_gradient_update(p, g, cfg.gamma, h.lambda);
        } else {
            // Prox-aware backtracking: accept the largest step whose proximal
            // point satisfies the quadratic upper bound on the smooth part and
            // does not increase the total objective.
            const double f_p = cur.theta_l_r + cur.l_c;
            double step = cfg.gamma;
            bool accepted = false;
            for (int k = 0; k <= 60; ++k) {
                ModelParams cand = detail::prox_gradient_update(p, g, step, h.lambda);
                double f_cand = h.theta * least_squares_loss(d, cand) + logistic_nll(d, cand);
                double lin = detail::gradient_dot_difference(g, p, cand);
                double quad = detail::squared_distance(cand, p) / (2.0 * step);
                double total_cand = f_cand + h.lambda * penalty(cand, PenaltyMode::GroupLasso);
                if (std::isfinite(f_cand) && f_cand <= f_p + lin + quad &&
                    total_cand <= cur.total) {
                    next = std::move(cand);
                    accepted = true;
                    break;
                }
                step *= cfg.shrink;
            }
            if (!accepted) {
                res.converged = true;
                res.stop_reason = StopReason::Tolerance;
                break;
            }
        }

        double rel = detail::mean_relative_change(p, next, cfg.denom_floor);
        if (!std::isfinite(rel))
            throw NumericError("objective diverged at iteration " + std::to_string(iter));
        p = std::move(next);
        res.iterations = iter;

        last_traced = false;
        if (cfg.trace_every > 0 && iter % cfg.trace_every == 0) {
            cur = joint_objective(d, p, h);
            if (!std::isfinite(cur.total))
                throw NumericError("objective diverged at iteration " + std::to_string(iter));
            res.trace.push_back(cur);
            last_traced = true;
        } else if (!ridge && cfg.line_search == LineSearch::Backtracking) {
            cur = joint_objective(d, p, h);
            if (!std::isfinite(cur.total))
                throw NumericError("objective diverged at iteration " + std::to_string(iter));
        }

        if (rel < cfg.tolerance) {
            res.converged = true;
            res.stop_reason = StopReason::Tolerance;
            break;
        }
    }

    if (cfg.trace_every > 0 && !last_traced) res.trace.push_back(joint_objective(d, p, h));
    res.params = std::move(p);
    return res;
}

inline FitResult fit(const Dataset& d, const Hyperparams& h, const SolverConfig& cfg) {
    return fit(d, h, cfg, default_init(d));
}

/// Step size 1/L from a power-iteration bound on the smooth part's curvature;
/// a safe Fixed-mode choice for standardized data.
inline double suggested_fixed_step(const Dataset& d, const Hyperparams& h) {
    const Eigen::Index m = d.m();
    Eigen::VectorXd v = Eigen::VectorXd::Constant(m + 1, 1.0 / std::sqrt(double(m + 1)));
    double eig = 1.0;
    for (int it = 0; it < 60; ++it) {
        // w = [1 X]' ([1 X] v) without forming the augmented matrix
        Eigen::VectorXd xv = d.features * v.tail(m);
        xv.array() += v[0];
        Eigen::VectorXd w(m + 1);
        w[0] = xv.sum();
        w.tail(m) = d.features.transpose() * xv;
        eig = w.norm();
        if (eig == 0.0) break;
        v = w / eig;
    }
    double lips = (2.0 * h.theta + 0.25) * eig;
    if (h.penalty == PenaltyMode::Ridge) lips += 2.0 * h.lambda;
    if (!(lips > 0.0)) return 1.0;
    return 1.0 / lips;
}

enum class Task { Regression, Classification };

/// L1-penalized fit of one task in isolation (the single-task reduction of the
/// group penalty): theta*L_r + lambda*sum|a_j| or L_c + lambda*sum|b_j|.
/// The other task's parameters stay at zero in the returned ModelParams.
inline FitResult fit_single_task(const Dataset& d, Task task, double lambda, double theta,
                                 const SolverConfig& cfg) {
    if (!(lambda >= 0.0)) throw ValidationError("fit_single_task: lambda must be >= 0");
    if (!(theta >= 0.0)) throw ValidationError("fit_single_task: theta must be >= 0");
    cfg.validate();
    const Eigen::Index m = d.m();
    const bool reg = task == Task::Regression;

    ModelParams start = default_init(d);
    double icpt = reg ? start.a0 : start.b0;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(m);

    auto smooth_value = [&](double b, const Eigen::VectorXd& coef) {
        ModelParams q(m);
        if (reg) {
            q.a0 = b;
            q.A = coef;
            return theta * least_squares_loss(d, q);
        }
        q.b0 = b;
        q.B = coef;
        return logistic_nll(d, q);
    };
    auto smooth_grad = [&](double b, const Eigen::VectorXd& coef, double& gb,
                           Eigen::VectorXd& gw) {
        if (reg) {
            Eigen::VectorXd resid = d.rul - (d.features * coef).array().matrix();
            resid.array() -= b;
            gw = -2.0 * theta * (d.features.transpose() * resid);
            gb = -2.0 * theta * resid.sum();
        } else {
            Eigen::VectorXd eta = (d.features * coef).array() + b;
            Eigen::VectorXd pi(d.n());
            for (Eigen::Index i = 0; i < d.n(); ++i) pi[i] = detail::sigmoid(eta[i]);
            Eigen::VectorXd diff = pi - d.failure_type;
            gw = d.features.transpose() * diff;
            gb = diff.sum();
        }
    };

    FitResult res;
    double f_cur = smooth_value(icpt, w);
    if (!std::isfinite(f_cur)) throw NumericError("objective not finite at initialization");

    for (std::size_t iter = 1; iter <= cfg.max_iters; ++iter) {
        double gb;
        Eigen::VectorXd gw;
        smooth_grad(icpt, w, gb, gw);

        double step = cfg.gamma;
        double next_icpt = 0.0;
        Eigen::VectorXd next_w;
        bool accepted = false;
        int max_k = cfg.line_search == LineSearch::Backtracking ? 60 : 0;
        for (int k = 0; k <= max_k; ++k) {
            double ci = icpt - step * gb;
            Eigen::VectorXd cw(m);
            for (Eigen::Index j = 0; j < m; ++j)
                cw[j] = soft_threshold(w[j] - step * gw[j], step * lambda);
            if (cfg.line_search == LineSearch::Fixed) {
                next_icpt = ci;
                next_w = std::move(cw);
                accepted = true;
                break;
            }
            double f_cand = smooth_value(ci, cw);
            double lin = gb * (ci - icpt) + gw.dot(cw - w);
            double quad = ((ci - icpt) * (ci - icpt) + (cw - w).squaredNorm()) / (2.0 * step);
            double total_cand = f_cand + lambda * cw.lpNorm<1>();
            double total_cur = f_cur + lambda * w.lpNorm<1>();
            if (std::isfinite(f_cand) && f_cand <= f_cur + lin + quad && total_cand <= total_cur) {
                next_icpt = ci;
                next_w = std::move(cw);
                f_cur = f_cand;
                accepted = true;
                break;
            }
            step *= cfg.shrink;
        }
        if (!accepted) {
            res.converged = true;
            res.stop_reason = StopReason::Tolerance;
            break;
        }

        double acc = std::abs(next_icpt - icpt) / std::max(std::abs(icpt), cfg.denom_floor);
        for (Eigen::Index j = 0; j < m; ++j)
            acc += std::abs(next_w[j] - w[j]) / std::max(std::abs(w[j]), cfg.denom_floor);
        double rel = acc / static_cast<double>(m + 1);
        if (!std::isfinite(rel))
            throw NumericError("objective diverged at iteration " + std::to_string(iter));

        icpt = next_icpt;
        w = std::move(next_w);
        res.iterations = iter;
        if (cfg.line_search == LineSearch::Fixed) f_cur = smooth_value(icpt, w);

        if (rel < cfg.tolerance) {
            res.converged = true;
            res.stop_reason = StopReason::Tolerance;
            break;
        }
    }

    res.params = ModelParams(m);
    if (reg) {
        res.params.a0 = icpt;
        res.params.A = w;
    } else {
        res.params.b0 = icpt;
        res.params.B = w;
    }
    return res;
}

/// Smallest lambda at which the single-task L1 solution is all-zero.
inline double single_task_lambda_max(const Dataset& d, Task task, double theta) {
    ModelParams init = default_init(d);
    Hyperparams h;
    h.theta = theta;
    h.lambda = 0.0;
    h.penalty = PenaltyMode::GroupLasso;
    Gradient g = gradient_smooth(d, init, h);
    const Eigen::VectorXd& block = task == Task::Regression ? g.A : g.B;
    return block.size() ? block.cwiseAbs().maxCoeff() : 0.0;
}

}  // namespace mtfs
