#pragma once

#include <Eigen/Core>
#include <cmath>
#include <string>

#include "mtfs/dataset.hpp"
#include "mtfs/errors.hpp"
#include "mtfs/params.hpp"

namespace mtfs {

namespace detail {

inline void check_dims(const Dataset& d, const ModelParams& p, const char* op) {
    p.check_consistent();
    if (p.A.size() != d.m())
        throw ValidationError(std::string(op) + ": params have " + std::to_string(p.A.size()) +
                              " coefficients for " + std::to_string(d.m()) + " features");
}

// log(1 + exp(eta)), safe for |eta| up to ~1e308.
inline double softplus(double eta) {
    if (eta > 0.0) return eta + std::log1p(std::exp(-eta));
    return std::log1p(std::exp(eta));
}

inline double sigmoid(double eta) {
    if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
    double e = std::exp(eta);
    return e / (1.0 + e);
}

}  // namespace detail

/// Sum of squared regression residuals: sum_i (y_i - a0 - x_i . A)^2.
inline double least_squares_loss(const Dataset& d, const ModelParams& p) {
    detail::check_dims(d, p, "least_squares_loss");
    Eigen::VectorXd resid = d.rul - (d.features * p.A).array().matrix();
    resid.array() -= p.a0;
    return resid.squaredNorm();
}

/// Negative Bernoulli log-likelihood: sum_i [ log(1+exp(eta_i)) - y_i * eta_i ]
/// with eta_i = b0 + x_i . B, evaluated in overflow-safe form.
inline double logistic_nll(const Dataset& d, const ModelParams& p) {
    detail::check_dims(d, p, "logistic_nll");
    Eigen::VectorXd eta = (d.features * p.B).array() + p.b0;
    double loss = 0.0;
    for (Eigen::Index i = 0; i < d.n(); ++i)
        loss += detail::softplus(eta[i]) - d.failure_type[i] * eta[i];
    return loss;
}

/// Coupling penalty over per-feature coefficient pairs (a_j, b_j); intercepts
/// are never penalized. Ridge: sum of a_j^2 + b_j^2. GroupLasso: sum of
/// Euclidean norms sqrt(a_j^2 + b_j^2), which drives whole pairs to zero.
inline double penalty(const ModelParams& p, PenaltyMode mode) {
    p.check_consistent();
    if (mode == PenaltyMode::Ridge) return p.A.squaredNorm() + p.B.squaredNorm();
    double total = 0.0;
    for (Eigen::Index j = 0; j < p.A.size(); ++j) total += std::hypot(p.A[j], p.B[j]);
    return total;
}

/// Full decomposition of L = theta * L_r + L_c + lambda * L_n.
inline LossBreakdown joint_objective(const Dataset& d, const ModelParams& p,
                                     const Hyperparams& h) {
    h.validate();
    LossBreakdown b;
    b.l_r = least_squares_loss(d, p);
    b.l_c = logistic_nll(d, p);
    b.l_n = penalty(p, h.penalty);
    b.theta_l_r = h.theta * b.l_r;
    b.lambda_l_n = h.lambda * b.l_n;
    b.total = b.theta_l_r + b.l_c + b.lambda_l_n;
    return b;
}

/// Value of the differentiable part of the objective: theta*L_r + L_c, plus
/// lambda*L_n in Ridge mode (the ridge penalty is smooth; the group penalty is
/// handled by the proximal step instead).
inline double smooth_objective(const Dataset& d, const ModelParams& p, const Hyperparams& h) {
    double v = h.theta * least_squares_loss(d, p) + logistic_nll(d, p);
    if (h.penalty == PenaltyMode::Ridge) v += h.lambda * penalty(p, PenaltyMode::Ridge);
    return v;
}

struct Gradient {
    double a0 = 0.0;
    Eigen::VectorXd A;
    double b0 = 0.0;
    Eigen::VectorXd B;

    double squared_norm() const { return a0 * a0 + A.squaredNorm() + b0 * b0 + B.squaredNorm(); }
    double norm() const { return std::sqrt(squared_norm()); }
};

/// Gradient of smooth_objective. Regression block: -2*theta*X'(y - XA - a0).
/// Classification block: X'(pi - y_c) with pi = sigmoid(b0 + XB).
inline Gradient gradient_smooth(const Dataset& d, const ModelParams& p, const Hyperparams& h) {
    detail::check_dims(d, p, "gradient_smooth");
    h.validate();
    Gradient g;

    Eigen::VectorXd resid = d.rul - (d.features * p.A).array().matrix();
    resid.array() -= p.a0;
    g.A = -2.0 * h.theta * (d.features.transpose() * resid);
    g.a0 = -2.0 * h.theta * resid.sum();

    Eigen::VectorXd eta = (d.features * p.B).array() + p.b0;
    Eigen::VectorXd pi(d.n());
    for (Eigen::Index i = 0; i < d.n(); ++i) pi[i] = detail::sigmoid(eta[i]);
    Eigen::VectorXd diff = pi - d.failure_type;
    g.B = d.features.transpose() * diff;
    g.b0 = diff.sum();

    if (h.penalty == PenaltyMode::Ridge) {
        g.A += 2.0 * h.lambda * p.A;
        g.B += 2.0 * h.lambda * p.B;
    }
    return g;
}

struct HessianBlocks {
    Eigen::MatrixXd p1;  // 2*theta*X'X + 2*lambda*I
    Eigen::MatrixXd p2;  // identically zero: tasks share no second-order coupling
    Eigen::MatrixXd p4;  // X' diag(pi(1-pi)) X + 2*lambda*I
};

/// Second-derivative blocks of the Ridge-mode objective over (A, B); used by
/// the convexity diagnostic only, never by the solver.
inline HessianBlocks hessian_blocks(const Dataset& d, const ModelParams& p,
                                    const Hyperparams& h) {
    detail::check_dims(d, p, "hessian_blocks");
    h.validate();
    if (h.penalty != PenaltyMode::Ridge)
        throw ValidationError("hessian_blocks: unsupported-mode (only the Ridge objective is "
                              "twice differentiable)");
    const Eigen::Index m = d.m();
    HessianBlocks hb;
    hb.p1 = 2.0 * h.theta * (d.features.transpose() * d.features);
    hb.p1.diagonal().array() += 2.0 * h.lambda;

    hb.p2 = Eigen::MatrixXd::Zero(m, m);

    Eigen::VectorXd eta = (d.features * p.B).array() + p.b0;
    Eigen::VectorXd w(d.n());
    for (Eigen::Index i = 0; i < d.n(); ++i) {
        double pi = detail::sigmoid(eta[i]);
        w[i] = pi * (1.0 - pi);
    }
    hb.p4 = d.features.transpose() * w.asDiagonal() * d.features;
    hb.p4.diagonal().array() += 2.0 * h.lambda;
    return hb;
}

}  // namespace mtfs
