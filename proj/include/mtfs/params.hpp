#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <string>

#include "mtfs/errors.hpp"

namespace mtfs {

enum class PenaltyMode { Ridge, GroupLasso };

inline std::string penalty_mode_name(PenaltyMode m) {
    return m == PenaltyMode::Ridge ? "ridge" : "group";
}

inline PenaltyMode penalty_mode_from_name(const std::string& s) {
    if (s == "ridge") return PenaltyMode::Ridge;
    if (s == "group") return PenaltyMode::GroupLasso;
    throw ValidationError("unknown penalty mode '" + s + "' (expected ridge|group)");
}

/// Joint model: regression weights (a0, A) and classification weights (b0, B),
/// one coefficient pair per feature.
struct ModelParams {
    double a0 = 0.0;
    Eigen::VectorXd A;
    double b0 = 0.0;
    Eigen::VectorXd B;

    ModelParams() = default;
    explicit ModelParams(Eigen::Index m)
        : A(Eigen::VectorXd::Zero(m)), B(Eigen::VectorXd::Zero(m)) {}

    Eigen::Index size() const { return A.size(); }

    void check_consistent() const {
        if (A.size() != B.size())
            throw ValidationError("model params: A has " + std::to_string(A.size()) +
                                  " entries but B has " + std::to_string(B.size()));
    }
};

struct Hyperparams {
    double theta = 1.0;
    double lambda = 0.0;
    PenaltyMode penalty = PenaltyMode::GroupLasso;

    void validate() const {
        if (!(theta >= 0.0)) throw ValidationError("theta must be >= 0");
        if (!(lambda >= 0.0)) throw ValidationError("lambda must be >= 0");
    }
};

/// Per-component decomposition of the joint objective
/// total = theta_l_r + l_c + lambda_l_n.
struct LossBreakdown {
    double total = 0.0;
    double l_r = 0.0;
    double l_c = 0.0;
    double l_n = 0.0;
    double theta_l_r = 0.0;
    double lambda_l_n = 0.0;
};

}  // namespace mtfs
