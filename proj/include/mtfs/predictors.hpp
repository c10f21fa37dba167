#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtfs/dataset.hpp"
#include "mtfs/errors.hpp"
#include "mtfs/solver.hpp"

namespace mtfs {

/// Linear max-margin classifier over the selected features. Carries the
/// training-time standardization so raw inputs can be scored directly.
struct SvmModel {
    std::vector<std::string> feature_names;
    Eigen::VectorXd weights;
    double bias = 0.0;
    double c_reg = 1.0;
    Eigen::VectorXd means, stds;
    bool converged = false;
    std::size_t iterations = 0;
    double final_objective = 0.0;
};

/// Linear epsilon-insensitive regressor for RUL, same layout as SvmModel.
struct SvrModel {
    std::vector<std::string> feature_names;
    Eigen::VectorXd weights;
    double bias = 0.0;
    double epsilon = 10.0;  // days
    double c_reg = 1.0;
    Eigen::VectorXd means, stds;
    bool converged = false;
    std::size_t iterations = 0;
    double final_objective = 0.0;
};

namespace detail {

struct LinearTrainResult {
    Eigen::VectorXd weights;
    double bias = 0.0;
    bool converged = false;
    std::size_t iterations = 0;
    double final_objective = 0.0;
};

// Deterministic full-batch subgradient descent on
//   0.5*||w||^2 + C * sum_i loss(pred_i, y_i)
// with the solver's relative-change stopping rule. Backtracking accepts the
// largest step with Armijo sufficient decrease; if no step decreases (a kink
// of the piecewise-linear loss), training stops where it stands.
inline LinearTrainResult train_linear(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                      double c_reg, double init_bias, const SolverConfig& cfg,
                                      const std::function<double(double, double)>& loss,
                                      const std::function<double(double, double)>& dloss,
                                      std::vector<double>* objective_trace) {
    cfg.validate();
    const Eigen::Index n = x.rows(), m = x.cols();

    LinearTrainResult res;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(m);
    double b = init_bias;

    auto objective = [&](const Eigen::VectorXd& wv, double bv) {
        Eigen::VectorXd pred = (x * wv).array() + bv;
        double acc = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) acc += loss(pred[i], y[i]);
        return 0.5 * wv.squaredNorm() + c_reg * acc;
    };

    double f_cur = objective(w, b);
    if (objective_trace) objective_trace->push_back(f_cur);

    for (std::size_t iter = 1; iter <= cfg.max_iters; ++iter) {
        Eigen::VectorXd pred = (x * w).array() + b;
        Eigen::VectorXd dl(n);
        for (Eigen::Index i = 0; i < n; ++i) dl[i] = dloss(pred[i], y[i]);
        Eigen::VectorXd gw = w + c_reg * (x.transpose() * dl);
        double gb = c_reg * dl.sum();
        double gsq = gw.squaredNorm() + gb * gb;

        double step = cfg.gamma;
        bool accepted = false;
        Eigen::VectorXd next_w;
        double next_b = 0.0, f_next = 0.0;
        int max_k = cfg.line_search == LineSearch::Backtracking ? 60 : 0;
        for (int k = 0; k <= max_k; ++k) {
            Eigen::VectorXd cw = w - step * gw;
            double cb = b - step * gb;
            if (cfg.line_search == LineSearch::Fixed) {
                next_w = std::move(cw);
                next_b = cb;
                f_next = objective(next_w, next_b);
                accepted = true;
                break;
            }
            double f_cand = objective(cw, cb);
            if (std::isfinite(f_cand) && f_cand <= f_cur - cfg.sufficient_decrease * step * gsq) {
                next_w = std::move(cw);
                next_b = cb;
                f_next = f_cand;
                accepted = true;
                break;
            }
            step *= cfg.shrink;
        }
        if (!accepted) break;  // subgradient kink: no descent direction left

        double acc = std::abs(next_b - b) / std::max(std::abs(b), cfg.denom_floor);
        for (Eigen::Index j = 0; j < m; ++j)
            acc += std::abs(next_w[j] - w[j]) / std::max(std::abs(w[j]), cfg.denom_floor);
        double rel = acc / static_cast<double>(m + 1);
        if (!std::isfinite(rel)) throw NumericError("training diverged at iteration " +
                                                    std::to_string(iter));

        w = std::move(next_w);
        b = next_b;
        f_cur = f_next;
        res.iterations = iter;
        if (objective_trace) objective_trace->push_back(f_cur);

        if (rel < cfg.tolerance) {
            res.converged = true;
            break;
        }
    }

    res.weights = std::move(w);
    res.bias = b;
    res.final_objective = f_cur;
    return res;
}

}  // namespace detail

/// Train the hinge-loss SVM on failure_type (internally mapped {1,0} -> {+1,-1}).
inline SvmModel train_svm(const Dataset& d, double c_reg, const SolverConfig& cfg,
                          std::vector<double>* objective_trace = nullptr) {
    if (!(c_reg > 0.0)) throw ValidationError("train_svm: C must be > 0");
    bool has_pos = false, has_neg = false;
    Eigen::VectorXd y(d.n());
    for (Eigen::Index i = 0; i < d.n(); ++i) {
        y[i] = d.failure_type[i] == 1.0 ? 1.0 : -1.0;
        (y[i] > 0 ? has_pos : has_neg) = true;
    }
    if (!has_pos || !has_neg)
        throw ValidationError("degenerate-labels: training set contains a single class");

    auto hinge = [](double pred, double yy) { return std::max(0.0, 1.0 - yy * pred); };
    auto dhinge = [](double pred, double yy) { return 1.0 - yy * pred > 0.0 ? -yy : 0.0; };
    auto tr = detail::train_linear(d.features, y, c_reg, 0.0, cfg, hinge, dhinge,
                                   objective_trace);

    SvmModel model;
    model.feature_names = d.feature_names;
    model.weights = std::move(tr.weights);
    model.bias = tr.bias;
    model.c_reg = c_reg;
    model.means = d.column_means;
    model.stds = d.column_stds;
    model.converged = tr.converged;
    model.iterations = tr.iterations;
    model.final_objective = tr.final_objective;
    return model;
}

/// Train the epsilon-insensitive regressor on rul.
inline SvrModel train_svr(const Dataset& d, double epsilon, double c_reg,
                          const SolverConfig& cfg,
                          std::vector<double>* objective_trace = nullptr) {
    if (!(epsilon >= 0.0)) throw ValidationError("train_svr: epsilon must be >= 0");
    if (!(c_reg > 0.0)) throw ValidationError("train_svr: C must be > 0");

    auto tube = [epsilon](double pred, double yy) {
        return std::max(0.0, std::abs(yy - pred) - epsilon);
    };
    auto dtube = [epsilon](double pred, double yy) {
        if (pred - yy > epsilon) return 1.0;
        if (yy - pred > epsilon) return -1.0;
        return 0.0;
    };
    auto tr = detail::train_linear(d.features, d.rul, c_reg, d.rul.mean(), cfg, tube, dtube,
                                   objective_trace);

    SvrModel model;
    model.feature_names = d.feature_names;
    model.weights = std::move(tr.weights);
    model.bias = tr.bias;
    model.epsilon = epsilon;
    model.c_reg = c_reg;
    model.means = d.column_means;
    model.stds = d.column_stds;
    model.converged = tr.converged;
    model.iterations = tr.iterations;
    model.final_objective = tr.final_objective;
    return model;
}

namespace detail {

template <class Model>
double linear_value(const Model& m, const Eigen::VectorXd& x, const char* op) {
    if (x.size() != m.weights.size())
        throw ValidationError(std::string(op) + ": input has " + std::to_string(x.size()) +
                              " entries, model expects " + std::to_string(m.weights.size()));
    return m.weights.dot(x) + m.bias;
}

template <class Model>
Eigen::VectorXd standardize_raw(const Model& m, const Eigen::VectorXd& raw) {
    if (m.means.size() != m.weights.size() || m.stds.size() != m.weights.size())
        throw ValidationError("model carries no standardization statistics for raw scoring");
    return ((raw - m.means).array() / m.stds.array()).matrix();
}

}  // namespace detail

inline double decision_value(const SvmModel& m, const Eigen::VectorXd& x) {
    return detail::linear_value(m, x, "decision_value");
}

/// 1 ("N") iff the decision value is >= 0; ties go to the costlier class.
inline int predict_class(const SvmModel& m, const Eigen::VectorXd& x) {
    return decision_value(m, x) >= 0.0 ? 1 : 0;
}

inline double predict_rul(const SvrModel& m, const Eigen::VectorXd& x) {
    return detail::linear_value(m, x, "predict_rul");
}

inline double decision_value_raw(const SvmModel& m, const Eigen::VectorXd& raw) {
    return decision_value(m, detail::standardize_raw(m, raw));
}

inline double predict_rul_raw(const SvrModel& m, const Eigen::VectorXd& raw) {
    return predict_rul(m, detail::standardize_raw(m, raw));
}

namespace detail {

template <class Model>
nlohmann::json model_to_json(const Model& m, const char* kind) {
    nlohmann::json j;
    j["kind"] = kind;
    j["feature_names"] = m.feature_names;
    j["weights"] = std::vector<double>(m.weights.begin(), m.weights.end());
    j["bias"] = m.bias;
    j["c_reg"] = m.c_reg;
    j["means"] = std::vector<double>(m.means.begin(), m.means.end());
    j["stds"] = std::vector<double>(m.stds.begin(), m.stds.end());
    j["converged"] = m.converged;
    j["iterations"] = m.iterations;
    j["final_objective"] = m.final_objective;
    return j;
}

template <class Model>
void model_from_json(const nlohmann::json& j, Model& m, const char* kind) {
    if (!j.contains("kind") || j.at("kind").get<std::string>() != kind)
        throw ValidationError(std::string("model file is not a ") + kind + " model");
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    auto wv = j.at("weights").get<std::vector<double>>();
    m.weights = Eigen::Map<const Eigen::VectorXd>(wv.data(), static_cast<Eigen::Index>(wv.size()));
    m.bias = j.at("bias").get<double>();
    m.c_reg = j.at("c_reg").get<double>();
    auto mv = j.at("means").get<std::vector<double>>();
    auto sv = j.at("stds").get<std::vector<double>>();
    m.means = Eigen::Map<const Eigen::VectorXd>(mv.data(), static_cast<Eigen::Index>(mv.size()));
    m.stds = Eigen::Map<const Eigen::VectorXd>(sv.data(), static_cast<Eigen::Index>(sv.size()));
    m.converged = j.value("converged", false);
    m.iterations = j.value("iterations", std::size_t{0});
    m.final_objective = j.value("final_objective", 0.0);
}

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed JSON in " + path + ": " + e.what());
    }
    return j;
}

}  // namespace detail

inline nlohmann::json to_json(const SvmModel& m) { return detail::model_to_json(m, "svm"); }

inline nlohmann::json to_json(const SvrModel& m) {
    nlohmann::json j = detail::model_to_json(m, "svr");
    j["epsilon"] = m.epsilon;
    return j;
}

inline void save_model(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write file: " + path);
    out << j.dump(2) << '\n';
}

inline SvmModel load_svm(const std::string& path) {
    SvmModel m;
    detail::model_from_json(detail::read_json_file(path), m, "svm");
    return m;
}

inline SvrModel load_svr(const std::string& path) {
    nlohmann::json j = detail::read_json_file(path);
    SvrModel m;
    detail::model_from_json(j, m, "svr");
    m.epsilon = j.at("epsilon").get<double>();
    return m;
}

}  // namespace mtfs
