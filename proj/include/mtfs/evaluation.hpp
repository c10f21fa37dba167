#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mtfs/csv.hpp"
#include "mtfs/dataset.hpp"
#include "mtfs/errors.hpp"
#include "mtfs/predictors.hpp"
#include "mtfs/rng.hpp"
#include "mtfs/selection_path.hpp"
#include "mtfs/solver.hpp"

namespace mtfs {

struct ConfusionMatrix {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    std::size_t total() const { return tp + fp + fn + tn; }
};

struct PrecisionRecall {
    double precision = 0.0;
    double recall = 0.0;
    bool precision_degenerate = false;  // tp + fp == 0
    bool recall_degenerate = false;     // tp + fn == 0
};

/// Mean of |y_true - y_pred| / |y_true|; requires nonzero true values.
inline double mape(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_pred) {
    if (y_true.size() != y_pred.size())
        throw ValidationError("mape: prediction/target length mismatch");
    if (y_true.size() == 0) throw ValidationError("mape: no values");
    double acc = 0.0;
    for (Eigen::Index i = 0; i < y_true.size(); ++i) {
        if (y_true[i] == 0.0)
            throw ValidationError("mape: true value is zero at index " + std::to_string(i) +
                                  "; RUL targets are expected to be bounded away from zero by "
                                  "the lower RUL-window cutoff");
        acc += std::abs(y_true[i] - y_pred[i]) / std::abs(y_true[i]);
    }
    return acc / static_cast<double>(y_true.size());
}

/// precision = TP/(TP+FP), recall = TP/(TP+FN); zero denominators report 0
/// with the matching degenerate flag set.
inline PrecisionRecall precision_recall(const ConfusionMatrix& cm) {
    PrecisionRecall pr;
    if (cm.tp + cm.fp == 0) {
        pr.precision_degenerate = true;
    } else {
        pr.precision = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
    }
    if (cm.tp + cm.fn == 0) {
        pr.recall_degenerate = true;
    } else {
        pr.recall = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
    }
    return pr;
}

/// ROC polyline: one point per unique decision value used as a >= threshold,
/// sorted by false-positive rate, with (0,0) and (1,1) endpoints.
inline std::vector<std::pair<double, double>> roc_points(const std::vector<double>& values,
                                                         const std::vector<int>& labels) {
    if (values.size() != labels.size())
        throw ValidationError("roc_points: value/label length mismatch");
    std::size_t n_pos = 0, n_neg = 0;
    for (int l : labels) {
        if (l == 1) ++n_pos;
        else if (l == 0) ++n_neg;
        else throw ValidationError("roc_points: labels must be 0 or 1");
    }
    if (n_pos == 0 || n_neg == 0)
        throw ValidationError("roc_points: need at least one example of each class");

    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });

    std::vector<std::pair<double, double>> points;
    points.emplace_back(0.0, 0.0);
    std::size_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        double v = values[order[i]];
        while (i < order.size() && values[order[i]] == v) {
            if (labels[order[i]] == 1) ++tp;
            else ++fp;
            ++i;
        }
        points.emplace_back(static_cast<double>(fp) / static_cast<double>(n_neg),
                            static_cast<double>(tp) / static_cast<double>(n_pos));
    }
    if (points.back() != std::make_pair(1.0, 1.0)) points.emplace_back(1.0, 1.0);
    return points;
}

/// Trapezoid area under an fpr-sorted ROC polyline.
inline double roc_area(const std::vector<std::pair<double, double>>& points) {
    double area = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i)
        area += (points[i].first - points[i - 1].first) *
                (points[i].second + points[i - 1].second) / 2.0;
    return area;
}

struct ApeSummary {
    std::size_t count = 0;
    double mean = 0.0;
    double median = 0.0;
    double q25 = 0.0;
    double q75 = 0.0;
    double min = 0.0;
    double max = 0.0;
};

namespace detail {

inline double quantile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) return 0.0;
    double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    std::size_t lo = static_cast<std::size_t>(std::floor(h));
    std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline ApeSummary summarize_ape(std::vector<double> values) {
    ApeSummary s;
    s.count = values.size();
    if (values.empty()) return s;
    std::sort(values.begin(), values.end());
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) /
             static_cast<double>(values.size());
    s.median = quantile_sorted(values, 0.5);
    s.q25 = quantile_sorted(values, 0.25);
    s.q75 = quantile_sorted(values, 0.75);
    s.min = values.front();
    s.max = values.back();
    return s;
}

}  // namespace detail

enum class SelectionMethod { Mtfs, SingleTask };

inline std::string selection_method_name(SelectionMethod m) {
    return m == SelectionMethod::Mtfs ? "MTFS" : "SingleTask";
}

inline SolverConfig default_predictor_config() {
    SolverConfig c;
    c.gamma = 1.0;
    c.line_search = LineSearch::Backtracking;
    c.tolerance = 1e-6;
    c.max_iters = 5000;
    c.trace_every = 0;
    return c;
}

inline SolverConfig default_pipeline_solver_config() {
    SolverConfig c;
    c.tolerance = 1e-6;
    c.max_iters = 100000;
    c.trace_every = 0;
    return c;
}

/// Everything one CV run needs: how to select features and how to train the
/// downstream predictors on them.
struct PipelineConfig {
    SelectionMethod method = SelectionMethod::Mtfs;
    double theta = 1.0;
    double lambda_ratio = 0.3;  // of the per-fold lambda_max
    PenaltyMode penalty = PenaltyMode::GroupLasso;
    SelectionCriteria criteria;
    SolverConfig solver = default_pipeline_solver_config();
    bool auto_step = true;  // replace solver.gamma with a curvature-bound step per fit
    SolverConfig predictor = default_predictor_config();
    double svm_c = 1.0;
    double svr_c = 1.0;
    double svr_epsilon = 10.0;  // days
};

struct FoldDetail {
    std::size_t fold = 0;
    std::vector<Eigen::Index> test_rows;  // original dataset row indices
    std::vector<std::string> selected_regression;
    std::vector<std::string> selected_classification;
    double mape = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    bool precision_degenerate = false;
    bool recall_degenerate = false;
    ConfusionMatrix cm;
    std::vector<std::string> standardized_features;  // train-side statistics
    Eigen::VectorXd train_means;
    Eigen::VectorXd train_stds;
};

struct EvalReport {
    std::string method;
    double mape = 0.0;       // mean of per-fold MAPE
    double precision = 0.0;  // mean of per-fold precision
    double recall = 0.0;
    std::map<std::string, ApeSummary> ape_per_group;
    std::vector<std::pair<double, double>> roc;  // pooled across folds
    double roc_auc = 0.0;
    std::vector<FoldDetail> fold_details;
    std::uint64_t seed = 0;
    std::size_t k = 0;
};

/// Seeded shuffle split into k folds whose sizes differ by at most one.
inline std::vector<std::vector<Eigen::Index>> fold_assignment(Eigen::Index n, std::size_t k,
                                                              std::uint64_t seed) {
    if (k < 2) throw ValidationError("cross_validate: k must be >= 2");
    if (static_cast<std::size_t>(n) < k)
        throw ValidationError("cross_validate: need at least k rows");
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    auto rng = make_engine(derive_seed(seed, 0xF01D5ULL));
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<std::vector<Eigen::Index>> folds(k);
    for (std::size_t i = 0; i < idx.size(); ++i) folds[i % k].push_back(idx[i]);
    return folds;
}

namespace detail {

struct FoldSelection {
    std::vector<std::string> regression;
    std::vector<std::string> classification;
};

inline FoldSelection select_features_for_fold(const Dataset& strain,
                                              const PipelineConfig& cfg) {
    FoldSelection sel;
    if (cfg.method == SelectionMethod::Mtfs) {
        Hyperparams h;
        h.theta = cfg.theta;
        h.lambda = cfg.lambda_ratio * lambda_max(strain, cfg.theta);
        h.penalty = cfg.penalty;
        SolverConfig scfg = cfg.solver;
        scfg.trace_every = 0;
        if (cfg.auto_step) {
            scfg.line_search = LineSearch::Fixed;
            scfg.gamma = suggested_fixed_step(strain, h);
        }
        FitResult fr = fit(strain, h, scfg);
        sel.regression = select_common(fr.params, strain.feature_names, cfg.criteria);
        sel.classification = sel.regression;
        return sel;
    }

    // Independent L1-penalized fits per task; each task keeps its own features.
    SolverConfig scfg = cfg.solver;
    scfg.trace_every = 0;
    if (cfg.auto_step) {
        Hyperparams h;
        h.theta = cfg.theta;
        scfg.line_search = LineSearch::Fixed;
        scfg.gamma = suggested_fixed_step(strain, h);
    }
    double lam_r = cfg.lambda_ratio * single_task_lambda_max(strain, Task::Regression, cfg.theta);
    FitResult fr = fit_single_task(strain, Task::Regression, lam_r, cfg.theta, scfg);
    double lam_c =
        cfg.lambda_ratio * single_task_lambda_max(strain, Task::Classification, cfg.theta);
    FitResult fc = fit_single_task(strain, Task::Classification, lam_c, cfg.theta, scfg);
    for (Eigen::Index j = 0; j < strain.m(); ++j) {
        if (std::abs(fr.params.A[j]) > cfg.criteria.reg_threshold)
            sel.regression.push_back(strain.feature_names[static_cast<std::size_t>(j)]);
        if (std::abs(fc.params.B[j]) > cfg.criteria.cls_threshold)
            sel.classification.push_back(strain.feature_names[static_cast<std::size_t>(j)]);
    }
    return sel;
}

inline std::string ape_group_label(const Dataset& d, Eigen::Index row) {
    auto ck = d.strata.find("car_kind");
    auto ws = d.strata.find("wheel_size");
    if (ck == d.strata.end() || ws == d.strata.end()) return "";
    std::string kind = ck->second[static_cast<std::size_t>(row)] == "G" ? "G" : "NG";
    std::string size = ws->second[static_cast<std::size_t>(row)] == "36" ? "36" : "N36";
    return kind + "&" + size;
}

}  // namespace detail

/// k-fold cross-validation of the full pipeline. Every fold re-fits the
/// standardization, the feature selection and the predictors on its training
/// rows only; held-out rows contribute MAPE/APE, the confusion matrix and
/// pooled ROC points.
inline EvalReport cross_validate(const Dataset& d, const PipelineConfig& cfg, std::size_t k = 5,
                                 std::uint64_t seed = 0) {
    d.validate();
    if (d.standardized)
        throw ValidationError("cross_validate: expects raw (unstandardized) data so per-fold "
                              "statistics cannot leak");
    auto folds = fold_assignment(d.n(), k, seed);

    EvalReport report;
    report.method = selection_method_name(cfg.method);
    report.seed = seed;
    report.k = k;

    std::vector<double> pooled_decisions;
    std::vector<int> pooled_labels;
    std::map<std::string, std::vector<double>> group_apes;
    double mape_acc = 0.0, prec_acc = 0.0, rec_acc = 0.0;

    for (std::size_t f = 0; f < k; ++f) {
        std::vector<Eigen::Index> train_idx;
        for (std::size_t g = 0; g < k; ++g)
            if (g != f) train_idx.insert(train_idx.end(), folds[g].begin(), folds[g].end());
        const std::vector<Eigen::Index>& test_idx = folds[f];

        Dataset train = d.subset_rows(train_idx);
        Dataset test = d.subset_rows(test_idx);

        bool has_pos = (train.failure_type.array() == 1.0).any();
        bool has_neg = (train.failure_type.array() == 0.0).any();
        if (!has_pos || !has_neg)
            throw ValidationError("cross_validate: fold " + std::to_string(f) + " with seed " +
                                  std::to_string(seed) + " has single-class training labels");

        Dataset strain = standardize(train);
        Dataset stest = apply_standardization(test.restricted_to(strain.feature_names),
                                              strain.column_means, strain.column_stds);

        detail::FoldSelection sel = detail::select_features_for_fold(strain, cfg);

        SvmModel svm = train_svm(strain.restricted_to(sel.classification), cfg.svm_c,
                                 cfg.predictor);
        SvrModel svr = train_svr(strain.restricted_to(sel.regression), cfg.svr_epsilon,
                                 cfg.svr_c, cfg.predictor);

        Dataset test_c = stest.restricted_to(sel.classification);
        Dataset test_r = stest.restricted_to(sel.regression);

        FoldDetail detail;
        detail.fold = f;
        detail.test_rows = test_idx;
        detail.selected_regression = sel.regression;
        detail.selected_classification = sel.classification;
        detail.standardized_features = strain.feature_names;
        detail.train_means = strain.column_means;
        detail.train_stds = strain.column_stds;

        Eigen::VectorXd y_pred(test.n());
        for (Eigen::Index i = 0; i < test.n(); ++i) {
            y_pred[i] = predict_rul(svr, test_r.features.row(i).transpose());
            double dec = decision_value(svm, test_c.features.row(i).transpose());
            int actual = test.failure_type[i] == 1.0 ? 1 : 0;
            int predicted = dec >= 0.0 ? 1 : 0;
            if (predicted == 1 && actual == 1) ++detail.cm.tp;
            else if (predicted == 1 && actual == 0) ++detail.cm.fp;
            else if (predicted == 0 && actual == 1) ++detail.cm.fn;
            else ++detail.cm.tn;
            pooled_decisions.push_back(dec);
            pooled_labels.push_back(actual);

            std::string group = detail::ape_group_label(test, i);
            if (!group.empty() && test.rul[i] != 0.0)
                group_apes[group].push_back(std::abs(test.rul[i] - y_pred[i]) /
                                            std::abs(test.rul[i]));
        }
        detail.mape = mape(test.rul, y_pred);
        PrecisionRecall pr = precision_recall(detail.cm);
        detail.precision = pr.precision;
        detail.recall = pr.recall;
        detail.precision_degenerate = pr.precision_degenerate;
        detail.recall_degenerate = pr.recall_degenerate;

        mape_acc += detail.mape;
        prec_acc += detail.precision;
        rec_acc += detail.recall;
        report.fold_details.push_back(std::move(detail));
    }

    report.mape = mape_acc / static_cast<double>(k);
    report.precision = prec_acc / static_cast<double>(k);
    report.recall = rec_acc / static_cast<double>(k);
    report.roc = roc_points(pooled_decisions, pooled_labels);
    report.roc_auc = roc_area(report.roc);
    for (auto& [label, apes] : group_apes)
        report.ape_per_group[label] = detail::summarize_ape(std::move(apes));
    return report;
}

struct MethodComparisonRow {
    std::string method;
    std::size_t n_seeds = 0;
    double mape_mean = 0.0, mape_se = 0.0;
    double precision_mean = 0.0, precision_se = 0.0;
    double recall_mean = 0.0, recall_se = 0.0;
    std::vector<double> mapes, precisions, recalls;  // per seed, in seed order
};

namespace detail {

inline void mean_se(const std::vector<double>& v, double& mean, double& se) {
    mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() < 2) {
        se = 0.0;
        return;
    }
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    se = std::sqrt(ss / static_cast<double>(v.size() - 1)) /
         std::sqrt(static_cast<double>(v.size()));
}

}  // namespace detail

/// One row per method: CV metric means and standard errors over the seeds,
/// with identical fold splits per seed so the comparison is paired.
inline std::vector<MethodComparisonRow> compare_methods(const Dataset& d,
                                                        const std::vector<SelectionMethod>& methods,
                                                        std::size_t k,
                                                        const std::vector<std::uint64_t>& seeds,
                                                        const PipelineConfig& base) {
    if (seeds.empty()) throw ValidationError("compare_methods: need at least one seed");
    std::vector<MethodComparisonRow> rows;
    for (SelectionMethod method : methods) {
        PipelineConfig cfg = base;
        cfg.method = method;
        MethodComparisonRow row;
        row.method = selection_method_name(method);
        row.n_seeds = seeds.size();
        for (std::uint64_t seed : seeds) {
            EvalReport rep = cross_validate(d, cfg, k, seed);
            row.mapes.push_back(rep.mape);
            row.precisions.push_back(rep.precision);
            row.recalls.push_back(rep.recall);
        }
        detail::mean_se(row.mapes, row.mape_mean, row.mape_se);
        detail::mean_se(row.precisions, row.precision_mean, row.precision_se);
        detail::mean_se(row.recalls, row.recall_mean, row.recall_se);
        rows.push_back(std::move(row));
    }
    return rows;
}

inline nlohmann::json report_to_json(const EvalReport& r) {
    nlohmann::json j;
    j["method"] = r.method;
    j["mape"] = r.mape;
    j["precision"] = r.precision;
    j["recall"] = r.recall;
    j["roc_auc"] = r.roc_auc;
    j["seed"] = r.seed;
    j["k"] = r.k;
    j["roc"] = nlohmann::json::array();
    for (const auto& [fpr, tpr] : r.roc) j["roc"].push_back({fpr, tpr});
    j["ape_per_group"] = nlohmann::json::object();
    for (const auto& [label, s] : r.ape_per_group)
        j["ape_per_group"][label] = {{"count", s.count}, {"mean", s.mean},
                                     {"median", s.median}, {"q25", s.q25},
                                     {"q75", s.q75},       {"min", s.min},
                                     {"max", s.max}};
    j["folds"] = nlohmann::json::array();
    for (const auto& f : r.fold_details) {
        nlohmann::json jf;
        jf["fold"] = f.fold;
        jf["mape"] = f.mape;
        jf["precision"] = f.precision;
        jf["recall"] = f.recall;
        jf["precision_degenerate"] = f.precision_degenerate;
        jf["recall_degenerate"] = f.recall_degenerate;
        jf["tp"] = f.cm.tp;
        jf["fp"] = f.cm.fp;
        jf["fn"] = f.cm.fn;
        jf["tn"] = f.cm.tn;
        jf["selected_regression"] = f.selected_regression;
        jf["selected_classification"] = f.selected_classification;
        jf["n_test_rows"] = f.test_rows.size();
        j["folds"].push_back(std::move(jf));
    }
    return j;
}

inline void write_roc_csv(const std::string& path,
                          const std::vector<std::pair<double, double>>& roc) {
    CsvTable table;
    table.header = {"fpr", "tpr"};
    for (const auto& [fpr, tpr] : roc)
        table.rows.push_back({format_double(fpr), format_double(tpr)});
    write_csv_file(path, table);
}

inline void write_ape_csv(const std::string& path,
                          const std::map<std::string, ApeSummary>& groups) {
    CsvTable table;
    table.header = {"group", "count", "mean_ape", "median_ape", "q25", "q75", "min", "max"};
    for (const auto& [label, s] : groups)
        table.rows.push_back({label, std::to_string(s.count), format_double(s.mean),
                              format_double(s.median), format_double(s.q25),
                              format_double(s.q75), format_double(s.min),
                              format_double(s.max)});
    write_csv_file(path, table);
}

}  // namespace mtfs
