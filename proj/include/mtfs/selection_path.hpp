#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mtfs/csv.hpp"
#include "mtfs/dataset.hpp"
#include "mtfs/errors.hpp"
#include "mtfs/objective.hpp"
#include "mtfs/params.hpp"
#include "mtfs/solver.hpp"

namespace mtfs {

/// One record of the lambda sweep: the ratio lambda/lambda_max, the loss
/// decomposition at the fitted point, the iteration count and the selection.
struct PathEntry {
    double ratio = 0.0;
    double lambda = 0.0;
    LossBreakdown breakdown;
    std::size_t iterations = 0;
    std::vector<std::string> selected;
    std::size_t selected_count = 0;
};

enum class SelectionMode { Intersection, GroupNorm };

struct SelectionCriteria {
    double reg_threshold = 0.01;   // |a_j| cutoff
    double cls_threshold = 0.01;   // |b_j| cutoff
    SelectionMode mode = SelectionMode::Intersection;
    double group_cutoff = 0.01;    // ||(a_j,b_j)|| cutoff in GroupNorm mode

    void validate() const {
        if (!(reg_threshold >= 0.0 && cls_threshold >= 0.0 && group_cutoff >= 0.0))
            throw ValidationError("selection criteria: thresholds must be >= 0");
    }
};

/// Smallest lambda at which every coefficient group of the GroupLasso solution
/// is zero: the largest per-feature gradient-block norm at the zero-coefficient
/// start with intercepts at their initialization.
inline double lambda_max(const Dataset& d, double theta) {
    ModelParams init = default_init(d);
    Hyperparams h;
    h.theta = theta;
    h.lambda = 0.0;
    h.penalty = PenaltyMode::GroupLasso;
    Gradient g = gradient_smooth(d, init, h);
    double best = 0.0;
    for (Eigen::Index j = 0; j < d.m(); ++j)
        best = std::max(best, std::hypot(g.A[j], g.B[j]));
    return best;
}

/// Features significant in both tasks (Intersection) or with a large enough
/// coefficient pair (GroupNorm); dataset column order is preserved.
inline std::vector<std::string> select_common(const ModelParams& p,
                                              const std::vector<std::string>& feature_names,
                                              const SelectionCriteria& criteria) {
    criteria.validate();
    p.check_consistent();
    if (static_cast<std::size_t>(p.size()) != feature_names.size())
        throw ValidationError("select_common: params/feature-name length mismatch");
    std::vector<std::string> out;
    for (Eigen::Index j = 0; j < p.size(); ++j) {
        bool keep;
        if (criteria.mode == SelectionMode::Intersection)
            keep = std::abs(p.A[j]) > criteria.reg_threshold &&
                   std::abs(p.B[j]) > criteria.cls_threshold;
        else
            keep = std::hypot(p.A[j], p.B[j]) > criteria.group_cutoff;
        if (keep) out.push_back(feature_names[static_cast<std::size_t>(j)]);
    }
    return out;
}

inline std::vector<double> default_ratio_grid() {
    std::vector<double> ratios;
    for (int i = 0; i <= 20; ++i) ratios.push_back(static_cast<double>(i) / 20.0);
    return ratios;
}

struct SweepOptions {
    bool warm_start = true;                  // reuse each solution as the next start
    std::optional<double> lambda_max_override;  // e.g. the fixed empirical value 100
};

/// Fit once per ratio of lambda/lambda_max and record the path. Internally the
/// fits run from the largest ratio down so warm starts carry sparse solutions
/// into denser ones; entries come back in the caller's ascending order.
inline std::vector<PathEntry> sweep(const Dataset& d, double theta,
                                    const std::vector<double>& ratios, PenaltyMode mode,
                                    const SolverConfig& cfg, const SelectionCriteria& criteria,
                                    const SweepOptions& opts = {}) {
    if (ratios.empty()) throw ValidationError("sweep: ratio grid is empty");
    for (std::size_t i = 0; i < ratios.size(); ++i) {
        if (!(ratios[i] >= 0.0 && ratios[i] <= 1.0))
            throw ValidationError("sweep: ratios must lie in [0, 1]");
        if (i > 0 && !(ratios[i] > ratios[i - 1]))
            throw ValidationError("sweep: ratios must be sorted strictly ascending");
    }
    criteria.validate();

    const double lmax = opts.lambda_max_override.value_or(lambda_max(d, theta));
    std::vector<PathEntry> entries(ratios.size());

    ModelParams warm = default_init(d);
    for (std::size_t k = ratios.size(); k-- > 0;) {
        Hyperparams h;
        h.theta = theta;
        h.lambda = ratios[k] * lmax;
        h.penalty = mode;
        FitResult fr;
        try {
            fr = opts.warm_start ? fit(d, h, cfg, warm) : fit(d, h, cfg);
        } catch (const NumericError& e) {
            throw NumericError("sweep aborted at ratio " + format_double(ratios[k]) + ": " +
                               e.what());
        }
        if (opts.warm_start) warm = fr.params;

        PathEntry& entry = entries[k];
        entry.ratio = ratios[k];
        entry.lambda = h.lambda;
        entry.breakdown = fr.trace.empty() ? joint_objective(d, fr.params, h) : fr.trace.back();
        entry.iterations = fr.iterations;
        entry.selected = select_common(fr.params, d.feature_names, criteria);
        entry.selected_count = entry.selected.size();
    }
    return entries;
}

inline void write_path_csv(const std::string& path, const std::vector<PathEntry>& entries) {
    CsvTable table;
    table.header = {"ratio",      "lambda",         "L",        "L_c", "lambda_Ln",
                    "theta_Lr",   "iterations",     "selected_count", "selected"};
    for (const auto& e : entries) {
        std::ostringstream joined;
        for (std::size_t i = 0; i < e.selected.size(); ++i) {
            if (i) joined << ';';
            joined << e.selected[i];
        }
        table.rows.push_back({format_double(e.ratio), format_double(e.lambda),
                              format_double(e.breakdown.total), format_double(e.breakdown.l_c),
                              format_double(e.breakdown.lambda_l_n),
                              format_double(e.breakdown.theta_l_r), std::to_string(e.iterations),
                              std::to_string(e.selected_count), joined.str()});
    }
    write_csv_file(path, table);
}

}  // namespace mtfs
