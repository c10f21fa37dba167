#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtfs/csv.hpp"
#include "mtfs/errors.hpp"
#include "mtfs/params.hpp"
#include "mtfs/rng.hpp"

namespace mtfs {

enum class ColumnRole { Feature, Rul, FailureType, Stratum, EventTime, EventType, Ignore };

inline ColumnRole column_role_from_name(const std::string& s) {
    if (s == "feature") return ColumnRole::Feature;
    if (s == "rul") return ColumnRole::Rul;
    if (s == "failure_type") return ColumnRole::FailureType;
    if (s == "stratum") return ColumnRole::Stratum;
    if (s == "event_time") return ColumnRole::EventTime;
    if (s == "event_type") return ColumnRole::EventType;
    if (s == "ignore") return ColumnRole::Ignore;
    throw SchemaError("unknown column role '" + s + "'");
}

inline std::string column_role_name(ColumnRole r) {
    switch (r) {
        case ColumnRole::Feature: return "feature";
        case ColumnRole::Rul: return "rul";
        case ColumnRole::FailureType: return "failure_type";
        case ColumnRole::Stratum: return "stratum";
        case ColumnRole::EventTime: return "event_time";
        case ColumnRole::EventType: return "event_type";
        case ColumnRole::Ignore: return "ignore";
    }
    return "ignore";
}

/// Column-name -> role map, read from a JSON object {"col": "role", ...}.
using Schema = std::map<std::string, ColumnRole>;

inline Schema load_schema(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open schema file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("malformed schema JSON in " + path + ": " + e.what());
    }
    if (!j.is_object()) throw SchemaError("schema must be a JSON object of column -> role");
    Schema schema;
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!it.value().is_string())
            throw SchemaError("schema entry for column '" + it.key() + "' must be a string role");
        schema[it.key()] = column_role_from_name(it.value().get<std::string>());
    }
    return schema;
}

inline void save_schema(const std::string& path, const Schema& schema) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [col, role] : schema) j[col] = column_role_name(role);
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write schema file: " + path);
    out << j.dump(2) << '\n';
}

/// Immutable-after-construction observation table: an n x m feature matrix with
/// paired continuous (rul, days) and binary (failure_type) targets, plus
/// optional categorical strata carried along for grouping.
struct Dataset {
    Eigen::MatrixXd features;                             // n x m
    std::vector<std::string> feature_names;               // m labels
    Eigen::VectorXd rul;                                  // length n, days
    Eigen::VectorXd failure_type;                         // length n, values in {0,1}; 1 = "N"
    std::map<std::string, std::vector<std::string>> strata;  // column -> per-row values

    bool standardized = false;
    Eigen::VectorXd column_means;  // filled once standardized; reused on test data
    Eigen::VectorXd column_stds;
    std::vector<std::string> dropped_constant_columns;

    Eigen::Index n() const { return features.rows(); }
    Eigen::Index m() const { return features.cols(); }

    void validate() const {
        if (static_cast<Eigen::Index>(feature_names.size()) != m())
            throw ValidationError("dataset: " + std::to_string(feature_names.size()) +
                                  " feature names for " + std::to_string(m()) + " columns");
        if (rul.size() != n() || failure_type.size() != n())
            throw ValidationError("dataset: target lengths do not match row count");
        for (Eigen::Index i = 0; i < n(); ++i) {
            double c = failure_type[i];
            if (c != 0.0 && c != 1.0)
                throw ValidationError("dataset: failure_type value " + format_double(c) +
                                      " at row " + std::to_string(i + 1) + " is not 0 or 1");
        }
        for (const auto& [name, vals] : strata) {
            if (static_cast<Eigen::Index>(vals.size()) != n())
                throw ValidationError("dataset: stratum column '" + name + "' length mismatch");
        }
    }

    int feature_index(const std::string& name) const {
        auto it = std::find(feature_names.begin(), feature_names.end(), name);
        if (it == feature_names.end()) return -1;
        return static_cast<int>(it - feature_names.begin());
    }

    /// New dataset keeping only the given rows (in the given order).
    Dataset subset_rows(const std::vector<Eigen::Index>& rows) const {
        Dataset out;
        out.features.resize(static_cast<Eigen::Index>(rows.size()), m());
        out.rul.resize(static_cast<Eigen::Index>(rows.size()));
        out.failure_type.resize(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            out.features.row(static_cast<Eigen::Index>(i)) = features.row(rows[i]);
            out.rul[static_cast<Eigen::Index>(i)] = rul[rows[i]];
            out.failure_type[static_cast<Eigen::Index>(i)] = failure_type[rows[i]];
        }
        out.feature_names = feature_names;
        for (const auto& [name, vals] : strata) {
            std::vector<std::string> sub;
            sub.reserve(rows.size());
            for (auto r : rows) sub.push_back(vals[static_cast<std::size_t>(r)]);
            out.strata[name] = std::move(sub);
        }
        out.standardized = standardized;
        out.column_means = column_means;
        out.column_stds = column_stds;
        return out;
    }

    /// New dataset keeping only the named feature columns (dataset order preserved).
    Dataset restricted_to(const std::vector<std::string>& names) const {
        std::vector<int> idx;
        idx.reserve(names.size());
        for (const auto& nm : names) {
            int j = feature_index(nm);
            if (j < 0) throw ValidationError("restricted_to: unknown feature '" + nm + "'");
            idx.push_back(j);
        }
        std::sort(idx.begin(), idx.end());
        Dataset out;
        out.features.resize(n(), static_cast<Eigen::Index>(idx.size()));
        out.feature_names.reserve(idx.size());
        bool have_stats = column_means.size() == m();
        if (have_stats) {
            out.column_means.resize(static_cast<Eigen::Index>(idx.size()));
            out.column_stds.resize(static_cast<Eigen::Index>(idx.size()));
        }
        for (std::size_t k = 0; k < idx.size(); ++k) {
            out.features.col(static_cast<Eigen::Index>(k)) = features.col(idx[k]);
            out.feature_names.push_back(feature_names[static_cast<std::size_t>(idx[k])]);
            if (have_stats) {
                out.column_means[static_cast<Eigen::Index>(k)] = column_means[idx[k]];
                out.column_stds[static_cast<Eigen::Index>(k)] = column_stds[idx[k]];
            }
        }
        out.rul = rul;
        out.failure_type = failure_type;
        out.strata = strata;
        out.standardized = standardized;
        return out;
    }
};

enum class EventType { N, T, Censored };

inline EventType event_type_from_string(const std::string& s, const std::string& context) {
    if (s == "N") return EventType::N;
    if (s == "T") return EventType::T;
    if (s == "C") return EventType::Censored;
    throw ValidationError("event type '" + s + "' at " + context + " is not one of N, T, C");
}

/// One failure-or-censoring record for the competing-risk analysis.
struct EventRecord {
    double event_time = 0.0;  // days, > 0
    EventType event_type = EventType::N;
    std::map<std::string, std::string> stratum_keys;
};

/// Knobs for the synthetic generator with planted joint-sparse ground truth.
struct SynthSpec {
    Eigen::Index n = 100;
    Eigen::Index m = 10;
    Eigen::Index k_shared = 3;   // features active in BOTH tasks
    double noise_std = 0.5;      // regression noise scale
    std::uint64_t seed = 0;
    double correlation = 0.0;    // pairwise feature correlation in [0,1)
    double intercept_rul = 100.0;   // a0, days scale
    double intercept_class = 0.0;   // b0; 0 keeps classes roughly balanced

    void validate() const {
        if (n < 1 || m < 1) throw ValidationError("synth spec: n and m must be positive");
        if (k_shared < 0 || k_shared > m)
            throw ValidationError("synth spec: k_shared must be in [0, m]");
        if (!(noise_std >= 0.0)) throw ValidationError("synth spec: noise_std must be >= 0");
        if (!(correlation >= 0.0 && correlation < 1.0))
            throw ValidationError("synth spec: correlation must be in [0, 1)");
    }
};

namespace detail {

struct ColumnIndexes {
    std::vector<int> features;
    std::vector<std::string> feature_names;
    int rul = -1;
    int failure_type = -1;
    std::vector<int> strata;
    std::vector<std::string> strata_names;
    int event_time = -1;
    int event_type = -1;
};

inline ColumnIndexes resolve_schema(const CsvTable& table, const Schema& schema) {
    ColumnIndexes ix;
    std::map<std::string, int> header_pos;
    for (std::size_t j = 0; j < table.header.size(); ++j)
        header_pos[table.header[j]] = static_cast<int>(j);

    for (const auto& [col, role] : schema) {
        auto it = header_pos.find(col);
        if (it == header_pos.end())
            throw SchemaError("schema names column '" + col + "' not present in the CSV header");
        int j = it->second;
        switch (role) {
            case ColumnRole::Feature:
                ix.features.push_back(j);
                break;
            case ColumnRole::Rul:
                if (ix.rul >= 0) throw SchemaError("schema names more than one rul column");
                ix.rul = j;
                break;
            case ColumnRole::FailureType:
                if (ix.failure_type >= 0)
                    throw SchemaError("schema names more than one failure_type column");
                ix.failure_type = j;
                break;
            case ColumnRole::Stratum:
                ix.strata.push_back(j);
                break;
            case ColumnRole::EventTime:
                if (ix.event_time >= 0)
                    throw SchemaError("schema names more than one event_time column");
                ix.event_time = j;
                break;
            case ColumnRole::EventType:
                if (ix.event_type >= 0)
                    throw SchemaError("schema names more than one event_type column");
                ix.event_type = j;
                break;
            case ColumnRole::Ignore:
                break;
        }
    }
    // Keep feature/stratum order as they appear in the file, not the schema map.
    std::sort(ix.features.begin(), ix.features.end());
    std::sort(ix.strata.begin(), ix.strata.end());
    for (int j : ix.features) ix.feature_names.push_back(table.header[static_cast<std::size_t>(j)]);
    for (int j : ix.strata) ix.strata_names.push_back(table.header[static_cast<std::size_t>(j)]);

    for (std::size_t j = 0; j < table.header.size(); ++j) {
        if (!schema.count(table.header[j]))
            std::cerr << "warning: column '" << table.header[j]
                      << "' not named in the schema; ignoring it\n";
    }
    return ix;
}

}  // namespace detail

/// Parse a CSV into a Dataset using the column-role schema. Rows with
/// unparseable required cells raise a validation error naming the row.
inline Dataset load_csv(const std::string& path, const Schema& schema) {
    CsvTable table = read_csv_file(path);
    if (table.rows.empty()) throw ValidationError("empty-input: " + path + " has no data rows");
    detail::ColumnIndexes ix = detail::resolve_schema(table, schema);
    if (ix.rul < 0) throw SchemaError("schema must name one rul column");
    if (ix.failure_type < 0) throw SchemaError("schema must name one failure_type column");
    if (ix.features.empty()) throw SchemaError("schema must name at least one feature column");

    const Eigen::Index n = static_cast<Eigen::Index>(table.rows.size());
    const Eigen::Index m = static_cast<Eigen::Index>(ix.features.size());
    Dataset d;
    d.features.resize(n, m);
    d.rul.resize(n);
    d.failure_type.resize(n);
    d.feature_names = ix.feature_names;
    for (const auto& nm : ix.strata_names) d.strata[nm] = {};

    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = table.rows[static_cast<std::size_t>(i)];
        const std::string where = "row " + std::to_string(i + 1);
        for (Eigen::Index j = 0; j < m; ++j) {
            const std::string& cell = row[static_cast<std::size_t>(ix.features[static_cast<std::size_t>(j)])];
            d.features(i, j) = parse_double(cell, where + ", column '" +
                                                      d.feature_names[static_cast<std::size_t>(j)] + "'");
        }
        d.rul[i] = parse_double(row[static_cast<std::size_t>(ix.rul)], where + ", rul column");
        double c = parse_double(row[static_cast<std::size_t>(ix.failure_type)],
                                where + ", failure_type column");
        if (c != 0.0 && c != 1.0)
            throw ValidationError("failure_type value '" +
                                  row[static_cast<std::size_t>(ix.failure_type)] + "' at " + where +
                                  " is not binary (expected 0 or 1)");
        d.failure_type[i] = c;
        for (std::size_t s = 0; s < ix.strata.size(); ++s)
            d.strata[ix.strata_names[s]].push_back(row[static_cast<std::size_t>(ix.strata[s])]);
    }
    d.validate();
    return d;
}

/// Parse event records (event_time, event_type, strata) for competing-risk analysis.
inline std::vector<EventRecord> load_events(const std::string& path, const Schema& schema) {
    CsvTable table = read_csv_file(path);
    if (table.rows.empty()) throw ValidationError("empty-input: " + path + " has no data rows");
    detail::ColumnIndexes ix = detail::resolve_schema(table, schema);
    if (ix.event_time < 0) throw SchemaError("schema must name one event_time column");
    if (ix.event_type < 0) throw SchemaError("schema must name one event_type column");

    std::vector<EventRecord> events;
    events.reserve(table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        const std::string where = "row " + std::to_string(i + 1);
        EventRecord e;
        e.event_time = parse_double(row[static_cast<std::size_t>(ix.event_time)],
                                    where + ", event_time column");
        if (!(e.event_time > 0.0))
            throw ValidationError("event_time must be positive at " + where);
        e.event_type = event_type_from_string(
            detail::trim(row[static_cast<std::size_t>(ix.event_type)]), where);
        for (std::size_t s = 0; s < ix.strata.size(); ++s)
            e.stratum_keys[ix.strata_names[s]] = row[static_cast<std::size_t>(ix.strata[s])];
        events.push_back(std::move(e));
    }
    return events;
}

/// Write features, targets and strata back out; numeric cells use shortest
/// round-trip formatting so a reload reproduces the exact doubles.
inline void write_csv(const std::string& path, const Dataset& d) {
    CsvTable table;
    table.header = d.feature_names;
    table.header.push_back("rul");
    table.header.push_back("failure_type");
    for (const auto& [name, vals] : d.strata) {
        (void)vals;
        table.header.push_back(name);
    }
    for (Eigen::Index i = 0; i < d.n(); ++i) {
        std::vector<std::string> row;
        row.reserve(table.header.size());
        for (Eigen::Index j = 0; j < d.m(); ++j) row.push_back(format_double(d.features(i, j)));
        row.push_back(format_double(d.rul[i]));
        row.push_back(format_double(d.failure_type[i]));
        for (const auto& [name, vals] : d.strata) {
            (void)name;
            row.push_back(vals[static_cast<std::size_t>(i)]);
        }
        table.rows.push_back(std::move(row));
    }
    write_csv_file(path, table);
}

/// Center and scale every feature column to sample mean 0 and sample standard
/// deviation 1 (n-1 denominator). Constant columns cannot be scaled and are
/// dropped with a warning naming them. Targets are untouched.
inline Dataset standardize(const Dataset& d) {
    if (d.standardized) throw ValidationError("standardize: dataset is already standardized");
    if (d.n() < 2) throw ValidationError("standardize: need at least 2 rows");
    const Eigen::Index n = d.n(), m = d.m();

    Eigen::VectorXd means(m), stds(m);
    std::vector<bool> keep(static_cast<std::size_t>(m), true);
    std::vector<std::string> dropped;
    for (Eigen::Index j = 0; j < m; ++j) {
        means[j] = d.features.col(j).mean();
        double ss = (d.features.col(j).array() - means[j]).square().sum();
        stds[j] = std::sqrt(ss / static_cast<double>(n - 1));
        if (stds[j] < 1e-12) {
            keep[static_cast<std::size_t>(j)] = false;
            dropped.push_back(d.feature_names[static_cast<std::size_t>(j)]);
        }
    }
    if (!dropped.empty()) {
        std::cerr << "warning: dropping constant feature column(s):";
        for (const auto& nm : dropped) std::cerr << ' ' << nm;
        std::cerr << '\n';
    }

    Eigen::Index m_kept = static_cast<Eigen::Index>(
        std::count(keep.begin(), keep.end(), true));
    Dataset out;
    out.features.resize(n, m_kept);
    out.column_means.resize(m_kept);
    out.column_stds.resize(m_kept);
    out.feature_names.reserve(static_cast<std::size_t>(m_kept));
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < m; ++j) {
        if (!keep[static_cast<std::size_t>(j)]) continue;
        out.features.col(k) = (d.features.col(j).array() - means[j]) / stds[j];
        out.column_means[k] = means[j];
        out.column_stds[k] = stds[j];
        out.feature_names.push_back(d.feature_names[static_cast<std::size_t>(j)]);
        ++k;
    }
    out.rul = d.rul;
    out.failure_type = d.failure_type;
    out.strata = d.strata;
    out.standardized = true;
    out.dropped_constant_columns = std::move(dropped);
    return out;
}

/// Apply previously computed means/stds columnwise; nothing is recomputed from
/// the data, so train-time statistics transfer exactly to test data.
inline Dataset apply_standardization(const Dataset& d, const Eigen::VectorXd& means,
                                     const Eigen::VectorXd& stds) {
    if (means.size() != d.m() || stds.size() != d.m())
        throw ValidationError("apply_standardization: expected " + std::to_string(d.m()) +
                              " means/stds, got " + std::to_string(means.size()) + "/" +
                              std::to_string(stds.size()));
    for (Eigen::Index j = 0; j < stds.size(); ++j)
        if (!(stds[j] > 0.0))
            throw ValidationError("apply_standardization: std for column '" +
                                  d.feature_names[static_cast<std::size_t>(j)] +
                                  "' is not positive");
    Dataset out = d;
    for (Eigen::Index j = 0; j < d.m(); ++j)
        out.features.col(j) = (d.features.col(j).array() - means[j]) / stds[j];
    out.standardized = true;
    out.column_means = means;
    out.column_stds = stds;
    return out;
}

struct RulWindowResult {
    Dataset data;
    std::size_t removed_below = 0;
    std::size_t removed_above = 0;
};

/// Keep rows with low <= rul <= high, reporting how many fell on each side.
inline RulWindowResult filter_rul_window(const Dataset& d, double low, double high) {
    if (!(low < high)) throw ValidationError("filter_rul_window: low must be < high");
    std::vector<Eigen::Index> kept;
    RulWindowResult res;
    for (Eigen::Index i = 0; i < d.n(); ++i) {
        if (d.rul[i] < low) ++res.removed_below;
        else if (d.rul[i] > high) ++res.removed_above;
        else kept.push_back(i);
    }
    if (kept.empty())
        throw ValidationError("empty-result: no rows with rul in [" + format_double(low) + ", " +
                              format_double(high) + "]");
    res.data = d.subset_rows(kept);
    return res;
}

struct SynthResult {
    Dataset data;
    ModelParams truth;
    std::vector<std::string> support;  // names of the k_shared planted features
};

/// Seeded generator: standard-normal features (optionally equicorrelated), a
/// random shared support of size k_shared carrying nonzero A and B, Gaussian
/// regression noise and Bernoulli(sigmoid) class labels.
inline SynthResult generate_synthetic(const SynthSpec& spec) {
    spec.validate();
    std::mt19937_64 rng = make_engine(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const Eigen::Index n = spec.n, m = spec.m;

    // Support: partial Fisher-Yates over feature indices.
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(m));
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    for (Eigen::Index i = 0; i < spec.k_shared; ++i) {
        std::uniform_int_distribution<Eigen::Index> pick(i, m - 1);
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(pick(rng))]);
    }
    std::vector<Eigen::Index> support(perm.begin(), perm.begin() + spec.k_shared);
    std::sort(support.begin(), support.end());

    ModelParams truth(m);
    truth.a0 = spec.intercept_rul;
    truth.b0 = spec.intercept_class;
    for (Eigen::Index j : support) {
        double mag_a = 0.5 + unit(rng);
        double sign_a = unit(rng) < 0.5 ? -1.0 : 1.0;
        double mag_b = 0.5 + unit(rng);
        double sign_b = unit(rng) < 0.5 ? -1.0 : 1.0;
        truth.A[j] = sign_a * mag_a;
        truth.B[j] = sign_b * mag_b;
    }

    Dataset d;
    d.features.resize(n, m);
    const double rho = spec.correlation;
    const double w_common = std::sqrt(rho), w_own = std::sqrt(1.0 - rho);
    for (Eigen::Index i = 0; i < n; ++i) {
        double common = (rho > 0.0) ? gauss(rng) : 0.0;
        for (Eigen::Index j = 0; j < m; ++j)
            d.features(i, j) = w_own * gauss(rng) + w_common * common;
    }

    d.rul = (d.features * truth.A).array() + truth.a0;
    if (spec.noise_std > 0.0)
        for (Eigen::Index i = 0; i < n; ++i) d.rul[i] += spec.noise_std * gauss(rng);

    Eigen::VectorXd eta = (d.features * truth.B).array() + truth.b0;
    d.failure_type.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double p = 1.0 / (1.0 + std::exp(-eta[i]));
        d.failure_type[i] = unit(rng) < p ? 1.0 : 0.0;
    }

    d.feature_names.reserve(static_cast<std::size_t>(m));
    for (Eigen::Index j = 0; j < m; ++j) d.feature_names.push_back("f" + std::to_string(j + 1));

    SynthResult res;
    res.data = std::move(d);
    res.truth = std::move(truth);
    for (Eigen::Index j : support)
        res.support.push_back(res.data.feature_names[static_cast<std::size_t>(j)]);
    return res;
}

}  // namespace mtfs
