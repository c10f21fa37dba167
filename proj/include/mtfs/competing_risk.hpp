#pragma once

#include <algorithm>
#include <cstddef>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mtfs/csv.hpp"
#include "mtfs/dataset.hpp"
#include "mtfs/errors.hpp"

namespace mtfs {

/// One jump of the per-stratum cumulative incidence step functions.
struct CifStep {
    double time = 0.0;
    double cif_n = 0.0;      // P(fail by t from cause N)
    double cif_t = 0.0;      // P(fail by t from cause T)
    double survival = 1.0;   // overall Kaplan-Meier survival after t
    std::size_t n_at_risk = 0;  // risk-set size just before t
    std::size_t events_n = 0;
    std::size_t events_t = 0;
    std::size_t censored = 0;
};

struct CifTable {
    std::map<std::string, std::string> stratum;
    std::vector<CifStep> steps;
    std::size_t n_total = 0;
    std::size_t n_events_n = 0;
    std::size_t n_events_t = 0;
    std::size_t n_censored = 0;
};

inline std::string stratum_label(const CifTable& table) {
    if (table.stratum.empty()) return "all";
    std::ostringstream out;
    bool first = true;
    for (const auto& [k, v] : table.stratum) {
        if (!first) out << '_';
        out << k << '=' << v;
        first = false;
    }
    return out.str();
}

/// Aalen-Johansen estimate of the cause-specific cumulative incidence, one
/// table per stratum of the group_by keys. At each distinct event time t with
/// d_k cause-k events among r at risk, CIF_k jumps by S(t-) * d_k / r and the
/// survival updates multiplicatively; censored records leave the risk set
/// after their time (at ties, events are counted against the pre-tie risk
/// set together with the censorings' departure afterwards). With no censoring
/// this reduces to the empirical fraction of cause-k failures by time t.
inline std::vector<CifTable> estimate_cif(const std::vector<EventRecord>& events,
                                          const std::vector<std::string>& group_by = {}) {
    if (events.empty()) throw ValidationError("estimate_cif: no events");
    for (std::size_t i = 0; i < events.size(); ++i)
        if (!(events[i].event_time > 0.0))
            throw ValidationError("estimate_cif: event time must be positive at record " +
                                  std::to_string(i + 1));

    // Partition by the joined group_by values; std::map keeps output order stable.
    std::map<std::vector<std::string>, std::vector<const EventRecord*>> groups;
    for (const auto& e : events) {
        std::vector<std::string> key;
        key.reserve(group_by.size());
        for (const auto& k : group_by) {
            auto it = e.stratum_keys.find(k);
            if (it == e.stratum_keys.end())
                throw ValidationError("estimate_cif: record lacks stratum key '" + k + "'");
            key.push_back(it->second);
        }
        groups[key].push_back(&e);
    }

    std::vector<CifTable> tables;
    for (const auto& [key, recs] : groups) {
        if (recs.empty()) {
            std::cerr << "warning: empty stratum omitted from the CIF estimate\n";
            continue;
        }
        CifTable table;
        for (std::size_t i = 0; i < group_by.size(); ++i) table.stratum[group_by[i]] = key[i];
        table.n_total = recs.size();

        std::vector<const EventRecord*> sorted = recs;
        std::sort(sorted.begin(), sorted.end(),
                  [](const EventRecord* a, const EventRecord* b) {
                      return a->event_time < b->event_time;
                  });

        double survival = 1.0;
        double cif_n = 0.0, cif_t = 0.0;
        std::size_t at_risk = sorted.size();
        std::size_t i = 0;
        while (i < sorted.size()) {
            const double t = sorted[i]->event_time;
            std::size_t d_n = 0, d_t = 0, c = 0;
            while (i < sorted.size() && sorted[i]->event_time == t) {
                switch (sorted[i]->event_type) {
                    case EventType::N: ++d_n; break;
                    case EventType::T: ++d_t; break;
                    case EventType::Censored: ++c; break;
                }
                ++i;
            }
            table.n_events_n += d_n;
            table.n_events_t += d_t;
            table.n_censored += c;

            CifStep step;
            step.time = t;
            step.n_at_risk = at_risk;
            step.events_n = d_n;
            step.events_t = d_t;
            step.censored = c;
            if (d_n + d_t > 0) {
                const double r = static_cast<double>(at_risk);
                cif_n += survival * static_cast<double>(d_n) / r;
                cif_t += survival * static_cast<double>(d_t) / r;
                survival *= 1.0 - static_cast<double>(d_n + d_t) / r;
            }
            step.cif_n = cif_n;
            step.cif_t = cif_t;
            step.survival = survival;
            table.steps.push_back(step);
            at_risk -= d_n + d_t + c;
        }
        tables.push_back(std::move(table));
    }
    return tables;
}

/// Right-continuous point query: the post-jump value at the last event time
/// <= t, zero before the first event.
inline double cif_at(const CifTable& table, EventType type, double t) {
    if (!(t >= 0.0)) throw ValidationError("cif_at: time must be >= 0");
    if (type == EventType::Censored)
        throw ValidationError("cif_at: query type must be a failure type (N or T)");
    const CifStep* last = nullptr;
    for (const auto& step : table.steps) {
        if (step.time > t) break;
        last = &step;
    }
    if (!last) return 0.0;
    return type == EventType::N ? last->cif_n : last->cif_t;
}

inline void write_cif_csv(const std::string& path, const CifTable& table) {
    CsvTable out;
    out.header = {"time", "cif_N", "cif_T", "survival", "n_at_risk"};
    for (const auto& step : table.steps)
        out.rows.push_back({format_double(step.time), format_double(step.cif_n),
                            format_double(step.cif_t), format_double(step.survival),
                            std::to_string(step.n_at_risk)});
    write_csv_file(path, out);
}

}  // namespace mtfs
