// Command-line front end: dataset synthesis, joint fitting, lambda-path
// sweeps, feature selection, competing-risk CIF estimation, cross-validation
// and scoring. Every run writes a resolved-config snapshot next to its
// outputs; re-feeding the snapshot via --config reproduces the run.

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Core>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "mtfs/mtfs.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mtfs;

namespace {

json load_config_json(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ValidationError("malformed config JSON in " + path + ": " + e.what());
    }
    if (!j.is_object()) throw ValidationError("config must be a JSON object");
    return j;
}

// Flags beat config-file values; config-file values beat defaults.
struct ConfigMerge {
    json file;

    template <class T>
    void apply(const CLI::Option* opt, const char* key, T& value) const {
        if (opt != nullptr && opt->count() > 0) return;
        if (file.contains(key)) value = file.at(key).get<T>();
    }
};

void write_json_file(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write file: " + path.string());
    out << j.dump(2) << '\n';
}

fs::path prepare_out_dir(const std::string& out) {
    fs::path dir(out);
    fs::create_directories(dir);
    return dir;
}

std::vector<double> parse_ratio_list(const std::string& csv) {
    std::vector<double> ratios;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) ratios.push_back(parse_double(tok, "--ratios"));
    return ratios;
}

std::string sanitize_filename(const std::string& raw) {
    std::string out;
    for (char c : raw)
        out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.') ? c : '_';
    return out;
}

json joint_model_to_json(const Dataset& d, const ModelParams& p, const Hyperparams& h,
                         const FitResult& fr) {
    json j;
    j["kind"] = "joint";
    j["feature_names"] = d.feature_names;
    j["a0"] = p.a0;
    j["A"] = std::vector<double>(p.A.begin(), p.A.end());
    j["b0"] = p.b0;
    j["B"] = std::vector<double>(p.B.begin(), p.B.end());
    j["theta"] = h.theta;
    j["lambda"] = h.lambda;
    j["penalty"] = penalty_mode_name(h.penalty);
    j["means"] = std::vector<double>(d.column_means.begin(), d.column_means.end());
    j["stds"] = std::vector<double>(d.column_stds.begin(), d.column_stds.end());
    j["dropped_constant_columns"] = d.dropped_constant_columns;
    j["iterations"] = fr.iterations;
    j["converged"] = fr.converged;
    return j;
}

void write_trace_csv(const fs::path& path, const std::vector<LossBreakdown>& trace,
                     std::size_t stride) {
    CsvTable table;
    table.header = {"step", "L", "L_r", "L_c", "L_n", "theta_Lr", "lambda_Ln"};
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const auto& b = trace[i];
        table.rows.push_back({std::to_string(i == 0 ? 0 : 1 + (i - 1) * stride),
                              format_double(b.total), format_double(b.l_r),
                              format_double(b.l_c), format_double(b.l_n),
                              format_double(b.theta_l_r), format_double(b.lambda_l_n)});
    }
    write_csv_file(path.string(), table);
}

// Options shared by the fitting subcommands.
struct SolverOpts {
    double gamma = 1e-4;
    std::string line_search = "backtracking";
    double tol = 1e-6;
    std::uint64_t max_iters = 100000;
    bool auto_step = false;

    CLI::Option* o_gamma = nullptr;
    CLI::Option* o_ls = nullptr;
    CLI::Option* o_tol = nullptr;
    CLI::Option* o_max = nullptr;
    CLI::Option* o_auto = nullptr;

    void attach(CLI::App* cmd) {
        o_gamma = cmd->add_option("--gamma", gamma, "initial step size");
        o_ls = cmd->add_option("--line-search", line_search, "fixed|backtracking");
        o_tol = cmd->add_option("--tol", tol, "relative-change stopping tolerance");
        o_max = cmd->add_option("--max-iters", max_iters, "iteration cap");
        o_auto = cmd->add_flag("--auto-step", auto_step,
                               "fixed step from a curvature bound (overrides --gamma)");
    }

    void merge(const ConfigMerge& cm) {
        cm.apply(o_gamma, "gamma", gamma);
        cm.apply(o_ls, "line_search", line_search);
        cm.apply(o_tol, "tol", tol);
        cm.apply(o_max, "max_iters", max_iters);
        cm.apply(o_auto, "auto_step", auto_step);
    }

    SolverConfig base_config() const {
        SolverConfig cfg;
        cfg.gamma = gamma;
        if (line_search == "fixed") cfg.line_search = LineSearch::Fixed;
        else if (line_search == "backtracking") cfg.line_search = LineSearch::Backtracking;
        else throw ValidationError("unknown line search '" + line_search + "'");
        cfg.tolerance = tol;
        cfg.max_iters = max_iters;
        return cfg;
    }

    SolverConfig resolve(const Dataset& d, const Hyperparams& h) const {
        SolverConfig cfg = base_config();
        if (auto_step) {
            cfg.line_search = LineSearch::Fixed;
            cfg.gamma = suggested_fixed_step(d, h);
        }
        return cfg;
    }

    void snapshot(json& j) const {
        j["gamma"] = gamma;
        j["line_search"] = line_search;
        j["tol"] = tol;
        j["max_iters"] = max_iters;
        j["auto_step"] = auto_step;
    }
};

struct SelectionOpts {
    std::string mode = "intersection";
    double reg_threshold = 0.01;
    double cls_threshold = 0.01;
    double group_cutoff = 0.01;

    CLI::Option* o_mode = nullptr;
    CLI::Option* o_reg = nullptr;
    CLI::Option* o_cls = nullptr;
    CLI::Option* o_cut = nullptr;

    void attach(CLI::App* cmd) {
        o_mode = cmd->add_option("--select-mode", mode, "intersection|group-norm");
        o_reg = cmd->add_option("--reg-threshold", reg_threshold, "|a_j| selection cutoff");
        o_cls = cmd->add_option("--cls-threshold", cls_threshold, "|b_j| selection cutoff");
        o_cut = cmd->add_option("--group-cutoff", group_cutoff,
                                "||(a_j,b_j)|| cutoff in group-norm mode");
    }

    void merge(const ConfigMerge& cm) {
        cm.apply(o_mode, "select_mode", mode);
        cm.apply(o_reg, "reg_threshold", reg_threshold);
        cm.apply(o_cls, "cls_threshold", cls_threshold);
        cm.apply(o_cut, "group_cutoff", group_cutoff);
    }

    SelectionCriteria criteria() const {
        SelectionCriteria c;
        if (mode == "intersection") c.mode = SelectionMode::Intersection;
        else if (mode == "group-norm") c.mode = SelectionMode::GroupNorm;
        else throw ValidationError("unknown selection mode '" + mode + "'");
        c.reg_threshold = reg_threshold;
        c.cls_threshold = cls_threshold;
        c.group_cutoff = group_cutoff;
        return c;
    }

    void snapshot(json& j) const {
        j["select_mode"] = mode;
        j["reg_threshold"] = reg_threshold;
        j["cls_threshold"] = cls_threshold;
        j["group_cutoff"] = group_cutoff;
    }
};

// ---------------------------------------------------------------------------
// synth

struct SynthOpts {
    std::string config, out = "out";
    std::int64_t n = 500, m = 50, k_shared = 8;
    double noise_std = 0.5, correlation = 0.0, a0 = 100.0, b0 = 0.0;
    std::uint64_t seed = 0;
};

void register_synth(CLI::App& app) {
    auto opts = std::make_shared<SynthOpts>();
    CLI::App* cmd = app.add_subcommand("synth", "generate a synthetic dataset with planted "
                                                "joint-sparse ground truth");
    cmd->add_option("--config", opts->config, "JSON config file");
    auto* on = cmd->add_option("--n", opts->n, "rows");
    auto* om = cmd->add_option("--m", opts->m, "features");
    auto* ok = cmd->add_option("--k-shared", opts->k_shared, "features active in both tasks");
    auto* ons = cmd->add_option("--noise-std", opts->noise_std, "regression noise scale");
    auto* oc = cmd->add_option("--correlation", opts->correlation, "pairwise correlation");
    auto* oa = cmd->add_option("--a0", opts->a0, "regression intercept (days)");
    auto* ob = cmd->add_option("--b0", opts->b0, "classification intercept");
    auto* os = cmd->add_option("--seed", opts->seed, "rng seed");
    auto* oo = cmd->add_option("--out", opts->out, "output directory");

    cmd->callback([opts, on, om, ok, ons, oc, oa, ob, os, oo]() {
        ConfigMerge cm{load_config_json(opts->config)};
        cm.apply(on, "n", opts->n);
        cm.apply(om, "m", opts->m);
        cm.apply(ok, "k_shared", opts->k_shared);
        cm.apply(ons, "noise_std", opts->noise_std);
        cm.apply(oc, "correlation", opts->correlation);
        cm.apply(oa, "a0", opts->a0);
        cm.apply(ob, "b0", opts->b0);
        cm.apply(os, "seed", opts->seed);
        cm.apply(oo, "out", opts->out);

        SynthSpec spec;
        spec.n = opts->n;
        spec.m = opts->m;
        spec.k_shared = opts->k_shared;
        spec.noise_std = opts->noise_std;
        spec.correlation = opts->correlation;
        spec.intercept_rul = opts->a0;
        spec.intercept_class = opts->b0;
        spec.seed = opts->seed;
        SynthResult res = generate_synthetic(spec);

        fs::path dir = prepare_out_dir(opts->out);
        write_csv((dir / "dataset.csv").string(), res.data);

        Schema schema;
        for (const auto& nm : res.data.feature_names) schema[nm] = ColumnRole::Feature;
        schema["rul"] = ColumnRole::Rul;
        schema["failure_type"] = ColumnRole::FailureType;
        save_schema((dir / "schema.json").string(), schema);

        json truth;
        truth["a0"] = res.truth.a0;
        truth["b0"] = res.truth.b0;
        truth["A"] = std::vector<double>(res.truth.A.begin(), res.truth.A.end());
        truth["B"] = std::vector<double>(res.truth.B.begin(), res.truth.B.end());
        truth["support"] = res.support;
        truth["feature_names"] = res.data.feature_names;
        write_json_file(dir / "truth.json", truth);

        json snap{{"subcommand", "synth"},
                  {"n", opts->n},
                  {"m", opts->m},
                  {"k_shared", opts->k_shared},
                  {"noise_std", opts->noise_std},
                  {"correlation", opts->correlation},
                  {"a0", opts->a0},
                  {"b0", opts->b0},
                  {"seed", opts->seed},
                  {"out", opts->out}};
        write_json_file(dir / "config.resolved.json", snap);
    });
}

// ---------------------------------------------------------------------------
// shared data loading for the fitting subcommands

Dataset load_standardized(const std::string& data, const std::string& schema_path) {
    if (data.empty()) throw ValidationError("--data is required");
    if (schema_path.empty()) throw ValidationError("--schema is required");
    Dataset raw = load_csv(data, load_schema(schema_path));
    return standardize(raw);
}

// ---------------------------------------------------------------------------
// fit

struct FitOpts {
    std::string config, data, schema, out = "out", penalty = "group";
    double theta = 1.0, lambda = -1.0, ratio = -1.0;
    std::uint64_t trace_every = 1;
    SolverOpts solver;
};

void register_fit(CLI::App& app) {
    auto opts = std::make_shared<FitOpts>();
    CLI::App* cmd = app.add_subcommand("fit", "fit the joint model at one lambda");
    cmd->add_option("--config", opts->config, "JSON config file");
    auto* od = cmd->add_option("--data", opts->data, "dataset CSV");
    auto* osch = cmd->add_option("--schema", opts->schema, "column-role schema JSON");
    auto* ot = cmd->add_option("--theta", opts->theta, "regression-loss weight");
    auto* ol = cmd->add_option("--lambda", opts->lambda, "absolute penalty weight");
    auto* orr = cmd->add_option("--ratio", opts->ratio, "lambda as a ratio of lambda_max");
    auto* op = cmd->add_option("--penalty", opts->penalty, "ridge|group");
    auto* otr = cmd->add_option("--trace-every", opts->trace_every,
                                "record the loss breakdown every N steps (0 = final only)");
    auto* oo = cmd->add_option("--out", opts->out, "output directory");
    opts->solver.attach(cmd);

    cmd->callback([opts, od, osch, ot, ol, orr, op, otr, oo]() {
        ConfigMerge cm{load_config_json(opts->config)};
        cm.apply(od, "data", opts->data);
        cm.apply(osch, "schema", opts->schema);
        cm.apply(ot, "theta", opts->theta);
        cm.apply(ol, "lambda", opts->lambda);
        cm.apply(orr, "ratio", opts->ratio);
        cm.apply(op, "penalty", opts->penalty);
        cm.apply(otr, "trace_every", opts->trace_every);
        cm.apply(oo, "out", opts->out);
        opts->solver.merge(cm);

        Dataset d = load_standardized(opts->data, opts->schema);
        Hyperparams h;
        h.theta = opts->theta;
        h.penalty = penalty_mode_from_name(opts->penalty);
        if (opts->lambda >= 0.0 && opts->ratio >= 0.0)
            throw ValidationError("give either --lambda or --ratio, not both");
        if (opts->ratio >= 0.0) h.lambda = opts->ratio * lambda_max(d, h.theta);
        else h.lambda = std::max(opts->lambda, 0.0);

        SolverConfig cfg = opts->solver.resolve(d, h);
        cfg.trace_every = opts->trace_every == 0 ? 0 : opts->trace_every;
        FitResult fr = fit(d, h, cfg);

        fs::path dir = prepare_out_dir(opts->out);
        write_json_file(dir / "model.json", joint_model_to_json(d, fr.params, h, fr));
        write_trace_csv(dir / "trace.csv", fr.trace, std::max<std::uint64_t>(opts->trace_every, 1));

        json snap{{"subcommand", "fit"},   {"data", opts->data},
                  {"schema", opts->schema}, {"theta", opts->theta},
                  {"lambda", opts->lambda}, {"ratio", opts->ratio},
                  {"penalty", opts->penalty}, {"trace_every", opts->trace_every},
                  {"out", opts->out}};
        opts->solver.snapshot(snap);
        snap["resolved_lambda"] = h.lambda;
        write_json_file(dir / "config.resolved.json", snap);
    });
}

// ---------------------------------------------------------------------------
// path

struct PathOpts {
    std::string config, data, schema, out = "out", penalty = "group", ratios;
    double theta = 1.0, lambda_max_override = -1.0;
    bool cold_start = false;
    SolverOpts solver;
    SelectionOpts selection;
};

void register_path(CLI::App& app) {
    auto opts = std::make_shared<PathOpts>();
    CLI::App* cmd = app.add_subcommand("path", "sweep lambda over a grid of lambda_max ratios");
    cmd->add_option("--config", opts->config, "JSON config file");
    auto* od = cmd->add_option("--data", opts->data, "dataset CSV");
    auto* osch = cmd->add_option("--schema", opts->schema, "column-role schema JSON");
    auto* ot = cmd->add_option("--theta", opts->theta, "regression-loss weight");
    auto* orr = cmd->add_option("--ratios", opts->ratios,
                                "comma-separated ascending ratios (default 0,0.05,...,1)");
    auto* op = cmd->add_option("--penalty", opts->penalty, "ridge|group");
    auto* olm = cmd->add_option("--lambda-max", opts->lambda_max_override,
                                "override the computed lambda_max (e.g. 100)");
    auto* oc = cmd->add_flag("--cold-start", opts->cold_start,
                             "fit every ratio from the zero-coefficient start");
    auto* oo = cmd->add_option("--out", opts->out, "output directory");
    opts->solver.attach(cmd);
    opts->selection.attach(cmd);

    cmd->callback([opts, od, osch, ot, orr, op, olm, oc, oo]() {
        ConfigMerge cm{load_config_json(opts->config)};
        cm.apply(od, "data", opts->data);
        cm.apply(osch, "schema", opts->schema);
        cm.apply(ot, "theta", opts->theta);
        cm.apply(orr, "ratios", opts->ratios);
        cm.apply(op, "penalty", opts->penalty);
        cm.apply(olm, "lambda_max", opts->lambda_max_override);
        cm.apply(oc, "cold_start", opts->cold_start);
        cm.apply(oo, "out", opts->out);
        opts->solver.merge(cm);
        opts->selection.merge(cm);

        Dataset d = load_standardized(opts->data, opts->schema);
        std::vector<double> ratios =
            opts->ratios.empty() ? default_ratio_grid() : parse_ratio_list(opts->ratios);
        PenaltyMode mode = penalty_mode_from_name(opts->penalty);

        Hyperparams h_probe;
        h_probe.theta = opts->theta;
        h_probe.penalty = mode;
        SolverConfig cfg = opts->solver.resolve(d, h_probe);
        cfg.trace_every = 0;

        SweepOptions sweep_opts;
        sweep_opts.warm_start = !opts->cold_start;
        if (opts->lambda_max_override >= 0.0)
            sweep_opts.lambda_max_override = opts->lambda_max_override;

        auto entries = sweep(d, opts->theta, ratios, mode, cfg, opts->selection.criteria(),
                             sweep_opts);

        fs::path dir = prepare_out_dir(opts->out);
        write_path_csv((dir / "path.csv").string(), entries);

        json snap{{"subcommand", "path"},    {"data", opts->data},
                  {"schema", opts->schema},  {"theta", opts->theta},
                  {"ratios", opts->ratios},  {"penalty", opts->penalty},
                  {"lambda_max", opts->lambda_max_override},
                  {"cold_start", opts->cold_start}, {"out", opts->out}};
        opts->solver.snapshot(snap);
        opts->selection.snapshot(snap);
        write_json_file(dir / "config.resolved.json", snap);
    });
}

// ---------------------------------------------------------------------------
// select

struct SelectOpts {
    std::string config, data, schema, model, out = "out", penalty = "group";
    double theta = 1.0, lambda = -1.0, ratio = -1.0;
    SolverOpts solver;
    SelectionOpts selection;
};

void register_select(CLI::App& app) {
    auto opts = std::make_shared<SelectOpts>();
    CLI::App* cmd = app.add_subcommand(
        "select", "apply the selection criteria to a fit (or fit first at --ratio/--lambda)");
    cmd->add_option("--config", opts->config, "JSON config file");
    auto* od = cmd->add_option("--data", opts->data, "dataset CSV");
    auto* osch = cmd->add_option("--schema", opts->schema, "column-role schema JSON");
    auto* omo = cmd->add_option("--model", opts->model, "joint model JSON from 'fit'");
    auto* ot = cmd->add_option("--theta", opts->theta, "regression-loss weight");
    auto* ol = cmd->add_option("--lambda", opts->lambda, "absolute penalty weight");
    auto* orr = cmd->add_option("--ratio", opts->ratio, "lambda as a ratio of lambda_max");
    auto* op = cmd->add_option("--penalty", opts->penalty, "ridge|group");
    auto* oo = cmd->add_option("--out", opts->out, "output directory");
    opts->solver.attach(cmd);
    opts->selection.attach(cmd);

    cmd->callback([opts, od, osch, omo, ot, ol, orr, op, oo]() {
        ConfigMerge cm{load_config_json(opts->config)};
        cm.apply(od, "data", opts->data);
        cm.apply(osch, "schema", opts->schema);
        cm.apply(omo, "model", opts->model);
        cm.apply(ot, "theta", opts->theta);
        cm.apply(ol, "lambda", opts->lambda);
        cm.apply(orr, "ratio", opts->ratio);
        cm.apply(op, "penalty", opts->penalty);
        cm.apply(oo, "out", opts->out);
        opts->solver.merge(cm);
        opts->selection.merge(cm);

        fs::path dir = prepare_out_dir(opts->out);
        SelectionCriteria criteria = opts->selection.criteria();
        std::vector<std::string> selected;
        double used_lambda = 0.0;

        if (!opts->model.empty()) {
            std::ifstream in(opts->model);
            if (!in) throw ValidationError("cannot open model file: " + opts->model);
            json j;
            in >> j;
            if (j.value("kind", "") != "joint")
                throw ValidationError("select: --model must be a joint model JSON");
            auto names = j.at("feature_names").get<std::vector<std::string>>();
            auto av = j.at("A").get<std::vector<double>>();
            auto bv = j.at("B").get<std::vector<double>>();
            ModelParams p(static_cast<Eigen::Index>(av.size()));
            p.A = Eigen::Map<const Eigen::VectorXd>(av.data(), av.size());
            p.B = Eigen::Map<const Eigen::VectorXd>(bv.data(), bv.size());
            p.a0 = j.at("a0").get<double>();
            p.b0 = j.at("b0").get<double>();
            used_lambda = j.value("lambda", 0.0);
            selected = select_common(p, names, criteria);
        } else {
            Dataset d = load_standardized(opts->data, opts->schema);
            Hyperparams h;
            h.theta = opts->theta;
            h.penalty = penalty_mode_from_name(opts->penalty);
            if (opts->ratio >= 0.0) h.lambda = opts->ratio * lambda_max(d, h.theta);
            else if (opts->lambda >= 0.0) h.lambda = opts->lambda;
            else throw ValidationError("select needs --model, --ratio or --lambda");
            used_lambda = h.lambda;
            SolverConfig cfg = opts->solver.resolve(d, h);
            cfg.trace_every = 0;
            FitResult fr = fit(d, h, cfg);
            selected = select_common(fr.params, d.feature_names, criteria);
            write_json_file(dir / "model.json", joint_model_to_json(d, fr.params, h, fr));
        }

        json out;
        out["selected"] = selected;
        out["selected_count"] = selected.size();
        out["lambda"] = used_lambda;
        write_json_file(dir / "selected.json", out);

        json snap{{"subcommand", "select"}, {"data", opts->data},
                  {"schema", opts->schema}, {"model", opts->model},
                  {"theta", opts->theta},   {"lambda", opts->lambda},
                  {"ratio", opts->ratio},   {"penalty", opts->penalty},
                  {"out", opts->out}};
        opts->solver.snapshot(snap);
        opts->selection.snapshot(snap);
        write_json_file(dir / "config.resolved.json", snap);
    });
}

// ---------------------------------------------------------------------------
// cif

struct CifOpts {
    std::string config, data, schema, out = "out", group_by;
};

void register_cif(CLI::App& app) {
    auto opts = std::make_shared<CifOpts>();
    CLI::App* cmd = app.add_subcommand("cif", "estimate cumulative incidence per failure type");
    cmd->add_option("--config", opts->config, "JSON config file");
    auto* od = cmd->add_option("--data", opts->data, "events CSV");
    auto* osch = cmd->add_option("--schema", opts->schema, "column-role schema JSON");
    auto* og = cmd->add_option("--group-by", opts->group_by,
                               "comma-separated stratum columns (default: none)");
    auto* oo = cmd->add_option("--out", opts->out, "output directory");

    cmd->callback([opts, od, osch, og, oo]() {
        ConfigMerge cm{load_config_json(opts->config)};
        cm.apply(od, "data", opts->data);
        cm.apply(osch, "schema", opts->schema);
        cm.apply(og, "group_by", opts->group_by);
        cm.apply(oo, "out", opts->out);

        if (opts->data.empty()) throw ValidationError("--data is required");
        if (opts->schema.empty()) throw ValidationError("--schema is required");
        auto events = load_events(opts->data, load_schema(opts->schema));

        std::vector<std::string> keys;
        std::stringstream ss(opts->group_by);
        std::string tok;
        while (std::getline(ss, tok, ','))
            if (!tok.empty()) keys.push_back(tok);

        auto tables = estimate_cif(events, keys);
        fs::path dir = prepare_out_dir(opts->out);
        json index = json::array();
        for (const auto& table : tables) {
            std::string label = stratum_label(table);
            std::string file = "cif_" + sanitize_filename(label) + ".csv";
            write_cif_csv((dir / file).string(), table);
            index.push_back({{"stratum", label},
                             {"file", file},
                             {"n_total", table.n_total},
                             {"n_events_N", table.n_events_n},
                             {"n_events_T", table.n_events_t},
                             {"n_censored", table.n_censored}});
        }
        write_json_file(dir / "cif_index.json", index);

        json snap{{"subcommand", "cif"},
                  {"data", opts->data},
                  {"schema", opts->schema},
                  {"group_by", opts->group_by},
                  {"out", opts->out}};
        write_json_file(dir / "config.resolved.json", snap);
    });
}

// ---------------------------------------------------------------------------
// cv

struct CvOpts {
    std::string config, data, schema, out = "out", penalty = "group", method = "mtfs";
    double theta = 1.0, ratio = 0.3, svm_c = 1.0, svr_c = 1.0, svr_epsilon = 10.0;
    std::uint64_t k = 5, seed = 0;
    bool no_models = false;
    SolverOpts solver;
    SelectionOpts selection;
};

void register_cv(CLI::App& app) {
    auto opts = std::make_shared<CvOpts>();
    CLI::App* cmd = app.add_subcommand("cv", "k-fold cross-validation of the full pipeline");
    cmd->add_option("--config", opts->config, "JSON config file");
    auto* od = cmd->add_option("--data", opts->data, "dataset CSV");
    auto* osch = cmd->add_option("--schema", opts->schema, "column-role schema JSON");
    auto* ome = cmd->add_option("--method", opts->method, "mtfs|single");
    auto* ot = cmd->add_option("--theta", opts->theta, "regression-loss weight");
    auto* orr = cmd->add_option("--ratio", opts->ratio, "lambda ratio of the per-fold lambda_max");
    auto* op = cmd->add_option("--penalty", opts->penalty, "ridge|group");
    auto* okk = cmd->add_option("--k", opts->k, "number of folds");
    auto* ose = cmd->add_option("--seed", opts->seed, "fold-shuffle seed");
    auto* oc1 = cmd->add_option("--svm-c", opts->svm_c, "SVM regularization trade-off");
    auto* oc2 = cmd->add_option("--svr-c", opts->svr_c, "SVR regularization trade-off");
    auto* oe = cmd->add_option("--svr-epsilon", opts->svr_epsilon, "SVR tube width (days)");
    auto* onm = cmd->add_flag("--no-models", opts->no_models,
                              "skip training final full-data models");
    auto* oo = cmd->add_option("--out", opts->out, "output directory");
    opts->solver.attach(cmd);
    opts->solver.auto_step = true;  // robust default for the pipeline
    opts->selection.attach(cmd);

    cmd->callback([opts, od, osch, ome, ot, orr, op, okk, ose, oc1, oc2, oe, onm, oo]() {
        ConfigMerge cm{load_config_json(opts->config)};
        cm.apply(od, "data", opts->data);
        cm.apply(osch, "schema", opts->schema);
        cm.apply(ome, "method", opts->method);
        cm.apply(ot, "theta", opts->theta);
        cm.apply(orr, "ratio", opts->ratio);
        cm.apply(op, "penalty", opts->penalty);
        cm.apply(okk, "k", opts->k);
        cm.apply(ose, "seed", opts->seed);
        cm.apply(oc1, "svm_c", opts->svm_c);
        cm.apply(oc2, "svr_c", opts->svr_c);
        cm.apply(oe, "svr_epsilon", opts->svr_epsilon);
        cm.apply(onm, "no_models", opts->no_models);
        cm.apply(oo, "out", opts->out);
        opts->solver.merge(cm);
        opts->selection.merge(cm);

        if (opts->data.empty()) throw ValidationError("--data is required");
        if (opts->schema.empty()) throw ValidationError("--schema is required");
        Dataset raw = load_csv(opts->data, load_schema(opts->schema));

        PipelineConfig pc;
        if (opts->method == "mtfs") pc.method = SelectionMethod::Mtfs;
        else if (opts->method == "single") pc.method = SelectionMethod::SingleTask;
        else throw ValidationError("unknown method '" + opts->method + "' (mtfs|single)");
        pc.theta = opts->theta;
        pc.lambda_ratio = opts->ratio;
        pc.penalty = penalty_mode_from_name(opts->penalty);
        pc.criteria = opts->selection.criteria();
        pc.solver = opts->solver.base_config();
        pc.solver.trace_every = 0;
        pc.auto_step = opts->solver.auto_step;
        pc.svm_c = opts->svm_c;
        pc.svr_c = opts->svr_c;
        pc.svr_epsilon = opts->svr_epsilon;

        EvalReport report = cross_validate(raw, pc, opts->k, opts->seed);

        fs::path dir = prepare_out_dir(opts->out);
        write_json_file(dir / "report.json", report_to_json(report));
        write_roc_csv((dir / "roc.csv").string(), report.roc);
        if (!report.ape_per_group.empty())
            write_ape_csv((dir / "ape_groups.csv").string(), report.ape_per_group);

        if (!opts->no_models) {
            // Final deployable models: selection and training on the full data.
            Dataset strain = standardize(raw);
            detail::FoldSelection sel = detail::select_features_for_fold(strain, pc);
            SvmModel svm = train_svm(strain.restricted_to(sel.classification), pc.svm_c,
                                     pc.predictor);
            SvrModel svr = train_svr(strain.restricted_to(sel.regression), pc.svr_epsilon,
                                     pc.svr_c, pc.predictor);
            save_model((dir / "svm_model.json").string(), to_json(svm));
            save_model((dir / "svr_model.json").string(), to_json(svr));
        }

        json snap{{"subcommand", "cv"},     {"data", opts->data},
                  {"schema", opts->schema}, {"method", opts->method},
                  {"theta", opts->theta},   {"ratio", opts->ratio},
                  {"penalty", opts->penalty}, {"k", opts->k},
                  {"seed", opts->seed},     {"svm_c", opts->svm_c},
                  {"svr_c", opts->svr_c},   {"svr_epsilon", opts->svr_epsilon},
                  {"no_models", opts->no_models}, {"out", opts->out}};
        opts->solver.snapshot(snap);
        opts->selection.snapshot(snap);
        write_json_file(dir / "config.resolved.json", snap);
    });
}

// ---------------------------------------------------------------------------
// predict

struct PredictOpts {
    std::string config, data, svm_model, svr_model, out = "out";
};

void register_predict(CLI::App& app) {
    auto opts = std::make_shared<PredictOpts>();
    CLI::App* cmd = app.add_subcommand("predict",
                                       "score a raw CSV with saved SVM/SVR models");
    cmd->add_option("--config", opts->config, "JSON config file");
    auto* od = cmd->add_option("--data", opts->data, "raw CSV to score");
    auto* o1 = cmd->add_option("--svm-model", opts->svm_model, "SVM model JSON");
    auto* o2 = cmd->add_option("--svr-model", opts->svr_model, "SVR model JSON");
    auto* oo = cmd->add_option("--out", opts->out, "output directory");

    cmd->callback([opts, od, o1, o2, oo]() {
        ConfigMerge cm{load_config_json(opts->config)};
        cm.apply(od, "data", opts->data);
        cm.apply(o1, "svm_model", opts->svm_model);
        cm.apply(o2, "svr_model", opts->svr_model);
        cm.apply(oo, "out", opts->out);

        if (opts->data.empty()) throw ValidationError("--data is required");
        if (opts->svm_model.empty() || opts->svr_model.empty())
            throw ValidationError("--svm-model and --svr-model are required");

        SvmModel svm = load_svm(opts->svm_model);
        SvrModel svr = load_svr(opts->svr_model);
        CsvTable table = read_csv_file(opts->data);
        if (table.rows.empty()) throw ValidationError("empty-input: no data rows to score");

        auto column_of = [&](const std::string& name) {
            for (std::size_t j = 0; j < table.header.size(); ++j)
                if (table.header[j] == name) return j;
            throw SchemaError("model feature '" + name + "' not found in the CSV header");
        };
        std::vector<std::size_t> svm_cols, svr_cols;
        for (const auto& nm : svm.feature_names) svm_cols.push_back(column_of(nm));
        for (const auto& nm : svr.feature_names) svr_cols.push_back(column_of(nm));

        CsvTable out = table;
        out.header.push_back("predicted_rul");
        out.header.push_back("predicted_failure_type");
        for (std::size_t i = 0; i < table.rows.size(); ++i) {
            const std::string where = "row " + std::to_string(i + 1);
            Eigen::VectorXd xc(static_cast<Eigen::Index>(svm_cols.size()));
            for (std::size_t j = 0; j < svm_cols.size(); ++j)
                xc[static_cast<Eigen::Index>(j)] =
                    parse_double(table.rows[i][svm_cols[j]], where);
            Eigen::VectorXd xr(static_cast<Eigen::Index>(svr_cols.size()));
            for (std::size_t j = 0; j < svr_cols.size(); ++j)
                xr[static_cast<Eigen::Index>(j)] =
                    parse_double(table.rows[i][svr_cols[j]], where);
            double rul = predict_rul_raw(svr, xr);
            int cls = decision_value_raw(svm, xc) >= 0.0 ? 1 : 0;
            out.rows[i].push_back(format_double(rul));
            out.rows[i].push_back(std::to_string(cls));
        }

        fs::path dir = prepare_out_dir(opts->out);
        write_csv_file((dir / "scored.csv").string(), out);

        json snap{{"subcommand", "predict"},
                  {"data", opts->data},
                  {"svm_model", opts->svm_model},
                  {"svr_model", opts->svr_model},
                  {"out", opts->out}};
        write_json_file(dir / "config.resolved.json", snap);
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"joint multi-task feature selection for RUL regression and failure-type "
                 "classification"};
    app.require_subcommand(1);
    register_synth(app);
    register_fit(app);
    register_path(app);
    register_select(app);
    register_cif(app);
    register_cv(app);
    register_predict(app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << "error: validation: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "error: numeric: " << e.what() << "\n";
        return 3;
    } catch (const SchemaError& e) {
        std::cerr << "error: schema: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "error: validation: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
