// icsdetect: batch pipeline for attack detection in ICS time series.
// Commands compose through files: synth -> screen -> [freq] -> fit -> tune ->
// detect -> eval, plus advatk for robustness checks and report for plot data.
#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "icsd/adversarial.hpp"
#include "icsd/dataset.hpp"
#include "icsd/evaluation.hpp"
#include "icsd/freq.hpp"
#include "icsd/pipeline.hpp"
#include "icsd/screen.hpp"
#include "icsd/scoring.hpp"
#include "icsd/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace icsd;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitInfeasible = 3;

// Resolved-config artifact: written next to every command's outputs; a rerun
// with the same hash and existing outputs is a no-op.
bool config_is_fresh(const fs::path& out_dir, const std::string& command, const json& resolved,
                     const std::vector<fs::path>& outputs) {
    fs::create_directories(out_dir);
    fs::path cfg_path = out_dir / (command + ".config.json");
    uint64_t hash = config_hash(resolved.dump());
    if (fs::exists(cfg_path)) {
        std::ifstream in(cfg_path);
        json prev = json::parse(in, nullptr, false);
        if (!prev.is_discarded() && prev.value("config_hash", std::string()) == std::to_string(hash)) {
            bool all = true;
            for (const auto& p : outputs) all = all && fs::exists(p);
            if (all) {
                std::cout << command << ": outputs up to date (config hash " << hash
                          << "), nothing to do\n";
                return true;
            }
        }
    }
    json to_write = resolved;
    to_write["config_hash"] = std::to_string(hash);
    std::ofstream out(cfg_path);
    out << to_write.dump(2) << '\n';
    return false;
}

// Expands `--config file.json` into per-subcommand flag tokens: the file maps
// section names (subcommands) to {option: value} objects. Tokens are inserted
// right after the subcommand so explicit flags, parsed last, win. Unknown
// keys become unknown options and fail parsing.
std::vector<std::string> expand_config(std::vector<std::string> args) {
    std::string config_path;
    for (size_t i = 0; i + 1 < args.size(); ++i)
        if (args[i] == "--config") {
            config_path = args[i + 1];
            args.erase(args.begin() + static_cast<long>(i), args.begin() + static_cast<long>(i) + 2);
            break;
        }
    if (config_path.empty() || args.empty()) return args;
    std::ifstream in(config_path);
    if (!in.good()) throw ValidationError("cannot open config: " + config_path);
    json j = json::parse(in);
    const std::string& sub = args[0];
    if (!j.contains(sub)) return args;
    require(j[sub].is_object(), "config section '" + sub + "' must be an object");
    std::vector<std::string> tokens;
    for (const auto& [key, value] : j[sub].items()) {
        if (key == "kind") { // fit's positional
            tokens.push_back(value.get<std::string>());
            continue;
        }
        if (value.is_boolean()) {
            tokens.push_back("--" + key + "=" + (value.get<bool>() ? "true" : "false"));
        } else if (value.is_string()) {
            tokens.push_back("--" + key);
            tokens.push_back(value.get<std::string>());
        } else {
            tokens.push_back("--" + key);
            tokens.push_back(value.dump());
        }
    }
    args.insert(args.begin() + 1, tokens.begin(), tokens.end());
    return args;
}

TimeSeriesDataset load_dataset(const std::string& path, const std::string& ts_col,
                               const std::string& label_col) {
    CsvSchema schema;
    schema.timestamp_column = ts_col;
    schema.label_column = label_col;
    return ingest_csv(path, schema);
}

// grid syntax: "a,b,c" or "lo:hi:n" (n linearly spaced values)
std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> out;
    if (text.find(':') != std::string::npos) {
        double lo, hi;
        int n;
        if (std::sscanf(text.c_str(), "%lf:%lf:%d", &lo, &hi, &n) != 3 || n < 1)
            throw ValidationError("bad grid: " + text);
        for (int i = 0; i < n; ++i)
            out.push_back(n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (n - 1));
        return out;
    }
    std::string cur;
    for (char c : text + ",") {
        if (c == ',') {
            if (!cur.empty()) out.push_back(std::stod(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (out.empty()) throw ValidationError("empty grid: " + text);
    return out;
}

std::vector<size_t> parse_size_grid(const std::string& text) {
    std::vector<size_t> out;
    for (double v : parse_grid(text)) {
        if (v < 1.0) throw ValidationError("window grid values must be >= 1");
        out.push_back(static_cast<size_t>(v));
    }
    return out;
}

// intent syntax: "FEATURE>=VALUE@BEGIN:END" or "FEATURE<=VALUE@BEGIN:END"
IntentCondition parse_intent(const std::string& text, const std::vector<std::string>& names) {
    auto at = text.find('@');
    if (at == std::string::npos) throw ValidationError("intent needs @begin:end: " + text);
    std::string cond = text.substr(0, at);
    size_t begin, end;
    if (std::sscanf(text.c_str() + at + 1, "%zu:%zu", &begin, &end) != 2)
        throw ValidationError("bad intent interval: " + text);
    IntentCondition c;
    c.begin = begin;
    c.end = end;
    size_t op_pos;
    if ((op_pos = cond.find(">=")) != std::string::npos) {
        c.op = IntentCondition::Op::ge;
    } else if ((op_pos = cond.find("<=")) != std::string::npos) {
        c.op = IntentCondition::Op::le;
    } else {
        throw ValidationError("intent needs >= or <=: " + text);
    }
    std::string feature = cond.substr(0, op_pos);
    c.value = std::stod(cond.substr(op_pos + 2));
    auto it = std::find(names.begin(), names.end(), feature);
    if (it == names.end()) throw ValidationError("intent names unknown feature: " + feature);
    c.feature = static_cast<size_t>(it - names.begin());
    return c;
}

void write_residual_csv(const fs::path& path, const TimeSeriesDataset& ds, const Matrix& norm,
                        const std::vector<size_t>& coverage) {
    std::ofstream out(path);
    out << "timestamp";
    for (const auto& m : ds.meta) out << ',' << m.name;
    out << ",max\n";
    for (size_t t = 0; t < norm.rows; ++t) {
        out << ds.timestamps[t];
        double row_max = 0.0;
        for (size_t f = 0; f < norm.cols; ++f) {
            double v = coverage[t] ? norm.at(t, f) : 0.0;
            out << ',' << v;
            row_max = std::max(row_max, v);
        }
        out << ',' << row_max << '\n';
    }
}

void write_loss_csv(const fs::path& path, const std::vector<double>& history) {
    std::ofstream out(path);
    out << "epoch,loss\n";
    for (size_t i = 0; i < history.size(); ++i) out << i << ',' << history[i] << '\n';
}

struct CommonOpts {
    std::string config;
    std::string out_dir = ".";
    std::string ts_col = "timestamp";
    std::string label_col = "label";
};

int cmd_synth(const CommonOpts& common, const std::string& process_config, uint64_t seed_override,
              bool has_seed) {
    ProcessConfig cfg = process_config.empty() ? ProcessConfig{} : load_process_config(process_config);
    AttackScript script =
        process_config.empty() ? default_attack_script() : load_attack_script(process_config);
    if (has_seed) cfg.seed = seed_override;

    json resolved;
    resolved["process_config"] = process_config;
    resolved["seed"] = cfg.seed;
    {
        json pc;
        pc["dt"] = cfg.dt;
        pc["duration_train"] = cfg.duration_train;
        pc["duration_test"] = cfg.duration_test;
        pc["tanks"] = cfg.tanks;
        pc["inflow_rate"] = cfg.inflow_rate;
        pc["transfer_rate"] = cfg.transfer_rate;
        pc["demand_rate"] = cfg.demand_rate;
        pc["demand_period"] = cfg.demand_period;
        pc["level_noise"] = cfg.level_noise;
        pc["flow_noise"] = cfg.flow_noise;
        pc["attacks"] = script.attacks.size();
        resolved["resolved"] = pc;
    }
    fs::path out_dir(common.out_dir);
    fs::path train_path = out_dir / "train.csv";
    fs::path test_path = out_dir / "test.csv";
    if (config_is_fresh(out_dir, "synth", resolved, {train_path, test_path})) return 0;

    TimeSeriesDataset train = simulate(cfg, cfg.duration_train, cfg.seed);
    TimeSeriesDataset base = simulate(cfg, cfg.duration_test, cfg.seed + 1);
    size_t overflow = 0;
    TimeSeriesDataset test = inject(cfg, base, script, &overflow);
    export_csv(train, train_path.string());
    export_csv(test, test_path.string());
    std::cout << "synth: wrote " << train.records() << " train and " << test.records()
              << " test records, " << script.attacks.size() << " attacks";
    if (overflow) std::cout << " (attack drove " << overflow << " overflow steps)";
    std::cout << '\n';
    return 0;
}

int cmd_screen(const CommonOpts& common, const std::string& train_path,
               const std::string& test_path, double threshold, const std::string& mode_name,
               size_t periodic_every) {
    ScreenMode mode;
    if (mode_name == "train_vs_test")
        mode = ScreenMode::train_vs_test;
    else if (mode_name == "split_half")
        mode = ScreenMode::split_half;
    else if (mode_name == "periodic")
        mode = ScreenMode::periodic;
    else
        throw ValidationError("unknown screen mode: " + mode_name);

    json resolved{{"train", train_path}, {"test", test_path}, {"threshold", threshold},
                  {"mode", mode_name},   {"periodic_every", periodic_every}};
    fs::path out_dir(common.out_dir);
    fs::path report_path = out_dir / "screen_report.csv";
    if (config_is_fresh(out_dir, "screen", resolved, {report_path})) return 0;

    auto train = load_dataset(train_path, common.ts_col, common.label_col);
    std::optional<TimeSeriesDataset> test;
    if (!test_path.empty()) test = load_dataset(test_path, common.ts_col, common.label_col);
    auto report = screen(train, test ? &*test : nullptr, threshold, mode, periodic_every);
    write_screen_csv(report, report_path.string());
    std::cout << "screen: kept " << report.kept().size() << ", dropped "
              << report.dropped().size();
    for (const auto& d : report.dropped()) std::cout << ' ' << d;
    if (report.retrain_recommended) std::cout << " [retrain recommended]";
    std::cout << '\n';
    return 0;
}

int cmd_freq(const CommonOpts& common, const std::string& train_path, const std::string& test_path,
             double ratio, int bands, size_t step, size_t window, const std::string& taper_name) {
    StftTaper taper;
    if (taper_name == "rectangular")
        taper = StftTaper::rectangular;
    else if (taper_name == "hann")
        taper = StftTaper::hann;
    else
        throw ValidationError("unknown taper: " + taper_name);

    json resolved{{"train", train_path}, {"test", test_path}, {"ratio", ratio},
                  {"bands", bands},      {"step", step},      {"window", window},
                  {"taper", taper_name}};
    fs::path out_dir(common.out_dir);
    fs::path train_out = out_dir / "train_freq.csv";
    fs::path test_out = out_dir / "test_freq.csv";
    fs::path profile_out = out_dir / "spectral.json";
    std::vector<fs::path> outputs = {train_out, profile_out};
    if (!test_path.empty()) outputs.push_back(test_out);
    if (config_is_fresh(out_dir, "freq", resolved, outputs)) return 0;

    auto train = load_dataset(train_path, common.ts_col, common.label_col);
    auto transform = fit_spectral_transform(train, ratio, bands, step, taper, window);
    require(!transform.accepted.empty(), "no feature has a usable dominant frequency");
    std::vector<std::string> names;
    for (const auto& m : train.meta) names.push_back(m.name);
    save_spectral_transform(transform, names, profile_out.string());
    export_csv(transform.apply(train), train_out.string());
    if (!test_path.empty()) {
        auto test = load_dataset(test_path, common.ts_col, common.label_col);
        export_csv(transform.apply(test), test_out.string());
    }
    std::cout << "freq: window " << transform.window << ", step " << transform.step << ", "
              << transform.accepted.size() << " features kept, " << transform.excluded.size()
              << " excluded\n";
    return 0;
}

struct FitFlags {
    std::string kind;
    std::string train_path;
    std::string screen_path;
    std::string domain = "time";
    size_t components = 0;
    size_t width = 7;
    bool no_overlap = false;
    size_t l = 0; // 0 = kind default: 12 for uae, 18 for cnn
    double code_ratio = 0.5;
    double inflation = 3.0;
    std::string activation = "relu";
    double noise = 0.0;
    bool derivative = false;
    size_t depth = 8;
    size_t filters = 32;
    size_t kernel = 3;
    size_t m = 1;
    size_t horizon = 0;
    std::string optimizer = "adam";
    double lr = 1e-3;
    size_t batch = 32;
    size_t epochs = 100;
    double target = 0.1;
    size_t stride = 1;
    uint64_t seed = 0;
};

int cmd_fit(const CommonOpts& common, const FitFlags& f) {
    json resolved{{"kind", f.kind},       {"train", f.train_path}, {"screen", f.screen_path},
                  {"domain", f.domain},   {"components", f.components}, {"width", f.width},
                  {"no_overlap", f.no_overlap}, {"l", f.l},        {"code_ratio", f.code_ratio},
                  {"inflation", f.inflation}, {"activation", f.activation}, {"noise", f.noise},
                  {"derivative", f.derivative}, {"depth", f.depth}, {"filters", f.filters},
                  {"kernel", f.kernel},   {"m", f.m},              {"horizon", f.horizon},
                  {"optimizer", f.optimizer}, {"lr", f.lr},        {"batch", f.batch},
                  {"epochs", f.epochs},   {"target", f.target},    {"stride", f.stride},
                  {"seed", f.seed}};
    fs::path out_dir(common.out_dir);
    fs::path model_path = out_dir / (f.kind + "_model.json");
    fs::path loss_path = out_dir / (f.kind + "_loss.csv");
    std::vector<fs::path> outputs = {model_path};
    bool neural = f.kind == "uae" || f.kind == "cnn";
    if (neural) outputs.push_back(loss_path);
    if (config_is_fresh(out_dir, "fit_" + f.kind, resolved, outputs)) return 0;

    auto train = load_dataset(f.train_path, common.ts_col, common.label_col);
    if (!f.screen_path.empty()) {
        std::ifstream in(f.screen_path);
        require(in.good(), "cannot open screen report: " + f.screen_path);
        std::string line;
        std::getline(in, line); // header
        std::vector<std::string> kept;
        while (std::getline(in, line)) {
            auto comma = line.find(',');
            if (comma == std::string::npos) continue;
            if (line.rfind(",keep") == line.size() - 5) kept.push_back(line.substr(0, comma));
        }
        require(!kept.empty(), "screen report keeps no features");
        train = train.select_features(kept);
    }

    FitOptions opt;
    opt.kind = f.kind;
    opt.domain = f.domain;
    opt.n_components = f.components;
    opt.width = f.width;
    opt.overlapping = !f.no_overlap;
    opt.uae.input_len = f.l == 0 ? 12 : f.l;
    opt.uae.code_ratio = f.code_ratio;
    opt.uae.inflation = f.inflation;
    opt.uae.activation = f.activation == "tanh" ? nn::Activation::tanh : nn::Activation::relu;
    opt.uae.noise_std = f.noise;
    opt.uae.derivative_channel = f.derivative;
    opt.cnn.seq_len = f.l == 0 ? 18 : f.l;
    opt.cnn.depth = f.depth;
    opt.cnn.filters = f.filters;
    opt.cnn.kernel = f.kernel;
    opt.cnn.output_len = f.m;
    opt.cnn.horizon = f.horizon;
    opt.train.optimizer = f.optimizer == "sgd" ? nn::OptimizerKind::sgd : nn::OptimizerKind::adam;
    opt.train.learning_rate = f.lr;
    opt.train.batch_size = f.batch;
    opt.train.max_epochs = f.epochs;
    opt.train.target_train_error = f.target;
    opt.train.seed = f.seed;
    opt.train_stride = f.stride;

    auto det = fit_detector(train, opt);
    save_detector(det, model_path.string());
    if (neural) write_loss_csv(loss_path, det.loss_history);
    std::cout << "fit: " << f.kind << " on " << train.records() << " records x "
              << train.feature_count() << " features";
    if (neural && !det.loss_history.empty())
        std::cout << ", final loss " << det.loss_history.back() << " after "
                  << det.loss_history.size() << " epochs";
    std::cout << ", model -> " << model_path.string() << '\n';
    return 0;
}

int cmd_tune(const CommonOpts& common, const std::string& model_path, const std::string& train_path,
             const std::string& validation_path, double val_fraction, const std::string& tau_grid,
             const std::string& w_grid, size_t fp_max, const std::string& scheme_name) {
    NormScheme scheme = scheme_name == "zscore" ? NormScheme::zscore : NormScheme::max_norm;
    json resolved{{"model", model_path},   {"train", train_path},   {"validation", validation_path},
                  {"val_fraction", val_fraction}, {"tau_grid", tau_grid}, {"w_grid", w_grid},
                  {"fp_max", fp_max},      {"scheme", scheme_name}};
    fs::path out_dir(common.out_dir);
    fs::path tuned_path = out_dir / "detector.json";
    if (config_is_fresh(out_dir, "tune", resolved, {tuned_path})) return 0;

    auto det = load_detector(model_path);
    auto train = load_dataset(train_path, common.ts_col, common.label_col);

    TimeSeriesDataset stats_part, validation_part;
    if (!validation_path.empty()) {
        stats_part = train;
        validation_part = load_dataset(validation_path, common.ts_col, common.label_col);
    } else {
        require(val_fraction > 0.0 && val_fraction < 1.0, "val fraction must be in (0,1)");
        size_t split = static_cast<size_t>(static_cast<double>(train.records()) * (1.0 - val_fraction));
        require(split > 0 && split < train.records(), "validation split leaves no data");
        stats_part = train.slice_records(0, split);
        validation_part = train.slice_records(split, train.records());
    }
    if (validation_part.has_labels())
        for (uint8_t l : validation_part.labels)
            require(l == 0, "validation data must be attack-free for false-alarm counting");

    auto train_res = residual_series(det, stats_part);
    auto stats = residual_stats(train_res.covered_rows(train_res.raw), scheme);
    auto val_res = residual_series(det, validation_part);
    Matrix val_norm = normalize_residuals(val_res.raw, stats);
    // rows without predictions cannot alert; neutralize them
    for (size_t t = 0; t < val_norm.rows; ++t)
        if (val_res.coverage[t] == 0)
            for (size_t f = 0; f < val_norm.cols; ++f) val_norm.at(t, f) = 0.0;

    auto taus = parse_grid(tau_grid);
    auto ws = parse_size_grid(w_grid);
    auto result = tune(val_norm, taus, ws, fp_max, scheme);
    TunedDetector tuned{result.config, stats};
    save_tuned(tuned, tuned_path.string());
    std::cout << "tune: tau " << result.config.tau << ", w " << result.config.window << ", "
              << result.false_alarms << " validation false alarms (budget " << fp_max << ")\n";
    return 0;
}

int cmd_detect(const CommonOpts& common, const std::string& model_path,
               const std::string& tuned_path, const std::string& data_path, size_t top_k) {
    json resolved{{"model", model_path}, {"detector", tuned_path}, {"data", data_path},
                  {"top_k", top_k}};
    fs::path out_dir(common.out_dir);
    fs::path residuals_path = out_dir / "residuals.csv";
    fs::path alerts_path = out_dir / "alerts.csv";
    if (config_is_fresh(out_dir, "detect", resolved, {residuals_path, alerts_path})) return 0;

    auto det = load_detector(model_path);
    auto tuned = load_tuned(tuned_path);
    auto data = load_dataset(data_path, common.ts_col, common.label_col);
    auto res = residual_series(det, data);
    Matrix norm = normalize_residuals(res.raw, tuned.stats);
    for (size_t t = 0; t < norm.rows; ++t)
        if (res.coverage[t] == 0)
            for (size_t f = 0; f < norm.cols; ++f) norm.at(t, f) = 0.0;

    auto alerts = alert(norm, tuned.config);
    auto selected = data.select_features(det.feature_names);
    write_residual_csv(residuals_path, selected, norm, res.coverage);
    auto locs = localize(alerts, norm, tuned.config);
    write_alert_csv(locs, selected, top_k, alerts_path.string());
    size_t alerted = 0;
    for (auto a : alerts.alerts) alerted += a;
    std::cout << "detect: " << locs.size() << " alert runs covering " << alerted << " of "
              << norm.rows << " records\n";
    return 0;
}

int cmd_eval(const CommonOpts& common, const std::string& data_path, const std::string& alerts_path,
             bool batadal, double gamma) {
    json resolved{{"data", data_path}, {"alerts", alerts_path}, {"batadal", batadal},
                  {"gamma", gamma}};
    fs::path out_dir(common.out_dir);
    fs::path report_txt = out_dir / "eval_report.txt";
    fs::path report_csv = out_dir / "eval_report.csv";
    if (config_is_fresh(out_dir, "eval", resolved, {report_txt, report_csv})) return 0;

    auto data = load_dataset(data_path, common.ts_col, common.label_col);
    require(data.has_labels(), "evaluation needs a labeled dataset");

    std::ifstream in(alerts_path);
    require(in.good(), "cannot open alerts: " + alerts_path);
    std::string line;
    std::getline(in, line);
    std::vector<std::pair<int64_t, int64_t>> runs;
    while (std::getline(in, line)) {
        long long a, b;
        if (std::sscanf(line.c_str(), "%lld,%lld", &a, &b) == 2) runs.push_back({a, b});
    }
    auto alerts = alerts_from_runs(data, runs);

    EvalReport report;
    report.metrics = point_metrics(data.labels, alerts);
    if (batadal) {
        report.has_batadal = true;
        report.batadal = batadal_score(data.labels, alerts, gamma);
    }
    std::ofstream t(report_txt);
    t << format_eval_report(report);
    std::ofstream c(report_csv);
    c << eval_report_csv(report);
    std::cout << format_eval_report(report);
    return 0;
}

int cmd_advatk(const CommonOpts& common, const std::string& model_path,
               const std::string& tuned_path, const std::string& data_path,
               const std::string& slice, double epsilon, double adv_lr, size_t iterations,
               bool adaptive, const std::vector<std::string>& intents) {
    json resolved{{"model", model_path},  {"detector", tuned_path}, {"data", data_path},
                  {"slice", slice},       {"epsilon", epsilon},     {"adv_lr", adv_lr},
                  {"iterations", iterations}, {"adaptive", adaptive}, {"intents", intents}};
    fs::path out_dir(common.out_dir);
    fs::path trace_path = out_dir / "adv_trace.csv";
    fs::path summary_path = out_dir / "adv_summary.json";
    if (config_is_fresh(out_dir, "advatk", resolved, {trace_path, summary_path})) return 0;

    auto det = load_detector(model_path);
    require(det.uae.has_value() || det.cnn.has_value(),
            "adversarial search targets neural detectors (uae or cnn)");
    auto tuned = load_tuned(tuned_path);
    require(tuned.config.scheme == NormScheme::max_norm,
            "adversarial search requires max_norm residual scheme");
    auto data = load_dataset(data_path, common.ts_col, common.label_col);
    if (!slice.empty()) {
        size_t a, b;
        require(std::sscanf(slice.c_str(), "%zu:%zu", &a, &b) == 2 && a < b,
                "bad slice (want begin:end): " + slice);
        data = data.slice_records(a, std::min(b, data.records()));
    }
    auto selected = data.select_features(det.feature_names);
    auto normalized = normalize(selected, det.anchors);
    Matrix x_att = normalized.features;

    WrapperModel wrapper = det.uae ? build_wrapper(*det.uae, tuned.stats)
                                   : build_wrapper(*det.cnn, tuned.stats);
    std::vector<FeatureConstraint> phi = constraints_from_meta(det.meta);
    AdversarialConfig cfg;
    cfg.tau = tuned.config.tau;
    cfg.epsilon = epsilon;
    cfg.adv_lr = adv_lr;
    cfg.max_iterations = iterations;
    cfg.adaptive_lr = adaptive;
    auto result = find_adversarial(wrapper, x_att, cfg, phi);

    std::vector<IntentCondition> conds;
    for (const auto& text : intents) conds.push_back(parse_intent(text, det.feature_names));
    result.intent_preserved = conds.empty() ? true : intent_check(result.x_adv, conds);

    // denormalize the perturbed trace back to sensor units for the record
    TimeSeriesDataset adv = selected;
    for (size_t t = 0; t < adv.records(); ++t)
        for (size_t f = 0; f < adv.feature_count(); ++f) {
            double lo = det.anchors.min[f], hi = det.anchors.max[f];
            adv.features.at(t, f) = result.x_adv.at(t, f) * (hi - lo) + lo;
        }
    export_csv(adv, trace_path.string());

    json summary;
    summary["verdict"] = result.evaded ? "evaded" : "failed";
    summary["iterations"] = result.iterations;
    summary["final_residual"] = result.residual_trace.back();
    summary["initial_residual"] = result.residual_trace.front();
    summary["tau"] = cfg.tau;
    summary["epsilon"] = epsilon;
    summary["intent_preserved"] = result.intent_preserved;
    summary["residual_trace"] = result.residual_trace;
    std::ofstream s(summary_path);
    s << summary.dump(2) << '\n';
    std::cout << "advatk: " << (result.evaded ? "evaded" : "failed") << " after "
              << result.iterations << " iterations, final residual "
              << result.residual_trace.back() << " vs tau " << cfg.tau
              << (result.intent_preserved ? ", intent preserved" : ", intent lost") << '\n';
    return 0;
}

int cmd_report(const CommonOpts& common, const std::string& run_dir) {
    fs::path run(run_dir);
    fs::path out_dir(common.out_dir);
    fs::create_directories(out_dir);
    json inventory = json::array();
    // plot-ready artifacts a run may contain
    for (const auto& name : {"uae_loss.csv", "cnn_loss.csv", "residuals.csv", "alerts.csv",
                             "eval_report.csv", "train_freq.csv", "test_freq.csv"}) {
        fs::path p = run / name;
        if (fs::exists(p)) {
            inventory.push_back(name);
            fs::copy_file(p, out_dir / name, fs::copy_options::overwrite_existing);
        }
    }
    // max-residual trace is the one plot every run wants
    fs::path residuals = run / "residuals.csv";
    if (fs::exists(residuals)) {
        std::ifstream in(residuals);
        std::ofstream out(out_dir / "max_residual.csv");
        std::string line;
        std::getline(in, line);
        out << "timestamp,max\n";
        while (std::getline(in, line)) {
            auto first = line.find(',');
            auto last = line.rfind(',');
            if (first != std::string::npos && last != std::string::npos)
                out << line.substr(0, first) << ',' << line.substr(last + 1) << '\n';
        }
        inventory.push_back("max_residual.csv");
    }
    std::ofstream s(out_dir / "report_summary.json");
    json summary;
    summary["run"] = run_dir;
    summary["artifacts"] = inventory;
    s << summary.dump(2) << '\n';
    std::cout << "report: " << inventory.size() << " artifacts collected into " << common.out_dir
              << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"attack detection in industrial control time series"};
    app.require_subcommand(1);
    // config-file values are injected before explicit flags; last one wins
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    CommonOpts common;
    app.add_option("--config", common.config, "JSON run config; flags override its values");

    // synth
    auto* synth = app.add_subcommand("synth", "generate a labeled synthetic two-tank corpus");
    std::string synth_process;
    uint64_t synth_seed = 0;
    synth->add_option("--process", synth_process, "process + attack script JSON");
    auto* seed_opt = synth->add_option("--seed", synth_seed, "override the config seed");
    synth->add_option("--out", common.out_dir, "output directory");

    // screen
    auto* scr = app.add_subcommand("screen", "robust feature selection via K-S statistics");
    std::string scr_train, scr_test, scr_mode = "train_vs_test";
    double scr_threshold = 0.1;
    size_t scr_every = 0;
    scr->add_option("--train", scr_train)->required();
    scr->add_option("--test", scr_test);
    scr->add_option("--mode", scr_mode, "train_vs_test | split_half | periodic");
    scr->add_option("--threshold", scr_threshold, "ks_star drop threshold (default 0.1)");
    scr->add_option("--periodic-every", scr_every, "periodic re-screen interval in records");
    scr->add_option("--out", common.out_dir);

    // freq
    auto* frq = app.add_subcommand("freq", "transform datasets into dominant-band energies");
    std::string frq_train, frq_test, frq_taper = "rectangular";
    double frq_ratio = 1.5;
    int frq_bands = 3;
    size_t frq_step = 2, frq_window = 0;
    frq->add_option("--train", frq_train)->required();
    frq->add_option("--test", frq_test);
    frq->add_option("--ratio", frq_ratio, "STFT window as a multiple of the dominant period");
    frq->add_option("--bands", frq_bands, "energy bands kept per feature");
    frq->add_option("--step", frq_step, "STFT step in samples");
    frq->add_option("--window", frq_window, "explicit STFT window (0 = from dominant period)");
    frq->add_option("--taper", frq_taper, "rectangular | hann");
    frq->add_option("--out", common.out_dir);

    // fit
    auto* fit = app.add_subcommand("fit", "fit a detector (pca | wpca | uae | cnn)");
    FitFlags ff;
    fit->add_option("kind", ff.kind, "pca | wpca | uae | cnn")->required();
    fit->add_option("--train", ff.train_path)->required();
    fit->add_option("--screen", ff.screen_path, "screen report; dropped features are excluded");
    fit->add_option("--domain", ff.domain, "time | frequency (bookkeeping)");
    fit->add_option("--components", ff.components, "pca/wpca components (0 = half the dims)");
    fit->add_option("--width", ff.width, "wpca window width");
    fit->add_flag("--no-overlap", ff.no_overlap, "wpca: non-overlapping training windows");
    fit->add_option("--l", ff.l, "sequence length (uae reconstruction / cnn input)");
    fit->add_option("--code-ratio", ff.code_ratio, "uae code size fraction");
    fit->add_option("--inflation", ff.inflation, "uae inflation factor");
    fit->add_option("--activation", ff.activation, "relu | tanh");
    fit->add_option("--noise", ff.noise, "uae training corruption sigma");
    fit->add_flag("--derivative", ff.derivative, "uae derivative input channel");
    fit->add_option("--depth", ff.depth, "cnn conv layers");
    fit->add_option("--filters", ff.filters, "cnn filters per layer");
    fit->add_option("--kernel", ff.kernel, "cnn kernel width");
    fit->add_option("--m", ff.m, "cnn predicted steps");
    fit->add_option("--horizon", ff.horizon, "cnn prediction horizon");
    fit->add_option("--optimizer", ff.optimizer, "adam | sgd");
    fit->add_option("--lr", ff.lr);
    fit->add_option("--batch", ff.batch);
    fit->add_option("--epochs", ff.epochs);
    fit->add_option("--target", ff.target, "stop when train error reaches this");
    fit->add_option("--stride", ff.stride, "training window stride");
    fit->add_option("--seed", ff.seed);
    fit->add_option("--out", common.out_dir);

    // tune
    auto* tun = app.add_subcommand("tune", "pick (tau, w) under a false-alarm budget");
    std::string tun_model, tun_train, tun_val, tun_tau = "0.2:2.0:10", tun_w = "1,2,3,5,8",
                tun_scheme = "max";
    double tun_frac = 0.2;
    size_t tun_fp = 1;
    tun->add_option("--model", tun_model)->required();
    tun->add_option("--train", tun_train)->required();
    tun->add_option("--validation", tun_val, "attack-free validation CSV");
    tun->add_option("--val-fraction", tun_frac, "tail fraction of train used as validation");
    tun->add_option("--tau-grid", tun_tau, "comma list or lo:hi:n");
    tun->add_option("--w-grid", tun_w, "comma list or lo:hi:n");
    tun->add_option("--fp-max", tun_fp, "max false-alarm runs on validation");
    tun->add_option("--scheme", tun_scheme, "max | zscore");
    tun->add_option("--out", common.out_dir);

    // detect
    auto* det = app.add_subcommand("detect", "score a dataset and emit alerts");
    std::string det_model, det_tuned, det_data;
    size_t det_topk = 3;
    det->add_option("--model", det_model)->required();
    det->add_option("--detector", det_tuned)->required();
    det->add_option("--data", det_data)->required();
    det->add_option("--top-k", det_topk, "features listed per alert run");
    det->add_option("--out", common.out_dir);

    // eval
    auto* evl = app.add_subcommand("eval", "score alerts against record labels");
    std::string evl_data, evl_alerts;
    bool evl_batadal = false;
    double evl_gamma = 0.5;
    evl->add_option("--data", evl_data)->required();
    evl->add_option("--alerts", evl_alerts)->required();
    evl->add_flag("--batadal", evl_batadal, "also compute the composite score");
    evl->add_option("--gamma", evl_gamma, "composite score weighting");
    evl->add_option("--out", common.out_dir);

    // advatk
    auto* adv = app.add_subcommand("advatk", "white-box evasion search against a detector");
    std::string adv_model, adv_tuned, adv_data, adv_slice;
    double adv_eps = 0.05, adv_rate = 1e-4;
    size_t adv_iters = 500;
    bool adv_adaptive = false;
    std::vector<std::string> adv_intents;
    adv->add_option("--model", adv_model)->required();
    adv->add_option("--detector", adv_tuned)->required();
    adv->add_option("--data", adv_data)->required();
    adv->add_option("--slice", adv_slice, "begin:end rows of the trace");
    adv->add_option("--epsilon", adv_eps, "max per-element noise, normalized units");
    adv->add_option("--lr", adv_rate, "adversarial learning rate");
    adv->add_option("--iterations", adv_iters);
    adv->add_flag("--adaptive", adv_adaptive, "adaptive learning rate schedule");
    adv->add_option("--intent", adv_intents, "FEATURE>=V@a:b (repeatable)");
    adv->add_option("--out", common.out_dir);

    // report
    auto* rep = app.add_subcommand("report", "collect plot-ready CSVs from a run directory");
    std::string rep_run;
    rep->add_option("--run", rep_run)->required();
    rep->add_option("--out", common.out_dir);

    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        args = expand_config(std::move(args));
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    }
    try {
        std::reverse(args.begin(), args.end());
        app.parse(std::move(args));
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    try {
        if (app.got_subcommand(synth)) return cmd_synth(common, synth_process, synth_seed, seed_opt->count() > 0);
        if (app.got_subcommand(scr))
            return cmd_screen(common, scr_train, scr_test, scr_threshold, scr_mode, scr_every);
        if (app.got_subcommand(frq))
            return cmd_freq(common, frq_train, frq_test, frq_ratio, frq_bands, frq_step, frq_window,
                            frq_taper);
        if (app.got_subcommand(fit)) return cmd_fit(common, ff);
        if (app.got_subcommand(tun))
            return cmd_tune(common, tun_model, tun_train, tun_val, tun_frac, tun_tau, tun_w, tun_fp,
                            tun_scheme);
        if (app.got_subcommand(det)) return cmd_detect(common, det_model, det_tuned, det_data, det_topk);
        if (app.got_subcommand(evl)) return cmd_eval(common, evl_data, evl_alerts, evl_batadal, evl_gamma);
        if (app.got_subcommand(adv))
            return cmd_advatk(common, adv_model, adv_tuned, adv_data, adv_slice, adv_eps, adv_rate,
                              adv_iters, adv_adaptive, adv_intents);
        if (app.got_subcommand(rep)) return cmd_report(common, rep_run);
    } catch (const InfeasibleTuning& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInfeasible;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    }
    return 0;
}
