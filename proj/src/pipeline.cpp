#include "icsd/pipeline.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

namespace icsd {

namespace {

nlohmann::json tensor_json(const nn::Tensor& t) {
    return nlohmann::json{{"shape", t.shape}, {"values", t.v}};
}

nn::Tensor tensor_from_json(const nlohmann::json& j) {
    return nn::Tensor(j.at("shape").get<std::vector<size_t>>(),
                      j.at("values").get<std::vector<double>>());
}

nlohmann::json pca_json(const PcaModel& m) {
    return nlohmann::json{{"mean", m.mean},
                          {"components", m.components.data},
                          {"n_components", m.n_components()},
                          {"dim", m.dim()},
                          {"singular_values", m.singular_values}};
}

PcaModel pca_from_json(const nlohmann::json& j) {
    PcaModel m;
    m.mean = j.at("mean").get<std::vector<double>>();
    size_t C = j.at("n_components"), F = j.at("dim");
    m.components = Matrix(C, F);
    m.components.data = j.at("components").get<std::vector<double>>();
    require(m.components.data.size() == C * F, "component buffer has wrong size");
    m.singular_values = j.at("singular_values").get<std::vector<double>>();
    return m;
}

nlohmann::json meta_json(const FeatureMeta& m) {
    return nlohmann::json{{"name", m.name},
                          {"kind", m.kind == FeatureKind::binary
                                       ? "binary"
                                       : (m.kind == FeatureKind::categorical ? "categorical"
                                                                             : "continuous")},
                          {"train_min", m.train_min},
                          {"train_max", m.train_max},
                          {"valid_lo", m.valid_lo},
                          {"valid_hi", m.valid_hi},
                          {"degenerate", m.degenerate}};
}

FeatureMeta meta_from_json(const nlohmann::json& j) {
    FeatureMeta m;
    m.name = j.at("name");
    std::string k = j.at("kind");
    m.kind = k == "binary" ? FeatureKind::binary
                           : (k == "categorical" ? FeatureKind::categorical : FeatureKind::continuous);
    m.train_min = j.at("train_min");
    m.train_max = j.at("train_max");
    m.valid_lo = j.at("valid_lo");
    m.valid_hi = j.at("valid_hi");
    m.degenerate = j.at("degenerate");
    return m;
}

} // namespace

size_t DetectorBundle::window_len() const {
    if (uae) return uae->cfg.input_len;
    if (cnn) return cnn->cfg.seq_len;
    if (wpca) return wpca->width;
    return 1;
}

DetectorBundle fit_detector(const TimeSeriesDataset& train_raw, const FitOptions& opt) {
    require(train_raw.records() >= 2, "training data too short");
    DetectorBundle det;
    det.kind = opt.kind;
    det.domain = opt.domain;
    det.anchors = anchors_of(train_raw);
    TimeSeriesDataset train = normalize(train_raw, det.anchors);
    for (const auto& m : train.meta) det.feature_names.push_back(m.name);
    det.meta = train.meta;

    if (opt.kind == "pca") {
        det.pca = fit_pca(train.features, opt.n_components);
    } else if (opt.kind == "wpca") {
        det.wpca = fit_windowed(train.features, opt.width, opt.overlapping, opt.n_components);
    } else if (opt.kind == "uae") {
        nn::UaeModel model = nn::make_uae(opt.uae, train.feature_count(), opt.train.seed);
        SequenceBatch windows =
            make_autoencoder_sequences(train, opt.uae.input_len, opt.train_stride);
        require(windows.batch > 0, "training data shorter than the model window");
        nn::TrainResult r = nn::train(model, windows, opt.train);
        det.loss_history = r.loss_history;
        det.uae = std::move(model);
    } else if (opt.kind == "cnn") {
        nn::CnnModel model = nn::make_cnn(opt.cnn, train.feature_count(), opt.train.seed);
        SequenceBatch windows = make_sequences(train, opt.cnn.seq_len, opt.cnn.output_len,
                                               opt.cnn.horizon, opt.train_stride);
        require(windows.batch > 0, "training data shorter than the model window");
        nn::TrainResult r = nn::train(model, windows, opt.train);
        det.loss_history = r.loss_history;
        det.cnn = std::move(model);
    } else {
        throw ValidationError("unknown detector kind: " + opt.kind);
    }
    return det;
}

Matrix ResidualOutput::covered_rows(const Matrix& m) const {
    size_t n = 0;
    for (size_t c : coverage)
        if (c > 0) ++n;
    Matrix out(n, m.cols);
    size_t r = 0;
    for (size_t t = 0; t < m.rows; ++t) {
        if (coverage[t] == 0) continue;
        for (size_t f = 0; f < m.cols; ++f) out.at(r, f) = m.at(t, f);
        ++r;
    }
    return out;
}

ResidualOutput residual_series(const DetectorBundle& det, const TimeSeriesDataset& raw_ds) {
    TimeSeriesDataset selected = raw_ds.select_features(det.feature_names);
    TimeSeriesDataset ds = normalize(selected, det.anchors);
    const size_t T = ds.records(), F = ds.feature_count();

    ResidualOutput out;
    out.observed = ds.features;
    out.coverage.assign(T, 1);

    Matrix pred;
    if (det.pca) {
        pred = pca_reconstruct(*det.pca, ds.features);
    } else if (det.wpca) {
        require(T >= 1, "empty dataset");
        pred = windowed_reconstruct(*det.wpca, ds.features);
    } else if (det.uae) {
        const size_t l = det.uae->cfg.input_len;
        require(T >= l, "dataset shorter than the model window");
        SequenceBatch windows = make_autoencoder_sequences(ds, l, 1);
        std::vector<double> p = nn::predict(*det.uae, windows);
        AssembledPrediction ap = assemble_predictions(T, F, windows, p);
        pred = std::move(ap.values);
        out.coverage = std::move(ap.coverage);
    } else if (det.cnn) {
        const auto& cfg = det.cnn->cfg;
        require(T >= cfg.seq_len + cfg.horizon + cfg.output_len,
                "dataset shorter than the model window");
        SequenceBatch windows = make_sequences(ds, cfg.seq_len, cfg.output_len, cfg.horizon, 1);
        std::vector<double> p = nn::predict(*det.cnn, windows);
        AssembledPrediction ap = assemble_predictions(T, F, windows, p);
        pred = std::move(ap.values);
        out.coverage = std::move(ap.coverage);
    } else {
        throw Error("detector bundle holds no model");
    }

    out.raw = Matrix(T, F);
    for (size_t t = 0; t < T; ++t) {
        if (out.coverage[t] == 0) continue; // uncovered rows cannot alert
        for (size_t f = 0; f < F; ++f)
            out.raw.at(t, f) = std::fabs(out.observed.at(t, f) - pred.at(t, f));
    }
    return out;
}

void save_detector(const DetectorBundle& det, const std::string& path) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["type"] = "detector";
    j["kind"] = det.kind;
    j["domain"] = det.domain;
    j["feature_names"] = det.feature_names;
    j["anchors"] = {{"min", det.anchors.min}, {"max", det.anchors.max}};
    nlohmann::json metas = nlohmann::json::array();
    for (const auto& m : det.meta) metas.push_back(meta_json(m));
    j["meta"] = metas;
    j["loss_history"] = det.loss_history;

    if (det.pca) {
        j["model"] = pca_json(*det.pca);
    } else if (det.wpca) {
        j["model"] = {{"width", det.wpca->width},
                      {"overlapping", det.wpca->overlapping},
                      {"feature_dim", det.wpca->feature_dim},
                      {"inner", pca_json(det.wpca->inner)}};
    } else if (det.uae) {
        const nn::UaeModel& m = *det.uae;
        nlohmann::json mj;
        mj["features"] = m.features;
        mj["trained"] = m.trained;
        mj["config"] = {{"input_len", m.cfg.input_len},
                        {"code_ratio", m.cfg.code_ratio},
                        {"inflation", m.cfg.inflation},
                        {"activation", m.cfg.activation == nn::Activation::relu ? "relu" : "tanh"},
                        {"noise_std", m.cfg.noise_std},
                        {"derivative_channel", m.cfg.derivative_channel}};
        const char* names[] = {"w_inflate", "b_inflate", "w_encode",
                               "b_encode",  "w_decode",  "b_decode"};
        auto params = m.parameters();
        for (size_t i = 0; i < params.size(); ++i) mj["params"][names[i]] = tensor_json(*params[i]);
        j["model"] = mj;
    } else if (det.cnn) {
        const nn::CnnModel& m = *det.cnn;
        nlohmann::json mj;
        mj["features"] = m.features;
        mj["trained"] = m.trained;
        mj["config"] = {{"seq_len", m.cfg.seq_len},       {"depth", m.cfg.depth},
                        {"filters", m.cfg.filters},       {"kernel", m.cfg.kernel},
                        {"output_len", m.cfg.output_len}, {"horizon", m.cfg.horizon}};
        nlohmann::json layers = nlohmann::json::array();
        for (size_t i = 0; i < m.kernels.size(); ++i)
            layers.push_back(
                {{"kernel", tensor_json(m.kernels[i])}, {"bias", tensor_json(m.biases[i])}});
        mj["layers"] = layers;
        mj["head"] = {{"w", tensor_json(m.w_head)}, {"b", tensor_json(m.b_head)}};
        j["model"] = mj;
    }

    std::ofstream out(path);
    require(out.good(), "cannot write file: " + path);
    out << j.dump() << '\n';
}

DetectorBundle load_detector(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open file: " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    require(j.at("format_version") == 1 && j.at("type") == "detector",
            "not a detector file: " + path);
    DetectorBundle det;
    det.kind = j.at("kind");
    det.domain = j.at("domain");
    det.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    det.anchors.min = j.at("anchors").at("min").get<std::vector<double>>();
    det.anchors.max = j.at("anchors").at("max").get<std::vector<double>>();
    for (const auto& mj : j.at("meta")) det.meta.push_back(meta_from_json(mj));
    det.loss_history = j.at("loss_history").get<std::vector<double>>();
    const auto& mj = j.at("model");

    if (det.kind == "pca") {
        det.pca = pca_from_json(mj);
    } else if (det.kind == "wpca") {
        WindowedPcaModel m;
        m.width = mj.at("width");
        m.overlapping = mj.at("overlapping");
        m.feature_dim = mj.at("feature_dim");
        m.inner = pca_from_json(mj.at("inner"));
        det.wpca = std::move(m);
    } else if (det.kind == "uae") {
        nn::UaeConfig cfg;
        const auto& c = mj.at("config");
        cfg.input_len = c.at("input_len");
        cfg.code_ratio = c.at("code_ratio");
        cfg.inflation = c.at("inflation");
        cfg.activation = c.at("activation") == "relu" ? nn::Activation::relu : nn::Activation::tanh;
        cfg.noise_std = c.at("noise_std");
        cfg.derivative_channel = c.at("derivative_channel");
        nn::UaeModel m = nn::make_uae(cfg, mj.at("features"), 0);
        const char* names[] = {"w_inflate", "b_inflate", "w_encode",
                               "b_encode",  "w_decode",  "b_decode"};
        auto params = m.parameters();
        for (size_t i = 0; i < params.size(); ++i) {
            nn::Tensor t = tensor_from_json(mj.at("params").at(names[i]));
            require(t.shape == params[i]->shape, "shape mismatch in detector file");
            *params[i] = std::move(t);
        }
        m.trained = mj.at("trained");
        det.uae = std::move(m);
    } else if (det.kind == "cnn") {
        nn::CnnConfig cfg;
        const auto& c = mj.at("config");
        cfg.seq_len = c.at("seq_len");
        cfg.depth = c.at("depth");
        cfg.filters = c.at("filters");
        cfg.kernel = c.at("kernel");
        cfg.output_len = c.at("output_len");
        cfg.horizon = c.at("horizon");
        nn::CnnModel m = nn::make_cnn(cfg, mj.at("features"), 0);
        const auto& layers = mj.at("layers");
        require(layers.size() == m.kernels.size(), "layer count mismatch in detector file");
        for (size_t i = 0; i < m.kernels.size(); ++i) {
            nn::Tensor k = tensor_from_json(layers[i].at("kernel"));
            nn::Tensor b = tensor_from_json(layers[i].at("bias"));
            require(k.shape == m.kernels[i].shape && b.shape == m.biases[i].shape,
                    "layer shape mismatch in detector file");
            m.kernels[i] = std::move(k);
            m.biases[i] = std::move(b);
        }
        nn::Tensor w = tensor_from_json(mj.at("head").at("w"));
        nn::Tensor b = tensor_from_json(mj.at("head").at("b"));
        require(w.shape == m.w_head.shape && b.shape == m.b_head.shape,
                "head shape mismatch in detector file");
        m.w_head = std::move(w);
        m.b_head = std::move(b);
        m.trained = mj.at("trained");
        det.cnn = std::move(m);
    } else {
        throw ValidationError("unknown detector kind in file: " + det.kind);
    }
    return det;
}

void save_tuned(const TunedDetector& tuned, const std::string& path) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["type"] = "tuned";
    j["tau"] = tuned.config.tau;
    j["w"] = tuned.config.window;
    j["scheme"] = tuned.config.scheme == NormScheme::max_norm ? "max" : "zscore";
    j["stats"] = {{"max", tuned.stats.max},
                  {"mean", tuned.stats.mean},
                  {"stddev", tuned.stats.stddev},
                  {"degenerate", tuned.stats.degenerate}};
    std::ofstream out(path);
    require(out.good(), "cannot write file: " + path);
    out << j.dump(2) << '\n';
}

TunedDetector load_tuned(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open file: " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    require(j.at("format_version") == 1 && j.at("type") == "tuned", "not a tuned file: " + path);
    TunedDetector t;
    t.config.tau = j.at("tau");
    t.config.window = j.at("w");
    t.config.scheme = j.at("scheme") == "max" ? NormScheme::max_norm : NormScheme::zscore;
    t.stats.scheme = t.config.scheme;
    t.stats.max = j.at("stats").at("max").get<std::vector<double>>();
    t.stats.mean = j.at("stats").at("mean").get<std::vector<double>>();
    t.stats.stddev = j.at("stats").at("stddev").get<std::vector<double>>();
    t.stats.degenerate = j.at("stats").at("degenerate").get<std::vector<uint8_t>>();
    return t;
}

std::vector<uint8_t> alerts_from_runs(const TimeSeriesDataset& ds,
                                      const std::vector<std::pair<int64_t, int64_t>>& runs) {
    std::vector<uint8_t> alerts(ds.records(), 0);
    for (const auto& [start_ts, end_ts] : runs)
        for (size_t t = 0; t < ds.records(); ++t)
            if (ds.timestamps[t] >= start_ts && ds.timestamps[t] <= end_ts) alerts[t] = 1;
    return alerts;
}

uint64_t config_hash(const std::string& canonical) {
    uint64_t h = 14695981039346656037ull;
    for (unsigned char c : canonical) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

} // namespace icsd
