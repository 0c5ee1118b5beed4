#include "icsd/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

namespace icsd::nn {

namespace {

Tensor glorot(std::vector<size_t> shape, size_t fan_in, size_t fan_out, Rng& rng) {
    Tensor t(std::move(shape));
    double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : t.v) v = rng.uniform(-bound, bound);
    return t;
}

} // namespace

std::vector<Tensor*> UaeModel::parameters() {
    return {&w_inflate, &b_inflate, &w_encode, &b_encode, &w_decode, &b_decode};
}

std::vector<const Tensor*> UaeModel::parameters() const {
    return {&w_inflate, &b_inflate, &w_encode, &b_encode, &w_decode, &b_decode};
}

UaeModel make_uae(const UaeConfig& cfg, size_t features, uint64_t seed) {
    require(cfg.input_len >= 1 && features >= 1, "uae needs input_len >= 1 and features >= 1");
    require(cfg.code_ratio > 0.0 && cfg.code_ratio < 1.0, "code_ratio must be in (0,1)");
    require(cfg.inflation >= 1.0, "inflation factor must be >= 1");
    UaeModel m;
    m.cfg = cfg;
    m.features = features;
    const size_t raw = m.raw_dim();
    const size_t din = m.input_dim();
    const size_t infl = std::max<size_t>(1, static_cast<size_t>(std::lround(cfg.inflation * static_cast<double>(din))));
    size_t code = std::max<size_t>(1, static_cast<size_t>(std::lround(cfg.code_ratio * static_cast<double>(raw))));
    if (code >= raw) code = raw - 1; // undercomplete by contract
    require(code >= 1, "input too small for an undercomplete code");
    Rng rng(seed);
    m.w_inflate = glorot({din, infl}, din, infl, rng);
    m.b_inflate = Tensor({infl});
    m.w_encode = glorot({infl, code}, infl, code, rng);
    m.b_encode = Tensor({code});
    m.w_decode = glorot({code, raw}, code, raw, rng);
    m.b_decode = Tensor({raw});
    return m;
}

ForwardNodes uae_forward(Graph& g, const UaeModel& m, Graph::NodeId x, bool training, Rng* rng) {
    const Tensor& xv = g.value(x);
    require(xv.shape.size() == 3 && xv.shape[1] == m.cfg.input_len && xv.shape[2] == m.features,
            "uae input must be (B, l, F)");
    const size_t B = xv.shape[0];
    ForwardNodes out;
    for (const Tensor* p : m.parameters()) out.params.push_back(g.input(*p));

    Graph::NodeId h = x;
    if (training && m.cfg.noise_std > 0.0) {
        require(rng != nullptr, "training with noise requires an rng");
        h = g.gaussian_noise(h, m.cfg.noise_std, *rng, true);
    }
    if (m.cfg.derivative_channel) h = g.concat_last_dim(h, g.time_diff(h));
    h = g.reshape(h, {B, m.input_dim()});
    h = g.add_row(g.matmul(h, out.params[0]), out.params[1]);
    h = m.cfg.activation == Activation::relu ? g.relu(h) : g.tanh_act(h);
    h = g.add_row(g.matmul(h, out.params[2]), out.params[3]);
    h = g.add_row(g.matmul(h, out.params[4]), out.params[5]);
    out.output = g.reshape(h, {B, m.cfg.input_len, m.features});
    return out;
}

std::vector<Tensor*> CnnModel::parameters() {
    std::vector<Tensor*> out;
    for (size_t i = 0; i < kernels.size(); ++i) {
        out.push_back(&kernels[i]);
        out.push_back(&biases[i]);
    }
    out.push_back(&w_head);
    out.push_back(&b_head);
    return out;
}

std::vector<const Tensor*> CnnModel::parameters() const {
    std::vector<const Tensor*> out;
    for (size_t i = 0; i < kernels.size(); ++i) {
        out.push_back(&kernels[i]);
        out.push_back(&biases[i]);
    }
    out.push_back(&w_head);
    out.push_back(&b_head);
    return out;
}

namespace {

// Sequence length after each conv (length-preserving) and the pooling placed
// after every second layer.
size_t cnn_final_len(const CnnConfig& cfg) {
    size_t len = cfg.seq_len;
    for (size_t i = 0; i < cfg.depth; ++i)
        if (i % 2 == 1 && len >= 2) len /= 2;
    return len;
}

} // namespace

CnnModel make_cnn(const CnnConfig& cfg, size_t features, uint64_t seed) {
    require(cfg.seq_len >= 1 && cfg.depth >= 1 && cfg.filters >= 1 && cfg.output_len >= 1,
            "invalid cnn configuration");
    require(cfg.kernel >= 1 && cfg.kernel <= cfg.seq_len, "kernel must fit in the sequence");
    CnnModel m;
    m.cfg = cfg;
    m.features = features;
    Rng rng(seed);
    size_t cin = features;
    for (size_t i = 0; i < cfg.depth; ++i) {
        m.kernels.push_back(glorot({cfg.filters, cfg.kernel, cin}, cfg.kernel * cin,
                                   cfg.kernel * cfg.filters, rng));
        m.biases.push_back(Tensor({cfg.filters}));
        cin = cfg.filters;
    }
    const size_t flat = cnn_final_len(cfg) * cfg.filters;
    const size_t dout = cfg.output_len * features;
    m.w_head = glorot({flat, dout}, flat, dout, rng);
    m.b_head = Tensor({dout});
    return m;
}

ForwardNodes cnn_forward(Graph& g, const CnnModel& m, Graph::NodeId x) {
    const Tensor& xv = g.value(x);
    require(xv.shape.size() == 3 && xv.shape[1] == m.cfg.seq_len && xv.shape[2] == m.features,
            "cnn input must be (B, l, F)");
    const size_t B = xv.shape[0];
    ForwardNodes out;
    for (const Tensor* p : m.parameters()) out.params.push_back(g.input(*p));

    const size_t k = m.cfg.kernel;
    const size_t pad_lo = (k - 1) / 2, pad_hi = k - 1 - pad_lo;
    Graph::NodeId h = x;
    size_t len = m.cfg.seq_len;
    for (size_t i = 0; i < m.cfg.depth; ++i) {
        if (k > 1) h = g.pad_time(h, pad_lo, pad_hi);
        h = g.conv1d(h, out.params[2 * i]);
        h = g.bias_channels(h, out.params[2 * i + 1]);
        h = g.relu(h);
        if (i % 2 == 1 && len >= 2) {
            h = g.maxpool1d(h, 2);
            len /= 2;
        }
    }
    h = g.reshape(h, {B, len * m.cfg.filters});
    h = g.add_row(g.matmul(h, out.params[2 * m.cfg.depth]), out.params[2 * m.cfg.depth + 1]);
    out.output = g.reshape(h, {B, m.cfg.output_len, m.features});
    return out;
}

namespace {

class Optimizer {
public:
    Optimizer(const TrainConfig& cfg, const std::vector<Tensor*>& params) : cfg_(cfg) {
        if (cfg.optimizer == OptimizerKind::adam) {
            for (Tensor* p : params) {
                m_.emplace_back(p->size(), 0.0);
                v_.emplace_back(p->size(), 0.0);
            }
        }
    }

    void step(const std::vector<Tensor*>& params, const std::vector<const std::vector<double>*>& grads) {
        if (cfg_.optimizer == OptimizerKind::sgd) {
            for (size_t i = 0; i < params.size(); ++i)
                for (size_t j = 0; j < params[i]->size(); ++j)
                    params[i]->v[j] -= cfg_.learning_rate * (*grads[i])[j];
            return;
        }
        ++t_;
        const double b1 = cfg_.beta1, b2 = cfg_.beta2;
        const double corr1 = 1.0 - std::pow(b1, static_cast<double>(t_));
        const double corr2 = 1.0 - std::pow(b2, static_cast<double>(t_));
        for (size_t i = 0; i < params.size(); ++i) {
            auto& m = m_[i];
            auto& v = v_[i];
            for (size_t j = 0; j < params[i]->size(); ++j) {
                double gradj = (*grads[i])[j];
                m[j] = b1 * m[j] + (1.0 - b1) * gradj;
                v[j] = b2 * v[j] + (1.0 - b2) * gradj * gradj;
                double mh = m[j] / corr1;
                double vh = v[j] / corr2;
                params[i]->v[j] -= cfg_.learning_rate * mh / (std::sqrt(vh) + cfg_.adam_eps);
            }
        }
    }

private:
    TrainConfig cfg_;
    std::vector<std::vector<double>> m_, v_;
    size_t t_ = 0;
};

// One training loop for both model families; `forward` builds the model pass
// for the current mini-batch.
template <typename ForwardFn>
TrainResult train_impl(std::vector<Tensor*> params, const SequenceBatch& data,
                       const TrainConfig& cfg, ForwardFn&& forward) {
    require(data.batch > 0, "cannot train on an empty batch");
    require(cfg.learning_rate >= 0.0 && cfg.batch_size >= 1 && cfg.max_epochs >= 1,
            "invalid training configuration");
    const size_t l = data.input_len, m = data.output_len, F = data.features;
    Rng rng(cfg.seed);
    Optimizer opt(cfg, params);
    TrainResult result;

    std::vector<size_t> order(data.batch);
    std::iota(order.begin(), order.end(), 0);

    for (size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        for (size_t off = 0; off < order.size(); off += cfg.batch_size) {
            const size_t bs = std::min(cfg.batch_size, order.size() - off);
            Tensor xin({bs, l, F});
            Tensor tgt({bs, m, F});
            for (size_t b = 0; b < bs; ++b) {
                size_t w = order[off + b];
                std::copy_n(data.inputs.begin() + w * l * F, l * F, xin.v.begin() + b * l * F);
                std::copy_n(data.targets.begin() + w * m * F, m * F, tgt.v.begin() + b * m * F);
            }
            Graph g;
            Graph::NodeId x = g.input(std::move(xin));
            Graph::NodeId t = g.input(std::move(tgt));
            ForwardNodes f = forward(g, x, rng);
            Graph::NodeId loss = g.mse(f.output, t);
            double lv = g.value(loss).v[0];
            if (!std::isfinite(lv))
                throw Error("training diverged (non-finite loss); lower the learning rate");
            loss_sum += lv * static_cast<double>(bs);
            g.backward(loss);
            std::vector<const std::vector<double>*> grads;
            for (Graph::NodeId id : f.params) grads.push_back(&g.grad(id));
            opt.step(params, grads);
        }
        double epoch_loss = loss_sum / static_cast<double>(data.batch);
        result.loss_history.push_back(epoch_loss);
        if (epoch_loss <= cfg.target_train_error) {
            result.reached_target = true;
            break;
        }
    }
    return result;
}

} // namespace

TrainResult train(UaeModel& model, const SequenceBatch& data, const TrainConfig& cfg) {
    require(data.autoencoder, "uae expects autoencoder windows (targets == inputs)");
    require(data.input_len == model.cfg.input_len && data.features == model.features,
            "batch shape does not match model");
    TrainResult r = train_impl(model.parameters(), data, cfg,
                               [&model](Graph& g, Graph::NodeId x, Rng& rng) {
                                   return uae_forward(g, model, x, true, &rng);
                               });
    model.trained = true;
    return r;
}

TrainResult train(CnnModel& model, const SequenceBatch& data, const TrainConfig& cfg) {
    require(!data.autoencoder, "cnn expects forecast windows");
    require(data.input_len == model.cfg.seq_len && data.features == model.features &&
                data.output_len == model.cfg.output_len && data.horizon == model.cfg.horizon,
            "batch shape does not match model");
    TrainResult r = train_impl(model.parameters(), data, cfg,
                               [&model](Graph& g, Graph::NodeId x, Rng&) {
                                   return cnn_forward(g, model, x);
                               });
    model.trained = true;
    return r;
}

namespace {

template <typename ForwardFn>
std::vector<double> predict_impl(const SequenceBatch& data, size_t out_len, ForwardFn&& forward) {
    const size_t l = data.input_len, F = data.features;
    std::vector<double> out(data.batch * out_len * F);
    const size_t chunk = 256;
    for (size_t off = 0; off < data.batch; off += chunk) {
        const size_t bs = std::min(chunk, data.batch - off);
        Tensor xin({bs, l, F});
        std::copy_n(data.inputs.begin() + off * l * F, bs * l * F, xin.v.begin());
        Graph g;
        Graph::NodeId x = g.input(std::move(xin));
        ForwardNodes f = forward(g, x);
        const auto& pv = g.value(f.output).v;
        std::copy(pv.begin(), pv.end(), out.begin() + off * out_len * F);
    }
    return out;
}

} // namespace

std::vector<double> predict(const UaeModel& model, const SequenceBatch& data) {
    require(model.trained, "model is not trained");
    require(data.input_len == model.cfg.input_len && data.features == model.features,
            "batch shape does not match model");
    return predict_impl(data, model.cfg.input_len, [&model](Graph& g, Graph::NodeId x) {
        return uae_forward(g, model, x, false, nullptr);
    });
}

std::vector<double> predict(const CnnModel& model, const SequenceBatch& data) {
    require(model.trained, "model is not trained");
    require(data.input_len == model.cfg.seq_len && data.features == model.features,
            "batch shape does not match model");
    return predict_impl(data, model.cfg.output_len, [&model](Graph& g, Graph::NodeId x) {
        return cnn_forward(g, model, x);
    });
}

namespace {

nlohmann::json tensor_json(const Tensor& t) {
    return nlohmann::json{{"shape", t.shape}, {"values", t.v}};
}

Tensor tensor_from_json(const nlohmann::json& j) {
    return Tensor(j.at("shape").get<std::vector<size_t>>(),
                  j.at("values").get<std::vector<double>>());
}

} // namespace

void save_uae(const UaeModel& m, const std::string& path) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["type"] = "uae";
    j["features"] = m.features;
    j["trained"] = m.trained;
    j["config"] = {{"input_len", m.cfg.input_len},
                   {"code_ratio", m.cfg.code_ratio},
                   {"inflation", m.cfg.inflation},
                   {"activation", m.cfg.activation == Activation::relu ? "relu" : "tanh"},
                   {"noise_std", m.cfg.noise_std},
                   {"derivative_channel", m.cfg.derivative_channel}};
    const char* names[] = {"w_inflate", "b_inflate", "w_encode", "b_encode", "w_decode", "b_decode"};
    auto params = m.parameters();
    for (size_t i = 0; i < params.size(); ++i) j["params"][names[i]] = tensor_json(*params[i]);
    std::ofstream out(path);
    require(out.good(), "cannot write file: " + path);
    out << j.dump() << '\n';
}

UaeModel load_uae(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open file: " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    require(j.at("format_version") == 1 && j.at("type") == "uae", "not a uae model file: " + path);
    UaeConfig cfg;
    const auto& c = j.at("config");
    cfg.input_len = c.at("input_len");
    cfg.code_ratio = c.at("code_ratio");
    cfg.inflation = c.at("inflation");
    cfg.activation = c.at("activation") == "relu" ? Activation::relu : Activation::tanh;
    cfg.noise_std = c.at("noise_std");
    cfg.derivative_channel = c.at("derivative_channel");
    UaeModel m = make_uae(cfg, j.at("features"), 0);
    const char* names[] = {"w_inflate", "b_inflate", "w_encode", "b_encode", "w_decode", "b_decode"};
    auto params = m.parameters();
    for (size_t i = 0; i < params.size(); ++i) {
        Tensor t = tensor_from_json(j.at("params").at(names[i]));
        require(t.shape == params[i]->shape, std::string("shape mismatch loading ") + names[i]);
        *params[i] = std::move(t);
    }
    m.trained = j.at("trained");
    return m;
}

void save_cnn(const CnnModel& m, const std::string& path) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["type"] = "cnn";
    j["features"] = m.features;
    j["trained"] = m.trained;
    j["config"] = {{"seq_len", m.cfg.seq_len},   {"depth", m.cfg.depth},
                   {"filters", m.cfg.filters},   {"kernel", m.cfg.kernel},
                   {"output_len", m.cfg.output_len}, {"horizon", m.cfg.horizon}};
    nlohmann::json layers = nlohmann::json::array();
    for (size_t i = 0; i < m.kernels.size(); ++i)
        layers.push_back({{"kernel", tensor_json(m.kernels[i])}, {"bias", tensor_json(m.biases[i])}});
    j["layers"] = layers;
    j["head"] = {{"w", tensor_json(m.w_head)}, {"b", tensor_json(m.b_head)}};
    std::ofstream out(path);
    require(out.good(), "cannot write file: " + path);
    out << j.dump() << '\n';
}

CnnModel load_cnn(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open file: " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    require(j.at("format_version") == 1 && j.at("type") == "cnn", "not a cnn model file: " + path);
    CnnConfig cfg;
    const auto& c = j.at("config");
    cfg.seq_len = c.at("seq_len");
    cfg.depth = c.at("depth");
    cfg.filters = c.at("filters");
    cfg.kernel = c.at("kernel");
    cfg.output_len = c.at("output_len");
    cfg.horizon = c.at("horizon");
    CnnModel m = make_cnn(cfg, j.at("features"), 0);
    const auto& layers = j.at("layers");
    require(layers.size() == m.kernels.size(), "layer count mismatch in " + path);
    for (size_t i = 0; i < m.kernels.size(); ++i) {
        Tensor k = tensor_from_json(layers[i].at("kernel"));
        Tensor b = tensor_from_json(layers[i].at("bias"));
        require(k.shape == m.kernels[i].shape && b.shape == m.biases[i].shape,
                "layer shape mismatch in " + path);
        m.kernels[i] = std::move(k);
        m.biases[i] = std::move(b);
    }
    Tensor w = tensor_from_json(j.at("head").at("w"));
    Tensor b = tensor_from_json(j.at("head").at("b"));
    require(w.shape == m.w_head.shape && b.shape == m.b_head.shape, "head shape mismatch in " + path);
    m.w_head = std::move(w);
    m.b_head = std::move(b);
    m.trained = j.at("trained");
    return m;
}

} // namespace icsd::nn
