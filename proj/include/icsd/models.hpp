#pragma once

#include <string>
#include <vector>

#include "icsd/autodiff.hpp"
#include "icsd/dataset.hpp"

namespace icsd::nn {

enum class Activation { relu, tanh };
enum class OptimizerKind { sgd, adam };

struct TrainConfig {
    OptimizerKind optimizer = OptimizerKind::adam;
    double learning_rate = 1e-3;
    size_t batch_size = 32;
    size_t max_epochs = 100;
    double target_train_error = 0.1;
    uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
};

struct TrainResult {
    std::vector<double> loss_history; // one entry per epoch
    bool reached_target = false;
};

/// Undercomplete autoencoder over flattened input sequences: optional
/// Gaussian corruption, an inflating dense layer with ReLU/tanh, a linear
/// encoder to a code strictly smaller than the input, and a linear decoder
/// (no inflation on the way out).
struct UaeConfig {
    size_t input_len = 1;            // l, sequence length reconstructed
    double code_ratio = 0.5;         // code size as a fraction of l*F
    double inflation = 3.0;          // inflate layer width factor
    Activation activation = Activation::relu;
    double noise_std = 0.0;          // training-only corruption
    bool derivative_channel = false; // append per-window discrete derivatives
};

struct UaeModel {
    UaeConfig cfg;
    size_t features = 0;
    Tensor w_inflate, b_inflate, w_encode, b_encode, w_decode, b_decode;
    bool trained = false;

    size_t raw_dim() const { return cfg.input_len * features; }
    size_t input_dim() const { return raw_dim() * (cfg.derivative_channel ? 2 : 1); }
    size_t inflate_dim() const { return w_inflate.shape[1]; }
    size_t code_dim() const { return w_encode.shape[1]; }
    std::vector<Tensor*> parameters();
    std::vector<const Tensor*> parameters() const;
};

UaeModel make_uae(const UaeConfig& cfg, size_t features, uint64_t seed);

/// 1D CNN sequence predictor: depth conv layers (same-length via zero
/// padding, ReLU), max-pooling of 2 after every second layer, dense head
/// producing the m future steps at horizon h.
struct CnnConfig {
    size_t seq_len = 18;   // l
    size_t depth = 8;
    size_t filters = 32;
    size_t kernel = 3;
    size_t output_len = 1; // m
    size_t horizon = 0;    // h
};

struct CnnModel {
    CnnConfig cfg;
    size_t features = 0;
    std::vector<Tensor> kernels; // (filters, kernel, channels_in) per layer
    std::vector<Tensor> biases;
    Tensor w_head, b_head;
    bool trained = false;

    std::vector<Tensor*> parameters();
    std::vector<const Tensor*> parameters() const;
};

CnnModel make_cnn(const CnnConfig& cfg, size_t features, uint64_t seed);

struct ForwardNodes {
    Graph::NodeId output = -1;
    std::vector<Graph::NodeId> params; // leaves, same order as parameters()
};

/// x must hold (B, l, F); returns (B, l, F) reconstruction.
ForwardNodes uae_forward(Graph& g, const UaeModel& m, Graph::NodeId x, bool training, Rng* rng);

/// x must hold (B, l, F); returns (B, m, F) prediction.
ForwardNodes cnn_forward(Graph& g, const CnnModel& m, Graph::NodeId x);

/// Mini-batch training until target_train_error or max_epochs, deterministic
/// under cfg.seed. Throws on non-finite loss (learning rate too high).
TrainResult train(UaeModel& model, const SequenceBatch& data, const TrainConfig& cfg);
TrainResult train(CnnModel& model, const SequenceBatch& data, const TrainConfig& cfg);

/// Eval-mode predictions (noise off, deterministic): B*l*F reconstructions
/// for the UAE, B*m*F forecasts for the CNN.
std::vector<double> predict(const UaeModel& model, const SequenceBatch& data);
std::vector<double> predict(const CnnModel& model, const SequenceBatch& data);

void save_uae(const UaeModel& model, const std::string& path);
UaeModel load_uae(const std::string& path);
void save_cnn(const CnnModel& model, const std::string& path);
CnnModel load_cnn(const std::string& path);

} // namespace icsd::nn
