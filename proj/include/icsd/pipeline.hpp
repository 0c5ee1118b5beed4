#pragma once

#include <optional>
#include <string>
#include <vector>

#include "icsd/dataset.hpp"
#include "icsd/models.hpp"
#include "icsd/pca.hpp"
#include "icsd/scoring.hpp"

namespace icsd {

/// A fitted detector plus everything needed to apply it to new data: the
/// features it models, the training normalization anchors, and metadata for
/// constraint handling.
struct DetectorBundle {
    std::string kind;                    // pca | wpca | uae | cnn
    std::optional<PcaModel> pca;
    std::optional<WindowedPcaModel> wpca;
    std::optional<nn::UaeModel> uae;
    std::optional<nn::CnnModel> cnn;
    std::vector<std::string> feature_names;
    Anchors anchors;
    std::vector<FeatureMeta> meta;       // snapshot incl. kinds and valid ranges
    std::vector<double> loss_history;    // neural fits only
    std::string domain = "time";         // time | frequency

    size_t window_len() const;
};

struct FitOptions {
    std::string kind = "uae";
    size_t n_components = 0;   // pca / wpca; 0 = half the modeled dimensions
    size_t width = 7;          // wpca window
    bool overlapping = true;   // wpca training windows
    nn::UaeConfig uae;
    nn::CnnConfig cnn;
    nn::TrainConfig train;
    size_t train_stride = 1;   // windowing stride for neural training
    std::string domain = "time";
};

/// Normalizes the training data (self-anchored), fits the chosen detector,
/// and records the anchors for later use on test data.
DetectorBundle fit_detector(const TimeSeriesDataset& train_raw, const FitOptions& opt);

/// Per-record reconstruction/forecast residuals of a dataset under the
/// bundle: data is reduced to the modeled features, normalized with the
/// training anchors, predicted (overlapping predictions averaged), and
/// differenced. Rows no window covers have zero residual and coverage 0.
struct ResidualOutput {
    Matrix raw;                     // T x F
    std::vector<size_t> coverage;
    Matrix observed;                // normalized observations, T x F

    Matrix covered_rows(const Matrix& m) const;
};

ResidualOutput residual_series(const DetectorBundle& det, const TimeSeriesDataset& raw_ds);

/// Tuned thresholding state: the (tau, w) pair plus the training-residual
/// statistics that anchor normalization.
struct TunedDetector {
    DetectorConfig config;
    ResidualStats stats;
};

void save_detector(const DetectorBundle& det, const std::string& path);
DetectorBundle load_detector(const std::string& path);
void save_tuned(const TunedDetector& tuned, const std::string& path);
TunedDetector load_tuned(const std::string& path);

/// Rebuild a boolean alert vector from run endpoints (timestamps inclusive).
std::vector<uint8_t> alerts_from_runs(const TimeSeriesDataset& ds,
                                      const std::vector<std::pair<int64_t, int64_t>>& runs);

/// FNV-1a over the canonical config text; artifacts are addressed by it.
uint64_t config_hash(const std::string& canonical);

} // namespace icsd
