#pragma once

#include <span>
#include <string>
#include <vector>

#include "icsd/dataset.hpp"

namespace icsd {

/// No (tau, w) pair on the grids meets the false-alarm budget.
class InfeasibleTuning : public Error {
public:
    InfeasibleTuning(const std::string& msg, size_t best) : Error(msg), min_false_alarms(best) {}
    size_t min_false_alarms = 0;
};

/// Elementwise |y - y_hat|. Overlapping predictions of the same time step
/// must be averaged before calling (see assemble_predictions).
Matrix residuals(const Matrix& y, const Matrix& y_hat);

/// Scatter per-window predictions onto the time axis, averaging where
/// windows overlap. coverage[t] == 0 marks rows no window predicts.
struct AssembledPrediction {
    Matrix values;               // T x F
    std::vector<size_t> coverage;
};

AssembledPrediction assemble_predictions(size_t total_rows, size_t features,
                                         const SequenceBatch& windows,
                                         std::span<const double> predictions);

enum class NormScheme { max_norm, zscore };

struct ResidualStats {
    NormScheme scheme = NormScheme::max_norm;
    std::vector<double> max;             // per feature (max_norm)
    std::vector<double> mean, stddev;    // per feature (zscore)
    std::vector<uint8_t> degenerate;     // zero max / zero stddev features
};

/// Statistics of the training-data residuals, the anchors of Eq.-style
/// normalization at detection time.
ResidualStats residual_stats(const Matrix& train_raw, NormScheme scheme);

/// max_norm: r / train_max per feature; zscore: (r - mean) / std. A
/// degenerate feature maps to 0 where the numerator is 0 and to +inf
/// otherwise (flagged, never silently hidden).
Matrix normalize_residuals(const Matrix& raw, const ResidualStats& stats);

struct DetectorConfig {
    double tau = 1.0;
    size_t window = 1; // w: required consecutive exceedances
    NormScheme scheme = NormScheme::max_norm;
};

struct AlertSeries {
    std::vector<uint8_t> alerts;      // length T
    Matrix per_feature;               // T x F indicator (normalized residual > tau)
};

/// Alert at index i when the per-index residual maximum exceeds tau at every
/// t in (i-w, i] -- w consecutive points, so the first w-1 indices never
/// alert and w=1 is plain thresholding.
AlertSeries alert(const Matrix& normalized, const DetectorConfig& cfg);

struct AlertRun {
    size_t begin = 0; // inclusive
    size_t end = 0;   // exclusive
};

/// Maximal runs of consecutive alert indices; one run = one distinct alarm.
std::vector<AlertRun> alert_runs(std::span<const uint8_t> alerts);

struct TuneResult {
    DetectorConfig config;
    size_t false_alarms = 0;
    double weight = 0.0; // omega_tau * omega_w of the chosen pair
};

/// Grid search per the false-alarm budget: the j-th value of a grid weighs
/// (j+1)/|grid|; among pairs with run count <= fp_max on the (attack-free)
/// validation residuals, picks the minimal weight product, ties broken by
/// smaller w then smaller tau. Throws InfeasibleTuning with the best
/// achievable run count when nothing qualifies.
TuneResult tune(const Matrix& validation_normalized, std::span<const double> tau_grid,
                std::span<const size_t> w_grid, size_t fp_max,
                NormScheme scheme = NormScheme::max_norm);

struct LocalizedFeature {
    size_t feature = 0;
    double peak = 0.0; // highest normalized residual inside the run
};

struct Localization {
    AlertRun run;
    std::vector<LocalizedFeature> features; // ordered by peak, descending
};

/// Per alert run, the features whose indicator fired anywhere in the run's
/// span. This is the attack area, not necessarily the root cause.
std::vector<Localization> localize(const AlertSeries& alerts, const Matrix& normalized,
                                   const DetectorConfig& cfg);

/// CSV rows: start_ts,end_ts,features(top-k, ';'-joined),peak_residual.
void write_alert_csv(const std::vector<Localization>& runs, const TimeSeriesDataset& ds,
                     size_t top_k, const std::string& path);

} // namespace icsd
