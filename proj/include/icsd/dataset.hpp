#pragma once

#include <optional>
#include <string>
#include <vector>

#include "icsd/common.hpp"

namespace icsd {

enum class FeatureKind { continuous, binary, categorical };

struct FeatureMeta {
    std::string name;
    FeatureKind kind = FeatureKind::continuous;
    double train_min = 0.0;      // normalization anchors
    double train_max = 1.0;
    double valid_lo = -1e300;    // physically valid sensor range
    double valid_hi = 1e300;
    bool degenerate = false;     // constant under the current anchors
};

/// Timestamped feature matrix with optional per-record attack labels.
/// Immutable after construction; every transform returns a new dataset.
struct TimeSeriesDataset {
    std::vector<int64_t> timestamps;   // epoch seconds, strictly increasing
    Matrix features;                   // T x F
    std::vector<uint8_t> labels;       // empty, or length T (1 = attack)
    std::vector<FeatureMeta> meta;     // length F
    int64_t step_seconds = 0;          // nominal (modal) record spacing
    size_t skipped_rows = 0;           // rows rejected at ingestion
    size_t irregular_gaps = 0;         // spacings differing from the modal step

    size_t records() const { return features.rows; }
    size_t feature_count() const { return features.cols; }
    bool has_labels() const { return !labels.empty(); }
    int feature_index(const std::string& name) const;

    /// Returns one feature as a contiguous column vector.
    std::vector<double> column(size_t f) const;

    /// New dataset restricted to the named features, order preserved.
    TimeSeriesDataset select_features(const std::vector<std::string>& names) const;

    /// New dataset restricted to records [begin, end).
    TimeSeriesDataset slice_records(size_t begin, size_t end) const;
};

struct CsvSchema {
    std::string timestamp_column = "timestamp";
    std::string label_column;          // empty = unlabeled file
};

TimeSeriesDataset ingest_csv(const std::string& path, const CsvSchema& schema);
void export_csv(const TimeSeriesDataset& ds, const std::string& path);

struct Anchors {
    std::vector<double> min;
    std::vector<double> max;
};

Anchors anchors_of(const TimeSeriesDataset& ds);

/// Min-max scaling per feature. Without explicit anchors they are computed
/// from ds itself (training case); with anchors (test case) values may land
/// outside [0,1] -- deliberately unclipped so residual scoring sees genuine
/// excursions. Constant features map to 0 and are flagged degenerate.
TimeSeriesDataset normalize(const TimeSeriesDataset& ds,
                            const std::optional<Anchors>& anchors = std::nullopt);

enum class SubsampleMethod { decimate, mean };

/// Every block of k records becomes one: its k-th record (decimate) or its
/// per-feature mean with the block's first timestamp (mean). Labels OR over
/// the block in both methods so no attack interval disappears.
TimeSeriesDataset subsample(const TimeSeriesDataset& ds, size_t k, SubsampleMethod method);

/// Sliding windows for sequence models. inputs[b] covers source rows
/// [start, start+l); targets[b] covers [start+l+h, start+l+h+m).
struct SequenceBatch {
    size_t input_len = 0;    // l
    size_t output_len = 0;   // m
    size_t horizon = 0;      // h
    size_t stride = 1;
    size_t batch = 0;        // B
    size_t features = 0;     // F
    bool autoencoder = false;            // targets == inputs, horizon unused
    std::vector<double> inputs;          // B * l * F
    std::vector<double> targets;         // B * m * F
    std::vector<size_t> input_start;     // source row of each window

    size_t target_start(size_t b) const {
        return autoencoder ? input_start[b] : input_start[b] + input_len + horizon;
    }
};

SequenceBatch make_sequences(const TimeSeriesDataset& ds, size_t l, size_t m, size_t h,
                             size_t stride);

/// Autoencoder windows: targets are the inputs themselves (m = l).
SequenceBatch make_autoencoder_sequences(const TimeSeriesDataset& ds, size_t l, size_t stride);

} // namespace icsd
