#pragma once

#include <span>
#include <string>
#include <vector>

#include "icsd/dataset.hpp"

namespace icsd {

/// Empirical CDF with the strict-inequality convention: F(x) is the fraction
/// of samples strictly below x. cum[i] stores the fraction of samples <=
/// support[i], so the final entry is 1.
struct Ecdf {
    std::vector<double> support;   // ascending, ties collapsed
    std::vector<double> cum;

    size_t count = 0;              // sample size

    /// F(x) = fraction of samples < x.
    double eval(double x) const;
};

Ecdf make_ecdf(std::span<const double> sample);

/// Kolmogorov-Smirnov statistic: sup |F1 - F2| over the merged supports.
double ks_stat(const Ecdf& a, const Ecdf& b);

/// Area between the two ECDFs over [lo, hi], integrated exactly over the
/// merged step partition.
double ks_star(const Ecdf& a, const Ecdf& b, double lo, double hi);

enum class ScreenMode { train_vs_test, split_half, periodic };

struct FeatureScreenRow {
    std::string feature;
    double ks = 0.0;
    double ks_star = 0.0;
    bool drop = false;
};

struct ScreenReport {
    std::vector<FeatureScreenRow> rows;
    double threshold = 0.0;
    ScreenMode mode = ScreenMode::train_vs_test;
    std::vector<std::string> flipped;      // periodic mode: features whose verdict changed
    bool retrain_recommended = false;

    std::vector<std::string> kept() const;
    std::vector<std::string> dropped() const;
};

/// Per-feature distribution comparison on (train-anchored) normalized values.
/// A feature is dropped when its ks_star exceeds the threshold; degenerate
/// (constant-in-train) features are always dropped.
///   train_vs_test -- compares train against the supplied test set;
///   split_half    -- compares the first half of train against the second;
///   periodic      -- re-screens every periodic_every records of the test
///                   stream against train and recommends retraining when any
///                   kept feature's verdict flips (report carries the last
///                   window's statistics).
ScreenReport screen(const TimeSeriesDataset& train, const TimeSeriesDataset* test,
                    double threshold, ScreenMode mode, size_t periodic_every = 0);

void write_screen_csv(const ScreenReport& report, const std::string& path);

} // namespace icsd
