#pragma once

#include <span>
#include <string>

#include "icsd/common.hpp"

namespace icsd {

struct PointMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool precision_defined = true; // false when there are no alerts
    bool recall_defined = true;    // false when there are no attack records
    size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

/// Record-level precision/recall/F1. Undefined ratios are flagged rather
/// than silently reported as 0.
PointMetrics point_metrics(std::span<const uint8_t> labels, std::span<const uint8_t> alerts);

struct BatadalScore {
    double s = 0.0;
    double s_ttd = 0.0; // time-to-detection score
    double s_clf = 0.0; // (TPR + TNR) / 2
    size_t attacks_detected = 0;
    size_t attack_count = 0;
    double gamma = 0.5;
};

/// Composite score s = gamma * s_ttd + (1-gamma) * s_clf. s_ttd averages,
/// over maximal attack intervals, 1 - (records until the first alert inside
/// the interval / interval length); an undetected interval contributes 0.
/// These are the standard competition conventions; the classification half
/// is balanced accuracy over records. Throws when labels contain no attack.
BatadalScore batadal_score(std::span<const uint8_t> labels, std::span<const uint8_t> alerts,
                           double gamma = 0.5);

struct EvalReport {
    PointMetrics metrics;
    bool has_batadal = false;
    BatadalScore batadal;
};

/// key=value text block, one metric per line.
std::string format_eval_report(const EvalReport& report);
/// one-row CSV (header + values) for tabulation across runs.
std::string eval_report_csv(const EvalReport& report);

} // namespace icsd
