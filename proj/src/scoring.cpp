#include "icsd/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace icsd {

Matrix residuals(const Matrix& y, const Matrix& y_hat) {
    require(y.same_shape(y_hat), "residuals: shape mismatch");
    Matrix out(y.rows, y.cols);
    for (size_t i = 0; i < y.data.size(); ++i) out.data[i] = std::fabs(y.data[i] - y_hat.data[i]);
    return out;
}

AssembledPrediction assemble_predictions(size_t total_rows, size_t features,
                                         const SequenceBatch& windows,
                                         std::span<const double> predictions) {
    const size_t m = windows.output_len, F = windows.features;
    require(F == features, "assemble: feature count mismatch");
    require(predictions.size() == windows.batch * m * F, "assemble: prediction buffer size");
    AssembledPrediction out;
    out.values = Matrix(total_rows, F);
    out.coverage.assign(total_rows, 0);
    for (size_t b = 0; b < windows.batch; ++b) {
        size_t start = windows.target_start(b);
        require(start + m <= total_rows, "assemble: window beyond series end");
        for (size_t i = 0; i < m; ++i) ++out.coverage[start + i];
    }
    for (size_t b = 0; b < windows.batch; ++b) {
        size_t start = windows.target_start(b);
        for (size_t i = 0; i < m; ++i) {
            size_t t = start + i;
            double inv = 1.0 / static_cast<double>(out.coverage[t]);
            for (size_t f = 0; f < F; ++f)
                out.values.at(t, f) += predictions[(b * m + i) * F + f] * inv;
        }
    }
    return out;
}

ResidualStats residual_stats(const Matrix& train_raw, NormScheme scheme) {
    require(train_raw.rows >= 1, "residual stats need at least one row");
    const size_t F = train_raw.cols;
    ResidualStats s;
    s.scheme = scheme;
    s.degenerate.assign(F, 0);
    if (scheme == NormScheme::max_norm) {
        s.max.assign(F, 0.0);
        for (size_t t = 0; t < train_raw.rows; ++t)
            for (size_t f = 0; f < F; ++f) s.max[f] = std::max(s.max[f], train_raw.at(t, f));
        for (size_t f = 0; f < F; ++f)
            if (s.max[f] == 0.0) s.degenerate[f] = 1;
    } else {
        s.mean.assign(F, 0.0);
        s.stddev.assign(F, 0.0);
        const double n = static_cast<double>(train_raw.rows);
        for (size_t t = 0; t < train_raw.rows; ++t)
            for (size_t f = 0; f < F; ++f) s.mean[f] += train_raw.at(t, f);
        for (size_t f = 0; f < F; ++f) s.mean[f] /= n;
        for (size_t t = 0; t < train_raw.rows; ++t)
            for (size_t f = 0; f < F; ++f) {
                double d = train_raw.at(t, f) - s.mean[f];
                s.stddev[f] += d * d;
            }
        for (size_t f = 0; f < F; ++f) {
            s.stddev[f] = std::sqrt(s.stddev[f] / n);
            if (s.stddev[f] == 0.0) s.degenerate[f] = 1;
        }
    }
    return s;
}

Matrix normalize_residuals(const Matrix& raw, const ResidualStats& stats) {
    const size_t F = raw.cols;
    require(F == (stats.scheme == NormScheme::max_norm ? stats.max.size() : stats.mean.size()),
            "normalize_residuals: stats do not match feature count");
    Matrix out(raw.rows, F);
    const double inf = std::numeric_limits<double>::infinity();
    for (size_t t = 0; t < raw.rows; ++t)
        for (size_t f = 0; f < F; ++f) {
            double r = raw.at(t, f);
            if (stats.scheme == NormScheme::max_norm) {
                if (stats.degenerate[f])
                    out.at(t, f) = r == 0.0 ? 0.0 : inf;
                else
                    out.at(t, f) = r / stats.max[f];
            } else {
                if (stats.degenerate[f])
                    out.at(t, f) = r == stats.mean[f] ? 0.0 : inf;
                else
                    out.at(t, f) = (r - stats.mean[f]) / stats.stddev[f];
            }
        }
    return out;
}

AlertSeries alert(const Matrix& normalized, const DetectorConfig& cfg) {
    const size_t T = normalized.rows, F = normalized.cols;
    require(cfg.window >= 1, "alert window must be >= 1");
    require(cfg.window <= T, "alert window longer than the series");
    AlertSeries out;
    out.alerts.assign(T, 0);
    out.per_feature = Matrix(T, F);

    std::vector<uint8_t> exceeds(T, 0);
    for (size_t t = 0; t < T; ++t) {
        double row_max = -std::numeric_limits<double>::infinity();
        for (size_t f = 0; f < F; ++f) {
            double v = normalized.at(t, f);
            out.per_feature.at(t, f) = v > cfg.tau ? 1.0 : 0.0;
            row_max = std::max(row_max, v);
        }
        exceeds[t] = row_max > cfg.tau ? 1 : 0;
    }
    // run-length of consecutive exceedances ending at t
    size_t streak = 0;
    for (size_t t = 0; t < T; ++t) {
        streak = exceeds[t] ? streak + 1 : 0;
        out.alerts[t] = streak >= cfg.window ? 1 : 0;
    }
    return out;
}

std::vector<AlertRun> alert_runs(std::span<const uint8_t> alerts) {
    std::vector<AlertRun> runs;
    size_t t = 0;
    while (t < alerts.size()) {
        if (!alerts[t]) {
            ++t;
            continue;
        }
        size_t begin = t;
        while (t < alerts.size() && alerts[t]) ++t;
        runs.push_back({begin, t});
    }
    return runs;
}

TuneResult tune(const Matrix& validation_normalized, std::span<const double> tau_grid,
                std::span<const size_t> w_grid, size_t fp_max, NormScheme scheme) {
    require(!tau_grid.empty() && !w_grid.empty(), "tuning grids must be non-empty");
    // weights are index-proportional on the deduplicated ascending grid
    std::vector<double> taus(tau_grid.begin(), tau_grid.end());
    std::vector<size_t> ws(w_grid.begin(), w_grid.end());
    require(std::is_sorted(taus.begin(), taus.end()), "tau grid must be ascending");
    require(std::is_sorted(ws.begin(), ws.end()), "w grid must be ascending");
    taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
    ws.erase(std::unique(ws.begin(), ws.end()), ws.end());

    bool found = false;
    TuneResult best;
    size_t min_false_alarms = std::numeric_limits<size_t>::max();
    for (size_t wi = 0; wi < ws.size(); ++wi) {
        for (size_t ti = 0; ti < taus.size(); ++ti) {
            DetectorConfig cfg{taus[ti], ws[wi], scheme};
            if (cfg.window > validation_normalized.rows) continue;
            auto runs = alert_runs(alert(validation_normalized, cfg).alerts);
            min_false_alarms = std::min(min_false_alarms, runs.size());
            if (runs.size() > fp_max) continue;
            double w_tau = static_cast<double>(ti + 1) / static_cast<double>(taus.size());
            double w_w = static_cast<double>(wi + 1) / static_cast<double>(ws.size());
            double weight = w_tau * w_w;
            // ties: smaller w, then smaller tau (favor faster detection)
            bool better = !found || weight < best.weight ||
                          (weight == best.weight &&
                           (cfg.window < best.config.window ||
                            (cfg.window == best.config.window && cfg.tau < best.config.tau)));
            if (better) {
                best.config = cfg;
                best.false_alarms = runs.size();
                best.weight = weight;
                found = true;
            }
        }
    }
    if (!found)
        throw InfeasibleTuning("no (tau, w) pair meets the false-alarm budget; best achievable " +
                                   std::to_string(min_false_alarms) + " > " + std::to_string(fp_max),
                               min_false_alarms);
    return best;
}

std::vector<Localization> localize(const AlertSeries& alerts, const Matrix& normalized,
                                   const DetectorConfig& cfg) {
    std::vector<Localization> out;
    const size_t F = normalized.cols;
    for (const AlertRun& run : alert_runs(alerts.alerts)) {
        Localization loc;
        loc.run = run;
        // the exceedances behind alert index i start w-1 steps earlier
        size_t span_begin = run.begin >= cfg.window - 1 ? run.begin - (cfg.window - 1) : 0;
        for (size_t f = 0; f < F; ++f) {
            bool fired = false;
            double peak = 0.0;
            for (size_t t = span_begin; t < run.end; ++t) {
                if (alerts.per_feature.at(t, f) > 0.0) fired = true;
                peak = std::max(peak, normalized.at(t, f));
            }
            if (fired) loc.features.push_back({f, peak});
        }
        std::stable_sort(loc.features.begin(), loc.features.end(),
                         [](const LocalizedFeature& a, const LocalizedFeature& b) {
                             return a.peak > b.peak;
                         });
        out.push_back(std::move(loc));
    }
    return out;
}

void write_alert_csv(const std::vector<Localization>& runs, const TimeSeriesDataset& ds,
                     size_t top_k, const std::string& path) {
    std::ofstream out(path);
    require(out.good(), "cannot write file: " + path);
    out << "start_ts,end_ts,features,peak_residual\n";
    for (const auto& loc : runs) {
        int64_t start_ts = ds.timestamps[loc.run.begin];
        int64_t end_ts = ds.timestamps[loc.run.end - 1];
        out << start_ts << ',' << end_ts << ',';
        double peak = 0.0;
        for (size_t i = 0; i < loc.features.size() && i < top_k; ++i) {
            if (i) out << ';';
            out << ds.meta[loc.features[i].feature].name;
            peak = std::max(peak, loc.features[i].peak);
        }
        out << ',' << peak << '\n';
    }
}

} // namespace icsd
