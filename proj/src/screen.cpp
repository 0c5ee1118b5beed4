#include "icsd/screen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace icsd {

Ecdf make_ecdf(std::span<const double> sample) {
    require(!sample.empty(), "ecdf of empty sample");
    std::vector<double> sorted(sample.begin(), sample.end());
    for (double v : sorted) require(std::isfinite(v), "ecdf sample contains non-finite value");
    std::sort(sorted.begin(), sorted.end());
    Ecdf e;
    e.count = sorted.size();
    const double n = static_cast<double>(sorted.size());
    size_t i = 0;
    while (i < sorted.size()) {
        size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        e.support.push_back(sorted[i]);
        e.cum.push_back(static_cast<double>(j) / n);
        i = j;
    }
    return e;
}

double Ecdf::eval(double x) const {
    // fraction of samples strictly below x
    auto it = std::lower_bound(support.begin(), support.end(), x);
    if (it == support.begin()) return 0.0;
    return cum[static_cast<size_t>(it - support.begin()) - 1];
}

namespace {

// Cumulative fraction <= x (the right-limit of the step function).
double cum_at(const Ecdf& e, double x) {
    auto it = std::upper_bound(e.support.begin(), e.support.end(), x);
    if (it == e.support.begin()) return 0.0;
    return e.cum[static_cast<size_t>(it - e.support.begin()) - 1];
}

std::vector<double> merged_support(const Ecdf& a, const Ecdf& b) {
    std::vector<double> xs;
    xs.reserve(a.support.size() + b.support.size());
    std::merge(a.support.begin(), a.support.end(), b.support.begin(), b.support.end(),
               std::back_inserter(xs));
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    return xs;
}

} // namespace

double ks_stat(const Ecdf& a, const Ecdf& b) {
    double best = 0.0;
    for (double x : merged_support(a, b)) best = std::max(best, std::fabs(cum_at(a, x) - cum_at(b, x)));
    return best;
}

double ks_star(const Ecdf& a, const Ecdf& b, double lo, double hi) {
    require(hi > lo, "ks_star domain has zero width");
    require(lo <= a.support.front() && lo <= b.support.front() && hi >= a.support.back() &&
                hi >= b.support.back(),
            "ks_star domain does not cover both supports");
    // |F1 - F2| is constant between consecutive partition points; sum the
    // rectangles exactly.
    std::vector<double> xs = merged_support(a, b);
    double area = 0.0;
    double prev = lo;
    double ca = 0.0, cb = 0.0; // both CDFs are 0 left of their first support
    for (double x : xs) {
        if (x > prev) area += (x - prev) * std::fabs(ca - cb);
        ca = cum_at(a, x);
        cb = cum_at(b, x);
        prev = std::max(prev, x);
    }
    if (hi > prev) area += (hi - prev) * std::fabs(ca - cb);
    return area;
}

std::vector<std::string> ScreenReport::kept() const {
    std::vector<std::string> out;
    for (const auto& r : rows)
        if (!r.drop) out.push_back(r.feature);
    return out;
}

std::vector<std::string> ScreenReport::dropped() const {
    std::vector<std::string> out;
    for (const auto& r : rows)
        if (r.drop) out.push_back(r.feature);
    return out;
}

namespace {

FeatureScreenRow screen_feature(const std::string& name, std::span<const double> a,
                                std::span<const double> b, double threshold, bool degenerate) {
    FeatureScreenRow row;
    row.feature = name;
    if (degenerate) {
        row.drop = true;
        return row;
    }
    Ecdf ea = make_ecdf(a);
    Ecdf eb = make_ecdf(b);
    double lo = std::min({0.0, ea.support.front(), eb.support.front()});
    double hi = std::max({1.0, ea.support.back(), eb.support.back()});
    row.ks = ks_stat(ea, eb);
    row.ks_star = ks_star(ea, eb, lo, hi);
    row.drop = row.ks_star > threshold;
    return row;
}

ScreenReport screen_pair(const TimeSeriesDataset& a, const TimeSeriesDataset& b, double threshold,
                         ScreenMode mode) {
    ScreenReport rep;
    rep.threshold = threshold;
    rep.mode = mode;
    for (size_t f = 0; f < a.feature_count(); ++f) {
        bool degenerate = a.meta[f].degenerate;
        rep.rows.push_back(screen_feature(a.meta[f].name, a.column(f), b.column(f), threshold,
                                          degenerate));
    }
    return rep;
}

} // namespace

ScreenReport screen(const TimeSeriesDataset& train, const TimeSeriesDataset* test,
                    double threshold, ScreenMode mode, size_t periodic_every) {
    require(threshold >= 0.0, "screen threshold must be non-negative");
    Anchors anch = anchors_of(train);
    TimeSeriesDataset ntrain = normalize(train, anch);

    switch (mode) {
    case ScreenMode::train_vs_test: {
        require(test != nullptr, "train_vs_test mode requires a test dataset");
        TimeSeriesDataset ntest = normalize(*test, anch);
        return screen_pair(ntrain, ntest, threshold, mode);
    }
    case ScreenMode::split_half: {
        size_t half = ntrain.records() / 2;
        require(half >= 1 && ntrain.records() - half >= 1, "dataset too small to split");
        TimeSeriesDataset first = ntrain.slice_records(0, half);
        TimeSeriesDataset second = ntrain.slice_records(half, ntrain.records());
        return screen_pair(first, second, threshold, mode);
    }
    case ScreenMode::periodic: {
        require(test != nullptr, "periodic mode requires the monitored stream");
        TimeSeriesDataset ntest = normalize(*test, anch);
        size_t every = periodic_every > 0 ? periodic_every : std::max<size_t>(1, ntest.records() / 4);
        ScreenReport last;
        std::vector<int> prev_verdict(ntrain.feature_count(), -1);
        std::vector<bool> flipped(ntrain.feature_count(), false);
        for (size_t begin = 0; begin < ntest.records(); begin += every) {
            size_t end = std::min(begin + every, ntest.records());
            if (end - begin < 2) break;
            TimeSeriesDataset window = ntest.slice_records(begin, end);
            last = screen_pair(ntrain, window, threshold, mode);
            for (size_t f = 0; f < last.rows.size(); ++f) {
                int v = last.rows[f].drop ? 1 : 0;
                if (prev_verdict[f] >= 0 && v != prev_verdict[f]) flipped[f] = true;
                prev_verdict[f] = v;
            }
        }
        require(!last.rows.empty(), "periodic screening produced no windows");
        for (size_t f = 0; f < flipped.size(); ++f)
            if (flipped[f]) last.flipped.push_back(ntrain.meta[f].name);
        last.retrain_recommended = !last.flipped.empty();
        return last;
    }
    }
    throw Error("unreachable");
}

void write_screen_csv(const ScreenReport& report, const std::string& path) {
    std::ofstream out(path);
    require(out.good(), "cannot write file: " + path);
    out << "feature,ks,ks_star,verdict\n";
    for (const auto& r : report.rows)
        out << r.feature << ',' << r.ks << ',' << r.ks_star << ',' << (r.drop ? "drop" : "keep")
            << '\n';
}

} // namespace icsd
