#include "icsd/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace icsd {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

bool parse_double(const std::string& s, double& out) {
    const char* b = s.data();
    const char* e = b + s.size();
    auto res = std::from_chars(b, e, out);
    return res.ec == std::errc() && res.ptr == e;
}

// Days since 1970-01-01 for a civil date (Howard Hinnant's algorithm);
// avoids timezone-dependent mktime. No time-zone handling by design.
int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    int64_t era = (y >= 0 ? y : y - 399) / 400;
    int64_t yoe = y - era * 400;
    int64_t doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    int64_t doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + doe - 719468;
}

// Accepts integer seconds, "YYYY-MM-DD HH:MM:SS" or "YYYY-MM-DDTHH:MM:SS".
bool parse_timestamp(const std::string& raw, int64_t& out) {
    std::string s = trim(raw);
    if (s.empty()) return false;
    {
        int64_t v = 0;
        auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec == std::errc() && res.ptr == s.data() + s.size()) {
            out = v;
            return true;
        }
    }
    int y, mo, d, h, mi;
    double sec;
    char sep;
    if (std::sscanf(s.c_str(), "%d-%d-%d%c%d:%d:%lf", &y, &mo, &d, &sep, &h, &mi, &sec) == 7 &&
        (sep == ' ' || sep == 'T')) {
        out = days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + static_cast<int64_t>(sec);
        return true;
    }
    if (std::sscanf(s.c_str(), "%d-%d-%d", &y, &mo, &d) == 3) {
        out = days_from_civil(y, mo, d) * 86400;
        return true;
    }
    return false;
}

bool parse_label(const std::string& raw, uint8_t& out) {
    std::string s = trim(raw);
    if (s == "Normal" || s == "0") {
        out = 0;
        return true;
    }
    if (s == "Attack" || s == "1") {
        out = 1;
        return true;
    }
    return false;
}

// Shortest representation that round-trips the double exactly.
void append_double(std::string& out, double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}

} // namespace

int TimeSeriesDataset::feature_index(const std::string& name) const {
    for (size_t f = 0; f < meta.size(); ++f)
        if (meta[f].name == name) return static_cast<int>(f);
    return -1;
}

std::vector<double> TimeSeriesDataset::column(size_t f) const {
    std::vector<double> out(records());
    for (size_t t = 0; t < records(); ++t) out[t] = features.at(t, f);
    return out;
}

TimeSeriesDataset TimeSeriesDataset::select_features(const std::vector<std::string>& names) const {
    std::vector<size_t> idx;
    for (const auto& n : names) {
        int i = feature_index(n);
        require(i >= 0, "unknown feature: " + n);
        idx.push_back(static_cast<size_t>(i));
    }
    TimeSeriesDataset out = *this;
    out.features = Matrix(records(), idx.size());
    out.meta.clear();
    for (size_t j = 0; j < idx.size(); ++j) {
        out.meta.push_back(meta[idx[j]]);
        for (size_t t = 0; t < records(); ++t) out.features.at(t, j) = features.at(t, idx[j]);
    }
    return out;
}

TimeSeriesDataset TimeSeriesDataset::slice_records(size_t begin, size_t end) const {
    require(begin <= end && end <= records(), "slice out of range");
    TimeSeriesDataset out;
    out.meta = meta;
    out.step_seconds = step_seconds;
    out.timestamps.assign(timestamps.begin() + begin, timestamps.begin() + end);
    out.features = Matrix(end - begin, feature_count());
    for (size_t t = begin; t < end; ++t)
        for (size_t f = 0; f < feature_count(); ++f) out.features.at(t - begin, f) = features.at(t, f);
    if (has_labels()) out.labels.assign(labels.begin() + begin, labels.begin() + end);
    return out;
}

TimeSeriesDataset ingest_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    require(in.good(), "cannot open file: " + path);

    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "empty file: " + path);
    auto header = split_csv_line(line);
    for (auto& h : header) h = trim(h);

    int ts_col = -1, label_col = -1;
    std::vector<size_t> feature_cols;
    for (size_t i = 0; i < header.size(); ++i) {
        if (header[i] == schema.timestamp_column)
            ts_col = static_cast<int>(i);
        else if (!schema.label_column.empty() && header[i] == schema.label_column)
            label_col = static_cast<int>(i);
        else
            feature_cols.push_back(i);
    }
    require(ts_col >= 0, "timestamp column '" + schema.timestamp_column + "' not found in " + path);
    require(schema.label_column.empty() || label_col >= 0,
            "label column '" + schema.label_column + "' not found in " + path);
    require(!feature_cols.empty(), "no feature columns in " + path);

    TimeSeriesDataset ds;
    for (size_t i : feature_cols) {
        FeatureMeta m;
        m.name = header[i];
        ds.meta.push_back(m);
    }
    const size_t F = feature_cols.size();
    std::vector<double> values;
    std::vector<uint8_t> labels;
    std::vector<int64_t> stamps;

    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            ++ds.skipped_rows;
            continue;
        }
        int64_t ts;
        if (!parse_timestamp(fields[ts_col], ts)) {
            ++ds.skipped_rows;
            continue;
        }
        std::vector<double> row(F);
        bool ok = true;
        for (size_t j = 0; j < F && ok; ++j) {
            double v;
            ok = parse_double(trim(fields[feature_cols[j]]), v) && std::isfinite(v);
            row[j] = v;
        }
        if (!ok) {
            ++ds.skipped_rows;
            continue;
        }
        uint8_t lab = 0;
        if (label_col >= 0) {
            if (!parse_label(fields[label_col], lab))
                throw ValidationError(path + ":" + std::to_string(lineno) + ": unknown label token '" +
                                      trim(fields[label_col]) + "'");
        }
        if (!stamps.empty() && ts <= stamps.back())
            throw ValidationError(path + ":" + std::to_string(lineno) +
                                  ": timestamps not strictly increasing");
        stamps.push_back(ts);
        values.insert(values.end(), row.begin(), row.end());
        if (label_col >= 0) labels.push_back(lab);
    }

    require(!stamps.empty(), "no valid data rows in " + path);
    const size_t T = stamps.size();
    ds.timestamps = std::move(stamps);
    ds.features.rows = T;
    ds.features.cols = F;
    ds.features.data = std::move(values);
    ds.labels = std::move(labels);

    // Nominal spacing = most common step; gaps (e.g. from skipped rows) are
    // counted, not fatal.
    if (T >= 2) {
        std::map<int64_t, size_t> counts;
        for (size_t t = 1; t < T; ++t) ++counts[ds.timestamps[t] - ds.timestamps[t - 1]];
        size_t best = 0;
        for (const auto& [step, n] : counts) {
            if (n > best) {
                best = n;
                ds.step_seconds = step;
            }
        }
        for (const auto& [step, n] : counts)
            if (step != ds.step_seconds) ds.irregular_gaps += n;
    }

    // Infer binary features from observed values.
    for (size_t f = 0; f < F; ++f) {
        bool binary = true;
        for (size_t t = 0; t < T && binary; ++t) {
            double v = ds.features.at(t, f);
            binary = (v == 0.0 || v == 1.0);
        }
        if (binary) {
            ds.meta[f].kind = FeatureKind::binary;
            ds.meta[f].valid_lo = 0.0;
            ds.meta[f].valid_hi = 1.0;
        }
    }
    return ds;
}

void export_csv(const TimeSeriesDataset& ds, const std::string& path) {
    std::ofstream out(path);
    require(out.good(), "cannot write file: " + path);
    std::string buf = "timestamp";
    for (const auto& m : ds.meta) buf += "," + m.name;
    if (ds.has_labels()) buf += ",label";
    buf += "\n";
    for (size_t t = 0; t < ds.records(); ++t) {
        buf += std::to_string(ds.timestamps[t]);
        for (size_t f = 0; f < ds.feature_count(); ++f) {
            buf += ',';
            append_double(buf, ds.features.at(t, f));
        }
        if (ds.has_labels()) buf += ds.labels[t] ? ",Attack" : ",Normal";
        buf += '\n';
        if (buf.size() > (1u << 20)) {
            out << buf;
            buf.clear();
        }
    }
    out << buf;
    require(out.good(), "write failed: " + path);
}

Anchors anchors_of(const TimeSeriesDataset& ds) {
    Anchors a;
    a.min.resize(ds.feature_count());
    a.max.resize(ds.feature_count());
    for (size_t f = 0; f < ds.feature_count(); ++f) {
        if (ds.meta[f].kind == FeatureKind::binary) {
            a.min[f] = 0.0;
            a.max[f] = 1.0;
            continue;
        }
        double lo = ds.features.at(0, f), hi = lo;
        for (size_t t = 1; t < ds.records(); ++t) {
            double v = ds.features.at(t, f);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        a.min[f] = lo;
        a.max[f] = hi;
    }
    return a;
}

TimeSeriesDataset normalize(const TimeSeriesDataset& ds, const std::optional<Anchors>& anchors) {
    Anchors a = anchors ? *anchors : anchors_of(ds);
    require(a.min.size() == ds.feature_count() && a.max.size() == ds.feature_count(),
            "anchor count does not match feature count");
    TimeSeriesDataset out = ds;
    for (size_t f = 0; f < ds.feature_count(); ++f) {
        double lo = a.min[f], hi = a.max[f];
        require(lo <= hi, "anchor min > max for feature " + ds.meta[f].name);
        out.meta[f].train_min = lo;
        out.meta[f].train_max = hi;
        if (hi == lo) {
            out.meta[f].degenerate = true;
            for (size_t t = 0; t < ds.records(); ++t) out.features.at(t, f) = 0.0;
            continue;
        }
        double inv = 1.0 / (hi - lo);
        for (size_t t = 0; t < ds.records(); ++t)
            out.features.at(t, f) = (ds.features.at(t, f) - lo) * inv;
    }
    return out;
}

TimeSeriesDataset subsample(const TimeSeriesDataset& ds, size_t k, SubsampleMethod method) {
    require(k >= 1, "subsample factor must be >= 1");
    if (k == 1) return ds;
    TimeSeriesDataset out;
    out.meta = ds.meta;
    out.step_seconds = ds.step_seconds * static_cast<int64_t>(k);
    const size_t T = ds.records(), F = ds.feature_count();
    const size_t n = (T + k - 1) / k;
    out.features = Matrix(n, F);
    out.timestamps.resize(n);
    if (ds.has_labels()) out.labels.assign(n, 0);
    for (size_t b = 0; b < n; ++b) {
        size_t lo = b * k;
        size_t hi = std::min(lo + k, T);
        out.timestamps[b] = ds.timestamps[lo];
        if (method == SubsampleMethod::decimate) {
            for (size_t f = 0; f < F; ++f) out.features.at(b, f) = ds.features.at(lo, f);
        } else {
            for (size_t f = 0; f < F; ++f) {
                double sum = 0.0;
                for (size_t t = lo; t < hi; ++t) sum += ds.features.at(t, f);
                out.features.at(b, f) = sum / static_cast<double>(hi - lo);
            }
        }
        if (ds.has_labels()) {
            uint8_t any = 0;
            for (size_t t = lo; t < hi; ++t) any |= ds.labels[t];
            out.labels[b] = any;
        }
    }
    return out;
}

namespace {

SequenceBatch window_impl(const TimeSeriesDataset& ds, size_t l, size_t m, size_t h, size_t stride,
                          bool autoencoder) {
    require(l >= 1 && stride >= 1, "window parameters must be positive");
    require(autoencoder || m >= 1, "output length must be positive");
    SequenceBatch batch;
    batch.input_len = l;
    batch.output_len = autoencoder ? l : m;
    batch.horizon = autoencoder ? 0 : h;
    batch.stride = stride;
    batch.features = ds.feature_count();
    batch.autoencoder = autoencoder;
    const size_t T = ds.records();
    const size_t span = autoencoder ? l : l + h + m;
    if (T < span) return batch; // empty batch; caller decides how to report
    batch.batch = (T - span) / stride + 1;
    const size_t F = batch.features;
    batch.inputs.resize(batch.batch * l * F);
    batch.targets.resize(batch.batch * batch.output_len * F);
    batch.input_start.resize(batch.batch);
    for (size_t b = 0; b < batch.batch; ++b) {
        size_t s = b * stride;
        batch.input_start[b] = s;
        for (size_t i = 0; i < l; ++i)
            for (size_t f = 0; f < F; ++f)
                batch.inputs[(b * l + i) * F + f] = ds.features.at(s + i, f);
        size_t ts = autoencoder ? s : s + l + h;
        for (size_t i = 0; i < batch.output_len; ++i)
            for (size_t f = 0; f < F; ++f)
                batch.targets[(b * batch.output_len + i) * F + f] = ds.features.at(ts + i, f);
    }
    return batch;
}

} // namespace

SequenceBatch make_sequences(const TimeSeriesDataset& ds, size_t l, size_t m, size_t h,
                             size_t stride) {
    return window_impl(ds, l, m, h, stride, false);
}

SequenceBatch make_autoencoder_sequences(const TimeSeriesDataset& ds, size_t l, size_t stride) {
    return window_impl(ds, l, 0, 0, stride, true);
}

} // namespace icsd
