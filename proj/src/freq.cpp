#include "icsd/freq.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

namespace icsd {

namespace {

using cplx = std::complex<double>;

bool is_pow2(size_t n) { return n > 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 Cooley-Tukey; inverse scales by 1/N.
void fft_pow2(std::vector<cplx>& a, bool inverse) {
    const size_t n = a.size();
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        double ang = 2.0 * M_PI / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
        cplx wlen(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            cplx w(1.0, 0.0);
            for (size_t j = 0; j < len / 2; ++j) {
                cplx u = a[i + j];
                cplx v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse)
        for (cplx& x : a) x /= static_cast<double>(n);
}

// Bluestein's chirp-z transform: DFT of arbitrary length via a power-of-2
// convolution.
std::vector<cplx> fft_bluestein(const std::vector<cplx>& in) {
    const size_t n = in.size();
    size_t m = 1;
    while (m < 2 * n - 1) m <<= 1;
    std::vector<cplx> chirp(n);
    for (size_t k = 0; k < n; ++k) {
        // k^2 mod 2n keeps the angle argument small
        uint64_t k2 = (static_cast<uint64_t>(k) * k) % (2 * n);
        double ang = M_PI * static_cast<double>(k2) / static_cast<double>(n);
        chirp[k] = cplx(std::cos(ang), -std::sin(ang));
    }
    std::vector<cplx> a(m, cplx(0, 0)), b(m, cplx(0, 0));
    for (size_t k = 0; k < n; ++k) a[k] = in[k] * chirp[k];
    b[0] = std::conj(chirp[0]);
    for (size_t k = 1; k < n; ++k) b[k] = b[m - k] = std::conj(chirp[k]);
    fft_pow2(a, false);
    fft_pow2(b, false);
    for (size_t i = 0; i < m; ++i) a[i] *= b[i];
    fft_pow2(a, true);
    std::vector<cplx> out(n);
    for (size_t k = 0; k < n; ++k) out[k] = a[k] * chirp[k];
    return out;
}

} // namespace

std::vector<cplx> dft(std::span<const double> signal) {
    require(signal.size() >= 2, "dft needs at least 2 samples");
    std::vector<cplx> a(signal.begin(), signal.end());
    if (is_pow2(a.size())) {
        fft_pow2(a, false);
        return a;
    }
    return fft_bluestein(a);
}

std::vector<double> half_magnitudes(std::span<const double> signal) {
    auto spec = dft(signal);
    const size_t n = signal.size();
    const size_t half = std::max<size_t>(1, n / 2);
    std::vector<double> mags(half);
    for (size_t k = 0; k < half; ++k) mags[k] = std::abs(spec[k]) / static_cast<double>(n);
    return mags;
}

SpectralProfile frequency_analysis(std::span<const double> signal, double sampling_period) {
    require(signal.size() >= 4, "frequency analysis needs at least 4 samples");
    require(sampling_period > 0.0, "sampling period must be positive");
    std::vector<double> mags = half_magnitudes(signal);
    // Dominant non-DC bin; the constant component is ignored when it leads.
    size_t best = 0;
    for (size_t k = 1; k < mags.size(); ++k)
        if (mags[k] > mags[best]) best = k;
    if (best == 0) {
        // DC carries the most energy; fall back to the strongest other bin.
        size_t second = 1;
        for (size_t k = 2; k < mags.size(); ++k)
            if (mags[k] > mags[second]) second = k;
        if (mags[second] <= 1e-12 * std::max(mags[0], 1e-300))
            throw DegenerateSpectrum("signal has no dominant non-DC frequency");
        best = second;
    }
    const double n = static_cast<double>(signal.size());
    SpectralProfile p;
    p.fundamental_freq = static_cast<double>(best) / (n * sampling_period);
    p.period_samples = (1.0 / p.fundamental_freq) / sampling_period;
    return p;
}

Matrix band_spectrogram(std::span<const double> signal, size_t window, size_t step,
                        StftTaper taper) {
    require(window >= 2, "stft window must be at least 2 samples");
    require(step >= 1, "stft step must be positive");
    require(window <= signal.size(), "stft window longer than the signal");
    const size_t n_windows = (signal.size() - window) / step + 1;
    const size_t n_freqs = window / 2 + 1; // one-sided, Nyquist included when window is even

    std::vector<double> taper_w(window, 1.0);
    if (taper == StftTaper::hann)
        for (size_t i = 0; i < window; ++i)
            taper_w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i) /
                                              static_cast<double>(window - 1));

    Matrix out(n_windows, kAllFreqBins);
    std::vector<double> buf(window);
    for (size_t w = 0; w < n_windows; ++w) {
        for (size_t i = 0; i < window; ++i) buf[i] = signal[w * step + i] * taper_w[i];
        auto spec = dft(buf);
        for (size_t k = 0; k < n_freqs && k < spec.size(); ++k) {
            // one-sided energy: total over all bins equals the time-domain
            // energy of the tapered window (Parseval)
            double e = std::norm(spec[k]) / static_cast<double>(window);
            bool nyquist = (window % 2 == 0) && (k == window / 2);
            if (k != 0 && !nyquist) e *= 2.0;
            size_t band = std::min<size_t>(kAllFreqBins - 1, k * kAllFreqBins / n_freqs);
            out.at(w, band) += e;
        }
    }
    return out;
}

namespace {

// Total energy per band over the whole signal, bands ranked by energy with
// ties broken toward the lower bin.
std::vector<int> dominant_bands(const Matrix& spectrogram, int b_num) {
    std::vector<double> total(kAllFreqBins, 0.0);
    for (size_t w = 0; w < spectrogram.rows; ++w)
        for (size_t b = 0; b < spectrogram.cols; ++b) total[b] += spectrogram.at(w, b);
    std::vector<int> order(kAllFreqBins);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return total[a] > total[b]; });
    std::vector<int> chosen(order.begin(), order.begin() + b_num);
    std::sort(chosen.begin(), chosen.end()); // fixed bin order in the output
    return chosen;
}

size_t window_from_period(double period_samples, double ratio) {
    double w = period_samples * ratio;
    auto rounded = static_cast<size_t>(std::llround(w));
    return std::max<size_t>(2, rounded);
}

} // namespace

BandSeries frequency_transform(std::span<const double> signal, double sampling_period,
                               double ratio, int b_num, size_t step, StftTaper taper) {
    require(b_num >= 1 && b_num <= kAllFreqBins, "b_num must be in [1,10]");
    require(ratio > 0.0, "window/period ratio must be positive");
    SpectralProfile prof = frequency_analysis(signal, sampling_period);
    size_t window = window_from_period(prof.period_samples, ratio);
    require(window <= signal.size(), "stft window longer than the signal");
    Matrix spect = band_spectrogram(signal, window, step, taper);
    BandSeries out;
    out.stft_window = window;
    out.stft_step = step;
    out.band_ids = dominant_bands(spect, b_num);
    out.energy = Matrix(spect.rows, out.band_ids.size());
    for (size_t w = 0; w < spect.rows; ++w)
        for (size_t j = 0; j < out.band_ids.size(); ++j)
            out.energy.at(w, j) = spect.at(w, out.band_ids[j]);
    return out;
}

SpectralTransform fit_spectral_transform(const TimeSeriesDataset& train, double ratio, int b_num,
                                         size_t step, StftTaper taper, size_t window_override) {
    require(b_num >= 1 && b_num <= kAllFreqBins, "b_num must be in [1,10]");
    SpectralTransform t;
    t.step = step;
    t.b_num = b_num;
    t.taper = taper;
    const double dt = static_cast<double>(std::max<int64_t>(1, train.step_seconds));

    std::vector<double> periods;
    for (size_t f = 0; f < train.feature_count(); ++f) {
        auto col = train.column(f);
        try {
            SpectralProfile p = frequency_analysis(col, dt);
            t.accepted.push_back(f);
            t.profiles.push_back(p);
            periods.push_back(p.period_samples);
        } catch (const DegenerateSpectrum&) {
            t.excluded.push_back(train.meta[f].name);
        }
    }
    if (t.accepted.empty()) {
        t.window = 0;
        return t; // empty transform; apply() yields an empty dataset
    }
    if (window_override > 0) {
        t.window = std::max<size_t>(2, window_override);
    } else {
        std::vector<double> sorted = periods;
        std::sort(sorted.begin(), sorted.end());
        double median = sorted[sorted.size() / 2];
        t.window = window_from_period(median, ratio);
    }
    require(t.window <= train.records(), "stft window longer than the training data");

    for (size_t j = 0; j < t.accepted.size(); ++j) {
        auto col = train.column(t.accepted[j]);
        Matrix spect = band_spectrogram(col, t.window, t.step, t.taper);
        t.bands.push_back(dominant_bands(spect, t.b_num));
    }
    return t;
}

TimeSeriesDataset SpectralTransform::apply(const TimeSeriesDataset& ds) const {
    TimeSeriesDataset out;
    out.step_seconds = ds.step_seconds * static_cast<int64_t>(step);
    if (accepted.empty() || window == 0) return out;
    require(window <= ds.records(), "stft window longer than the dataset");
    const size_t n_windows = (ds.records() - window) / step + 1;
    const size_t cols = accepted.size() * static_cast<size_t>(b_num);
    out.features = Matrix(n_windows, cols);
    out.timestamps.resize(n_windows);
    for (size_t w = 0; w < n_windows; ++w) out.timestamps[w] = ds.timestamps[w * step];

    for (size_t j = 0; j < accepted.size(); ++j) {
        require(accepted[j] < ds.feature_count(), "transform refers to a missing feature");
        auto col = ds.column(accepted[j]);
        Matrix spect = band_spectrogram(col, window, step, taper);
        for (int bi = 0; bi < b_num; ++bi) {
            FeatureMeta m;
            // column -> source feature mapping kept in the name for localization
            m.name = ds.meta[accepted[j]].name + "/band" + std::to_string(bands[j][bi]);
            m.valid_lo = 0.0;
            out.meta.push_back(m);
        }
        for (size_t w = 0; w < n_windows; ++w)
            for (int bi = 0; bi < b_num; ++bi)
                out.features.at(w, j * b_num + bi) = spect.at(w, bands[j][bi]);
    }

    // a window is an attack window when any covered record is labeled
    if (ds.has_labels()) {
        out.labels.assign(n_windows, 0);
        for (size_t w = 0; w < n_windows; ++w) {
            uint8_t any = 0;
            for (size_t i = 0; i < window; ++i) any |= ds.labels[w * step + i];
            out.labels[w] = any;
        }
    }
    return out;
}

TimeSeriesDataset transform_dataset(const TimeSeriesDataset& ds, double ratio, int b_num,
                                    size_t step) {
    return fit_spectral_transform(ds, ratio, b_num, step).apply(ds);
}

void save_spectral_transform(const SpectralTransform& t, const std::vector<std::string>& names,
                             const std::string& path) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["type"] = "spectral_transform";
    j["window"] = t.window;
    j["step"] = t.step;
    j["b_num"] = t.b_num;
    j["taper"] = t.taper == StftTaper::hann ? "hann" : "rectangular";
    nlohmann::json feats = nlohmann::json::array();
    for (size_t i = 0; i < t.accepted.size(); ++i)
        feats.push_back({{"feature", names[t.accepted[i]]},
                         {"fundamental_freq", t.profiles[i].fundamental_freq},
                         {"period_samples", t.profiles[i].period_samples},
                         {"bands", t.bands[i]}});
    j["features"] = feats;
    j["excluded"] = t.excluded;
    std::ofstream out(path);
    require(out.good(), "cannot write file: " + path);
    out << j.dump(2) << '\n';
}

SpectralTransform load_spectral_transform(const TimeSeriesDataset& ds, const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open file: " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    require(j.at("format_version") == 1 && j.at("type") == "spectral_transform",
            "not a spectral transform file: " + path);
    SpectralTransform t;
    t.window = j.at("window");
    t.step = j.at("step");
    t.b_num = j.at("b_num");
    t.taper = j.at("taper") == "hann" ? StftTaper::hann : StftTaper::rectangular;
    for (const auto& f : j.at("features")) {
        int idx = ds.feature_index(f.at("feature"));
        require(idx >= 0, "dataset lacks feature " + f.at("feature").get<std::string>());
        t.accepted.push_back(static_cast<size_t>(idx));
        SpectralProfile p;
        p.fundamental_freq = f.at("fundamental_freq");
        p.period_samples = f.at("period_samples");
        t.profiles.push_back(p);
        t.bands.push_back(f.at("bands").get<std::vector<int>>());
    }
    t.excluded = j.at("excluded").get<std::vector<std::string>>();
    return t;
}

} // namespace icsd
