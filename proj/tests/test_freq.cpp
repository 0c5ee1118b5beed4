#include <doctest.h>

#include <cmath>

#include "icsd/freq.hpp"
#include "oracles.hpp"

using namespace icsd;

namespace {

std::vector<double> tone(size_t n, double cycles_per_n, double amp = 1.0, double dc = 0.0) {
    std::vector<double> s(n);
    for (size_t i = 0; i < n; ++i)
        s[i] = dc + amp * std::cos(2.0 * M_PI * cycles_per_n * static_cast<double>(i) /
                                   static_cast<double>(n));
    return s;
}

TimeSeriesDataset dataset_from_columns(const std::vector<std::vector<double>>& cols) {
    TimeSeriesDataset ds;
    const size_t T = cols[0].size();
    ds.features = Matrix(T, cols.size());
    for (size_t f = 0; f < cols.size(); ++f)
        for (size_t t = 0; t < T; ++t) ds.features.at(t, f) = cols[f][t];
    for (size_t f = 0; f < cols.size(); ++f) {
        FeatureMeta m;
        m.name = "f" + std::to_string(f);
        ds.meta.push_back(m);
    }
    for (size_t t = 0; t < T; ++t) ds.timestamps.push_back(static_cast<int64_t>(t));
    ds.step_seconds = 1;
    return ds;
}

} // namespace

TEST_CASE("dft matches the naive quadratic oracle, all lengths") {
    Rng rng(3);
    for (size_t n : {size_t{16}, size_t{64}, size_t{128}, size_t{36}, size_t{100}, size_t{17}}) {
        std::vector<double> x(n);
        for (double& v : x) v = rng.uniform(-1.0, 1.0);
        auto fast = dft(x);
        auto slow = oracle::naive_dft(x);
        for (size_t k = 0; k < n; ++k) {
            CHECK(std::fabs(fast[k].real() - slow[k].real()) < 1e-9);
            CHECK(std::fabs(fast[k].imag() - slow[k].imag()) < 1e-9);
        }
    }
}

TEST_CASE("constant signal concentrates all energy at DC") {
    std::vector<double> x(32, 3.5);
    auto spec = dft(x);
    CHECK(std::abs(spec[0]) == doctest::Approx(32.0 * 3.5));
    for (size_t k = 1; k < 32; ++k) CHECK(std::abs(spec[k]) < 1e-9);
}

TEST_CASE("single tone peaks at its bin") {
    auto x = tone(64, 10.0);
    auto mags = half_magnitudes(x);
    size_t best = 0;
    for (size_t k = 1; k < mags.size(); ++k)
        if (mags[k] > mags[best]) best = k;
    CHECK(best == 10);
}

TEST_CASE("frequency analysis finds the fundamental and its period") {
    // sin(2*pi*0.1t) at 1 Hz for 200 s -> 0.1 Hz, 10-sample period
    std::vector<double> s(200);
    for (size_t i = 0; i < 200; ++i) s[i] = std::sin(2.0 * M_PI * 0.1 * static_cast<double>(i));
    auto p = frequency_analysis(s, 1.0);
    CHECK(p.fundamental_freq == doctest::Approx(0.1));
    CHECK(p.period_samples == doctest::Approx(10.0));

    // DC-dominated signal: constant component ignored, tone still found
    auto with_dc = tone(128, 4.0, 0.3, 10.0);
    auto p2 = frequency_analysis(with_dc, 1.0);
    CHECK(p2.period_samples == doctest::Approx(32.0));

    // daily cycle at hourly sampling: period 24 samples
    std::vector<double> daily(24 * 30);
    for (size_t i = 0; i < daily.size(); ++i)
        daily[i] = 5.0 + std::sin(2.0 * M_PI * static_cast<double>(i) / 24.0);
    auto p3 = frequency_analysis(daily, 3600.0);
    CHECK(p3.period_samples == doctest::Approx(24.0));
    CHECK(p3.fundamental_freq == doctest::Approx(1.0 / (24.0 * 3600.0)));
}

TEST_CASE("pure DC raises DegenerateSpectrum") {
    std::vector<double> flat(64, 2.0);
    CHECK_THROWS_AS(frequency_analysis(flat, 1.0), DegenerateSpectrum);
    std::vector<double> zeros(64, 0.0);
    CHECK_THROWS_AS(frequency_analysis(zeros, 1.0), DegenerateSpectrum);
}

TEST_CASE("spectrogram windows satisfy Parseval per window") {
    Rng rng(7);
    std::vector<double> x(300);
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
    for (StftTaper taper : {StftTaper::rectangular, StftTaper::hann}) {
        const size_t window = 37, step = 5;
        Matrix spect = band_spectrogram(x, window, step, taper);
        std::vector<double> w(window, 1.0);
        if (taper == StftTaper::hann)
            for (size_t i = 0; i < window; ++i)
                w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i) /
                                            static_cast<double>(window - 1));
        for (size_t row = 0; row < spect.rows; ++row) {
            double band_total = 0.0;
            for (size_t b = 0; b < spect.cols; ++b) band_total += spect.at(row, b);
            double time_energy = 0.0;
            for (size_t i = 0; i < window; ++i) {
                double v = x[row * step + i] * w[i];
                time_energy += v * v;
            }
            CHECK(band_total == doctest::Approx(time_energy).epsilon(1e-6));
        }
    }
}

TEST_CASE("stationary tone gives constant band energies across windows") {
    // a window spanning whole periods sees the same energy at every offset
    auto x = tone(400, 50.0); // period 8 samples
    auto bs = frequency_transform(x, 1.0, 2.0, 2, 2);
    CHECK(bs.stft_window == 16); // 2 * 8
    for (size_t w = 1; w < bs.energy.rows; ++w)
        for (size_t b = 0; b < bs.energy.cols; ++b)
            CHECK(bs.energy.at(w, b) == doctest::Approx(bs.energy.at(0, b)).epsilon(1e-6));
}

TEST_CASE("frequency doubling moves energy to a higher band") {
    // tone at period 16 switching to period 8 mid-signal
    std::vector<double> x(800);
    for (size_t i = 0; i < 400; ++i) x[i] = std::cos(2.0 * M_PI * static_cast<double>(i) / 16.0);
    for (size_t i = 400; i < 800; ++i) x[i] = std::cos(2.0 * M_PI * static_cast<double>(i) / 8.0);
    const size_t window = 32, step = 4;
    Matrix spect = band_spectrogram(x, window, step, StftTaper::rectangular);
    // one-sided bins: 17; period-16 tone -> bin 2 -> band floor(2*10/17)=1,
    // period-8 tone -> bin 4 -> band floor(4*10/17)=2
    size_t early = 10, late = spect.rows - 10;
    CHECK(spect.at(early, 1) > 10.0 * spect.at(early, 2));
    CHECK(spect.at(late, 2) > 10.0 * spect.at(late, 1));
    // verify against the naive DFT of those windows
    for (size_t row : {early, late}) {
        std::vector<double> win(x.begin() + static_cast<long>(row * step),
                                x.begin() + static_cast<long>(row * step + window));
        auto slow = oracle::naive_dft(win);
        std::vector<double> bands(10, 0.0);
        for (size_t k = 0; k < window / 2 + 1; ++k) {
            double e = std::norm(slow[k]) / static_cast<double>(window);
            if (k != 0 && k != window / 2) e *= 2.0;
            bands[std::min<size_t>(9, k * 10 / (window / 2 + 1))] += e;
        }
        for (size_t b = 0; b < 10; ++b)
            CHECK(spect.at(row, b) == doctest::Approx(bands[b]).epsilon(1e-9));
    }
}

TEST_CASE("band selection is deterministic") {
    std::vector<double> x(512);
    for (size_t i = 0; i < 512; ++i) {
        double t = static_cast<double>(i);
        x[i] = std::cos(2.0 * M_PI * t / 8.0) + std::cos(2.0 * M_PI * t / 4.0);
    }
    auto a = frequency_transform(x, 1.0, 2.0, 1, 2);
    auto b = frequency_transform(x, 1.0, 2.0, 1, 2);
    CHECK(a.band_ids == b.band_ids);
}

TEST_CASE("transform_dataset maps features to band columns with OR labels") {
    auto c0 = tone(600, 600.0 / 12.0, 1.0, 2.0); // period 12
    auto c1 = tone(600, 600.0 / 10.0, 2.0, 5.0); // period 10
    auto ds = dataset_from_columns({c0, c1});
    ds.labels.assign(600, 0);
    for (size_t t = 100; t < 140; ++t) ds.labels[t] = 1;

    auto out = transform_dataset(ds, 1.5, 2, 2);
    CHECK(out.feature_count() == 4);
    CHECK(out.meta[0].name.rfind("f0/band", 0) == 0);
    CHECK(out.meta[2].name.rfind("f1/band", 0) == 0);
    // chronological ordering and window count
    auto t2 = fit_spectral_transform(ds, 1.5, 2, 2);
    CHECK(out.records() == (600 - t2.window) / 2 + 1);
    for (size_t w = 1; w < out.records(); ++w)
        CHECK(out.timestamps[w] > out.timestamps[w - 1]);
    // any attack record inside the window labels the window
    bool found_attack_window = false;
    for (size_t w = 0; w < out.records(); ++w) {
        size_t begin = w * 2, end = begin + t2.window;
        bool any = false;
        for (size_t t = begin; t < end; ++t) any |= ds.labels[t] != 0;
        CHECK(static_cast<bool>(out.labels[w]) == any);
        found_attack_window |= any;
    }
    CHECK(found_attack_window);
}

TEST_CASE("degenerate features are excluded; all-degenerate gives an empty dataset") {
    std::vector<double> flat(300, 1.0);
    auto c1 = tone(300, 30.0);
    auto mixed = dataset_from_columns({flat, c1});
    auto t = fit_spectral_transform(mixed, 1.5, 2, 2);
    CHECK(t.excluded == std::vector<std::string>{"f0"});
    CHECK(t.accepted == std::vector<size_t>{1});

    auto all_flat = dataset_from_columns({flat, flat});
    auto t2 = fit_spectral_transform(all_flat, 1.5, 2, 2);
    CHECK(t2.accepted.empty());
    auto empty = t2.apply(all_flat);
    CHECK(empty.records() == 0);
    CHECK(empty.feature_count() == 0);
}

TEST_CASE("fitted transform applies to fresh data with the same columns") {
    auto train = dataset_from_columns({tone(600, 50.0, 1.0, 3.0)});
    auto test = dataset_from_columns({tone(400, 400.0 / 12.0, 1.0, 3.0)});
    auto t = fit_spectral_transform(train, 1.5, 2, 2);
    auto out_train = t.apply(train);
    auto out_test = t.apply(test);
    CHECK(out_train.feature_count() == out_test.feature_count());
    CHECK(out_train.meta[0].name == out_test.meta[0].name);

    save_spectral_transform(t, {"f0"}, "/tmp/icsd_test_spectral.json");
    auto back = load_spectral_transform(test, "/tmp/icsd_test_spectral.json");
    CHECK(back.window == t.window);
    CHECK(back.bands == t.bands);
}

TEST_CASE("window longer than the signal is an error") {
    auto x = tone(20, 2.0);
    CHECK_THROWS(frequency_transform(x, 1.0, 3.0, 2, 2));
}
