#pragma once

#include <complex>
#include <span>
#include <string>
#include <vector>

#include "icsd/dataset.hpp"

namespace icsd {

/// A feature whose spectrum has no usable non-DC energy; such features are
/// unsuitable for frequency-domain modeling and get excluded.
class DegenerateSpectrum : public Error {
public:
    using Error::Error;
};

/// Discrete Fourier transform, radix-2 with a Bluestein fallback for
/// arbitrary lengths.
std::vector<std::complex<double>> dft(std::span<const double> signal);

/// |F_k| / N for the real half of the spectrum (k < N/2, at least the DC bin).
std::vector<double> half_magnitudes(std::span<const double> signal);

struct SpectralProfile {
    double fundamental_freq = 0.0; // Hz
    double period_samples = 0.0;   // (1/f) / sampling_period
};

/// Dominant non-DC frequency of the signal. Throws DegenerateSpectrum when
/// no bin carries meaningful energy besides the constant component.
SpectralProfile frequency_analysis(std::span<const double> signal, double sampling_period);

enum class StftTaper { rectangular, hann };

inline constexpr int kAllFreqBins = 10;

/// One feature in the frequency domain: per-STFT-window energy of the b_num
/// globally dominant bands, in ascending band order.
struct BandSeries {
    std::vector<int> band_ids;  // which of the 10 bins each column is
    Matrix energy;              // windows x b_num
    size_t stft_window = 0;
    size_t stft_step = 0;
};

BandSeries frequency_transform(std::span<const double> signal, double sampling_period,
                               double ratio, int b_num, size_t step = 2,
                               StftTaper taper = StftTaper::rectangular);

/// Full one-sided band-energy spectrogram of a signal for a fixed window:
/// windows x kAllFreqBins. Row w covers samples [w*step, w*step + window).
Matrix band_spectrogram(std::span<const double> signal, size_t window, size_t step,
                        StftTaper taper);

/// Frequency transform fitted on training data and reusable on any dataset:
/// a common STFT window plus the per-feature dominant bands, so train and
/// test map into the same columns.
struct SpectralTransform {
    size_t window = 0;
    size_t step = 2;
    int b_num = 2;
    StftTaper taper = StftTaper::rectangular;
    std::vector<size_t> accepted;              // source feature indices
    std::vector<SpectralProfile> profiles;     // per accepted feature
    std::vector<std::vector<int>> bands;       // per accepted feature, ascending
    std::vector<std::string> excluded;         // feature names without a dominant frequency

    TimeSeriesDataset apply(const TimeSeriesDataset& ds) const;
};

/// Analyzes each feature's dominant period, picks the common window
/// (ratio x median period, overridable), and selects each feature's top
/// b_num energy bands.
SpectralTransform fit_spectral_transform(const TimeSeriesDataset& train, double ratio, int b_num,
                                         size_t step = 2, StftTaper taper = StftTaper::rectangular,
                                         size_t window_override = 0);

/// Single-dataset convenience: fit on ds and apply to it.
TimeSeriesDataset transform_dataset(const TimeSeriesDataset& ds, double ratio, int b_num,
                                    size_t step = 2);

void save_spectral_transform(const SpectralTransform& t, const std::vector<std::string>& names,
                             const std::string& path);
SpectralTransform load_spectral_transform(const TimeSeriesDataset& ds, const std::string& path);

} // namespace icsd
