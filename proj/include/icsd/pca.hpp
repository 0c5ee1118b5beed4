#pragma once

#include <string>
#include <vector>

#include "icsd/common.hpp"

namespace icsd {

/// Principal components of a training matrix, for reconstruction in the
/// original feature space.
struct PcaModel {
    std::vector<double> mean;      // length F
    Matrix components;             // C x F, rows orthonormal, descending variance
    std::vector<double> singular_values;

    size_t dim() const { return mean.size(); }
    size_t n_components() const { return components.rows; }
};

/// SVD of the centered data; n_components == 0 selects the default
/// floor(F/2). Components carry a deterministic sign (largest-magnitude
/// entry positive).
PcaModel fit_pca(const Matrix& train, size_t n_components = 0);

/// x_hat = (x - mean) * components^T * components + mean.
Matrix pca_reconstruct(const PcaModel& model, const Matrix& x);

/// PCA over flattened time windows of the input, capturing temporal
/// correlations that single-row PCA misses.
struct WindowedPcaModel {
    PcaModel inner;      // operates on W*F-dimensional window vectors
    size_t width = 1;    // W
    bool overlapping = true;
    size_t feature_dim = 0; // F of the original data
};

WindowedPcaModel fit_windowed(const Matrix& train, size_t width, bool overlapping,
                              size_t n_components = 0);

/// Reconstructs each window through the inner model and restores the
/// original signal shape: overlapping windows average their per-row
/// reconstructions; non-overlapping windows tile, with a trailing remainder
/// padded by repeating the last row and truncated after reconstruction.
Matrix windowed_reconstruct(const WindowedPcaModel& model, const Matrix& x);

void save_pca(const PcaModel& model, const std::string& path);
PcaModel load_pca(const std::string& path);

} // namespace icsd
