// Test-only reference implementations, kept independent of the library's
// computation paths on purpose: brute-force DFT, dense trapezoidal
// integration of |F1 - F2|, a Jacobi eigensolver for the PCA oracle, and a
// central finite-difference gradient checker.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "icsd/common.hpp"
#include "icsd/screen.hpp"

namespace oracle {

inline std::vector<std::complex<double>> naive_dft(const std::vector<double>& x) {
    const size_t n = x.size();
    std::vector<std::complex<double>> out(n);
    for (size_t k = 0; k < n; ++k) {
        std::complex<double> acc(0.0, 0.0);
        for (size_t i = 0; i < n; ++i) {
            double ang = -2.0 * M_PI * static_cast<double>(i) * static_cast<double>(k) /
                         static_cast<double>(n);
            acc += x[i] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        out[k] = acc;
    }
    return out;
}

// F(x) under the strict convention, directly from the raw sample.
inline double ecdf_below(const std::vector<double>& sample, double x) {
    size_t c = 0;
    for (double v : sample)
        if (v < x) ++c;
    return static_cast<double>(c) / static_cast<double>(sample.size());
}

inline double trapezoid_ks_star(const std::vector<double>& a, const std::vector<double>& b,
                                double lo, double hi, size_t points) {
    double sum = 0.0;
    double prev = std::fabs(ecdf_below(a, lo) - ecdf_below(b, lo));
    const double h = (hi - lo) / static_cast<double>(points - 1);
    for (size_t i = 1; i < points; ++i) {
        double x = lo + h * static_cast<double>(i);
        double cur = std::fabs(ecdf_below(a, x) - ecdf_below(b, x));
        sum += 0.5 * (prev + cur) * h;
        prev = cur;
    }
    return sum;
}

// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations; an
// algebraic route independent of the SVD used in the library.
struct EigenResult {
    std::vector<double> values;              // descending
    std::vector<std::vector<double>> vectors; // vectors[i] pairs with values[i]
};

inline EigenResult jacobi_eigen(std::vector<std::vector<double>> a) {
    const size_t n = a.size();
    std::vector<std::vector<double>> v(n, std::vector<double>(n, 0.0));
    for (size_t i = 0; i < n; ++i) v[i][i] = 1.0;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (size_t p = 0; p < n; ++p)
            for (size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
        if (off < 1e-24) break;
        for (size_t p = 0; p < n; ++p)
            for (size_t q = p + 1; q < n; ++q) {
                if (std::fabs(a[p][q]) < 1e-18) continue;
                double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (size_t i = 0; i < n; ++i) {
                    double aip = a[i][p], aiq = a[i][q];
                    a[i][p] = c * aip - s * aiq;
                    a[i][q] = s * aip + c * aiq;
                }
                for (size_t i = 0; i < n; ++i) {
                    double api = a[p][i], aqi = a[q][i];
                    a[p][i] = c * api - s * aqi;
                    a[q][i] = s * api + c * aqi;
                }
                for (size_t i = 0; i < n; ++i) {
                    double vip = v[i][p], viq = v[i][q];
                    v[i][p] = c * vip - s * viq;
                    v[i][q] = s * vip + c * viq;
                }
            }
    }
    EigenResult r;
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t x, size_t y) { return a[x][x] > a[y][y]; });
    for (size_t i : order) {
        r.values.push_back(a[i][i]);
        std::vector<double> vec(n);
        for (size_t j = 0; j < n; ++j) vec[j] = v[j][i];
        r.vectors.push_back(vec);
    }
    return r;
}

// Truncated-SVD reconstruction through the covariance eigenbasis.
inline icsd::Matrix svd_truncate_reconstruct(const icsd::Matrix& train, const icsd::Matrix& x,
                                             size_t C) {
    const size_t T = train.rows, F = train.cols;
    std::vector<double> mean(F, 0.0);
    for (size_t t = 0; t < T; ++t)
        for (size_t f = 0; f < F; ++f) mean[f] += train.at(t, f);
    for (double& m : mean) m /= static_cast<double>(T);
    std::vector<std::vector<double>> cov(F, std::vector<double>(F, 0.0));
    for (size_t t = 0; t < T; ++t)
        for (size_t i = 0; i < F; ++i)
            for (size_t j = 0; j < F; ++j)
                cov[i][j] += (train.at(t, i) - mean[i]) * (train.at(t, j) - mean[j]);
    EigenResult eig = jacobi_eigen(cov);
    icsd::Matrix out(x.rows, F);
    for (size_t r = 0; r < x.rows; ++r) {
        for (size_t f = 0; f < F; ++f) out.at(r, f) = mean[f];
        for (size_t c = 0; c < C; ++c) {
            double dot = 0.0;
            for (size_t f = 0; f < F; ++f) dot += (x.at(r, f) - mean[f]) * eig.vectors[c][f];
            for (size_t f = 0; f < F; ++f) out.at(r, f) += dot * eig.vectors[c][f];
        }
    }
    return out;
}

// Central finite differences of a scalar function of a flat parameter
// vector; returns max relative error against the supplied analytic gradient.
inline double gradient_rel_error(const std::function<double(const std::vector<double>&)>& f,
                                 std::vector<double> x, const std::vector<double>& analytic,
                                 double eps = 1e-5) {
    double worst = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        double keep = x[i];
        x[i] = keep + eps;
        double hi = f(x);
        x[i] = keep - eps;
        double lo = f(x);
        x[i] = keep;
        double numeric = (hi - lo) / (2.0 * eps);
        double denom = std::max({std::fabs(numeric), std::fabs(analytic[i]), 1e-6});
        worst = std::max(worst, std::fabs(numeric - analytic[i]) / denom);
    }
    return worst;
}

} // namespace oracle
