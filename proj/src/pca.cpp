#include "icsd/pca.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace icsd {

using EMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

PcaModel fit_pca(const Matrix& train, size_t n_components) {
    const size_t T = train.rows, F = train.cols;
    size_t C = n_components == 0 ? F / 2 : n_components;
    require(C >= 1, "n_components must be >= 1 (got F/2 default of 0 for F=1?)");
    require(C <= F, "n_components exceeds feature count");
    require(T > C, "need more training rows than components");

    PcaModel model;
    model.mean.resize(F);
    Eigen::Map<const EMatrix> data(train.data.data(), T, F);
    Eigen::RowVectorXd mean = data.colwise().mean();
    for (size_t f = 0; f < F; ++f) model.mean[f] = mean(static_cast<Eigen::Index>(f));

    EMatrix centered = data.rowwise() - mean;
    Eigen::BDCSVD<EMatrix> svd(centered, Eigen::ComputeThinV);
    const auto& V = svd.matrixV(); // F x min(T,F), columns = right singular vectors
    const auto& S = svd.singularValues();

    model.components = Matrix(C, F);
    model.singular_values.resize(C);
    for (size_t c = 0; c < C; ++c) {
        model.singular_values[c] = S(static_cast<Eigen::Index>(c));
        // deterministic sign: largest-magnitude entry positive
        Eigen::Index arg = 0;
        V.col(static_cast<Eigen::Index>(c)).cwiseAbs().maxCoeff(&arg);
        double sign = V(arg, static_cast<Eigen::Index>(c)) < 0.0 ? -1.0 : 1.0;
        for (size_t f = 0; f < F; ++f)
            model.components.at(c, f) = sign * V(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(c));
    }
    return model;
}

Matrix pca_reconstruct(const PcaModel& model, const Matrix& x) {
    const size_t F = model.dim(), C = model.n_components();
    require(x.cols == F, "input feature count does not match model");
    Matrix out(x.rows, F);
    Eigen::Map<const EMatrix> in(x.data.data(), x.rows, F);
    Eigen::Map<const EMatrix> comp(model.components.data.data(), C, F);
    Eigen::Map<const Eigen::RowVectorXd> mean(model.mean.data(), F);
    Eigen::Map<EMatrix> res(out.data.data(), x.rows, F);
    res = ((in.rowwise() - mean) * comp.transpose()) * comp;
    res.rowwise() += mean;
    return out;
}

WindowedPcaModel fit_windowed(const Matrix& train, size_t width, bool overlapping,
                              size_t n_components) {
    require(width >= 1, "window width must be >= 1");
    require(train.rows >= width, "fewer training rows than the window width");
    const size_t T = train.rows, F = train.cols;
    const size_t stride = overlapping ? 1 : width;
    const size_t n = (T - width) / stride + 1;
    Matrix flat(n, width * F);
    for (size_t w = 0; w < n; ++w)
        for (size_t i = 0; i < width; ++i)
            for (size_t f = 0; f < F; ++f)
                flat.at(w, i * F + f) = train.at(w * stride + i, f);
    WindowedPcaModel model;
    model.width = width;
    model.overlapping = overlapping;
    model.feature_dim = F;
    model.inner = fit_pca(flat, n_components == 0 ? (width * F) / 2 : n_components);
    return model;
}

namespace {

// Reconstruct a block of full windows starting at the given rows and
// scatter-average into the output.
void window_pass(const WindowedPcaModel& model, const Matrix& x, const std::vector<size_t>& starts,
                 Matrix& sum, std::vector<double>& weight) {
    const size_t W = model.width, F = model.feature_dim;
    Matrix flat(starts.size(), W * F);
    for (size_t w = 0; w < starts.size(); ++w)
        for (size_t i = 0; i < W; ++i)
            for (size_t f = 0; f < F; ++f) flat.at(w, i * F + f) = x.at(starts[w] + i, f);
    Matrix rec = pca_reconstruct(model.inner, flat);
    for (size_t w = 0; w < starts.size(); ++w)
        for (size_t i = 0; i < W; ++i) {
            size_t t = starts[w] + i;
            weight[t] += 1.0;
            for (size_t f = 0; f < F; ++f) sum.at(t, f) += rec.at(w, i * F + f);
        }
}

} // namespace

Matrix windowed_reconstruct(const WindowedPcaModel& model, const Matrix& x) {
    const size_t W = model.width, F = model.feature_dim;
    require(x.cols == F, "input feature count does not match model");
    const size_t T = x.rows;
    if (W == 1) return pca_reconstruct(model.inner, x);

    Matrix sum(T, F);
    std::vector<double> weight(T, 0.0);

    std::vector<size_t> starts;
    if (model.overlapping) {
        for (size_t s = 0; s + W <= T; ++s) starts.push_back(s);
    } else {
        for (size_t s = 0; s + W <= T; s += W) starts.push_back(s);
    }
    if (!starts.empty()) window_pass(model, x, starts, sum, weight);

    // Rows not covered by a full window (short input, or the tail in
    // non-overlapping mode): pad by repeating the last row, reconstruct,
    // keep only the real rows.
    size_t covered = starts.empty() ? 0 : starts.back() + W;
    if (covered < T) {
        size_t tail_start = T >= W ? T - W : 0;
        size_t real = T - tail_start; // <= W
        Matrix flat(1, W * F);
        for (size_t i = 0; i < W; ++i) {
            size_t t = std::min(tail_start + i, T - 1);
            for (size_t f = 0; f < F; ++f) flat.at(0, i * F + f) = x.at(t, f);
        }
        Matrix rec = pca_reconstruct(model.inner, flat);
        for (size_t i = 0; i < real; ++i) {
            size_t t = tail_start + i;
            if (t < covered) continue;
            weight[t] += 1.0;
            for (size_t f = 0; f < F; ++f) sum.at(t, f) += rec.at(0, i * F + f);
        }
    }

    Matrix out(T, F);
    for (size_t t = 0; t < T; ++t) {
        require(weight[t] > 0.0, "window reconstruction left a row uncovered");
        for (size_t f = 0; f < F; ++f) out.at(t, f) = sum.at(t, f) / weight[t];
    }
    return out;
}

void save_pca(const PcaModel& model, const std::string& path) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["type"] = "pca";
    j["mean"] = model.mean;
    j["components"] = model.components.data;
    j["n_components"] = model.n_components();
    j["dim"] = model.dim();
    j["singular_values"] = model.singular_values;
    std::ofstream out(path);
    require(out.good(), "cannot write file: " + path);
    out << j.dump(2) << '\n';
}

PcaModel load_pca(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open file: " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    require(j.at("format_version") == 1 && j.at("type") == "pca", "not a pca model file: " + path);
    PcaModel model;
    model.mean = j.at("mean").get<std::vector<double>>();
    size_t C = j.at("n_components"), F = j.at("dim");
    model.components = Matrix(C, F);
    model.components.data = j.at("components").get<std::vector<double>>();
    require(model.components.data.size() == C * F, "component buffer has wrong size");
    model.singular_values = j.at("singular_values").get<std::vector<double>>();
    require(model.mean.size() == F, "mean has wrong size");
    return model;
}

} // namespace icsd
