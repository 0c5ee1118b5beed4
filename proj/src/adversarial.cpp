#include "icsd/adversarial.hpp"

#include <algorithm>
#include <cmath>

namespace icsd {

namespace {

// scale/offset so that normalized = raw * scale + offset matches
// normalize_residuals for the given stats
void residual_affine(const ResidualStats& stats, std::vector<double>& scale,
                     std::vector<double>& offset) {
    const size_t F = stats.degenerate.size();
    scale.assign(F, 0.0);
    offset.assign(F, 0.0);
    for (size_t f = 0; f < F; ++f) {
        if (stats.degenerate[f]) continue; // constant channel, unexercisable by gradients
        if (stats.scheme == NormScheme::max_norm) {
            scale[f] = 1.0 / stats.max[f];
        } else {
            scale[f] = 1.0 / stats.stddev[f];
            offset[f] = -stats.mean[f] / stats.stddev[f];
        }
    }
}

} // namespace

WrapperModel::WrapperModel(const nn::UaeModel& model, const ResidualStats& stats) : uae_(&model) {
    require(model.trained, "wrapper needs a trained model");
    l_ = model.cfg.input_len;
    features_ = model.features;
    residual_affine(stats, scale_, offset_);
    require(scale_.size() == features_, "residual stats do not match the model's features");
}

WrapperModel::WrapperModel(const nn::CnnModel& model, const ResidualStats& stats) : cnn_(&model) {
    require(model.trained, "wrapper needs a trained model");
    l_ = model.cfg.seq_len;
    features_ = model.features;
    residual_affine(stats, scale_, offset_);
    require(scale_.size() == features_, "residual stats do not match the model's features");
}

double WrapperModel::residual(const Matrix& x_full) const {
    return build_and_run(x_full, nullptr, nullptr, 0.0);
}

double WrapperModel::loss(const Matrix& x_full, double hinge) const {
    double out = 0.0;
    build_and_run(x_full, nullptr, &out, hinge);
    return out;
}

double WrapperModel::residual_and_grad(const Matrix& x_full, Matrix& grad, double hinge) const {
    return build_and_run(x_full, &grad, nullptr, hinge);
}

double WrapperModel::build_and_run(const Matrix& x_full, Matrix* grad_out, double* loss_out,
                                   double hinge) const {
    const size_t T = x_full.rows, F = x_full.cols;
    require(F == features_, "trace feature count does not match the model");
    require(T >= l_ + (cnn_ ? cnn_->cfg.horizon + cnn_->cfg.output_len : 0),
            "trace shorter than one model window");

    nn::Graph g;
    nn::Tensor xt({T, F}, x_full.data);
    nn::Graph::NodeId x = g.input(std::move(xt));

    std::vector<size_t> starts;
    size_t m = 0;
    nn::Graph::NodeId pred = -1;
    if (uae_) {
        m = l_;
        for (size_t s = 0; s + l_ <= T; ++s) starts.push_back(s);
        nn::Graph::NodeId win = g.gather_windows(x, starts, l_);
        pred = nn::uae_forward(g, *uae_, win, false, nullptr).output;
    } else {
        m = cnn_->cfg.output_len;
        const size_t h = cnn_->cfg.horizon;
        for (size_t s = 0; s + l_ + h + m <= T; ++s) starts.push_back(s);
        require(!starts.empty(), "trace shorter than one model window");
        nn::Graph::NodeId win = g.gather_windows(x, starts, l_);
        pred = nn::cnn_forward(g, *cnn_, win).output;
        for (size_t& s : starts) s += l_ + h; // prediction landing rows
    }

    nn::Graph::NodeId assembled = g.scatter_mean(pred, starts, T);
    nn::Graph::NodeId resid = g.abs_val(g.sub(x, assembled));
    nn::Tensor scale({F}, scale_);
    nn::Graph::NodeId norm = g.scale_last_dim(resid, scale);
    bool has_offset = false;
    for (double o : offset_) has_offset |= o != 0.0;
    if (has_offset) {
        nn::Tensor off({F}, offset_);
        norm = g.add_row(norm, g.input(std::move(off)));
    }

    // rows no window predicts cannot alert
    std::vector<uint8_t> covered(T, 0);
    size_t covered_rows = 0;
    for (size_t s : starts)
        for (size_t i = 0; i < m; ++i) covered[s + i] = 1;
    for (size_t t = 0; t < T; ++t) covered_rows += covered[t];
    nn::Tensor mask({T, F});
    nn::Tensor sink({T, F});
    for (size_t t = 0; t < T; ++t)
        for (size_t f = 0; f < F; ++f) {
            mask.v[t * F + f] = covered[t] ? 1.0 : 0.0;
            sink.v[t * F + f] = covered[t] ? 0.0 : -1e30;
        }
    nn::Graph::NodeId masked = g.mul_const(norm, mask);

    // detection statistic: max over the covered extent
    nn::Graph::NodeId stat = g.reduce_max(g.add(masked, g.input(std::move(sink))));
    double statistic = g.value(stat).v[0];

    if (grad_out || loss_out) {
        // dense cost: mean squared exceedance above the hinge, over covered
        // elements (uncovered ones sit at 0 and never clear a positive hinge)
        nn::Graph::NodeId excess = masked;
        if (hinge != 0.0) {
            nn::Tensor shift({T, F});
            for (double& v : shift.v) v = -hinge;
            excess = g.relu(g.add(masked, g.input(std::move(shift))));
        }
        nn::Graph::NodeId sq = g.mse(excess, g.input(nn::Tensor({T, F})));
        nn::Tensor rescale({1}, {static_cast<double>(T) / static_cast<double>(covered_rows)});
        nn::Graph::NodeId cost = g.mul_const(sq, rescale);
        if (loss_out) *loss_out = g.value(cost).v[0];
        if (grad_out) {
            g.backward(cost);
            *grad_out = Matrix(T, F);
            grad_out->data = g.grad(x);
        }
    }
    return statistic;
}

WrapperModel build_wrapper(const nn::UaeModel& model, const ResidualStats& stats) {
    return WrapperModel(model, stats);
}

WrapperModel build_wrapper(const nn::CnnModel& model, const ResidualStats& stats) {
    return WrapperModel(model, stats);
}

std::vector<FeatureConstraint> constraints_from_meta(const std::vector<FeatureMeta>& meta) {
    std::vector<FeatureConstraint> phi;
    for (const FeatureMeta& m : meta) {
        FeatureConstraint c;
        c.binary = m.kind == FeatureKind::binary;
        if (m.train_max > m.train_min) {
            double w = m.train_max - m.train_min;
            c.lo = (m.valid_lo - m.train_min) / w;
            c.hi = (m.valid_hi - m.train_min) / w;
        } else {
            c.lo = c.hi = 0.0; // degenerate channel stays at its constant
        }
        phi.push_back(c);
    }
    return phi;
}

Matrix enforce_constraints(const Matrix& x, const std::vector<FeatureConstraint>& phi) {
    require(phi.size() == x.cols, "constraint count does not match feature count");
    Matrix out = x;
    for (size_t t = 0; t < x.rows; ++t)
        for (size_t f = 0; f < x.cols; ++f) {
            double v = out.at(t, f);
            const FeatureConstraint& c = phi[f];
            if (c.binary)
                v = v < 0.5 ? 0.0 : 1.0;
            else
                v = std::clamp(v, c.lo, c.hi);
            out.at(t, f) = v;
        }
    return out;
}

AdversarialResult find_adversarial(const WrapperModel& wrapper, const Matrix& x_att,
                                   const AdversarialConfig& cfg,
                                   const std::vector<FeatureConstraint>& phi) {
    require(cfg.epsilon >= 0.0 && cfg.max_iterations >= 1 && cfg.adv_lr > 0.0,
            "invalid adversarial configuration");
    AdversarialResult result;
    result.noise = Matrix(x_att.rows, x_att.cols);
    Matrix grad;
    double lr = cfg.adv_lr;
    double prev_residual = 0.0;
    int decreases = 0;

    for (size_t it = 0; it < cfg.max_iterations; ++it) {
        Matrix noisy(x_att.rows, x_att.cols);
        double noise_inf = 0.0;
        for (size_t i = 0; i < noisy.data.size(); ++i) {
            noisy.data[i] = x_att.data[i] + result.noise.data[i];
            noise_inf = std::max(noise_inf, std::fabs(result.noise.data[i]));
        }
        noisy = enforce_constraints(noisy, phi);

        // drive every exceedance just under the threshold at once
        double res = wrapper.residual_and_grad(noisy, grad, 0.9 * cfg.tau);
        result.residual_trace.push_back(res);
        result.noise_inf_trace.push_back(noise_inf);
        result.iterations = it + 1;
        if (res < cfg.tau) {
            result.evaded = true;
            result.x_adv = std::move(noisy);
            return result;
        }

        if (cfg.adaptive_lr && it > 0) {
            if (res > prev_residual) {
                lr *= 0.5;
                decreases = 0;
            } else if (++decreases >= 3) {
                lr = cfg.adv_lr;
                decreases = 0;
            }
        }
        prev_residual = res;

        double gmax = 0.0;
        for (double gv : grad.data) {
            if (!std::isfinite(gv)) throw Error("non-finite gradient in adversarial search");
            gmax = std::max(gmax, std::fabs(gv));
        }
        double step = lr * gmax;
        for (size_t i = 0; i < result.noise.data.size(); ++i) {
            double n = result.noise.data[i] - step * grad.data[i];
            result.noise.data[i] = std::clamp(n, -cfg.epsilon, cfg.epsilon);
        }
    }

    Matrix noisy(x_att.rows, x_att.cols);
    for (size_t i = 0; i < noisy.data.size(); ++i)
        noisy.data[i] = x_att.data[i] + result.noise.data[i];
    result.x_adv = enforce_constraints(noisy, phi);
    result.evaded = false;
    return result;
}

bool intent_check(const Matrix& x_adv, const std::vector<IntentCondition>& intent) {
    for (const IntentCondition& c : intent) {
        require(c.feature < x_adv.cols && c.end <= x_adv.rows && c.begin <= c.end,
                "intent condition out of range");
        for (size_t t = c.begin; t < c.end; ++t) {
            double v = x_adv.at(t, c.feature);
            bool ok = c.op == IntentCondition::Op::ge ? v >= c.value : v <= c.value;
            if (!ok) return false;
        }
    }
    return true;
}

} // namespace icsd
