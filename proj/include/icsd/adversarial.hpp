#pragma once

#include <vector>

#include "icsd/models.hpp"
#include "icsd/scoring.hpp"

namespace icsd {

struct FeatureConstraint {
    double lo = -1e300;
    double hi = 1e300;
    bool binary = false;
};

struct AdversarialConfig {
    double tau = 1.0;           // detection threshold to get under
    double epsilon = 1e300;     // max per-element noise, normalized units
    double adv_lr = 0.1;
    size_t max_iterations = 500;
    bool adaptive_lr = false;   // halve on residual increase, restore after 3 decreases
};

/// Composes window extraction, model inference, overlap averaging and
/// residual normalization as one graph so the gradient of the detection
/// statistic reaches every element of the full input trace, including
/// back-in-time propagation through earlier windows.
class WrapperModel {
public:
    WrapperModel(const nn::UaeModel& model, const ResidualStats& stats);
    WrapperModel(const nn::CnnModel& model, const ResidualStats& stats);

    size_t window_len() const { return l_; }
    size_t features() const { return features_; }

    /// Max normalized residual of the trace; identical to the scoring
    /// pipeline's statistic for the same input.
    double residual(const Matrix& x_full) const;

    /// The dense cost the evasion search descends on: mean squared
    /// exceedance of the normalized residuals over `hinge` (0 = plain mean
    /// square). Minimizing the detection statistic directly is degenerate --
    /// its subgradient touches one element per step -- so the search drives
    /// every offending element at once while success is still judged by
    /// residual() < tau.
    double loss(const Matrix& x_full, double hinge = 0.0) const;

    /// Returns the detection statistic; fills grad with d loss / d x.
    double residual_and_grad(const Matrix& x_full, Matrix& grad, double hinge = 0.0) const;

private:
    double build_and_run(const Matrix& x_full, Matrix* grad_out, double* loss_out,
                         double hinge) const;

    const nn::UaeModel* uae_ = nullptr;
    const nn::CnnModel* cnn_ = nullptr;
    size_t l_ = 0;
    size_t features_ = 0;
    std::vector<double> scale_;  // normalized = raw * scale + offset
    std::vector<double> offset_;
};

WrapperModel build_wrapper(const nn::UaeModel& model, const ResidualStats& stats);
WrapperModel build_wrapper(const nn::CnnModel& model, const ResidualStats& stats);

/// Constraints from feature metadata: continuous channels clipped to their
/// valid range, binary channels snapped to the nearest of {0,1}. Ranges are
/// in the same (normalized) units as the trace.
std::vector<FeatureConstraint> constraints_from_meta(const std::vector<FeatureMeta>& meta);
Matrix enforce_constraints(const Matrix& x, const std::vector<FeatureConstraint>& phi);

struct AdversarialResult {
    Matrix x_adv;
    Matrix noise;                       // x_adv - x_att before constraints, |.| <= epsilon
    std::vector<double> residual_trace; // max normalized residual per iteration
    std::vector<double> noise_inf_trace; // max|noise| entering each iteration
    bool evaded = false;
    size_t iterations = 0;
    bool intent_preserved = false;      // filled by intent_check
};

/// Gradient descent on the detection statistic (Alg.-style: step =
/// adv_lr * max|grad|, noise update, epsilon clip, constraint enforcement
/// each iteration) until the residual drops under tau or the budget runs
/// out.
AdversarialResult find_adversarial(const WrapperModel& wrapper, const Matrix& x_att,
                                   const AdversarialConfig& cfg,
                                   const std::vector<FeatureConstraint>& phi);

/// The attacker's physical objective, expressed per feature over an
/// interval: every value in [begin, end) must satisfy `op value`.
struct IntentCondition {
    size_t feature = 0;
    enum class Op { ge, le } op = Op::ge;
    double value = 0.0;
    size_t begin = 0;
    size_t end = 0;
};

bool intent_check(const Matrix& x_adv, const std::vector<IntentCondition>& intent);

} // namespace icsd
