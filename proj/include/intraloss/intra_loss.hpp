#pragma once

#include <cmath>
#include <utility>

#include "intraloss/common.hpp"
#include "intraloss/margin_loss.hpp"

namespace intraloss::intra {

/// Maximum attainable target logit for a margin scheme (logit at zero angle).
inline double optimum_point(const margin::MarginConfig& cfg) {
    const double s = cfg.scale_s;
    switch (cfg.scheme) {
        case margin::Scheme::Norm:
            return s;
        case margin::Scheme::MultiplicativeAngular:
            return s * std::cos(0.0 * cfg.m1);
        case margin::Scheme::AdditiveCosine:
            return s * (1.0 - cfg.m2);
        case margin::Scheme::AdditiveAngular:
            return s * std::cos(cfg.m3);
        case margin::Scheme::Plain:
            throw UnsupportedScheme(
                "optimum_point: Plain logits are unbounded, no optimum point");
    }
    throw UnsupportedScheme("optimum_point: unknown scheme");
}

struct IntraConfig {
    double alpha = 5.0;
    double gamma = 0.9;
    double optimum = 0.0;           // O_p, derived from the margin config
    double beta = 0.0;              // O_p - gamma, the -0.5 gradient point
    bool stop_gradient_weights = true;

    IntraConfig() = default;
    IntraConfig(double alpha, double gamma, const margin::MarginConfig& mcfg)
        : alpha(alpha), gamma(gamma), optimum(optimum_point(mcfg)),
          beta(optimum - gamma) {}
};

/// Softplus-shaped penalty (1/alpha) * log(1 + e^{alpha (beta - z)}) in the
/// overflow-free form max(beta - z, 0) + (1/alpha) log1p(e^{-alpha |beta - z|}).
inline double get_term(double z, const IntraConfig& cfg) {
    const double t = cfg.beta - z;
    return std::max(t, 0.0) + std::log1p(std::exp(-cfg.alpha * std::abs(t))) / cfg.alpha;
}

/// d Get / dz = -sigmoid(alpha (beta - z)), in (-1, 0).
inline double get_gradient(double z, const IntraConfig& cfg) {
    const double t = cfg.alpha * (cfg.beta - z);
    if (t >= 0.0) {
        const double e = std::exp(-t);
        return -1.0 / (1.0 + e);
    }
    const double e = std::exp(t);
    return -e / (1.0 + e);
}

struct IntraResult {
    double l_intra = 0.0;
    double w_intra = 0.0;       // batch-mean target probability
    Vector per_sample_get;      // Get_i
    Vector grad_target_logits;  // w * (1 - P_i) * dGet/dz / n
};

/// L_intra = w * (1/n) sum (1 - P_i) Get(z_i). The probability weights are
/// stop-gradient: only the Get factor is differentiated.
inline IntraResult intra_forward(const Vector& target_logits, const Vector& target_probs,
                                 const IntraConfig& cfg) {
    const Eigen::Index n = target_logits.size();
    if (n == 0) throw EmptyBatch("intra_forward: empty batch");
    if (target_probs.size() != n)
        throw ShapeMismatch("intra_forward: logits/probs length mismatch");

    IntraResult r;
    r.w_intra = target_probs.mean();
    r.per_sample_get = Vector(n);
    r.grad_target_logits = Vector(n);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double g = get_term(target_logits(i), cfg);
        r.per_sample_get(i) = g;
        acc += (1.0 - target_probs(i)) * g;
        r.grad_target_logits(i) = r.w_intra * (1.0 - target_probs(i)) *
                                  get_gradient(target_logits(i), cfg) /
                                  static_cast<double>(n);
    }
    r.l_intra = r.w_intra * acc / static_cast<double>(n);
    return r;
}

/// L_all = L_s + L_intra; the intra gradient lands on each sample's target
/// logit column.
inline std::pair<double, Matrix> combined_forward(const margin::LossResult& base,
                                                  const std::vector<int>& labels,
                                                  const IntraResult& ir) {
    const Eigen::Index n = base.grad_logits.rows();
    if (ir.grad_target_logits.size() != n ||
        static_cast<Eigen::Index>(labels.size()) != n)
        throw ShapeMismatch("combined_forward: batch size mismatch");
    Matrix grad = base.grad_logits;
    for (Eigen::Index i = 0; i < n; ++i)
        grad(i, labels[i]) += ir.grad_target_logits(i);
    return {base.loss + ir.l_intra, std::move(grad)};
}

}  // namespace intraloss::intra
