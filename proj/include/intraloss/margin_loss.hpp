#pragma once

#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "intraloss/common.hpp"
#include "intraloss/geometry.hpp"

namespace intraloss::margin {

enum class Scheme { Plain, Norm, MultiplicativeAngular, AdditiveCosine, AdditiveAngular };

struct LambdaSchedule {
    double base = 1000.0;
    double min = 5.0;
    double decay = 0.1;
};

/// Annealing value max(min, base / (1 + decay * iteration)).
inline double lambda_at(long iteration, const LambdaSchedule& s) {
    return std::max(s.min, s.base / (1.0 + s.decay * static_cast<double>(iteration)));
}

struct MarginConfig {
    Scheme scheme = Scheme::Norm;
    double scale_s = 30.0;
    int m1 = 4;        // multiplicative angular
    double m2 = 0.35;  // additive cosine
    double m3 = 0.5;   // additive angular
    LambdaSchedule lambda_schedule{};
};

namespace detail {
inline int psi_segment(double theta, int m1) {
    const int k = static_cast<int>(std::floor(m1 * theta / std::numbers::pi));
    return std::clamp(k, 0, m1 - 1);
}
}  // namespace detail

/// Monotone piecewise substitute for cos(m1*theta), annealed toward cos(theta)
/// by lambda.
inline double psi(double theta, int m1, double lambda) {
    if (theta < 0.0 || theta > std::numbers::pi)
        throw DomainError("psi: theta outside [0, pi]");
    const int k = detail::psi_segment(theta, m1);
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    return (sign * std::cos(m1 * theta) - 2.0 * k + lambda * std::cos(theta)) /
           (1.0 + lambda);
}

/// d psi / d theta. Continuous across segment boundaries (sin(m1*theta)
/// vanishes there).
inline double psi_dtheta(double theta, int m1, double lambda) {
    if (theta < 0.0 || theta > std::numbers::pi)
        throw DomainError("psi_dtheta: theta outside [0, pi]");
    const int k = detail::psi_segment(theta, m1);
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    return (-sign * m1 * std::sin(m1 * theta) - lambda * std::sin(theta)) /
           (1.0 + lambda);
}

/// Target logit z under the configured margin scheme, as a function of the
/// target cosine. Plain is handled in the forward pass (raw inner products).
inline double target_logit(double cos_theta, const MarginConfig& cfg, double lambda = 0.0) {
    if (cos_theta < -1.0 || cos_theta > 1.0)
        throw DomainError("target_logit: cos_theta outside [-1, 1]");
    const double s = cfg.scale_s;
    switch (cfg.scheme) {
        case Scheme::Norm:
            return s * cos_theta;
        case Scheme::MultiplicativeAngular:
            return s * psi(std::acos(cos_theta), cfg.m1, lambda);
        case Scheme::AdditiveCosine:
            return s * (cos_theta - cfg.m2);
        case Scheme::AdditiveAngular: {
            const double sin_theta = std::sqrt(std::max(0.0, 1.0 - cos_theta * cos_theta));
            return s * (cos_theta * std::cos(cfg.m3) - sin_theta * std::sin(cfg.m3));
        }
        case Scheme::Plain:
            return cos_theta;  // identity: Plain applies no transform
    }
    throw DomainError("target_logit: unknown scheme");
}

/// dz/dcos for the target entry. Non-smooth at cos = +-1 for the angular
/// schemes; sin(theta) is floored to keep training finite there.
inline double target_logit_dcos(double cos_theta, const MarginConfig& cfg,
                                double lambda = 0.0) {
    const double s = cfg.scale_s;
    const double sin_theta =
        std::max(std::sqrt(std::max(0.0, 1.0 - cos_theta * cos_theta)), 1e-12);
    switch (cfg.scheme) {
        case Scheme::Norm:
        case Scheme::AdditiveCosine:
            return s;
        case Scheme::MultiplicativeAngular:
            return s * psi_dtheta(std::acos(geometry::clamp_cosine(cos_theta)), cfg.m1,
                                  lambda) *
                   (-1.0 / sin_theta);
        case Scheme::AdditiveAngular:
            return s * (std::cos(cfg.m3) + cos_theta * std::sin(cfg.m3) / sin_theta);
        case Scheme::Plain:
            return 1.0;
    }
    throw DomainError("target_logit_dcos: unknown scheme");
}

/// Left side of the class-1 decision boundary equation; zero on the boundary,
/// positive where class 1 wins.
inline double decision_boundary_residual(double cos_t1, double cos_t2,
                                         const MarginConfig& cfg) {
    if (cos_t1 < -1.0 || cos_t1 > 1.0 || cos_t2 < -1.0 || cos_t2 > 1.0)
        throw DomainError("decision_boundary_residual: cosine outside [-1, 1]");
    switch (cfg.scheme) {
        case Scheme::Plain:
        case Scheme::Norm:
            return cos_t1 - cos_t2;
        case Scheme::MultiplicativeAngular:
            return std::cos(cfg.m1 * std::acos(cos_t1)) - cos_t2;
        case Scheme::AdditiveCosine:
            return (cos_t1 - cfg.m2) - cos_t2;
        case Scheme::AdditiveAngular:
            return std::cos(std::acos(cos_t1) + cfg.m3) - cos_t2;
    }
    throw DomainError("decision_boundary_residual: unknown scheme");
}

struct LossResult {
    double loss = 0.0;
    Vector target_logits;  // z_i, post margin transform
    Vector target_probs;   // P_i from the modified logits
    Matrix grad_logits;    // (softmax - onehot) / n
    Matrix grad_features;  // chained to raw features
    Matrix grad_weights;   // chained to raw weights
};

/// Forward evaluation with enough cached state to re-chain an arbitrary
/// logit gradient (used when the gradient-enhancing term modifies the
/// target column).
struct ForwardPass {
    LossResult result;

    MarginConfig config;
    double lambda = 0.0;
    std::vector<int> labels;
    Matrix feats_raw, weights_raw;
    Matrix feats_n, weights_n;  // normalized views (aliases of raw for Plain)
    Matrix cosines;             // n x c
    Vector target_dz_dcos;      // per-sample chain factor at the target entry

    /// Maps a gradient w.r.t. the (margin-modified) logit matrix back to
    /// gradients w.r.t. raw features and raw weights.
    std::pair<Matrix, Matrix> backprop(const Matrix& grad_logits) const {
        const Eigen::Index n = feats_raw.rows();
        const Eigen::Index c = weights_raw.cols();
        if (grad_logits.rows() != n || grad_logits.cols() != c)
            throw ShapeMismatch("backprop: grad_logits shape mismatch");

        if (config.scheme == Scheme::Plain) {
            Matrix gf = grad_logits * weights_raw.transpose();
            Matrix gw = feats_raw.transpose() * grad_logits;
            return {std::move(gf), std::move(gw)};
        }

        // Gradient w.r.t. the cosine matrix: non-target entries scale by s,
        // the target entry by the scheme's dz/dcos.
        Matrix grad_cos = grad_logits * config.scale_s;
        for (Eigen::Index i = 0; i < n; ++i)
            grad_cos(i, labels[i]) = grad_logits(i, labels[i]) * target_dz_dcos(i);

        const Matrix grad_fn = grad_cos * weights_n.transpose();  // n x d
        const Matrix grad_wn = feats_n.transpose() * grad_cos;    // d x c

        Matrix gf(feats_raw.rows(), feats_raw.cols());
        for (Eigen::Index i = 0; i < n; ++i)
            gf.row(i) = geometry::normalize_jacobian_apply(feats_raw.row(i).transpose(),
                                                           grad_fn.row(i).transpose());

        Matrix gw(weights_raw.rows(), weights_raw.cols());
        for (Eigen::Index j = 0; j < c; ++j)
            gw.col(j) = geometry::normalize_jacobian_apply(weights_raw.col(j),
                                                           grad_wn.col(j));
        return {std::move(gf), std::move(gw)};
    }
};

/// Cross-entropy over margin-modified logits with analytic gradients.
/// feats: n x d, weights: d x c, labels in [0, c).
inline ForwardPass forward_pass(const Matrix& feats, const Matrix& weights,
                                const std::vector<int>& labels, const MarginConfig& cfg,
                                double lambda_now = 0.0) {
    const Eigen::Index n = feats.rows();
    const Eigen::Index c = weights.cols();
    if (n == 0) throw EmptyBatch("forward_pass: empty batch");
    if (feats.cols() != weights.rows())
        throw ShapeMismatch("forward_pass: feature dim does not match weight rows");
    if (static_cast<Eigen::Index>(labels.size()) != n)
        throw ShapeMismatch("forward_pass: label count does not match batch size");
    for (int y : labels)
        if (y < 0 || y >= c) throw LabelOutOfRange("forward_pass: label out of range");

    ForwardPass fp;
    fp.config = cfg;
    fp.lambda = lambda_now;
    fp.labels = labels;
    fp.feats_raw = feats;
    fp.weights_raw = weights;

    Matrix logits(n, c);
    fp.target_dz_dcos = Vector::Zero(n);
    if (cfg.scheme == Scheme::Plain) {
        fp.feats_n = feats;
        fp.weights_n = weights;
        fp.cosines = feats * weights;  // raw inner products, no clamp
        logits = fp.cosines;
        fp.target_dz_dcos.setOnes();
    } else {
        fp.feats_n = geometry::l2_normalize_rows(feats);
        Matrix wn = geometry::l2_normalize_rows(weights.transpose()).transpose();
        fp.weights_n = std::move(wn);
        fp.cosines = geometry::cosine_matrix(fp.feats_n, fp.weights_n);
        logits = cfg.scale_s * fp.cosines;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double ct = fp.cosines(i, labels[i]);
            logits(i, labels[i]) = target_logit(ct, cfg, lambda_now);
            fp.target_dz_dcos(i) = target_logit_dcos(ct, cfg, lambda_now);
        }
    }

    LossResult& r = fp.result;
    r.target_logits = Vector(n);
    r.target_probs = Vector(n);
    r.grad_logits = Matrix(n, c);
    double loss_sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mx = logits.row(i).maxCoeff();
        double denom = 0.0;
        for (Eigen::Index j = 0; j < c; ++j) denom += std::exp(logits(i, j) - mx);
        const double lse = mx + std::log(denom);
        const int y = labels[i];
        r.target_logits(i) = logits(i, y);
        loss_sum += lse - logits(i, y);
        for (Eigen::Index j = 0; j < c; ++j)
            r.grad_logits(i, j) = std::exp(logits(i, j) - lse) / static_cast<double>(n);
        r.target_probs(i) = std::exp(logits(i, y) - lse);
        r.grad_logits(i, y) -= 1.0 / static_cast<double>(n);
    }
    r.loss = loss_sum / static_cast<double>(n);

    auto [gf, gw] = fp.backprop(r.grad_logits);
    r.grad_features = std::move(gf);
    r.grad_weights = std::move(gw);
    return fp;
}

inline LossResult forward(const Matrix& feats, const Matrix& weights,
                          const std::vector<int>& labels, const MarginConfig& cfg,
                          double lambda_now = 0.0) {
    return forward_pass(feats, weights, labels, cfg, lambda_now).result;
}

}  // namespace intraloss::margin
