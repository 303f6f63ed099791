#pragma once

#include <algorithm>
#include <cmath>

#include "intraloss/common.hpp"

namespace intraloss::geometry {

inline constexpr double kMinNorm = 1e-30;

inline double clamp_cosine(double c) { return std::clamp(c, -1.0, 1.0); }

/// Scales every row of m to unit Euclidean norm.
inline Matrix l2_normalize_rows(const Matrix& m) {
    Matrix out(m.rows(), m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const double norm = m.row(i).norm();
        if (norm <= kMinNorm)
            throw ZeroNormRow("l2_normalize_rows: row " + std::to_string(i) +
                              " has norm <= 1e-30");
        out.row(i) = m.row(i) / norm;
    }
    return out;
}

/// Backprop through x -> x/|x|: returns (I - u u^T) g / |x| with u = x/|x|.
inline Vector normalize_jacobian_apply(const Vector& x, const Vector& upstream_grad) {
    if (x.size() != upstream_grad.size())
        throw ShapeMismatch("normalize_jacobian_apply: size mismatch");
    const double norm = x.norm();
    if (norm <= kMinNorm)
        throw ZeroNormRow("normalize_jacobian_apply: vector norm <= 1e-30");
    const Vector u = x / norm;
    return (upstream_grad - u * u.dot(upstream_grad)) / norm;
}

/// Cosine similarity (i,j) = feats.row(i) . weights.col(j), clamped to [-1, 1].
/// Both sides are expected unit-norm; clamping only absorbs rounding.
inline Matrix cosine_matrix(const Matrix& feats, const Matrix& weights) {
    if (feats.cols() != weights.rows())
        throw ShapeMismatch("cosine_matrix: inner dimensions differ (" +
                            std::to_string(feats.cols()) + " vs " +
                            std::to_string(weights.rows()) + ")");
    Matrix cos = feats * weights;
    for (Eigen::Index i = 0; i < cos.rows(); ++i)
        for (Eigen::Index j = 0; j < cos.cols(); ++j) cos(i, j) = clamp_cosine(cos(i, j));
    return cos;
}

/// Angle in [0, pi] between two unit vectors.
inline double angle_between(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw ShapeMismatch("angle_between: dimension mismatch");
    return std::acos(clamp_cosine(a.dot(b)));
}

}  // namespace intraloss::geometry
