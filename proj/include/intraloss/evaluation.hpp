#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include <Eigen/Eigenvalues>

#include "intraloss/common.hpp"
#include "intraloss/geometry.hpp"
#include "intraloss/intra_loss.hpp"
#include "intraloss/margin_loss.hpp"
#include "intraloss/synthetic.hpp"

namespace intraloss::evaluation {

struct ClassStats {
    int label = 0;
    Vector mean_direction;
    double radius_p50 = 0.0;  // radians
    double radius_p95 = 0.0;
    double anisotropy_index = 1.0;
};

struct DistributionReport {
    std::vector<ClassStats> per_class;
    double min_interclass_mean_angle = 0.0;  // radians
    double margin_proxy = 0.0;               // min pair (mean angle - p95_i - p95_j)
    double verification_accuracy = 0.0;
    double best_threshold = 0.0;  // cosine value
};

inline double percentile(std::vector<double> values, double q) {
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
}

/// Eigen-ratio sqrt(l_max / l_min) of the tangent-plane covariance at the
/// class mean. Samples are log-mapped as v_i = theta_i * t_i with t_i the
/// unit tangent toward the sample, then expressed in an orthonormal basis of
/// the hyperplane orthogonal to the mean.
inline double anisotropy_index(const Matrix& class_embeddings, const Vector& mean_direction) {
    const Eigen::Index n = class_embeddings.rows();
    const Eigen::Index d = class_embeddings.cols();
    if (mean_direction.norm() < 1e-9)
        throw DegenerateClass("anisotropy_index: degenerate mean direction");

    // Tangent basis: columns 1..d-1 of the Householder frame mapping e0 to mu.
    Eigen::MatrixXd basis(d, d - 1);
    {
        Eigen::VectorXd v = mean_direction;
        v(0) += (v(0) >= 0.0 ? 1.0 : -1.0);
        v /= v.norm();
        Eigen::MatrixXd house =
            Eigen::MatrixXd::Identity(d, d) - 2.0 * v * v.transpose();
        // house * e0 = -+mu; the remaining columns span the tangent plane.
        basis = house.rightCols(d - 1);
    }

    Matrix tangent(n, d - 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Vector x = class_embeddings.row(i).transpose();
        const double c = geometry::clamp_cosine(x.dot(mean_direction));
        const double theta = std::acos(c);
        Vector t = x - c * mean_direction;
        const double tn = t.norm();
        Vector v = tn > 1e-15 ? Vector(theta * t / tn) : Vector(Vector::Zero(d));
        tangent.row(i) = (basis.transpose() * v).transpose();
    }

    const Eigen::RowVectorXd centroid = tangent.colwise().mean();
    Eigen::MatrixXd centered = tangent.rowwise() - centroid;
    Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n);
    cov.diagonal().array() += 1e-12;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    const auto& ev = solver.eigenvalues();
    return std::sqrt(ev(ev.size() - 1) / ev(0));
}

/// Per-class spherical statistics. mean_direction is the normalized
/// arithmetic mean; radii are angle percentiles about it.
inline std::vector<ClassStats> class_statistics(const Matrix& embeddings,
                                                const std::vector<int>& labels) {
    std::map<int, std::vector<int>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i)
        by_class[labels[i]].push_back(static_cast<int>(i));

    std::vector<ClassStats> out;
    for (const auto& [label, rows] : by_class) {
        if (rows.size() < 2)
            throw DegenerateClass("class_statistics: class " + std::to_string(label) +
                                  " has < 2 samples");
        Vector mean = Vector::Zero(embeddings.cols());
        for (int i : rows) mean += embeddings.row(i).transpose();
        mean /= static_cast<double>(rows.size());
        if (mean.norm() < 1e-9)
            throw DegenerateClass("class_statistics: antipodal collapse in class " +
                                  std::to_string(label));
        mean.normalize();

        std::vector<double> angles;
        angles.reserve(rows.size());
        Matrix cls(rows.size(), embeddings.cols());
        for (std::size_t k = 0; k < rows.size(); ++k) {
            cls.row(k) = embeddings.row(rows[k]);
            angles.push_back(geometry::angle_between(cls.row(k).transpose(), mean));
        }

        ClassStats st;
        st.label = label;
        st.mean_direction = mean;
        st.radius_p50 = percentile(angles, 0.50);
        st.radius_p95 = percentile(angles, 0.95);
        st.anisotropy_index = anisotropy_index(cls, mean);
        out.push_back(std::move(st));
    }
    return out;
}

/// Ten-fold cross-validated verification accuracy on cosine scores. For each
/// fold the threshold maximizing accuracy on the other nine folds (scanned
/// over midpoints of consecutive sorted scores, ties toward the smaller
/// cosine) is applied to the held-out fold.
inline std::pair<double, double> verification_accuracy(
    const std::vector<double>& scores, const std::vector<bool>& same) {
    const std::size_t n = scores.size();
    if (n < 10 || same.size() != n)
        throw InsufficientData("verification_accuracy: need >= 10 pairs");

    auto fold_of = [&](std::size_t i) { return i * 10 / n; };

    auto accuracy_at = [&](double thr, std::size_t held_out, bool inside) {
        int correct = 0, total = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if ((fold_of(i) == held_out) != inside) continue;
            ++total;
            if ((scores[i] > thr) == same[i]) ++correct;
        }
        return total == 0 ? 0.0 : static_cast<double>(correct) / total;
    };

    double acc_sum = 0.0;
    std::map<double, int> threshold_votes;
    for (std::size_t fold = 0; fold < 10; ++fold) {
        std::vector<double> train_scores;
        for (std::size_t i = 0; i < n; ++i)
            if (fold_of(i) != fold) train_scores.push_back(scores[i]);
        std::sort(train_scores.begin(), train_scores.end());

        std::vector<double> candidates;
        candidates.push_back(train_scores.front() - 1.0);
        for (std::size_t i = 0; i + 1 < train_scores.size(); ++i)
            candidates.push_back(0.5 * (train_scores[i] + train_scores[i + 1]));
        candidates.push_back(train_scores.back() + 1.0);

        double best_thr = candidates.front();
        double best_acc = -1.0;
        for (double thr : candidates) {
            const double a = accuracy_at(thr, fold, false);
            if (a > best_acc) {  // strict: ties keep the smaller threshold
                best_acc = a;
                best_thr = thr;
            }
        }
        acc_sum += accuracy_at(best_thr, fold, true);
        threshold_votes[best_thr] += 1;
    }

    double best_threshold = 0.0;
    int votes = -1;
    for (const auto& [thr, v] : threshold_votes)
        if (v > votes) {  // ties toward the smaller cosine via map order
            votes = v;
            best_threshold = thr;
        }
    return {acc_sum / 10.0, best_threshold};
}

inline std::pair<double, double> verification_accuracy(
    const Matrix& embeddings, const std::vector<synthetic::VerificationPair>& pairs) {
    std::vector<double> scores;
    std::vector<bool> same;
    const Matrix unit = geometry::l2_normalize_rows(embeddings);
    for (const auto& p : pairs) {
        scores.push_back(unit.row(p.a).dot(unit.row(p.b)));
        same.push_back(p.same);
    }
    return verification_accuracy(scores, same);
}

/// Full distribution report over one embedding set.
inline DistributionReport build_report(const Matrix& embeddings,
                                       const std::vector<int>& labels,
                                       const std::vector<synthetic::VerificationPair>& pairs) {
    DistributionReport rep;
    rep.per_class = class_statistics(embeddings, labels);

    rep.min_interclass_mean_angle = std::numbers::pi;
    rep.margin_proxy = std::numbers::pi;
    for (std::size_t i = 0; i < rep.per_class.size(); ++i)
        for (std::size_t j = i + 1; j < rep.per_class.size(); ++j) {
            const double ang = geometry::angle_between(rep.per_class[i].mean_direction,
                                                       rep.per_class[j].mean_direction);
            rep.min_interclass_mean_angle = std::min(rep.min_interclass_mean_angle, ang);
            rep.margin_proxy = std::min(rep.margin_proxy,
                                        ang - rep.per_class[i].radius_p95 -
                                            rep.per_class[j].radius_p95);
        }
    if (!pairs.empty()) {
        std::tie(rep.verification_accuracy, rep.best_threshold) =
            verification_accuracy(embeddings, pairs);
    }
    return rep;
}

struct SphereDumpRow {
    int sample_id = 0;
    int label = 0;
    Vector embedding;      // unit norm
    double z = 0.0;        // target logit
    double p = 0.0;        // target probability
    double grad_softmax = 0.0;  // P - 1
    double grad_intra = 0.0;    // w * (1 - P) * dGet/dz, 0 when unconfigured
};

/// Per-sample target-logit quantities for sphere plotting.
inline std::vector<SphereDumpRow> sphere_dump(const Matrix& embeddings,
                                              const std::vector<int>& labels,
                                              const Matrix& weights,
                                              const margin::MarginConfig& mcfg,
                                              const intra::IntraConfig* icfg = nullptr,
                                              double lambda_now = 0.0) {
    const auto fp = margin::forward_pass(embeddings, weights, labels, mcfg, lambda_now);
    const auto& res = fp.result;
    const double w_intra = icfg ? res.target_probs.mean() : 0.0;

    std::vector<SphereDumpRow> rows(embeddings.rows());
    const Matrix unit = geometry::l2_normalize_rows(embeddings);
    for (Eigen::Index i = 0; i < embeddings.rows(); ++i) {
        SphereDumpRow& row = rows[i];
        row.sample_id = static_cast<int>(i);
        row.label = labels[i];
        row.embedding = unit.row(i).transpose();
        row.z = res.target_logits(i);
        row.p = res.target_probs(i);
        row.grad_softmax = res.target_probs(i) - 1.0;
        if (icfg)
            row.grad_intra = w_intra * (1.0 - res.target_probs(i)) *
                             intra::get_gradient(res.target_logits(i), *icfg);
    }
    return rows;
}

}  // namespace intraloss::evaluation
