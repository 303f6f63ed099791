#pragma once

#include <cstdint>
#include <vector>

#include "intraloss/common.hpp"
#include "intraloss/geometry.hpp"
#include "intraloss/rng.hpp"

namespace intraloss::synthetic {

struct DatasetSpec {
    int num_classes = 8;
    int samples_per_class = 200;
    int input_dim = 3;
    double cluster_spread = 0.2;  // angular std-dev proxy
    double elongation = 1.0;      // per-class covariance eccentricity, >= 1
    std::uint64_t seed = 1;

    void validate() const {
        if (num_classes < 2) throw InvalidSpec("num_classes must be >= 2");
        if (samples_per_class < 2) throw InvalidSpec("samples_per_class must be >= 2");
        if (input_dim < 2) throw InvalidSpec("input_dim must be >= 2");
        if (cluster_spread < 0.0) throw InvalidSpec("cluster_spread must be >= 0");
        if (elongation < 1.0) throw InvalidSpec("elongation must be >= 1");
    }
};

enum class Split : int { Train = 0, Test = 1 };

struct LabeledDataset {
    Matrix inputs;            // n x input_dim, unit rows
    std::vector<int> labels;  // in [0, num_classes)
    std::vector<Split> split;
    int num_classes = 0;

    std::vector<int> indices_of(Split s) const {
        std::vector<int> out;
        for (std::size_t i = 0; i < split.size(); ++i)
            if (split[i] == s) out.push_back(static_cast<int>(i));
        return out;
    }
};

inline Vector random_unit_vector(int dim, rng::Rng& r) {
    Vector v(dim);
    double norm = 0.0;
    do {
        for (int i = 0; i < dim; ++i) v(i) = r.normal();
        norm = v.norm();
    } while (norm <= 1e-12);
    return v / norm;
}

/// Class means uniform on the sphere; samples are mean + anisotropic Gaussian
/// noise (one principal axis per class scaled by elongation), re-normalized.
/// 80/20 train/test split stratified by class. Deterministic per seed.
inline LabeledDataset generate(const DatasetSpec& spec) {
    spec.validate();
    rng::Rng r(rng::split_seed(spec.seed, 0xda7a));

    const int n = spec.num_classes * spec.samples_per_class;
    LabeledDataset ds;
    ds.inputs = Matrix(n, spec.input_dim);
    ds.labels.resize(n);
    ds.split.resize(n);
    ds.num_classes = spec.num_classes;

    const int train_per_class = std::max(1, (spec.samples_per_class * 4) / 5);
    // Per-coordinate noise scale chosen so the angular RMS around the class
    // mean is ~cluster_spread at elongation 1.
    const double sigma = spec.cluster_spread / std::sqrt(static_cast<double>(spec.input_dim - 1));
    int row = 0;
    for (int cls = 0; cls < spec.num_classes; ++cls) {
        const Vector mean = random_unit_vector(spec.input_dim, r);
        // Elongation acts along a tangential direction at the mean.
        Vector axis;
        double tnorm = 0.0;
        do {
            axis = random_unit_vector(spec.input_dim, r);
            axis -= axis.dot(mean) * mean;
            tnorm = axis.norm();
        } while (tnorm <= 1e-6);
        axis /= tnorm;
        for (int k = 0; k < spec.samples_per_class; ++k, ++row) {
            Vector noise(spec.input_dim);
            for (int i = 0; i < spec.input_dim; ++i) noise(i) = sigma * r.normal();
            noise += (spec.elongation - 1.0) * axis.dot(noise) * axis;
            Vector x = mean + noise;
            ds.inputs.row(row) = x / x.norm();
            ds.labels[row] = cls;
            ds.split[row] = k < train_per_class ? Split::Train : Split::Test;
        }
    }
    return ds;
}

struct VerificationPair {
    int a = 0;  // row indices into the dataset
    int b = 0;
    bool same = false;
};

/// Balanced positive/negative pairs over one split (test by default), without
/// replacement where the candidate pool allows it.
inline std::vector<VerificationPair> verification_pairs(const LabeledDataset& ds,
                                                        int num_pairs,
                                                        std::uint64_t seed,
                                                        Split from = Split::Test) {
    const auto test = ds.indices_of(from);
    std::vector<std::vector<int>> by_class(ds.num_classes);
    for (int idx : test) by_class[ds.labels[idx]].push_back(idx);

    std::vector<VerificationPair> positives, negatives;
    for (const auto& members : by_class)
        for (std::size_t i = 0; i < members.size(); ++i)
            for (std::size_t j = i + 1; j < members.size(); ++j)
                positives.push_back({members[i], members[j], true});
    for (std::size_t i = 0; i < test.size(); ++i)
        for (std::size_t j = i + 1; j < test.size(); ++j)
            if (ds.labels[test[i]] != ds.labels[test[j]])
                negatives.push_back({test[i], test[j], false});

    if (positives.empty() || negatives.empty())
        throw InsufficientData("verification_pairs: need >= 2 test samples in >= 2 classes");

    rng::Rng r(rng::split_seed(seed, 0xbead));
    r.shuffle(positives);
    r.shuffle(negatives);

    const int half = num_pairs / 2;
    std::vector<VerificationPair> out;
    out.reserve(num_pairs);
    for (int i = 0; i < half; ++i) out.push_back(positives[i % positives.size()]);
    for (int i = 0; i < num_pairs - half; ++i) out.push_back(negatives[i % negatives.size()]);
    return out;
}

}  // namespace intraloss::synthetic
