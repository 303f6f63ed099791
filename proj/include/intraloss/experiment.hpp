#pragma once

#include <string>
#include <vector>

#include "intraloss/config.hpp"
#include "intraloss/evaluation.hpp"
#include "intraloss/synthetic.hpp"
#include "intraloss/trainer.hpp"

namespace intraloss::experiment {

struct RunOutcome {
    trainer::TrainResult trained;
    evaluation::DistributionReport report;  // over the evaluated split
    double train_accuracy = 0.0;
    std::vector<evaluation::SphereDumpRow> sphere_train;
    std::vector<evaluation::SphereDumpRow> sphere_test;  // empty for lookup backbones
};

inline trainer::Backbone make_backbone(const config::TrainSettings& ts,
                                       const synthetic::LabeledDataset& ds,
                                       std::uint64_t seed) {
    const int n_train =
        static_cast<int>(ds.indices_of(synthetic::Split::Train).size());
    if (ts.backbone == trainer::BackboneKind::LookupTable)
        return trainer::Backbone::lookup_table(n_train, ts.embed_dim, seed);
    return trainer::Backbone::mlp(static_cast<int>(ds.inputs.cols()), ts.hidden_dim,
                                  ts.embed_dim, seed);
}

/// Train one loss variant on a dataset and evaluate the resulting embedding
/// distribution. A lookup-table backbone has no test embeddings, so its
/// statistics and verification pairs come from the training split.
inline RunOutcome run_variant(const synthetic::LabeledDataset& ds,
                              const config::TrainSettings& ts,
                              const config::LossVariant& variant, std::uint64_t seed,
                              int num_pairs) {
    trainer::TrainConfig tc = ts.train;
    tc.margin = variant.margin;
    tc.intra = variant.intra_config();
    tc.seed = rng::split_seed(seed, 0x123a1);

    RunOutcome out;
    out.trained = trainer::train(ds, make_backbone(ts, ds, tc.seed), tc);

    const bool lookup = ts.backbone == trainer::BackboneKind::LookupTable;
    const auto eval_split = lookup ? synthetic::Split::Train : synthetic::Split::Test;
    const auto eval_rows = ds.indices_of(eval_split);
    const Matrix embeddings =
        trainer::embed_all(out.trained.backbone, ds, eval_rows);
    std::vector<int> eval_labels(eval_rows.size());
    for (std::size_t i = 0; i < eval_rows.size(); ++i)
        eval_labels[i] = ds.labels[eval_rows[i]];

    // Pairs reference dataset rows; remap to positions within the split.
    auto pairs =
        synthetic::verification_pairs(ds, num_pairs, rng::split_seed(seed, 0xbea2),
                                      eval_split);
    std::vector<int> position_of(ds.labels.size(), -1);
    for (std::size_t i = 0; i < eval_rows.size(); ++i) position_of[eval_rows[i]] = i;
    for (auto& p : pairs) {
        p.a = position_of[p.a];
        p.b = position_of[p.b];
    }

    out.report = evaluation::build_report(
        geometry::l2_normalize_rows(embeddings), eval_labels, pairs);

    const auto train_rows = ds.indices_of(synthetic::Split::Train);
    const Matrix train_embeddings =
        trainer::embed_all(out.trained.backbone, ds, train_rows);
    std::vector<int> train_labels(train_rows.size());
    for (std::size_t i = 0; i < train_rows.size(); ++i)
        train_labels[i] = ds.labels[train_rows[i]];
    out.train_accuracy = trainer::classification_accuracy(
        train_embeddings, out.trained.class_weights, train_labels);

    const auto icfg = variant.intra_config();
    const double lambda_final =
        margin::lambda_at(tc.total_iterations, tc.margin.lambda_schedule);
    out.sphere_train = evaluation::sphere_dump(
        train_embeddings, train_labels, out.trained.class_weights, tc.margin,
        icfg ? &*icfg : nullptr, lambda_final);
    if (!lookup) {
        const auto test_rows = ds.indices_of(synthetic::Split::Test);
        const Matrix test_embeddings =
            trainer::embed_all(out.trained.backbone, ds, test_rows);
        std::vector<int> test_labels(test_rows.size());
        for (std::size_t i = 0; i < test_rows.size(); ++i)
            test_labels[i] = ds.labels[test_rows[i]];
        out.sphere_test = evaluation::sphere_dump(
            test_embeddings, test_labels, out.trained.class_weights, tc.margin,
            icfg ? &*icfg : nullptr, lambda_final);
    }
    return out;
}

struct ComparisonRow {
    std::string name;
    double train_accuracy = 0.0;
    double verification_accuracy = 0.0;
    double mean_p95_radius = 0.0;  // radians
    double mean_anisotropy_index = 0.0;
    double margin_proxy = 0.0;  // radians
};

inline ComparisonRow summarize(const std::string& name, const RunOutcome& outcome) {
    ComparisonRow row;
    row.name = name;
    row.train_accuracy = outcome.train_accuracy;
    row.verification_accuracy = outcome.report.verification_accuracy;
    double p95 = 0.0, aniso = 0.0;
    for (const auto& cs : outcome.report.per_class) {
        p95 += cs.radius_p95;
        aniso += cs.anisotropy_index;
    }
    const double c = static_cast<double>(outcome.report.per_class.size());
    row.mean_p95_radius = p95 / c;
    row.mean_anisotropy_index = aniso / c;
    row.margin_proxy = outcome.report.margin_proxy;
    return row;
}

/// Trains every variant on the same seeded dataset. Deterministic row order.
inline std::vector<ComparisonRow> compare(const synthetic::LabeledDataset& ds,
                                          const config::TrainSettings& ts,
                                          const std::vector<config::LossVariant>& variants,
                                          std::uint64_t seed, int num_pairs) {
    std::vector<ComparisonRow> rows;
    for (const auto& v : variants)
        rows.push_back(summarize(v.name, run_variant(ds, ts, v, seed, num_pairs)));
    return rows;
}

}  // namespace intraloss::experiment
