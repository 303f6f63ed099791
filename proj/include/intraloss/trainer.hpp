#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "intraloss/common.hpp"
#include "intraloss/geometry.hpp"
#include "intraloss/intra_loss.hpp"
#include "intraloss/margin_loss.hpp"
#include "intraloss/rng.hpp"
#include "intraloss/synthetic.hpp"

namespace intraloss::trainer {

enum class BackboneKind { LookupTable, MLP };

/// Embedding backbone with manual backpropagation. LookupTable learns one
/// free embedding per training sample; MLP is input -> tanh hidden -> linear
/// embedding.
struct Backbone {
    BackboneKind kind = BackboneKind::LookupTable;
    int input_dim = 0;
    int hidden_dim = 0;
    int embed_dim = 0;

    Matrix table;  // LookupTable: n_train x embed_dim
    Matrix w1;     // MLP: input_dim x hidden_dim
    Matrix b1;     // MLP: 1 x hidden_dim
    Matrix w2;     // MLP: hidden_dim x embed_dim

    static Backbone lookup_table(int n_train, int embed_dim, std::uint64_t seed,
                                 double init_scale = 0.1) {
        Backbone b;
        b.kind = BackboneKind::LookupTable;
        b.embed_dim = embed_dim;
        b.table = Matrix(n_train, embed_dim);
        rng::Rng r(rng::split_seed(seed, 0x7ab1e));
        for (Eigen::Index i = 0; i < b.table.rows(); ++i)
            for (Eigen::Index j = 0; j < b.table.cols(); ++j)
                b.table(i, j) = init_scale * r.normal();
        return b;
    }

    static Backbone mlp(int input_dim, int hidden_dim, int embed_dim,
                        std::uint64_t seed) {
        Backbone b;
        b.kind = BackboneKind::MLP;
        b.input_dim = input_dim;
        b.hidden_dim = hidden_dim;
        b.embed_dim = embed_dim;
        rng::Rng r(rng::split_seed(seed, 0x313f));
        auto init = [&](Eigen::Index rows, Eigen::Index cols, double scale) {
            Matrix m(rows, cols);
            for (Eigen::Index i = 0; i < rows; ++i)
                for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * r.normal();
            return m;
        };
        b.w1 = init(input_dim, hidden_dim, 1.0 / std::sqrt(input_dim));
        b.b1 = Matrix::Zero(1, hidden_dim);
        b.w2 = init(hidden_dim, embed_dim, 1.0 / std::sqrt(hidden_dim));
        return b;
    }

    std::vector<std::pair<std::string, Matrix*>> parameters() {
        if (kind == BackboneKind::LookupTable) return {{"table", &table}};
        return {{"w1", &w1}, {"b1", &b1}, {"w2", &w2}};
    }

    struct Activation {
        Matrix features;  // n x embed_dim
        Matrix hidden;    // MLP only: n x hidden_dim
    };

    /// inputs: batch rows of the dataset (n x input_dim); row_ids: positions
    /// in the training set, indexing the lookup table.
    Activation forward(const Matrix& inputs, const std::vector<int>& row_ids) const {
        Activation act;
        if (kind == BackboneKind::LookupTable) {
            act.features = Matrix(row_ids.size(), embed_dim);
            for (std::size_t i = 0; i < row_ids.size(); ++i)
                act.features.row(i) = table.row(row_ids[i]);
        } else {
            act.hidden = ((inputs * w1).rowwise() + b1.row(0)).array().tanh();
            act.features = act.hidden * w2;
        }
        return act;
    }

    /// Parameter gradients aligned with parameters(); inputs/row_ids must
    /// match the forward call that produced act.
    std::vector<Matrix> backward(const Matrix& inputs, const std::vector<int>& row_ids,
                                 const Activation& act, const Matrix& grad_features) const {
        if (kind == BackboneKind::LookupTable) {
            Matrix grad_table = Matrix::Zero(table.rows(), table.cols());
            for (std::size_t i = 0; i < row_ids.size(); ++i)
                grad_table.row(row_ids[i]) += grad_features.row(i);
            return {std::move(grad_table)};
        }
        const Matrix grad_hidden = grad_features * w2.transpose();
        const Matrix grad_pre =
            grad_hidden.array() * (1.0 - act.hidden.array().square());
        Matrix gw1 = inputs.transpose() * grad_pre;
        Matrix gb1 = grad_pre.colwise().sum();
        Matrix gw2 = act.hidden.transpose() * grad_features;
        return {std::move(gw1), std::move(gb1), std::move(gw2)};
    }
};

/// v <- momentum v + grad + wd param; param <- param - lr v.
inline void sgd_step(Matrix& param, const Matrix& grad, Matrix& velocity, double lr,
                     double momentum, double weight_decay) {
    if (param.rows() != grad.rows() || param.cols() != grad.cols())
        throw ShapeMismatch("sgd_step: param/grad shape mismatch");
    if (velocity.rows() != param.rows() || velocity.cols() != param.cols())
        velocity = Matrix::Zero(param.rows(), param.cols());
    velocity = momentum * velocity + grad + weight_decay * param;
    param -= lr * velocity;
}

enum class Stage2Mode { Joint, IntraOnly };

struct TrainConfig {
    double learning_rate = 0.1;
    std::vector<long> lr_milestones = {800, 1400, 1800};  // divide lr by 10 at each
    double momentum = 0.9;
    double weight_decay = 5e-4;
    int batch_size = 64;
    long total_iterations = 2000;
    long stage2_start = 1200;
    margin::MarginConfig margin{};
    std::optional<intra::IntraConfig> intra;
    Stage2Mode stage2_mode = Stage2Mode::Joint;
    std::uint64_t seed = 1;

    double lr_at(long iteration) const {
        double lr = learning_rate;
        for (long m : lr_milestones)
            if (iteration >= m) lr /= 10.0;
        return lr;
    }
};

struct TraceRecord {
    long iteration = 0;
    int stage = 1;
    double loss_s = 0.0;
    double loss_intra = 0.0;
    double w_intra = 0.0;
    double mean_p = 0.0;
    double lr = 0.0;
};

using TrainTrace = std::vector<TraceRecord>;

struct TrainResult {
    Backbone backbone;
    Matrix class_weights;  // embed_dim x c, raw (normalization lives in the loss)
    TrainTrace trace;
};

inline Matrix init_class_weights(int embed_dim, int num_classes, std::uint64_t seed) {
    rng::Rng r(rng::split_seed(seed, 0xc1a55));
    Matrix w(embed_dim, num_classes);
    for (int j = 0; j < num_classes; ++j)
        w.col(j) = synthetic::random_unit_vector(embed_dim, r);
    return w;
}

/// Two-stage SGD loop: L_s alone before stage2_start, then the configured
/// stage-2 objective. Deterministic per seed.
inline TrainResult train(const synthetic::LabeledDataset& ds, Backbone backbone,
                         const TrainConfig& cfg) {
    const std::vector<int> train_rows = ds.indices_of(synthetic::Split::Train);
    const int n_train = static_cast<int>(train_rows.size());
    if (n_train == 0) throw InvalidSpec("train: empty training split");
    if (backbone.kind == BackboneKind::LookupTable &&
        backbone.table.rows() != n_train)
        throw ShapeMismatch("train: lookup table rows != training samples");

    TrainResult out;
    out.class_weights =
        init_class_weights(backbone.embed_dim, ds.num_classes, cfg.seed);
    out.trace.reserve(cfg.total_iterations);

    rng::Rng shuffle_rng(rng::split_seed(cfg.seed, 0x500ff1e));
    std::vector<int> order(n_train);
    for (int i = 0; i < n_train; ++i) order[i] = i;
    std::size_t cursor = order.size();

    std::vector<Matrix> velocities;  // backbone params then class weights
    auto params = backbone.parameters();
    velocities.resize(params.size() + 1);

    for (long iter = 0; iter < cfg.total_iterations; ++iter) {
        const int bs = std::min<int>(cfg.batch_size, n_train);
        std::vector<int> batch_pos(bs);
        for (int k = 0; k < bs; ++k) {
            if (cursor == order.size()) {
                shuffle_rng.shuffle(order);
                cursor = 0;
            }
            batch_pos[k] = order[cursor++];
        }

        Matrix inputs(bs, ds.inputs.cols());
        std::vector<int> labels(bs);
        for (int k = 0; k < bs; ++k) {
            inputs.row(k) = ds.inputs.row(train_rows[batch_pos[k]]);
            labels[k] = ds.labels[train_rows[batch_pos[k]]];
        }

        const double lambda =
            margin::lambda_at(iter, cfg.margin.lambda_schedule);
        const auto act = backbone.forward(inputs, batch_pos);
        const auto fp = margin::forward_pass(act.features, out.class_weights, labels,
                                             cfg.margin, lambda);
        const auto& base = fp.result;

        const int stage = iter >= cfg.stage2_start ? 2 : 1;
        double total_loss = base.loss;
        double loss_intra = 0.0;
        Matrix grad_logits = base.grad_logits;
        const double w_intra = base.target_probs.mean();

        if (stage == 2 && cfg.intra) {
            const auto ir =
                intra::intra_forward(base.target_logits, base.target_probs, *cfg.intra);
            loss_intra = ir.l_intra;
            if (cfg.stage2_mode == Stage2Mode::Joint) {
                std::tie(total_loss, grad_logits) =
                    intra::combined_forward(base, labels, ir);
            } else {
                total_loss = ir.l_intra;
                grad_logits = Matrix::Zero(bs, ds.num_classes);
                for (int k = 0; k < bs; ++k)
                    grad_logits(k, labels[k]) = ir.grad_target_logits(k);
            }
        }

        if (!std::isfinite(total_loss))
            throw NonFiniteLoss("train: non-finite loss at iteration " +
                                    std::to_string(iter),
                                iter);

        auto [grad_feats, grad_weights] = fp.backprop(grad_logits);
        const auto param_grads = backbone.backward(inputs, batch_pos, act, grad_feats);

        const double lr = cfg.lr_at(iter);
        for (std::size_t p = 0; p < params.size(); ++p)
            sgd_step(*params[p].second, param_grads[p], velocities[p], lr,
                     cfg.momentum, cfg.weight_decay);
        sgd_step(out.class_weights, grad_weights, velocities.back(), lr, cfg.momentum,
                 cfg.weight_decay);

        out.trace.push_back({iter, stage, base.loss, loss_intra, w_intra,
                             base.target_probs.mean(), lr});
    }

    out.backbone = std::move(backbone);
    return out;
}

/// Embeddings for the given dataset rows. A LookupTable backbone only covers
/// the training split, so rows must come from it.
inline Matrix embed_all(const Backbone& backbone, const synthetic::LabeledDataset& ds,
                        const std::vector<int>& rows) {
    if (backbone.kind == BackboneKind::LookupTable) {
        const auto train_rows = ds.indices_of(synthetic::Split::Train);
        std::vector<int> position_of(ds.labels.size(), -1);
        for (std::size_t p = 0; p < train_rows.size(); ++p)
            position_of[train_rows[p]] = static_cast<int>(p);
        std::vector<int> positions(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            positions[i] = position_of[rows[i]];
            if (positions[i] < 0)
                throw InvalidSpec("embed_all: lookup backbone has no test embeddings");
        }
        Matrix inputs;  // unused
        return backbone.forward(inputs, positions).features;
    }
    Matrix inputs(rows.size(), ds.inputs.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) inputs.row(i) = ds.inputs.row(rows[i]);
    return backbone.forward(inputs, {}).features;
}

inline double classification_accuracy(const Matrix& feats, const Matrix& weights,
                                      const std::vector<int>& labels) {
    const Matrix cos = geometry::cosine_matrix(geometry::l2_normalize_rows(feats),
                                               geometry::l2_normalize_rows(weights.transpose()).transpose());
    int correct = 0;
    for (Eigen::Index i = 0; i < cos.rows(); ++i) {
        Eigen::Index arg = 0;
        cos.row(i).maxCoeff(&arg);
        if (arg == labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(cos.rows());
}

struct GradCheckEntry {
    std::string param;
    double max_rel_err = 0.0;
};

struct GradCheckReport {
    bool passed = true;
    double max_rel_err = 0.0;
    std::vector<GradCheckEntry> entries;
    std::vector<int> nonsmooth_samples;  // flagged and excluded from FD
};

namespace detail {
inline bool near_nonsmooth(double cos_target, const margin::MarginConfig& cfg) {
    if (cfg.scheme == margin::Scheme::MultiplicativeAngular ||
        cfg.scheme == margin::Scheme::AdditiveAngular) {
        if (std::abs(std::abs(cos_target) - 1.0) < 1e-4) return true;
    }
    if (cfg.scheme == margin::Scheme::MultiplicativeAngular) {
        const double theta = std::acos(geometry::clamp_cosine(cos_target));
        for (int k = 1; k < cfg.m1; ++k)
            if (std::abs(theta - k * std::numbers::pi / cfg.m1) < 1e-4) return true;
    }
    return false;
}
}  // namespace detail

/// Central-finite-difference check of every analytic parameter gradient of
/// L_all. The intra weights w_intra and (1 - P_i) are frozen at the base
/// point in the difference oracle, matching the stop-gradient convention.
/// analytic_corruption is a test hook that offsets analytic gradients.
inline GradCheckReport gradcheck(Backbone backbone, Matrix class_weights,
                                 const Matrix& inputs, const std::vector<int>& row_ids,
                                 const std::vector<int>& labels,
                                 const margin::MarginConfig& mcfg,
                                 const intra::IntraConfig* icfg, double lambda_now = 5.0,
                                 double h = 1e-6, double analytic_corruption = 0.0) {
    GradCheckReport report;

    const auto base_act = backbone.forward(inputs, row_ids);
    const auto base_fp = margin::forward_pass(base_act.features, class_weights, labels,
                                              mcfg, lambda_now);
    for (Eigen::Index i = 0; i < base_fp.cosines.rows(); ++i)
        if (detail::near_nonsmooth(base_fp.cosines(i, labels[i]), mcfg))
            report.nonsmooth_samples.push_back(static_cast<int>(i));
    if (!report.nonsmooth_samples.empty()) return report;  // flagged, FD skipped

    // Frozen intra weights for the difference oracle.
    const double n = static_cast<double>(labels.size());
    Vector frozen_coeff = Vector::Zero(labels.size());
    if (icfg) {
        const double w0 = base_fp.result.target_probs.mean();
        for (Eigen::Index i = 0; i < frozen_coeff.size(); ++i)
            frozen_coeff(i) = w0 * (1.0 - base_fp.result.target_probs(i)) / n;
    }

    auto loss_all = [&]() {
        const auto act = backbone.forward(inputs, row_ids);
        const auto fp =
            margin::forward_pass(act.features, class_weights, labels, mcfg, lambda_now);
        double loss = fp.result.loss;
        if (icfg)
            for (Eigen::Index i = 0; i < frozen_coeff.size(); ++i)
                loss += frozen_coeff(i) *
                        intra::get_term(fp.result.target_logits(i), *icfg);
        return loss;
    };

    // Analytic gradients of the same objective.
    Matrix grad_logits = base_fp.result.grad_logits;
    if (icfg) {
        const auto ir = intra::intra_forward(base_fp.result.target_logits,
                                             base_fp.result.target_probs, *icfg);
        for (std::size_t i = 0; i < labels.size(); ++i)
            grad_logits(i, labels[i]) += ir.grad_target_logits(i);
    }
    auto [grad_feats, grad_class_weights] = base_fp.backprop(grad_logits);
    auto analytic_param_grads = backbone.backward(inputs, row_ids, base_act, grad_feats);
    analytic_param_grads.push_back(grad_class_weights);

    auto params = backbone.parameters();
    std::vector<std::pair<std::string, Matrix*>> all_params(params.begin(), params.end());
    all_params.emplace_back("class_weights", &class_weights);

    for (std::size_t p = 0; p < all_params.size(); ++p) {
        Matrix& param = *all_params[p].second;
        const Matrix& analytic = analytic_param_grads[p];
        // Errors are measured relative to the gradient scale of the block:
        // a pointwise quotient on near-zero entries only amplifies the
        // roundoff floor of the central difference itself.
        const double scale = std::max(
            {analytic.cwiseAbs().maxCoeff(), 1e-8, std::abs(analytic_corruption)});
        double worst = 0.0;
        for (Eigen::Index i = 0; i < param.rows(); ++i)
            for (Eigen::Index j = 0; j < param.cols(); ++j) {
                const double saved = param(i, j);
                param(i, j) = saved + h;
                const double up = loss_all();
                param(i, j) = saved - h;
                const double down = loss_all();
                param(i, j) = saved;
                const double fd = (up - down) / (2.0 * h);
                const double an = analytic(i, j) + analytic_corruption;
                worst = std::max(
                    worst, std::abs(an - fd) / std::max(scale, std::abs(fd)));
            }
        report.entries.push_back({all_params[p].first, worst});
        report.max_rel_err = std::max(report.max_rel_err, worst);
    }
    report.passed = report.max_rel_err < 1e-5;
    return report;
}

}  // namespace intraloss::trainer
