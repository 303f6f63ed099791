#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "intraloss/common.hpp"
#include "intraloss/intra_loss.hpp"
#include "intraloss/margin_loss.hpp"
#include "intraloss/synthetic.hpp"
#include "intraloss/trainer.hpp"

namespace intraloss::config {

using json = nlohmann::ordered_json;

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                                const std::string& where) {
    for (const auto& [key, value] : j.items())
        if (!allowed.contains(key))
            throw ConfigError("unknown key '" + key + "' in " + where);
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    return j.at(key).get<T>();
}

}  // namespace detail

inline margin::Scheme scheme_from_string(const std::string& s) {
    if (s == "plain") return margin::Scheme::Plain;
    if (s == "norm") return margin::Scheme::Norm;
    if (s == "multiplicative_angular") return margin::Scheme::MultiplicativeAngular;
    if (s == "additive_cosine") return margin::Scheme::AdditiveCosine;
    if (s == "additive_angular") return margin::Scheme::AdditiveAngular;
    throw ConfigError("unknown margin scheme '" + s + "'");
}

inline std::string scheme_to_string(margin::Scheme s) {
    switch (s) {
        case margin::Scheme::Plain: return "plain";
        case margin::Scheme::Norm: return "norm";
        case margin::Scheme::MultiplicativeAngular: return "multiplicative_angular";
        case margin::Scheme::AdditiveCosine: return "additive_cosine";
        case margin::Scheme::AdditiveAngular: return "additive_angular";
    }
    return "?";
}

inline synthetic::DatasetSpec parse_dataset(const json& j, std::uint64_t seed) {
    detail::reject_unknown_keys(j,
                                {"num_classes", "samples_per_class", "input_dim",
                                 "cluster_spread", "elongation"},
                                "dataset");
    synthetic::DatasetSpec spec;
    spec.num_classes = detail::get_or(j, "num_classes", spec.num_classes);
    spec.samples_per_class = detail::get_or(j, "samples_per_class", spec.samples_per_class);
    spec.input_dim = detail::get_or(j, "input_dim", spec.input_dim);
    spec.cluster_spread = detail::get_or(j, "cluster_spread", spec.cluster_spread);
    spec.elongation = detail::get_or(j, "elongation", spec.elongation);
    spec.seed = rng::split_seed(seed, 0x0d5);
    try {
        spec.validate();
    } catch (const InvalidSpec& e) {
        throw ConfigError(std::string("dataset: ") + e.what());
    }
    return spec;
}

inline margin::MarginConfig parse_margin(const json& j) {
    detail::reject_unknown_keys(
        j, {"scheme", "scale_s", "m1", "m2", "m3", "lambda"}, "margin");
    margin::MarginConfig cfg;
    cfg.scheme = scheme_from_string(detail::get_or<std::string>(j, "scheme", "norm"));
    cfg.scale_s = detail::get_or(j, "scale_s", 30.0);
    cfg.m1 = detail::get_or(j, "m1", 4);
    cfg.m2 = detail::get_or(j, "m2", 0.35);
    cfg.m3 = detail::get_or(j, "m3", 0.5);
    if (j.contains("lambda")) {
        const json& l = j.at("lambda");
        detail::reject_unknown_keys(l, {"base", "min", "decay"}, "margin.lambda");
        cfg.lambda_schedule.base = detail::get_or(l, "base", 1000.0);
        cfg.lambda_schedule.min = detail::get_or(l, "min", 5.0);
        cfg.lambda_schedule.decay = detail::get_or(l, "decay", 0.1);
    }
    if (cfg.scale_s <= 0.0) throw ConfigError("margin: scale_s must be > 0");
    if (cfg.m1 < 1) throw ConfigError("margin: m1 must be >= 1");
    if (cfg.m2 < 0.0 || cfg.m2 >= 1.0) throw ConfigError("margin: m2 must be in [0, 1)");
    if (cfg.m3 < 0.0 || cfg.m3 >= std::numbers::pi / 2)
        throw ConfigError("margin: m3 must be in [0, pi/2)");
    return cfg;
}

inline std::optional<intra::IntraConfig> parse_intra(const json& j,
                                                     const margin::MarginConfig& mcfg) {
    detail::reject_unknown_keys(j, {"enabled", "alpha", "gamma"}, "intra");
    if (!detail::get_or(j, "enabled", true)) return std::nullopt;
    const double alpha = detail::get_or(j, "alpha", 5.0);
    const double gamma = detail::get_or(j, "gamma", 0.9);
    if (alpha <= 0.0) throw ConfigError("intra: alpha must be > 0");
    if (gamma <= 0.0) throw ConfigError("intra: gamma must be > 0");
    try {
        return intra::IntraConfig(alpha, gamma, mcfg);
    } catch (const UnsupportedScheme& e) {
        throw ConfigError(std::string("intra: ") + e.what());
    }
}

struct TrainSettings {
    trainer::BackboneKind backbone = trainer::BackboneKind::LookupTable;
    int hidden_dim = 16;
    int embed_dim = 3;
    trainer::TrainConfig train{};
};

inline TrainSettings parse_train(const json& j, std::uint64_t seed) {
    detail::reject_unknown_keys(
        j,
        {"backbone", "hidden_dim", "embed_dim", "learning_rate", "lr_milestones",
         "momentum", "weight_decay", "batch_size", "total_iterations", "stage2_start",
         "stage2_mode"},
        "train");
    TrainSettings s;
    const std::string kind = detail::get_or<std::string>(j, "backbone", "lookup_table");
    if (kind == "lookup_table")
        s.backbone = trainer::BackboneKind::LookupTable;
    else if (kind == "mlp")
        s.backbone = trainer::BackboneKind::MLP;
    else
        throw ConfigError("train: unknown backbone '" + kind + "'");
    s.hidden_dim = detail::get_or(j, "hidden_dim", s.hidden_dim);
    s.embed_dim = detail::get_or(j, "embed_dim", s.embed_dim);

    trainer::TrainConfig& t = s.train;
    t.learning_rate = detail::get_or(j, "learning_rate", 0.1);
    t.momentum = detail::get_or(j, "momentum", 0.9);
    t.weight_decay = detail::get_or(j, "weight_decay", 5e-4);
    t.batch_size = detail::get_or(j, "batch_size", 64);
    t.total_iterations = detail::get_or<long>(j, "total_iterations", 2000);
    t.stage2_start =
        detail::get_or<long>(j, "stage2_start", (t.total_iterations * 3) / 5);
    if (j.contains("lr_milestones")) {
        t.lr_milestones = j.at("lr_milestones").get<std::vector<long>>();
    } else {
        t.lr_milestones = {(t.total_iterations * 2) / 5, (t.total_iterations * 7) / 10,
                           (t.total_iterations * 9) / 10};
    }
    const std::string mode = detail::get_or<std::string>(j, "stage2_mode", "joint");
    if (mode == "joint")
        t.stage2_mode = trainer::Stage2Mode::Joint;
    else if (mode == "intra_only")
        t.stage2_mode = trainer::Stage2Mode::IntraOnly;
    else
        throw ConfigError("train: unknown stage2_mode '" + mode + "'");
    if (t.momentum < 0.0 || t.momentum >= 1.0)
        throw ConfigError("train: momentum must be in [0, 1)");
    if (t.stage2_start < 0 || t.stage2_start > t.total_iterations)
        throw ConfigError("train: stage2_start must be in [0, total_iterations]");
    t.seed = rng::split_seed(seed, 0x123a1);
    return s;
}

/// One named loss configuration inside a run or comparison.
struct LossVariant {
    std::string name;
    margin::MarginConfig margin{};
    bool use_intra = false;
    double alpha = 5.0;
    double gamma = 0.9;

    std::optional<intra::IntraConfig> intra_config() const {
        if (!use_intra) return std::nullopt;
        return intra::IntraConfig(alpha, gamma, margin);
    }
};

struct RunConfig {
    std::uint64_t seed = 1;
    synthetic::DatasetSpec dataset{};
    TrainSettings train{};
    LossVariant loss{};
    std::vector<LossVariant> compare_variants;  // used by the compare command
    std::string dataset_path;                   // optional, load instead of generate
    int num_pairs = 600;
};

inline LossVariant parse_variant(const json& j, const std::string& where) {
    detail::reject_unknown_keys(j, {"name", "margin", "intra"}, where);
    LossVariant v;
    v.margin = parse_margin(j.contains("margin") ? j.at("margin") : json::object());
    if (j.contains("intra")) {
        const json& ij = j.at("intra");
        detail::reject_unknown_keys(ij, {"enabled", "alpha", "gamma"}, where + ".intra");
        v.use_intra = detail::get_or(ij, "enabled", true);
        v.alpha = detail::get_or(ij, "alpha", 5.0);
        v.gamma = detail::get_or(ij, "gamma", 0.9);
        if (v.alpha <= 0.0) throw ConfigError(where + ": alpha must be > 0");
        if (v.gamma <= 0.0) throw ConfigError(where + ": gamma must be > 0");
        if (v.use_intra) {
            try {
                (void)v.intra_config();  // validates the scheme
            } catch (const UnsupportedScheme& e) {
                throw ConfigError(where + ": " + e.what());
            }
        }
    }
    v.name = detail::get_or<std::string>(
        j, "name",
        (v.use_intra ? "intra+" : "") + scheme_to_string(v.margin.scheme));
    return v;
}

inline RunConfig parse_run_config(const json& j) {
    detail::reject_unknown_keys(j,
                                {"seed", "dataset", "margin", "intra", "train",
                                 "configs", "dataset_path", "num_pairs", "name"},
                                "config");
    RunConfig cfg;
    cfg.seed = detail::get_or<std::uint64_t>(j, "seed", 1);
    cfg.dataset = parse_dataset(j.contains("dataset") ? j.at("dataset") : json::object(),
                                cfg.seed);
    cfg.train = parse_train(j.contains("train") ? j.at("train") : json::object(),
                            cfg.seed);
    cfg.num_pairs = detail::get_or(j, "num_pairs", 600);
    cfg.dataset_path = detail::get_or<std::string>(j, "dataset_path", "");

    json variant = json::object();
    if (j.contains("name")) variant["name"] = j.at("name");
    if (j.contains("margin")) variant["margin"] = j.at("margin");
    if (j.contains("intra")) variant["intra"] = j.at("intra");
    cfg.loss = parse_variant(variant, "config");

    if (j.contains("configs")) {
        for (const auto& vj : j.at("configs"))
            cfg.compare_variants.push_back(parse_variant(vj, "configs[]"));
    }
    return cfg;
}

inline RunConfig load_run_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    try {
        return parse_run_config(j);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config type error: ") + e.what());
    }
}

}  // namespace intraloss::config
