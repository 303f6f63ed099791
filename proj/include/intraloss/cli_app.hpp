#pragma once

#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "intraloss/config.hpp"
#include "intraloss/experiment.hpp"
#include "intraloss/io.hpp"

namespace intraloss::cli {

// Exit codes: 0 ok, 2 config, 3 I/O, 4 numerical failure, 5 gradcheck failure.
enum ExitCode : int {
    kOk = 0,
    kConfigError = 2,
    kIoError = 3,
    kNumericalError = 4,
    kGradCheckFailure = 5,
};

namespace detail {

inline config::RunConfig load_config(const std::string& path,
                                     std::optional<std::uint64_t> seed_override) {
    std::string text;
    try {
        text = io::read_text_file(path);
    } catch (const io::IoError& e) {
        throw io::IoError(std::string(e.what()));
    }
    auto j = nlohmann::ordered_json::parse(text, nullptr, false);
    if (j.is_discarded()) throw config::ConfigError("config is not valid JSON: " + path);
    if (seed_override) j["seed"] = *seed_override;
    return config::parse_run_config(j);
}

inline synthetic::LabeledDataset load_or_generate_dataset(const config::RunConfig& cfg) {
    if (!cfg.dataset_path.empty()) {
        std::ifstream is(cfg.dataset_path);
        if (!is) throw io::IoError("dataset not found: " + cfg.dataset_path);
        std::stringstream ss;
        ss << is.rdbuf();
        return io::read_dataset_csv(ss);
    }
    return synthetic::generate(cfg.dataset);
}

inline void ensure_out_dir(const std::string& out) {
    std::error_code ec;
    std::filesystem::create_directories(out, ec);
    if (ec) throw io::IoError("cannot create output directory: " + out);
}

}  // namespace detail

inline int cmd_gen_data(const config::RunConfig& cfg, const std::string& out) {
    detail::ensure_out_dir(out);
    const auto ds = synthetic::generate(cfg.dataset);
    std::ostringstream csv;
    io::write_dataset_csv(ds, csv);
    io::write_text_file(out + "/dataset.csv", csv.str());

    std::map<int, int> per_class;
    for (int y : ds.labels) per_class[y] += 1;
    std::cout << "wrote " << out << "/dataset.csv: " << ds.labels.size() << " rows\n";
    for (const auto& [label, count] : per_class)
        std::cout << "  class " << label << ": " << count << " samples\n";
    return kOk;
}

inline int cmd_train(const config::RunConfig& cfg, const std::string& out) {
    detail::ensure_out_dir(out);
    const auto ds = detail::load_or_generate_dataset(cfg);
    const auto outcome =
        experiment::run_variant(ds, cfg.train, cfg.loss, cfg.seed, cfg.num_pairs);

    std::ostringstream trace;
    io::write_trace_csv(outcome.trained.trace, trace);
    io::write_text_file(out + "/trace.csv", trace.str());

    io::write_text_file(
        out + "/model.json",
        io::model_to_json(outcome.trained.backbone, outcome.trained.class_weights)
                .dump(2) +
            "\n");
    io::write_text_file(out + "/report.json",
                        io::report_to_json(outcome.report).dump(2) + "\n");

    std::ostringstream sphere;
    io::write_sphere_csv(outcome.sphere_train, sphere);
    io::write_text_file(out + "/sphere_train.csv", sphere.str());
    if (!outcome.sphere_test.empty()) {
        std::ostringstream st;
        io::write_sphere_csv(outcome.sphere_test, st);
        io::write_text_file(out + "/sphere_test.csv", st.str());
    }

    std::cout << "train_accuracy=" << outcome.train_accuracy
              << " verification_accuracy=" << outcome.report.verification_accuracy
              << "\n";
    return kOk;
}

inline int cmd_gradcheck(const config::RunConfig& cfg, double corrupt_analytic) {
    struct Case {
        margin::Scheme scheme;
        bool with_intra;
    };
    std::vector<Case> cases = {{margin::Scheme::Plain, false}};
    for (auto scheme :
         {margin::Scheme::Norm, margin::Scheme::MultiplicativeAngular,
          margin::Scheme::AdditiveCosine, margin::Scheme::AdditiveAngular})
        for (bool with_intra : {false, true}) cases.push_back({scheme, with_intra});

    bool all_passed = true;
    const int batch = 6;
    for (const auto& c : cases) {
        margin::MarginConfig mcfg = cfg.loss.margin;
        mcfg.scheme = c.scheme;
        std::optional<intra::IntraConfig> icfg;
        if (c.with_intra) icfg = intra::IntraConfig(cfg.loss.alpha, cfg.loss.gamma, mcfg);

        double worst = 0.0;
        for (int rep = 0; rep < 3; ++rep) {
            rng::Rng r(rng::split_seed(cfg.seed, 0x6c0de + rep * 16 +
                                                     static_cast<int>(c.scheme) * 2 +
                                                     c.with_intra));
            auto backbone = trainer::Backbone::lookup_table(
                batch, cfg.train.embed_dim, r.next());
            Matrix weights =
                trainer::init_class_weights(cfg.train.embed_dim, 4, r.next());
            std::vector<int> row_ids(batch), labels(batch);
            for (int i = 0; i < batch; ++i) {
                row_ids[i] = i;
                labels[i] = static_cast<int>(r.below(4));
            }
            const auto report = trainer::gradcheck(
                backbone, weights, Matrix(), row_ids, labels, mcfg,
                icfg ? &*icfg : nullptr, 5.0, 1e-6, corrupt_analytic);
            worst = std::max(worst, report.max_rel_err);
            if (!report.passed) all_passed = false;
        }
        std::cout << "scheme=" << config::scheme_to_string(c.scheme)
                  << " intra=" << (c.with_intra ? "on" : "off")
                  << " max_rel_err=" << worst
                  << (worst < 1e-5 ? "  PASS" : "  FAIL") << "\n";
    }
    return all_passed ? kOk : kGradCheckFailure;
}

inline int cmd_compare(const config::RunConfig& cfg, const std::string& out) {
    if (cfg.compare_variants.size() < 2)
        throw config::ConfigError("compare needs >= 2 entries under 'configs'");
    detail::ensure_out_dir(out);
    const auto ds = detail::load_or_generate_dataset(cfg);
    const auto rows = experiment::compare(ds, cfg.train, cfg.compare_variants,
                                          cfg.seed, cfg.num_pairs);

    std::ostringstream table;
    table << std::left << std::setw(24) << "name" << std::right << std::setw(12)
          << "train_acc" << std::setw(12) << "verif_acc" << std::setw(14)
          << "mean_p95_rad" << std::setw(12) << "anisotropy" << std::setw(14)
          << "margin_proxy" << "\n";
    table << std::fixed << std::setprecision(4);
    for (const auto& r : rows)
        table << std::left << std::setw(24) << r.name << std::right << std::setw(12)
              << r.train_accuracy << std::setw(12) << r.verification_accuracy
              << std::setw(14) << r.mean_p95_radius << std::setw(12)
              << r.mean_anisotropy_index << std::setw(14) << r.margin_proxy << "\n";
    io::write_text_file(out + "/comparison.txt", table.str());
    std::cout << table.str();

    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        nlohmann::ordered_json row;
        row["name"] = r.name;
        row["train_accuracy"] = r.train_accuracy;
        row["verification_accuracy"] = r.verification_accuracy;
        row["mean_p95_radius_rad"] = r.mean_p95_radius;
        row["mean_anisotropy_index"] = r.mean_anisotropy_index;
        row["margin_proxy_rad"] = r.margin_proxy;
        j.push_back(std::move(row));
    }
    io::write_text_file(out + "/comparison.json", j.dump(2) + "\n");
    return kOk;
}

/// Entry point shared by the binary and the in-process CLI tests.
inline int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"hypersphere margin losses with the gradient-enhancing intra term"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".";
    std::optional<std::uint64_t> seed_override;
    double corrupt_analytic = 0.0;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config file")->required();
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_option("--seed", seed_override, "override the config seed");
    };
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset CSV");
    add_common(gen);
    auto* train = app.add_subcommand("train", "train one configuration");
    add_common(train);
    auto* gradcheck =
        app.add_subcommand("gradcheck", "finite-difference gradient conformance");
    add_common(gradcheck);
    gradcheck
        ->add_option("--corrupt-analytic", corrupt_analytic,
                     "offset analytic gradients (negative-control hook)")
        ->group("");  // hidden
    auto* compare = app.add_subcommand("compare", "train and tabulate several losses");
    add_common(compare);

    std::vector<const char*> argv;
    argv.push_back("intraloss");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << e.what() << "\n";
        return kConfigError;
    }

    try {
        const auto cfg = detail::load_config(config_path, seed_override);
        if (gen->parsed()) return cmd_gen_data(cfg, out_dir);
        if (train->parsed()) return cmd_train(cfg, out_dir);
        if (gradcheck->parsed()) return cmd_gradcheck(cfg, corrupt_analytic);
        if (compare->parsed()) return cmd_compare(cfg, out_dir);
        return kConfigError;
    } catch (const config::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const InvalidSpec& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const NonFiniteLoss& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kNumericalError;
    } catch (const io::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kIoError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumericalError;
    }
}

}  // namespace intraloss::cli
