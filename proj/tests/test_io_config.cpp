#include <catch2/catch.hpp>

#include "intraloss/config.hpp"
#include "intraloss/io.hpp"

#include <sstream>

using namespace intraloss;
using config::ConfigError;
using config::load_run_config;

TEST_CASE("format_double round-trips exactly") {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 19.5, 0.0, 1e300}) {
        CHECK(std::stod(io::format_double(v)) == v);
    }
}

TEST_CASE("dataset CSV round trip is exact") {
    synthetic::DatasetSpec spec;
    spec.num_classes = 3;
    spec.samples_per_class = 10;
    spec.input_dim = 4;
    spec.seed = 19;
    auto ds = synthetic::generate(spec);

    std::ostringstream os;
    io::write_dataset_csv(ds, os);
    std::istringstream is(os.str());
    auto back = io::read_dataset_csv(is);

    REQUIRE(back.inputs.rows() == ds.inputs.rows());
    REQUIRE(back.inputs.cols() == ds.inputs.cols());
    CHECK((back.inputs - ds.inputs).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.labels == ds.labels);
    CHECK(back.num_classes == 3);
    for (std::size_t i = 0; i < ds.split.size(); ++i)
        CHECK(back.split[i] == ds.split[i]);

    // Writing the parsed dataset again reproduces the bytes.
    std::ostringstream os2;
    io::write_dataset_csv(back, os2);
    CHECK(os2.str() == os.str());
}

TEST_CASE("dataset CSV rejects malformed input") {
    std::istringstream empty("");
    CHECK_THROWS_AS(io::read_dataset_csv(empty), io::IoError);
    std::istringstream bad_header("id,label,split,x0\n");
    CHECK_THROWS_AS(io::read_dataset_csv(bad_header), io::IoError);
    std::istringstream bad_row("sample_id,label,split,x0\n0,0,train\n");
    CHECK_THROWS_AS(io::read_dataset_csv(bad_row), io::IoError);
    std::istringstream bad_split("sample_id,label,split,x0\n0,0,validation,0.5\n");
    CHECK_THROWS_AS(io::read_dataset_csv(bad_split), io::IoError);
}

TEST_CASE("trace CSV header and one formatted row") {
    trainer::TrainTrace trace;
    trace.push_back({7, 2, 0.5, 0.125, 0.75, 0.8, 0.01});
    std::ostringstream os;
    io::write_trace_csv(trace, os);
    CHECK(os.str() ==
          "iter,stage,loss_s,loss_intra,w_intra,mean_p,lr\n"
          "7,2,0.5,0.125,0.75,0.80000000000000004,0.01\n");
}

TEST_CASE("sphere CSV round trip is exact") {
    std::vector<evaluation::SphereDumpRow> rows(2);
    rows[0].sample_id = 0;
    rows[0].label = 3;
    rows[0].embedding = Vector(3);
    rows[0].embedding << 1.0 / 3.0, -0.2, 0.97;
    rows[0].z = 18.123456789012345;
    rows[0].p = 0.9999999999999;
    rows[0].grad_softmax = -1e-13;
    rows[0].grad_intra = -0.03;
    rows[1] = rows[0];
    rows[1].sample_id = 1;
    rows[1].label = 0;

    std::ostringstream os;
    io::write_sphere_csv(rows, os);
    std::istringstream is(os.str());
    auto back = io::read_sphere_csv(is);
    REQUIRE(back.size() == 2);
    CHECK(back[0].sample_id == 0);
    CHECK(back[0].label == 3);
    CHECK((back[0].embedding - rows[0].embedding).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back[0].z == rows[0].z);
    CHECK(back[0].p == rows[0].p);
    CHECK(back[0].grad_softmax == rows[0].grad_softmax);
    CHECK(back[0].grad_intra == rows[0].grad_intra);

    const std::string header = os.str().substr(0, os.str().find('\n'));
    CHECK(header == "sample_id,label,e0,e1,e2,z,p,grad_softmax,grad_intra");
}

TEST_CASE("report JSON exposes the stable key names") {
    evaluation::DistributionReport rep;
    evaluation::ClassStats cs;
    cs.label = 2;
    cs.mean_direction = Vector(3);
    cs.mean_direction << 0, 0, 1;
    cs.radius_p50 = 0.1;
    cs.radius_p95 = 0.2;
    cs.anisotropy_index = 3.5;
    rep.per_class.push_back(cs);
    rep.min_interclass_mean_angle = 1.2;
    rep.margin_proxy = 0.8;
    rep.verification_accuracy = 0.99;
    rep.best_threshold = 0.41;

    auto j = io::report_to_json(rep);
    CHECK(j["per_class"][0]["label"] == 2);
    CHECK(j["per_class"][0]["angular_radius_p50_rad"] == 0.1);
    CHECK(j["per_class"][0]["angular_radius_p95_rad"] == 0.2);
    CHECK(j["per_class"][0]["anisotropy_index"] == 3.5);
    CHECK(j["global"]["min_interclass_mean_angle_rad"] == 1.2);
    CHECK(j["global"]["margin_proxy_rad"] == 0.8);
    CHECK(j["global"]["verification_accuracy"] == 0.99);
    CHECK(j["global"]["best_threshold"] == 0.41);
}

TEST_CASE("model JSON carries backbone kind and parameters") {
    auto lookup = trainer::Backbone::lookup_table(4, 3, 1);
    Matrix w = Matrix::Identity(3, 3);
    auto j = io::model_to_json(lookup, w);
    CHECK(j["backbone"] == "lookup_table");
    CHECK(j["embed_dim"] == 3);
    CHECK(j["table"].size() == 4);
    CHECK(j["class_weights"].size() == 3);

    auto mlp = trainer::Backbone::mlp(3, 5, 2, 1);
    auto jm = io::model_to_json(mlp, Matrix::Identity(2, 2));
    CHECK(jm["backbone"] == "mlp");
    CHECK(jm["hidden_dim"] == 5);
    CHECK(jm["w1"].size() == 3);
    CHECK(jm["w2"].size() == 5);
}

TEST_CASE("config defaults mirror the documented hyperparameters") {
    auto cfg = load_run_config("{}");
    CHECK(cfg.seed == 1);
    CHECK(cfg.dataset.num_classes == 8);
    CHECK(cfg.dataset.samples_per_class == 200);
    CHECK(cfg.dataset.input_dim == 3);
    CHECK(cfg.loss.margin.scheme == margin::Scheme::Norm);
    CHECK(cfg.loss.margin.scale_s == 30.0);
    CHECK(cfg.loss.margin.m1 == 4);
    CHECK(cfg.loss.margin.m2 == 0.35);
    CHECK(cfg.loss.margin.m3 == 0.5);
    CHECK_FALSE(cfg.loss.use_intra);
    CHECK(cfg.train.train.learning_rate == 0.1);
    CHECK(cfg.train.train.momentum == 0.9);
    CHECK(cfg.train.train.weight_decay == 5e-4);
    CHECK(cfg.train.train.batch_size == 64);
    CHECK(cfg.train.train.total_iterations == 2000);
    CHECK(cfg.train.train.stage2_start == 1200);  // 60% of total
    CHECK(cfg.num_pairs == 600);
}

TEST_CASE("config rejects unknown keys naming the offender") {
    try {
        load_run_config(R"({"dataset": {"num_classess": 4}})");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("num_classess") != std::string::npos);
    }
    CHECK_THROWS_AS(load_run_config(R"({"margin": {"m4": 1}})"), ConfigError);
    CHECK_THROWS_AS(load_run_config(R"({"typo": 1})"), ConfigError);
    CHECK_THROWS_AS(load_run_config(R"({"train": {"lr": 0.1}})"), ConfigError);
}

TEST_CASE("config validates values") {
    CHECK_THROWS_AS(load_run_config(R"({"margin": {"scheme": "arcface"}})"), ConfigError);
    CHECK_THROWS_AS(load_run_config(R"({"margin": {"scale_s": -1}})"), ConfigError);
    CHECK_THROWS_AS(load_run_config(R"({"margin": {"m2": 1.5}})"), ConfigError);
    CHECK_THROWS_AS(load_run_config(R"({"dataset": {"num_classes": 1}})"), ConfigError);
    CHECK_THROWS_AS(load_run_config(R"({"train": {"momentum": 1.0}})"), ConfigError);
    CHECK_THROWS_AS(load_run_config(R"({"train": {"stage2_start": 99999}})"), ConfigError);
    CHECK_THROWS_AS(load_run_config(R"({"intra": {"alpha": 0}})"), ConfigError);
    CHECK_THROWS_AS(load_run_config("not json"), ConfigError);
    // Intra over Plain logits has no optimum point.
    CHECK_THROWS_AS(
        load_run_config(R"({"margin": {"scheme": "plain"}, "intra": {}})"),
        ConfigError);
}

TEST_CASE("config parses a full run with schemes and variants") {
    const char* text = R"({
        "seed": 42,
        "dataset": {"num_classes": 4, "samples_per_class": 20, "cluster_spread": 0.3},
        "margin": {"scheme": "additive_cosine", "m2": 0.2},
        "intra": {"alpha": 4.0, "gamma": 0.5},
        "train": {"backbone": "mlp", "hidden_dim": 8, "learning_rate": 0.05,
                  "lr_milestones": [100], "total_iterations": 200,
                  "stage2_start": 120, "stage2_mode": "intra_only"},
        "num_pairs": 40,
        "configs": [
            {"name": "am", "margin": {"scheme": "additive_cosine"}},
            {"margin": {"scheme": "additive_cosine"}, "intra": {}}
        ]
    })";
    auto cfg = load_run_config(text);
    CHECK(cfg.seed == 42);
    CHECK(cfg.dataset.num_classes == 4);
    CHECK(cfg.dataset.cluster_spread == 0.3);
    CHECK(cfg.loss.margin.scheme == margin::Scheme::AdditiveCosine);
    CHECK(cfg.loss.margin.m2 == 0.2);
    CHECK(cfg.loss.use_intra);
    auto icfg = cfg.loss.intra_config();
    REQUIRE(icfg.has_value());
    CHECK(icfg->alpha == 4.0);
    CHECK(icfg->beta == Approx(30.0 * 0.8 - 0.5));
    CHECK(cfg.train.backbone == trainer::BackboneKind::MLP);
    CHECK(cfg.train.hidden_dim == 8);
    CHECK(cfg.train.train.lr_milestones == std::vector<long>{100});
    CHECK(cfg.train.train.stage2_mode == trainer::Stage2Mode::IntraOnly);
    CHECK(cfg.num_pairs == 40);
    REQUIRE(cfg.compare_variants.size() == 2);
    CHECK(cfg.compare_variants[0].name == "am");
    CHECK_FALSE(cfg.compare_variants[0].use_intra);
    CHECK(cfg.compare_variants[1].name == "intra+additive_cosine");
    CHECK(cfg.compare_variants[1].use_intra);
}

TEST_CASE("intra enabled=false yields no intra config") {
    auto cfg = load_run_config(
        R"({"margin": {"scheme": "additive_cosine"}, "intra": {"enabled": false}})");
    CHECK_FALSE(cfg.loss.use_intra);
    CHECK_FALSE(cfg.loss.intra_config().has_value());
}

TEST_CASE("dataset and train seeds derive from the run seed") {
    auto a = load_run_config(R"({"seed": 1})");
    auto b = load_run_config(R"({"seed": 1})");
    auto c = load_run_config(R"({"seed": 2})");
    CHECK(a.dataset.seed == b.dataset.seed);
    CHECK(a.train.train.seed == b.train.train.seed);
    CHECK(a.dataset.seed != c.dataset.seed);
    CHECK(a.dataset.seed != a.train.train.seed);
}

TEST_CASE("scheme_to_string and scheme_from_string are inverse") {
    for (auto s : {margin::Scheme::Plain, margin::Scheme::Norm,
                   margin::Scheme::MultiplicativeAngular, margin::Scheme::AdditiveCosine,
                   margin::Scheme::AdditiveAngular})
        CHECK(config::scheme_from_string(config::scheme_to_string(s)) == s);
}
