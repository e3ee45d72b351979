#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "afc/error.hpp"
#include "afc/pipeline.hpp"
#include "afc/rng.hpp"

using namespace afc;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / "afc_pipeline_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

SynthSpec smoke_spec() {
    SynthSpec spec;
    spec.n_turbines = 3;
    spec.rows_per_turbine = 500;
    spec.n_params = 4;
    spec.alarm_tags = {{1, 0.04}, {2, 0.04}};
    spec.precursor_rules = {{0, 5.0, 1, 1}, {1, 5.0, 1, 2}};
    spec.noise_std = 0.02;
    spec.nan_injection = {0.02, 0.02, 0.0, 0.0};
    spec.seed = 11;
    return spec;
}

std::string smoke_config(const fs::path& data_dir, const fs::path& out_dir) {
    std::ostringstream cfg;
    cfg << "data_dir = " << data_dir.string() << "\n"
        << "turbines = WT01,WT02,WT03\n"
        << "train_turbines = WT01,WT02\n"
        << "test_turbines = WT03\n"
        << "window_length = 6\n"
        << "fw = 1\n"
        << "layer_widths = 8\n"
        << "epochs_per_dataset = 12\n"
        << "learning_rate = 0.02\n"
        << "batch_size = 32\n"
        << "seed = 5\n"
        << "rf_trees = 10\n"
        << "out_dir = " << out_dir.string() << "\n";
    return cfg.str();
}

}  // namespace

TEST_CASE("config parsing defaults and overrides") {
    PipelineConfig cfg = parse_config_text(
        "turbines = A,B,C,D,E\n"
        "data_dir = /data\n");
    // default 60-40 split over whole turbines
    CHECK(cfg.train_turbines == std::vector<std::string>{"A", "B", "C"});
    CHECK(cfg.test_turbines == std::vector<std::string>{"D", "E"});
    CHECK(cfg.reference_turbine == "A");
    CHECK(cfg.nan_threshold == 0.20);
    CHECK(cfg.window_length == 12);
    CHECK(cfg.layer_widths == std::vector<int>{512, 256, 128, 64, 32, 16});
    CHECK(cfg.train.epochs_per_dataset == 10);
    CHECK(cfg.knn_k == 5);
    CHECK(cfg.forest.n_trees == 100);
}

TEST_CASE("config validation") {
    CHECK_THROWS_AS(parse_config_text(""), UsageError);  // no turbines
    CHECK_THROWS_AS(parse_config_text("turbines = A,B\n"
                                      "train_turbines = A\n"
                                      "test_turbines = A\n"),
                    UsageError);  // overlap
    CHECK_THROWS_AS(parse_config_text("turbines = A,B\n"
                                      "train_turbines = A\n"
                                      "test_turbines = B\n"
                                      "fw = 4\n"),
                    UsageError);  // fw out of range
    CHECK_THROWS_AS(parse_config_text("turbines = A,B\nnot a kv line\n"), UsageError);
}

TEST_CASE("merged dataset artifact round-trip") {
    SynthResult r = generate(smoke_spec());
    fs::path dir = fresh_dir("merged_rt");
    const std::string path = (dir / "m.bin").string();
    save_merged(r.datasets[0], path);
    MergedDataset back = load_merged(path);
    CHECK(back.turbine_id == r.datasets[0].turbine_id);
    CHECK(back.timestamps == r.datasets[0].timestamps);
    CHECK(back.param_ids == r.datasets[0].param_ids);
    CHECK(back.y1 == r.datasets[0].y1);
    CHECK(back.y2 == r.datasets[0].y2);
    // NaNs compare false; compare bit patterns via serialized bytes instead
    save_merged(back, (dir / "m2.bin").string());
    CHECK(read_file(dir / "m.bin") == read_file(dir / "m2.bin"));
}

TEST_CASE("model artifact round-trip") {
    LstmStack model = init_model({5, 3}, 4, 3, 77);
    fs::path dir = fresh_dir("model_rt");
    const std::string path = (dir / "model.bin").string();
    save_model(model, 0.5, 123, path);
    LstmStack back = load_model(path);
    CHECK(back.layer_widths == model.layer_widths);
    CHECK(back.steps == model.steps);
    CHECK(back.features == model.features);
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        CHECK(back.layers[i].input_weights == model.layers[i].input_weights);
        CHECK(back.layers[i].recurrent_weights == model.layers[i].recurrent_weights);
        CHECK(back.layers[i].bias == model.layers[i].bias);
    }
    CHECK(back.dense_weights == model.dense_weights);
    CHECK(back.dense_bias == model.dense_bias);
}

TEST_CASE("classifier artifact round-trips preserve predictions") {
    Rng rng(9);
    Eigen::MatrixXd x(30, 4);
    std::vector<int> y;
    for (Eigen::Index i = 0; i < 30; ++i) {
        for (Eigen::Index j = 0; j < 4; ++j) x(i, j) = rng.uniform();
        y.push_back(1 + static_cast<int>(rng.below(3)));
    }
    fs::path dir = fresh_dir("cls_rt");

    KnnModel knn(x, y, 3);
    save_knn(knn, (dir / "knn.bin").string());
    KnnModel knn2 = load_knn((dir / "knn.bin").string());

    DecisionTree tree = DecisionTree::fit(x, y, {});
    save_tree(tree, (dir / "dt.json").string());
    DecisionTree tree2 = load_tree((dir / "dt.json").string());

    ForestParams fp;
    fp.n_trees = 8;
    RandomForest forest = RandomForest::fit(x, y, fp, 1);
    save_forest(forest, (dir / "rf.json").string());
    RandomForest forest2 = load_forest((dir / "rf.json").string());

    for (int q = 0; q < 20; ++q) {
        Eigen::RowVectorXd query(4);
        for (Eigen::Index j = 0; j < 4; ++j) query(j) = rng.uniform();
        CHECK(knn.predict(query) == knn2.predict(query));
        CHECK(tree.predict(query) == tree2.predict(query));
        CHECK(forest.predict(query) == forest2.predict(query));
    }
}

TEST_CASE("synth spec file parsing") {
    fs::path dir = fresh_dir("spec_file");
    std::ofstream out(dir / "spec.cfg");
    out << "n_turbines = 2\n"
           "rows_per_turbine = 300\n"
           "n_params = 3\n"
           "alarm_tags = 1:0.05,2:0.02\n"
           "rules = 0:4.0:1:1,1:4.0:2:2\n"
           "nan_injection = 0.1,0.0,0.0\n"
           "noise_std = 0.01\n"
           "seed = 9\n";
    out.close();
    SynthSpec spec = load_synth_spec((dir / "spec.cfg").string());
    CHECK(spec.n_turbines == 2);
    CHECK(spec.alarm_tags.size() == 2);
    CHECK(spec.alarm_tags[1].base_rate == 0.02);
    REQUIRE(spec.precursor_rules.size() == 2);
    CHECK(spec.precursor_rules[1].lead == 2);
    CHECK(spec.nan_injection.size() == 3);
}

TEST_CASE("pipeline smoke run: preprocess, train, evaluate") {
    fs::path data = fresh_dir("smoke_data");
    fs::path out = fresh_dir("smoke_out");
    run_synth(smoke_spec(), data.string());
    CHECK(fs::exists(data / "scada_WT01.csv"));
    CHECK(fs::exists(data / "ground_truth.json"));

    PipelineConfig cfg = parse_config_text(smoke_config(data, out));
    run_preprocess(cfg);
    CHECK(fs::exists(out / "retention.json"));
    CHECK(fs::exists(out / "scaler.json"));
    CHECK(fs::exists(out / "codebook.json"));
    CHECK(fs::exists(out / "nan_stats.csv"));
    CHECK(fs::exists(out / "merged" / "WT03.bin"));

    // homogeneity: identical retained ids across all cached turbines
    MergedDataset a = load_merged((out / "merged" / "WT01.bin").string());
    MergedDataset b = load_merged((out / "merged" / "WT03.bin").string());
    CHECK(a.param_ids == b.param_ids);
    CHECK_FALSE(a.values.hasNaN());
    CHECK(a.values.minCoeff() >= 0.0);
    CHECK(a.values.maxCoeff() <= 1.0);

    run_train(cfg);
    CHECK(fs::exists(out / "fw1" / "model.bin"));
    CHECK(fs::exists(out / "fw1" / "loss_trace.csv"));
    CHECK(fs::exists(out / "fw1" / "knn.bin"));

    auto reports = run_evaluate(cfg);
    REQUIRE(reports.size() == 1);
    CHECK(reports[0].turbine == "WT03");
    CHECK(fs::exists(out / "fw1" / "report_WT03.json"));
    CHECK(fs::exists(out / "fw1" / "report_WT03.csv"));
    CHECK(fs::exists(out / "summary.csv"));
    CHECK((reports[0].chosen_model == "KNN" || reports[0].chosen_model == "DT" ||
           reports[0].chosen_model == "RF"));
}

TEST_CASE("missing stage artifacts produce data errors naming the path") {
    fs::path data = fresh_dir("missing_data");
    fs::path out = fresh_dir("missing_out");
    PipelineConfig cfg = parse_config_text(smoke_config(data, out));
    CHECK_THROWS_WITH_AS(run_preprocess(cfg), doctest::Contains("scada_WT01.csv"), DataError);
    CHECK_THROWS_WITH_AS(run_train(cfg), doctest::Contains("run the preprocess stage"), DataError);
    CHECK_THROWS_WITH_AS(run_evaluate(cfg), doctest::Contains("codebook"), DataError);
}

TEST_CASE("test-turbine perturbation leaves training artifacts unchanged") {
    fs::path data = fresh_dir("leak_data");
    run_synth(smoke_spec(), data.string());

    fs::path out1 = fresh_dir("leak_out1");
    PipelineConfig cfg1 = parse_config_text(smoke_config(data, out1));
    run_preprocess(cfg1);
    run_train(cfg1);

    // Perturb the test turbine's SCADA values (same alarm code set).
    {
        std::ifstream in(data / "scada_WT03.csv");
        std::ostringstream buf;
        buf << in.rdbuf();
        std::string contents = buf.str();
        in.close();
        std::ofstream outf(data / "scada_WT03.csv");
        std::istringstream lines(contents);
        std::string line;
        bool header = true;
        while (std::getline(lines, line)) {
            if (header) {
                outf << line << "\n";
                header = false;
            } else {
                outf << line << "9\n";  // append a digit to the last value
            }
        }
    }

    fs::path out2 = fresh_dir("leak_out2");
    PipelineConfig cfg2 = parse_config_text(smoke_config(data, out2));
    run_preprocess(cfg2);
    run_train(cfg2);

    for (const char* artifact : {"retention.json", "scaler.json"}) {
        CHECK(read_file(out1 / artifact) == read_file(out2 / artifact));
    }
    for (const char* artifact : {"fw1/model.bin", "fw1/knn.bin", "fw1/dt.json", "fw1/rf.json"}) {
        CHECK(read_file(out1 / artifact) == read_file(out2 / artifact));
    }
}

TEST_CASE("config hash is stable and sensitive to training keys") {
    PipelineConfig a = parse_config_text("turbines = A,B,C\ndata_dir = /d\n");
    PipelineConfig b = parse_config_text("turbines = A,B,C\ndata_dir = /d\n");
    CHECK(config_hash(a) == config_hash(b));
    b.train.seed = 99;
    CHECK(config_hash(a) != config_hash(b));
}
