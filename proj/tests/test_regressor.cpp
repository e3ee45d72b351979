#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "afc/error.hpp"
#include "afc/regressor.hpp"
#include "afc/rng.hpp"

using namespace afc;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

LstmStack zero_model(const std::vector<int>& widths, int l, int m) {
    LstmStack model = init_model(widths, l, m, 0);
    for (auto& layer : model.layers) {
        layer.input_weights.setZero();
        layer.recurrent_weights.setZero();
        layer.bias.setZero();
    }
    model.dense_weights.setZero();
    model.dense_bias = 0.0;
    return model;
}

Eigen::MatrixXd random_windows(int count, int l, int m, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd w(count, l * m);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
        for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform();
    return w;
}

// A linearly separable planted problem: label 1 iff the last-row first
// feature exceeds 0.5.
WindowedSet planted_set(int count, int l, int m, std::uint64_t seed) {
    WindowedSet ws;
    ws.spec = {l, m, 0};
    ws.inputs = random_windows(count, l, m, seed);
    ws.y1.resize(static_cast<std::size_t>(count));
    ws.y2.resize(static_cast<std::size_t>(count));
    ws.source_rows.resize(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const double v = ws.inputs(i, (l - 1) * m);
        ws.y1[static_cast<std::size_t>(i)] = v > 0.5 ? 1 : 0;
        ws.y2[static_cast<std::size_t>(i)] = ws.y1[static_cast<std::size_t>(i)];
        ws.source_rows[static_cast<std::size_t>(i)] = i;
    }
    return ws;
}

}  // namespace

TEST_CASE("count_params matches the layer formula on a small stack") {
    // 4*((d_in + h)*h + h) per layer plus the (L*h_last + 1) dense head:
    // [5,3] with L=3, M=4 -> 200 + 108 + 10 = 318.
    LstmStack model = init_model({5, 3}, 3, 4, 0);
    CHECK(count_params(model) == 318);
}

TEST_CASE("count_params matches brute-force enumeration of stored scalars") {
    LstmStack model = init_model({7, 4, 2}, 5, 3, 1);
    long long scalars = 0;
    for (const auto& layer : model.layers) {
        scalars += layer.input_weights.size() + layer.recurrent_weights.size() +
                   layer.bias.size();
    }
    scalars += model.dense_weights.size() + 1;
    CHECK(count_params(model) == scalars);
}

TEST_CASE("default architecture parameter counts") {
    LstmStack model = init_model({512, 256, 128, 64, 32, 16}, 12, 136, 0);
    CHECK(count_params(model) == 2378881);
    const long long expected[] = {1329152, 787456, 197120, 49408, 12416, 3136};
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const auto& layer = model.layers[i];
        CHECK(layer.input_weights.size() + layer.recurrent_weights.size() + layer.bias.size() ==
              expected[i]);
    }
    CHECK(model.dense_weights.size() + 1 == 193);
}

TEST_CASE("init_model is deterministic and validates widths") {
    LstmStack a = init_model({4, 2}, 3, 2, 42);
    LstmStack b = init_model({4, 2}, 3, 2, 42);
    CHECK(a.layers[0].input_weights == b.layers[0].input_weights);
    CHECK(a.dense_weights == b.dense_weights);
    LstmStack c = init_model({4, 2}, 3, 2, 43);
    CHECK(a.layers[0].input_weights != c.layers[0].input_weights);

    // forget-gate bias block is 1, others 0
    const int h = 4;
    CHECK(a.layers[0].bias.segment(0, h).isZero());
    CHECK(a.layers[0].bias.segment(h, h).isOnes());
    CHECK(a.layers[0].bias.segment(2 * h, 2 * h).isZero());

    CHECK_THROWS_AS(init_model({0}, 3, 2, 0), UsageError);
    CHECK_THROWS_AS(init_model({}, 3, 2, 0), UsageError);
}

TEST_CASE("zero model outputs sigmoid(0) = 0.5 for any input") {
    LstmStack model = zero_model({3, 2}, 4, 3);
    Eigen::VectorXd p = forward(model, random_windows(8, 4, 3, 7));
    for (Eigen::Index i = 0; i < p.size(); ++i) CHECK(p(i) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("outputs bounded in (0,1) for 1000 random inputs") {
    LstmStack model = init_model({5, 3}, 4, 2, 11);
    Eigen::VectorXd p = forward(model, random_windows(1000, 4, 2, 12));
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        CHECK(p(i) > 0.0);
        CHECK(p(i) < 1.0);
    }
}

TEST_CASE("tiny model matches a hand-computed cell recursion") {
    // L=2, M=1, one hidden unit; scalar oracle written independently.
    LstmStack model = init_model({1}, 2, 1, 0);
    const double wxi = 0.3, wxf = -0.2, wxg = 0.5, wxo = 0.4;
    const double whi = 0.1, whf = 0.2, whg = -0.3, who = 0.6;
    const double bi = 0.05, bf = 1.0, bg = -0.1, bo = 0.2;
    model.layers[0].input_weights << wxi, wxf, wxg, wxo;
    model.layers[0].recurrent_weights << whi, whf, whg, who;
    model.layers[0].bias << bi, bf, bg, bo;
    model.dense_weights << 0.7, -0.9;
    model.dense_bias = 0.15;

    const double x0 = 0.8, x1 = -0.4;
    double h = 0.0, c = 0.0;
    double hs[2];
    for (int t = 0; t < 2; ++t) {
        const double x = t == 0 ? x0 : x1;
        const double i = sigmoid(wxi * x + whi * h + bi);
        const double f = sigmoid(wxf * x + whf * h + bf);
        const double g = std::tanh(wxg * x + whg * h + bg);
        const double o = sigmoid(wxo * x + who * h + bo);
        c = f * c + i * g;
        h = o * std::tanh(c);
        hs[t] = h;
    }
    const double expected = sigmoid(0.7 * hs[0] - 0.9 * hs[1] + 0.15);

    Eigen::RowVectorXd window(2);
    window << x0, x1;
    CHECK(forward_one(model, window) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("batched evaluation equals one-by-one evaluation") {
    LstmStack model = init_model({4, 3}, 5, 2, 21);
    Eigen::MatrixXd windows = random_windows(17, 5, 2, 22);
    Eigen::VectorXd batched = forward(model, windows);
    for (Eigen::Index i = 0; i < windows.rows(); ++i) {
        CHECK(std::abs(batched(i) - forward_one(model, windows.row(i))) < 1e-12);
    }
}

TEST_CASE("gradient check on a tiny stack") {
    LstmStack model = init_model({3}, 3, 2, 5);
    Eigen::MatrixXd windows = random_windows(4, 3, 2, 6);
    std::vector<std::uint8_t> targets = {1, 0, 1, 0};
    CHECK(gradient_check(model, windows, targets, 1e-5) < 1e-4);
}

TEST_CASE("gradient check exercises every gate path distinctly") {
    // Large biases drive forget/input/output gates toward saturation in
    // different directions; gradients must still match.
    LstmStack model = init_model({2, 2}, 4, 2, 9);
    model.layers[0].bias.segment(0, 2).array() = 1.5;   // input gate open
    model.layers[0].bias.segment(2, 2).array() = -1.5;  // forget gate closed
    model.layers[0].bias.segment(6, 2).array() = 2.0;   // output gate open
    Eigen::MatrixXd windows = 2.0 * random_windows(3, 4, 2, 10);
    std::vector<std::uint8_t> targets = {0, 1, 1};
    CHECK(gradient_check(model, windows, targets, 1e-5) < 1e-4);
}

TEST_CASE("zero model analytic dense-bias gradient is sigmoid(0) - y") {
    LstmStack model = zero_model({2}, 3, 2);
    Eigen::MatrixXd windows = random_windows(1, 3, 2, 30);
    LstmGradients grads;
    loss_and_gradients(model, windows, {1}, grads);
    CHECK(grads.dense_bias == doctest::Approx(0.5 - 1.0).epsilon(1e-12));
    loss_and_gradients(model, windows, {0}, grads);
    CHECK(grads.dense_bias == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("finite-difference error is V-shaped in epsilon") {
    LstmStack model = init_model({3}, 3, 2, 13);
    Eigen::MatrixXd windows = random_windows(3, 3, 2, 14);
    std::vector<std::uint8_t> targets = {1, 0, 1};
    const double coarse = gradient_check(model, windows, targets, 1e-2);
    const double mid = gradient_check(model, windows, targets, 1e-5);
    const double fine = gradient_check(model, windows, targets, 1e-10);
    CHECK(mid < coarse);  // truncation dominates at large epsilon
    CHECK(mid < fine);    // round-off dominates at tiny epsilon
}

TEST_CASE("training drives a constant-zero-target problem below 0.1") {
    WindowedSet ws;
    ws.spec = {4, 2, 0};
    ws.inputs = random_windows(128, 4, 2, 40);
    ws.y1.assign(128, 0);
    ws.y2.assign(128, 0);
    ws.source_rows.assign(128, 0);

    LstmStack model = init_model({4}, 4, 2, 41);
    TrainConfig cfg;
    cfg.epochs_per_dataset = 40;
    cfg.learning_rate = 0.05;
    cfg.seed = 41;
    train(model, {ws}, {"d0"}, cfg);
    Eigen::VectorXd p = forward(model, ws.inputs);
    CHECK(p.maxCoeff() < 0.1);
}

TEST_CASE("epoch accounting: datasets x epochs_per_dataset records") {
    std::vector<WindowedSet> sets;
    std::vector<std::string> ids;
    for (int d = 0; d < 9; ++d) {
        sets.push_back(planted_set(32, 3, 2, 50 + static_cast<std::uint64_t>(d)));
        ids.push_back("wt" + std::to_string(d));
    }
    LstmStack model = init_model({3}, 3, 2, 51);
    TrainConfig cfg;
    cfg.epochs_per_dataset = 10;
    cfg.seed = 51;
    auto trace = train(model, sets, ids, cfg);
    CHECK(trace.size() == 90);
}

TEST_CASE("training is deterministic given seed and data") {
    auto run = [] {
        LstmStack model = init_model({4, 2}, 4, 2, 60);
        TrainConfig cfg;
        cfg.epochs_per_dataset = 3;
        cfg.seed = 60;
        WindowedSet ws = planted_set(100, 4, 2, 61);
        train(model, {ws}, {"d"}, cfg);
        return model;
    };
    LstmStack a = run();
    LstmStack b = run();
    CHECK(a.layers[0].input_weights == b.layers[0].input_weights);
    CHECK(a.layers[1].recurrent_weights == b.layers[1].recurrent_weights);
    CHECK(a.dense_weights == b.dense_weights);
    CHECK(a.dense_bias == b.dense_bias);
}

TEST_CASE("loss halves on a separable planted problem") {
    WindowedSet ws = planted_set(256, 4, 2, 70);
    LstmStack model = init_model({8}, 4, 2, 71);
    TrainConfig cfg;
    cfg.epochs_per_dataset = 25;
    cfg.learning_rate = 0.02;
    cfg.seed = 71;
    auto trace = train(model, {ws}, {"d"}, cfg);
    REQUIRE(trace.size() == 25);
    CHECK(trace.back().mean_loss <= 0.5 * trace.front().mean_loss);
}

TEST_CASE("predict_binary threshold semantics") {
    LstmStack model = zero_model({2}, 3, 2);
    Eigen::MatrixXd windows = random_windows(4, 3, 2, 80);
    ForecastOutput out = predict_binary(model, windows, 0.5);
    for (auto b : out.binary) CHECK(b == 1);  // 0.5 >= 0.5

    CHECK_THROWS_AS(predict_binary(model, windows, 1.0), UsageError);
    CHECK_THROWS_AS(predict_binary(model, windows, 0.0), UsageError);
}

TEST_CASE("train input validation") {
    LstmStack model = init_model({3}, 3, 2, 90);
    TrainConfig cfg;
    CHECK_THROWS_AS(train(model, {}, {}, cfg), UsageError);
    WindowedSet wrong = planted_set(16, 4, 2, 91);  // L mismatch
    CHECK_THROWS_AS(train(model, {wrong}, {"d"}, cfg), UsageError);
}

TEST_CASE("depth_sweep reports one row per stack with recall in [0,1]") {
    std::vector<WindowedSet> train_sets = {planted_set(200, 3, 2, 100)};
    WindowedSet eval_set = planted_set(100, 3, 2, 101);
    TrainConfig cfg;
    cfg.epochs_per_dataset = 5;
    cfg.seed = 100;

    auto one = depth_sweep({{8}}, train_sets, eval_set, cfg);
    REQUIRE(one.size() == 1);

    auto two = depth_sweep({{16}, {32, 16}}, train_sets, eval_set, cfg);
    REQUIRE(two.size() == 2);
    for (const auto& row : two) {
        CHECK(row.recall >= 0.0);
        CHECK(row.recall <= 1.0);
    }
}
