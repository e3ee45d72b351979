#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "afc/windowing.hpp"

namespace afc {

// One recurrent layer. Gate rows of Wx/Wh/b are grouped [input; forget;
// candidate; output], each block of size hidden.
struct LstmLayer {
    Eigen::MatrixXd input_weights;      // 4h x d_in
    Eigen::MatrixXd recurrent_weights;  // 4h x h
    Eigen::VectorXd bias;               // 4h

    int hidden() const { return static_cast<int>(recurrent_weights.cols()); }
    int input_dim() const { return static_cast<int>(input_weights.cols()); }
};

// Stacked sequence-to-sequence LSTM layers followed by a single-unit dense
// head over the flattened final sequence, sigmoid output.
struct LstmStack {
    std::vector<int> layer_widths;
    int steps = 0;     // L
    int features = 0;  // M
    std::vector<LstmLayer> layers;
    Eigen::VectorXd dense_weights;  // steps * last width, time-major
    double dense_bias = 0.0;
};

struct TrainConfig {
    int epochs_per_dataset = 10;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int batch_size = 64;
    std::uint64_t seed = 0;
    double decision_threshold = 0.5;
    double gradient_clip_norm = 1.0;
};

struct ForecastOutput {
    Eigen::VectorXd probabilities;      // in [0,1]
    std::vector<std::uint8_t> binary;   // 1 iff probability >= threshold
};

struct EpochRecord {
    std::string dataset_id;
    int epoch = 0;       // 1-based within dataset
    double mean_loss = 0.0;
};

// Uniform +-1/sqrt(fan-in) weights, forget-gate bias 1, other biases 0.
LstmStack init_model(const std::vector<int>& layer_widths, int steps, int features,
                     std::uint64_t seed);

long long count_params(const LstmStack& model);

// Batched forward pass; each row of `windows` is one flattened L*M window
// (time-major). Returns one probability per row.
Eigen::VectorXd forward(const LstmStack& model, const Eigen::MatrixXd& windows);

double forward_one(const LstmStack& model, const Eigen::RowVectorXd& window);

// Mean binary cross-entropy over a batch plus analytic gradients (same
// layout as the model). Used by train and by the finite-difference check.
struct LstmGradients {
    std::vector<LstmLayer> layers;  // reused as gradient storage
    Eigen::VectorXd dense_weights;
    double dense_bias = 0.0;
};
double loss_and_gradients(const LstmStack& model, const Eigen::MatrixXd& windows,
                          const std::vector<std::uint8_t>& targets, LstmGradients& grads);

// Sequential training over datasets in the given order; Adam with global
// gradient-norm clipping. One EpochRecord per (dataset, epoch).
std::vector<EpochRecord> train(LstmStack& model, const std::vector<WindowedSet>& datasets,
                               const std::vector<std::string>& dataset_ids,
                               const TrainConfig& cfg);

// Max over all parameters of the relative error between analytic and
// central-finite-difference gradients.
double gradient_check(const LstmStack& model, const Eigen::MatrixXd& windows,
                      const std::vector<std::uint8_t>& targets, double epsilon);

ForecastOutput predict_binary(const LstmStack& model, const Eigen::MatrixXd& windows,
                              double threshold);

struct DepthSweepRow {
    std::vector<int> layer_widths;
    double recall = 0.0;
};

// Trains one model per widths stack on identical data and seed, reports
// recall on the evaluation set.
std::vector<DepthSweepRow> depth_sweep(const std::vector<std::vector<int>>& stacks,
                                       const std::vector<WindowedSet>& train_sets,
                                       const WindowedSet& eval_set, const TrainConfig& cfg);

}  // namespace afc
