#include "afc/regressor.hpp"

#include <cmath>
#include <numeric>

#include "afc/error.hpp"
#include "afc/rng.hpp"

namespace afc {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

MatrixXd sigmoid_m(const MatrixXd& x) {
    return x.unaryExpr([](double v) { return sigmoid(v); });
}

// Forward caches for one layer over a batch: gate activations, cell and
// hidden states per time step.
struct LayerCache {
    std::vector<MatrixXd> gate_i, gate_f, gate_g, gate_o;  // B x h per step
    std::vector<MatrixXd> cell, hidden;                    // B x h per step
};

struct ForwardCache {
    std::vector<std::vector<MatrixXd>> inputs;  // per layer, per step: B x d_in
    std::vector<LayerCache> layers;
    VectorXd logits;           // B
    VectorXd probabilities;    // B
    MatrixXd flat_top;         // B x (L * h_last), time-major
};

void run_forward(const LstmStack& model, const MatrixXd& windows, ForwardCache& cache) {
    const int b = static_cast<int>(windows.rows());
    const int l = model.steps;
    const int m = model.features;
    if (windows.cols() != static_cast<Eigen::Index>(l) * m) {
        throw UsageError("forward: window width " + std::to_string(windows.cols()) +
                         " != L*M = " + std::to_string(l * m));
    }

    cache.inputs.assign(model.layers.size(), {});
    cache.layers.assign(model.layers.size(), {});

    // Layer 0 input: slice flattened windows per time step.
    std::vector<MatrixXd> seq(static_cast<std::size_t>(l));
    for (int t = 0; t < l; ++t) seq[static_cast<std::size_t>(t)] = windows.middleCols(t * m, m);

    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        const LstmLayer& layer = model.layers[li];
        const int h = layer.hidden();
        LayerCache& lc = cache.layers[li];
        lc.gate_i.resize(static_cast<std::size_t>(l));
        lc.gate_f.resize(static_cast<std::size_t>(l));
        lc.gate_g.resize(static_cast<std::size_t>(l));
        lc.gate_o.resize(static_cast<std::size_t>(l));
        lc.cell.resize(static_cast<std::size_t>(l));
        lc.hidden.resize(static_cast<std::size_t>(l));
        cache.inputs[li] = seq;

        MatrixXd h_prev = MatrixXd::Zero(b, h);
        MatrixXd c_prev = MatrixXd::Zero(b, h);
        for (int t = 0; t < l; ++t) {
            const std::size_t ts = static_cast<std::size_t>(t);
            MatrixXd a = seq[ts] * layer.input_weights.transpose() +
                         h_prev * layer.recurrent_weights.transpose();
            a.rowwise() += layer.bias.transpose();
            lc.gate_i[ts] = sigmoid_m(a.middleCols(0, h));
            lc.gate_f[ts] = sigmoid_m(a.middleCols(h, h));
            lc.gate_g[ts] = a.middleCols(2 * h, h).array().tanh();
            lc.gate_o[ts] = sigmoid_m(a.middleCols(3 * h, h));
            lc.cell[ts] = lc.gate_f[ts].cwiseProduct(c_prev) +
                          lc.gate_i[ts].cwiseProduct(lc.gate_g[ts]);
            lc.hidden[ts] = lc.gate_o[ts].cwiseProduct(lc.cell[ts].array().tanh().matrix());
            h_prev = lc.hidden[ts];
            c_prev = lc.cell[ts];
        }
        for (int t = 0; t < l; ++t) seq[static_cast<std::size_t>(t)] = lc.hidden[static_cast<std::size_t>(t)];
    }

    const int h_last = model.layers.back().hidden();
    cache.flat_top.resize(b, static_cast<Eigen::Index>(l) * h_last);
    for (int t = 0; t < l; ++t) {
        cache.flat_top.middleCols(t * h_last, h_last) = seq[static_cast<std::size_t>(t)];
    }
    cache.logits = cache.flat_top * model.dense_weights;
    cache.logits.array() += model.dense_bias;
    cache.probabilities = cache.logits.unaryExpr([](double v) { return sigmoid(v); });
}

void zero_like(const LstmStack& model, LstmGradients& g) {
    g.layers.resize(model.layers.size());
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        g.layers[i].input_weights = MatrixXd::Zero(model.layers[i].input_weights.rows(),
                                                   model.layers[i].input_weights.cols());
        g.layers[i].recurrent_weights = MatrixXd::Zero(model.layers[i].recurrent_weights.rows(),
                                                       model.layers[i].recurrent_weights.cols());
        g.layers[i].bias = VectorXd::Zero(model.layers[i].bias.size());
    }
    g.dense_weights = VectorXd::Zero(model.dense_weights.size());
    g.dense_bias = 0.0;
}

// Flat parameter view over contiguous Eigen storage; model and gradient
// structs are traversed in identical order.
struct ParamView {
    std::vector<double*> data;
    std::vector<std::size_t> size;

    template <typename Layers>
    static ParamView of(Layers& layers, VectorXd& dense_w, double& dense_b) {
        ParamView v;
        for (auto& layer : layers) {
            v.data.push_back(layer.input_weights.data());
            v.size.push_back(static_cast<std::size_t>(layer.input_weights.size()));
            v.data.push_back(layer.recurrent_weights.data());
            v.size.push_back(static_cast<std::size_t>(layer.recurrent_weights.size()));
            v.data.push_back(layer.bias.data());
            v.size.push_back(static_cast<std::size_t>(layer.bias.size()));
        }
        v.data.push_back(dense_w.data());
        v.size.push_back(static_cast<std::size_t>(dense_w.size()));
        v.data.push_back(&dense_b);
        v.size.push_back(1);
        return v;
    }

    std::size_t total() const {
        return std::accumulate(size.begin(), size.end(), std::size_t{0});
    }
};

double bce(double p, double y) {
    const double eps = 1e-12;
    const double q = std::clamp(p, eps, 1.0 - eps);
    return -(y * std::log(q) + (1.0 - y) * std::log(1.0 - q));
}

}  // namespace

LstmStack init_model(const std::vector<int>& layer_widths, int steps, int features,
                     std::uint64_t seed) {
    if (layer_widths.empty()) throw UsageError("init_model: need at least one layer");
    for (int w : layer_widths) {
        if (w <= 0) throw UsageError("init_model: non-positive layer width");
    }
    if (steps < 1 || features < 1) throw UsageError("init_model: L and M must be positive");

    Rng rng(seed);
    LstmStack model;
    model.layer_widths = layer_widths;
    model.steps = steps;
    model.features = features;

    int d_in = features;
    for (int h : layer_widths) {
        LstmLayer layer;
        const double bound_x = 1.0 / std::sqrt(static_cast<double>(d_in));
        const double bound_h = 1.0 / std::sqrt(static_cast<double>(h));
        layer.input_weights.resize(4 * h, d_in);
        for (Eigen::Index j = 0; j < layer.input_weights.cols(); ++j)
            for (Eigen::Index i = 0; i < layer.input_weights.rows(); ++i)
                layer.input_weights(i, j) = rng.uniform(-bound_x, bound_x);
        layer.recurrent_weights.resize(4 * h, h);
        for (Eigen::Index j = 0; j < layer.recurrent_weights.cols(); ++j)
            for (Eigen::Index i = 0; i < layer.recurrent_weights.rows(); ++i)
                layer.recurrent_weights(i, j) = rng.uniform(-bound_h, bound_h);
        layer.bias = VectorXd::Zero(4 * h);
        layer.bias.segment(h, h).setOnes();  // forget gate
        model.layers.push_back(std::move(layer));
        d_in = h;
    }
    const int h_last = layer_widths.back();
    const double bound_d = 1.0 / std::sqrt(static_cast<double>(steps * h_last));
    model.dense_weights.resize(static_cast<Eigen::Index>(steps) * h_last);
    for (Eigen::Index i = 0; i < model.dense_weights.size(); ++i)
        model.dense_weights(i) = rng.uniform(-bound_d, bound_d);
    model.dense_bias = 0.0;
    return model;
}

long long count_params(const LstmStack& model) {
    long long total = 0;
    for (const auto& layer : model.layers) {
        total += layer.input_weights.size() + layer.recurrent_weights.size() + layer.bias.size();
    }
    total += model.dense_weights.size() + 1;
    return total;
}

Eigen::VectorXd forward(const LstmStack& model, const MatrixXd& windows) {
    ForwardCache cache;
    run_forward(model, windows, cache);
    return cache.probabilities;
}

double forward_one(const LstmStack& model, const Eigen::RowVectorXd& window) {
    return forward(model, window)(0);
}

double loss_and_gradients(const LstmStack& model, const MatrixXd& windows,
                          const std::vector<std::uint8_t>& targets, LstmGradients& grads) {
    const int b = static_cast<int>(windows.rows());
    if (static_cast<int>(targets.size()) != b) {
        throw UsageError("loss_and_gradients: target count mismatch");
    }
    ForwardCache cache;
    run_forward(model, windows, cache);
    zero_like(model, grads);

    double loss = 0.0;
    VectorXd dlogit(b);
    for (int i = 0; i < b; ++i) {
        const double y = targets[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
        loss += bce(cache.probabilities(i), y);
        dlogit(i) = (cache.probabilities(i) - y) / b;  // BCE through sigmoid
    }
    loss /= b;

    grads.dense_weights = cache.flat_top.transpose() * dlogit;
    grads.dense_bias = dlogit.sum();

    const int l = model.steps;
    const int h_last = model.layers.back().hidden();
    MatrixXd dflat = dlogit * model.dense_weights.transpose();  // B x (L*h_last)

    // dH per step for the current (topmost unprocessed) layer.
    std::vector<MatrixXd> d_seq(static_cast<std::size_t>(l));
    for (int t = 0; t < l; ++t) {
        d_seq[static_cast<std::size_t>(t)] = dflat.middleCols(t * h_last, h_last);
    }

    for (int li = static_cast<int>(model.layers.size()) - 1; li >= 0; --li) {
        const LstmLayer& layer = model.layers[static_cast<std::size_t>(li)];
        const LayerCache& lc = cache.layers[static_cast<std::size_t>(li)];
        const auto& x_seq = cache.inputs[static_cast<std::size_t>(li)];
        LstmLayer& g = grads.layers[static_cast<std::size_t>(li)];
        const int h = layer.hidden();

        std::vector<MatrixXd> dx_seq(static_cast<std::size_t>(l));
        MatrixXd dh_carry = MatrixXd::Zero(b, h);
        MatrixXd dc_carry = MatrixXd::Zero(b, h);
        for (int t = l - 1; t >= 0; --t) {
            const std::size_t ts = static_cast<std::size_t>(t);
            const MatrixXd& gi = lc.gate_i[ts];
            const MatrixXd& gf = lc.gate_f[ts];
            const MatrixXd& gg = lc.gate_g[ts];
            const MatrixXd& go = lc.gate_o[ts];
            const MatrixXd tc = lc.cell[ts].array().tanh().matrix();

            MatrixXd dh = d_seq[ts] + dh_carry;
            MatrixXd d_o = dh.cwiseProduct(tc);
            MatrixXd dc = dc_carry +
                          dh.cwiseProduct(go).cwiseProduct(
                              (1.0 - tc.array().square()).matrix());
            MatrixXd d_i = dc.cwiseProduct(gg);
            MatrixXd d_g = dc.cwiseProduct(gi);
            const MatrixXd c_prev =
                (t > 0) ? lc.cell[ts - 1] : MatrixXd::Zero(b, h);
            MatrixXd d_f = dc.cwiseProduct(c_prev);

            MatrixXd da(b, 4 * h);
            da.middleCols(0, h) = d_i.cwiseProduct(gi).cwiseProduct((1.0 - gi.array()).matrix());
            da.middleCols(h, h) = d_f.cwiseProduct(gf).cwiseProduct((1.0 - gf.array()).matrix());
            da.middleCols(2 * h, h) = d_g.cwiseProduct((1.0 - gg.array().square()).matrix());
            da.middleCols(3 * h, h) = d_o.cwiseProduct(go).cwiseProduct((1.0 - go.array()).matrix());

            const MatrixXd h_prev = (t > 0) ? lc.hidden[ts - 1] : MatrixXd::Zero(b, h);
            g.input_weights.noalias() += da.transpose() * x_seq[ts];
            g.recurrent_weights.noalias() += da.transpose() * h_prev;
            g.bias.noalias() += da.colwise().sum().transpose();

            dh_carry = da * layer.recurrent_weights;
            dc_carry = dc.cwiseProduct(gf);
            dx_seq[ts] = da * layer.input_weights;
        }
        d_seq = std::move(dx_seq);
    }
    return loss;
}

std::vector<EpochRecord> train(LstmStack& model, const std::vector<WindowedSet>& datasets,
                               const std::vector<std::string>& dataset_ids,
                               const TrainConfig& cfg) {
    if (datasets.empty()) throw UsageError("train: empty dataset list");
    if (dataset_ids.size() != datasets.size()) throw UsageError("train: id/dataset count mismatch");
    if (cfg.epochs_per_dataset < 1) throw UsageError("train: epochs_per_dataset must be >= 1");
    for (const auto& ds : datasets) {
        if (ds.spec.length != model.steps || ds.spec.width != model.features) {
            throw UsageError("train: dataset window shape does not match model");
        }
    }

    LstmGradients grads;
    zero_like(model, grads);
    ParamView params = ParamView::of(model.layers, model.dense_weights, model.dense_bias);
    ParamView gview = ParamView::of(grads.layers, grads.dense_weights, grads.dense_bias);

    const std::size_t total = params.total();
    std::vector<double> adam_m(total, 0.0), adam_v(total, 0.0);
    long long step = 0;

    Rng rng(cfg.seed ^ 0x5bd1e995u);
    std::vector<EpochRecord> trace;

    for (std::size_t di = 0; di < datasets.size(); ++di) {
        const WindowedSet& ds = datasets[di];
        const Eigen::Index p = ds.count();
        if (p == 0) continue;
        std::vector<Eigen::Index> order(static_cast<std::size_t>(p));
        std::iota(order.begin(), order.end(), Eigen::Index{0});

        for (int epoch = 1; epoch <= cfg.epochs_per_dataset; ++epoch) {
            rng.shuffle(order);
            double epoch_loss = 0.0;
            Eigen::Index seen = 0;
            for (Eigen::Index start = 0; start < p; start += cfg.batch_size) {
                const Eigen::Index bsz = std::min<Eigen::Index>(cfg.batch_size, p - start);
                MatrixXd batch(bsz, ds.inputs.cols());
                std::vector<std::uint8_t> targets(static_cast<std::size_t>(bsz));
                for (Eigen::Index i = 0; i < bsz; ++i) {
                    const Eigen::Index src = order[static_cast<std::size_t>(start + i)];
                    batch.row(i) = ds.inputs.row(src);
                    targets[static_cast<std::size_t>(i)] = ds.y1[static_cast<std::size_t>(src)];
                }
                const double loss = loss_and_gradients(model, batch, targets, grads);
                if (!std::isfinite(loss)) {
                    throw TrainingError("non-finite loss in dataset " + dataset_ids[di] +
                                        ", epoch " + std::to_string(epoch) + ", batch at offset " +
                                        std::to_string(start));
                }
                epoch_loss += loss * static_cast<double>(bsz);
                seen += bsz;

                // global-norm clipping
                double sq = 0.0;
                for (std::size_t blk = 0; blk < gview.data.size(); ++blk) {
                    for (std::size_t k = 0; k < gview.size[blk]; ++k) {
                        const double v = gview.data[blk][k];
                        sq += v * v;
                    }
                }
                const double norm = std::sqrt(sq);
                const double scale =
                    (cfg.gradient_clip_norm > 0.0 && norm > cfg.gradient_clip_norm)
                        ? cfg.gradient_clip_norm / norm
                        : 1.0;

                ++step;
                const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
                const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
                std::size_t flat = 0;
                for (std::size_t blk = 0; blk < gview.data.size(); ++blk) {
                    for (std::size_t k = 0; k < gview.size[blk]; ++k, ++flat) {
                        const double gval = gview.data[blk][k] * scale;
                        adam_m[flat] = cfg.beta1 * adam_m[flat] + (1.0 - cfg.beta1) * gval;
                        adam_v[flat] = cfg.beta2 * adam_v[flat] + (1.0 - cfg.beta2) * gval * gval;
                        const double m_hat = adam_m[flat] / bc1;
                        const double v_hat = adam_v[flat] / bc2;
                        params.data[blk][k] -= cfg.learning_rate * m_hat /
                                               (std::sqrt(v_hat) + cfg.epsilon);
                    }
                }
            }
            trace.push_back({dataset_ids[di], epoch, epoch_loss / static_cast<double>(seen)});
        }
    }
    return trace;
}

double gradient_check(const LstmStack& model, const MatrixXd& windows,
                      const std::vector<std::uint8_t>& targets, double epsilon) {
    LstmStack probe = model;
    LstmGradients analytic;
    loss_and_gradients(probe, windows, targets, analytic);

    ParamView params = ParamView::of(probe.layers, probe.dense_weights, probe.dense_bias);
    ParamView gview = ParamView::of(analytic.layers, analytic.dense_weights, analytic.dense_bias);

    LstmGradients scratch;
    double worst = 0.0;
    for (std::size_t blk = 0; blk < params.data.size(); ++blk) {
        for (std::size_t k = 0; k < params.size[blk]; ++k) {
            const double saved = params.data[blk][k];
            params.data[blk][k] = saved + epsilon;
            const double lp = loss_and_gradients(probe, windows, targets, scratch);
            params.data[blk][k] = saved - epsilon;
            const double lm = loss_and_gradients(probe, windows, targets, scratch);
            params.data[blk][k] = saved;
            const double numeric = (lp - lm) / (2.0 * epsilon);
            const double an = gview.data[blk][k];
            const double denom = std::max({std::abs(an), std::abs(numeric), 1e-12});
            worst = std::max(worst, std::abs(an - numeric) / denom);
        }
    }
    return worst;
}

ForecastOutput predict_binary(const LstmStack& model, const MatrixXd& windows, double threshold) {
    if (threshold <= 0.0 || threshold >= 1.0) {
        throw UsageError("decision threshold must be in (0,1)");
    }
    ForecastOutput out;
    out.probabilities = forward(model, windows);
    out.binary.resize(static_cast<std::size_t>(out.probabilities.size()));
    for (Eigen::Index i = 0; i < out.probabilities.size(); ++i) {
        out.binary[static_cast<std::size_t>(i)] = out.probabilities(i) >= threshold ? 1 : 0;
    }
    return out;
}

std::vector<DepthSweepRow> depth_sweep(const std::vector<std::vector<int>>& stacks,
                                       const std::vector<WindowedSet>& train_sets,
                                       const WindowedSet& eval_set, const TrainConfig& cfg) {
    if (train_sets.empty()) throw UsageError("depth_sweep: no training data");
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < train_sets.size(); ++i) ids.push_back("ds" + std::to_string(i));

    std::vector<DepthSweepRow> rows;
    for (const auto& widths : stacks) {
        LstmStack model = init_model(widths, train_sets.front().spec.length,
                                     train_sets.front().spec.width, cfg.seed);
        train(model, train_sets, ids, cfg);
        ForecastOutput out = predict_binary(model, eval_set.inputs, cfg.decision_threshold);
        long long tp = 0, fn = 0;
        for (std::size_t i = 0; i < eval_set.y1.size(); ++i) {
            if (eval_set.y1[i]) {
                if (out.binary[i]) ++tp; else ++fn;
            }
        }
        const double recall = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
        rows.push_back({widths, recall});
    }
    return rows;
}

}  // namespace afc
