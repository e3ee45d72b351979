#include "afc/classify.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <numeric>
#include <thread>

#include "afc/error.hpp"
#include "afc/rng.hpp"

namespace afc {
namespace {

// Modal value, ties to the lowest tag.
int modal_tag(const std::map<int, int>& counts) {
    int best_tag = 0, best_count = -1;
    for (const auto& [tag, count] : counts) {
        if (count > best_count) {
            best_tag = tag;
            best_count = count;
        }
    }
    return best_tag;
}

double gini(const std::map<int, int>& counts, int total) {
    double g = 1.0;
    for (const auto& [tag, count] : counts) {
        const double p = static_cast<double>(count) / total;
        g -= p * p;
    }
    return g;
}

struct TreeBuilder {
    const Eigen::MatrixXd& x;
    const std::vector<int>& y;
    TreeParams params;
    int features_per_split;  // 0 = all
    Rng* rng;                // null = deterministic full feature scan
    std::vector<TreeNode> nodes;

    int build(std::vector<int> idx, int depth) {
        std::map<int, int> counts;
        for (int i : idx) ++counts[y[static_cast<std::size_t>(i)]];
        const int node_id = static_cast<int>(nodes.size());
        nodes.push_back({});
        nodes[static_cast<std::size_t>(node_id)].label = modal_tag(counts);

        const bool pure = counts.size() == 1;
        const bool depth_stop = params.max_depth > 0 && depth >= params.max_depth;
        if (pure || depth_stop || static_cast<int>(idx.size()) < params.min_samples_split) {
            return node_id;
        }

        const int d = static_cast<int>(x.cols());
        std::vector<int> features(static_cast<std::size_t>(d));
        std::iota(features.begin(), features.end(), 0);
        if (rng != nullptr && features_per_split > 0 && features_per_split < d) {
            rng->shuffle(features);
            features.resize(static_cast<std::size_t>(features_per_split));
            std::sort(features.begin(), features.end());
        }

        const double parent_gini = gini(counts, static_cast<int>(idx.size()));
        double best_gain = 0.0;
        int best_feature = -1;
        double best_threshold = 0.0;

        for (int feat : features) {
            std::vector<int> order = idx;
            std::sort(order.begin(), order.end(), [&](int a, int b) {
                const double va = x(a, feat), vb = x(b, feat);
                if (va != vb) return va < vb;
                return a < b;
            });
            std::map<int, int> left_counts;
            std::map<int, int> right_counts = counts;
            const int n = static_cast<int>(order.size());
            for (int split = 1; split < n; ++split) {
                const int moved = order[static_cast<std::size_t>(split - 1)];
                ++left_counts[y[static_cast<std::size_t>(moved)]];
                auto it = right_counts.find(y[static_cast<std::size_t>(moved)]);
                if (--it->second == 0) right_counts.erase(it);
                const double lo = x(order[static_cast<std::size_t>(split - 1)], feat);
                const double hi = x(order[static_cast<std::size_t>(split)], feat);
                if (lo == hi) continue;  // midpoint thresholds between distinct values only
                const double threshold = lo + (hi - lo) / 2.0;
                const double wl = static_cast<double>(split) / n;
                const double gain = parent_gini - wl * gini(left_counts, split) -
                                    (1.0 - wl) * gini(right_counts, n - split);
                if (gain > best_gain + 1e-15) {
                    best_gain = gain;
                    best_feature = feat;
                    best_threshold = threshold;
                }
            }
        }
        if (best_feature < 0) return node_id;  // no informative split

        std::vector<int> left_idx, right_idx;
        for (int i : idx) {
            (x(i, best_feature) < best_threshold ? left_idx : right_idx).push_back(i);
        }
        if (left_idx.empty() || right_idx.empty()) return node_id;

        nodes[static_cast<std::size_t>(node_id)].feature = best_feature;
        nodes[static_cast<std::size_t>(node_id)].threshold = best_threshold;
        const int left = build(std::move(left_idx), depth + 1);
        nodes[static_cast<std::size_t>(node_id)].left = left;
        const int right = build(std::move(right_idx), depth + 1);
        nodes[static_cast<std::size_t>(node_id)].right = right;
        return node_id;
    }
};

}  // namespace

KnnModel::KnnModel(Eigen::MatrixXd training, std::vector<int> tags, int k)
    : training_(std::move(training)), tags_(std::move(tags)), k_(k) {
    if (k_ < 1) throw UsageError("knn: k must be >= 1");
    if (k_ > training_.rows()) {
        throw UsageError("knn: k=" + std::to_string(k_) + " exceeds training rows " +
                         std::to_string(training_.rows()));
    }
    if (static_cast<Eigen::Index>(tags_.size()) != training_.rows()) {
        throw UsageError("knn: tag count != training rows");
    }
}

int KnnModel::predict(const Eigen::RowVectorXd& window) const {
    if (window.size() != training_.cols()) throw UsageError("knn: query dimension mismatch");
    const Eigen::Index n = training_.rows();
    std::vector<std::pair<double, Eigen::Index>> dist(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        dist[static_cast<std::size_t>(i)] = {(training_.row(i) - window).squaredNorm(), i};
    }
    std::sort(dist.begin(), dist.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return a.second < b.second;  // distance tie: lower row index
    });
    std::map<int, int> votes;
    for (int i = 0; i < k_; ++i) {
        ++votes[tags_[static_cast<std::size_t>(dist[static_cast<std::size_t>(i)].second)]];
    }
    return modal_tag(votes);
}

DecisionTree DecisionTree::fit(const Eigen::MatrixXd& windows, const std::vector<int>& tags,
                               const TreeParams& params) {
    if (windows.rows() == 0) throw UsageError("decision tree: empty training set");
    if (static_cast<Eigen::Index>(tags.size()) != windows.rows()) {
        throw UsageError("decision tree: tag count mismatch");
    }
    TreeBuilder builder{windows, tags, params, 0, nullptr, {}};
    std::vector<int> idx(static_cast<std::size_t>(windows.rows()));
    std::iota(idx.begin(), idx.end(), 0);
    builder.build(std::move(idx), 0);
    DecisionTree tree;
    tree.nodes_ = std::move(builder.nodes);
    return tree;
}

int DecisionTree::predict(const Eigen::RowVectorXd& window) const {
    int node = 0;
    while (nodes_[static_cast<std::size_t>(node)].feature >= 0) {
        const TreeNode& n = nodes_[static_cast<std::size_t>(node)];
        node = window(n.feature) < n.threshold ? n.left : n.right;
    }
    return nodes_[static_cast<std::size_t>(node)].label;
}

DecisionTree DecisionTree::from_nodes(std::vector<TreeNode> nodes) {
    DecisionTree tree;
    tree.nodes_ = std::move(nodes);
    return tree;
}

RandomForest RandomForest::fit(const Eigen::MatrixXd& windows, const std::vector<int>& tags,
                               const ForestParams& params, std::uint64_t seed, int jobs) {
    if (windows.rows() == 0) throw UsageError("random forest: empty training set");
    if (params.n_trees < 1) throw UsageError("random forest: n_trees must be >= 1");
    const int d = static_cast<int>(windows.cols());
    const int feats = params.features_per_split > 0
                          ? params.features_per_split
                          : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(d))));

    RandomForest forest;
    forest.trees_.resize(static_cast<std::size_t>(params.n_trees));
    Rng base(seed);

    auto fit_tree = [&](int ti) {
        Rng rng = base.split(static_cast<std::uint64_t>(ti) + 1);
        const Eigen::Index n = windows.rows();
        std::vector<int> idx;
        idx.reserve(static_cast<std::size_t>(n));
        if (params.bootstrap) {
            for (Eigen::Index i = 0; i < n; ++i) {
                idx.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(n))));
            }
        } else {
            for (Eigen::Index i = 0; i < n; ++i) idx.push_back(static_cast<int>(i));
        }
        const bool restrict = params.bootstrap || feats < d;
        TreeBuilder builder{windows, tags, params.tree, restrict ? feats : 0,
                            restrict ? &rng : nullptr, {}};
        builder.build(std::move(idx), 0);
        forest.trees_[static_cast<std::size_t>(ti)] = DecisionTree::from_nodes(std::move(builder.nodes));
    };

    // Per-tree seeds make the result independent of the thread count.
    if (jobs <= 1 || params.n_trees == 1) {
        for (int t = 0; t < params.n_trees; ++t) fit_tree(t);
    } else {
        std::vector<std::thread> pool;
        std::atomic<int> next{0};
        const int workers = std::min(jobs, params.n_trees);
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (int t = next.fetch_add(1); t < params.n_trees; t = next.fetch_add(1)) {
                    fit_tree(t);
                }
            });
        }
        for (auto& th : pool) th.join();
    }
    return forest;
}

int RandomForest::predict(const Eigen::RowVectorXd& window) const {
    std::map<int, int> votes;
    for (const auto& tree : trees_) ++votes[tree.predict(window)];
    return modal_tag(votes);
}

RandomForest RandomForest::from_trees(std::vector<DecisionTree> trees) {
    RandomForest forest;
    forest.trees_ = std::move(trees);
    return forest;
}

EnsembleVerdict bagged_select(const std::vector<std::string>& model_names,
                              const std::vector<std::vector<int>>& per_model_predictions,
                              const std::vector<int>& true_tags) {
    if (model_names.size() != per_model_predictions.size() || model_names.empty()) {
        throw UsageError("bagged_select: model name/prediction count mismatch");
    }
    for (const auto& preds : per_model_predictions) {
        if (preds.size() != true_tags.size()) {
            throw UsageError("bagged_select: prediction length mismatch");
        }
    }
    EnsembleVerdict verdict;
    verdict.model_names = model_names;
    verdict.predictions = per_model_predictions;

    for (const auto& preds : per_model_predictions) {
        std::size_t correct = 0;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            if (preds[i] == true_tags[i]) ++correct;
        }
        // Micro-averaged recall: for single-label multiclass this is the
        // pooled fraction correct.
        verdict.recall.push_back(true_tags.empty()
                                     ? 0.0
                                     : static_cast<double>(correct) / true_tags.size());
    }

    // Max recall; ties by fixed priority RF > DT > KNN, then input order.
    auto priority = [](const std::string& name) {
        if (name == "RF") return 3;
        if (name == "DT") return 2;
        if (name == "KNN") return 1;
        return 0;
    };
    std::size_t best = 0;
    for (std::size_t i = 1; i < model_names.size(); ++i) {
        if (verdict.recall[i] > verdict.recall[best] ||
            (verdict.recall[i] == verdict.recall[best] &&
             priority(model_names[i]) > priority(model_names[best]))) {
            best = i;
        }
    }
    verdict.chosen_model = model_names[best];
    verdict.final_predictions = per_model_predictions[best];
    return verdict;
}

}  // namespace afc
