#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace afc {

// Classifiers consume flattened L*M windows and alarm tags in 1..K.

class KnnModel {
public:
    KnnModel(Eigen::MatrixXd training, std::vector<int> tags, int k);

    // Majority among the k nearest by Euclidean distance. Distance ties go
    // to the lower training-row index, vote ties to the lowest tag.
    int predict(const Eigen::RowVectorXd& window) const;

    int k() const { return k_; }
    const Eigen::MatrixXd& training() const { return training_; }
    const std::vector<int>& tags() const { return tags_; }

private:
    Eigen::MatrixXd training_;
    std::vector<int> tags_;
    int k_;
};

struct TreeNode {
    int feature = -1;        // -1 for leaf
    double threshold = 0.0;
    int left = -1, right = -1;  // child indices
    int label = 0;           // modal tag at leaf
};

struct TreeParams {
    int max_depth = 0;  // 0 = unlimited
    int min_samples_split = 2;
};

class DecisionTree {
public:
    static DecisionTree fit(const Eigen::MatrixXd& windows, const std::vector<int>& tags,
                            const TreeParams& params);
    int predict(const Eigen::RowVectorXd& window) const;

    const std::vector<TreeNode>& nodes() const { return nodes_; }
    static DecisionTree from_nodes(std::vector<TreeNode> nodes);

private:
    std::vector<TreeNode> nodes_;  // node 0 is the root
};

struct ForestParams {
    int n_trees = 100;
    bool bootstrap = true;
    int features_per_split = 0;  // 0 = ceil(sqrt(d))
    TreeParams tree;
};

class RandomForest {
public:
    static RandomForest fit(const Eigen::MatrixXd& windows, const std::vector<int>& tags,
                            const ForestParams& params, std::uint64_t seed, int jobs = 1);
    // Majority vote, ties broken by lowest tag.
    int predict(const Eigen::RowVectorXd& window) const;

    const std::vector<DecisionTree>& trees() const { return trees_; }
    static RandomForest from_trees(std::vector<DecisionTree> trees);

private:
    std::vector<DecisionTree> trees_;
};

struct EnsembleVerdict {
    std::vector<std::string> model_names;                 // KNN, DT, RF order
    std::vector<std::vector<int>> predictions;            // per model
    std::vector<double> recall;                           // micro-averaged
    std::string chosen_model;
    std::vector<int> final_predictions;
};

// Picks the max-recall model; ties resolved by fixed priority RF > DT > KNN.
EnsembleVerdict bagged_select(const std::vector<std::string>& model_names,
                              const std::vector<std::vector<int>>& per_model_predictions,
                              const std::vector<int>& true_tags);

}  // namespace afc
