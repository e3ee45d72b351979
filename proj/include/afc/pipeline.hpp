#pragma once

#include <map>
#include <string>
#include <vector>

#include "afc/classify.hpp"
#include "afc/dataset.hpp"
#include "afc/evaluate.hpp"
#include "afc/preprocess.hpp"
#include "afc/regressor.hpp"
#include "afc/synth.hpp"

namespace afc {

// Flat key=value configuration; every default mirrors the reference
// experiment (L=12, threshold 0.20, widths 512..16, 10 epochs).
struct PipelineConfig {
    std::string data_dir;
    std::vector<std::string> turbines;        // ordered ids
    std::vector<std::string> train_turbines;  // default: first 60% of ids
    std::vector<std::string> test_turbines;   // default: remainder
    std::string reference_turbine;            // default: first training turbine
    double nan_threshold = 0.20;
    int window_length = 12;
    std::vector<int> fw = {1};  // forecast offsets, each in 0..3
    std::vector<int> layer_widths = {512, 256, 128, 64, 32, 16};
    TrainConfig train;
    int knn_k = 5;
    ForestParams forest;
    TreeParams tree;
    std::string out_dir = "out";
    int jobs = 1;
};

PipelineConfig parse_config_text(const std::string& text);
PipelineConfig load_config(const std::string& path);
std::uint64_t config_hash(const PipelineConfig& cfg);

SynthSpec load_synth_spec(const std::string& path);

// Stage entry points. Each reads/writes staged artifacts under out_dir so
// runs are resumable and each step testable in isolation.
void run_synth(const SynthSpec& spec, const std::string& out_data_dir);
void run_preprocess(const PipelineConfig& cfg);
void run_train(const PipelineConfig& cfg);

struct TurbineReport {
    std::string turbine;
    int fw = 0;
    ContingencyCounts regression_counts;
    MetricReport regression_metrics;
    std::map<std::string, MetricReport> classifier_metrics;  // KNN/DT/RF
    FpafReport fpaf_report;
    std::string chosen_model;
    std::vector<PerAlarmRow> per_alarm;
    int num_tags = 0;
    std::vector<std::vector<long long>> confusion;
};

std::vector<TurbineReport> run_evaluate(const PipelineConfig& cfg);

struct SweepRow {
    std::string label;
    double recall = 0.0;
    double final_accuracy = 0.0;
};

std::vector<SweepRow> run_sweep_fw(const PipelineConfig& cfg);
std::vector<SweepRow> run_sweep_depth(const PipelineConfig& cfg,
                                      const std::vector<std::vector<int>>& stacks);

// Artifact IO, shared by stages and tests.
void save_merged(const MergedDataset& ds, const std::string& path);
MergedDataset load_merged(const std::string& path);
void save_model(const LstmStack& model, double threshold, std::uint64_t cfg_hash,
                const std::string& path);
LstmStack load_model(const std::string& path);
void save_knn(const KnnModel& model, const std::string& path);
KnnModel load_knn(const std::string& path);
void save_tree(const DecisionTree& tree, const std::string& path);
DecisionTree load_tree(const std::string& path);
void save_forest(const RandomForest& forest, const std::string& path);
RandomForest load_forest(const std::string& path);

}  // namespace afc
