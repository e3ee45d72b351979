#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

namespace afc {

struct ContingencyCounts {
    long long tp = 0, fp = 0, fn = 0, tn = 0;
    long long total() const { return tp + fp + fn + tn; }
};

// Zero-denominator metrics are reported as nullopt, never 0 or a crash.
struct MetricReport {
    std::optional<double> accuracy;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
};

struct FpafReport {
    long long predicted_alarms = 0;
    long long regression_tp = 0;
    long long regression_fp = 0;
    long long classifier_correct = 0;
    std::optional<double> fpaf_fraction;   // fp / predicted_alarms
    std::optional<double> final_accuracy;  // classifier_correct / predicted_alarms
};

struct PerAlarmRow {
    int tag = 0;
    long long occurrences = 0;
    long long correct = 0;
    double accuracy = 0.0;
};

ContingencyCounts binary_contingency(const std::vector<std::uint8_t>& pred,
                                     const std::vector<std::uint8_t>& truth);

MetricReport metrics(const ContingencyCounts& c);

MetricReport multiclass_micro(const std::vector<int>& preds, const std::vector<int>& truth);

// FPAF = fraction of regression-flagged instances whose target row has no
// true alarm.
FpafReport fpaf(const std::vector<std::uint8_t>& regression_pred,
                const std::vector<std::uint8_t>& truth);

// Corrected final score: flagged instances that are true alarms AND
// correctly tagged, over all flagged instances. Classifier predictions must
// cover exactly the flagged instances in order.
FpafReport final_accuracy(const std::vector<std::uint8_t>& regression_pred,
                          const std::vector<std::uint8_t>& truth_binary,
                          const std::vector<int>& classifier_preds_on_flagged,
                          const std::vector<int>& truth_tags_on_flagged);

// Per-tag forecast-and-classify accuracy; tags never observed in truth are
// omitted. forecast_tags uses 0 for "not forecast as this alarm".
std::vector<PerAlarmRow> per_alarm_breakdown(const std::vector<int>& forecast_tags,
                                             const std::vector<int>& truth_tags);

// matrix[a-1][b-1] = count(truth=a, pred=b), tags in 1..K.
std::vector<std::vector<long long>> confusion_matrix(const std::vector<int>& preds,
                                                     const std::vector<int>& truth, int num_tags);

struct ContingencyFractions {
    double fp = 0.0, fn = 0.0, tp = 0.0;
};

// Mean over turbines of per-turbine (FP, FN, TP) fractions, each normalized
// by that turbine's flagged + missed alarm instances (tp+fp+fn).
ContingencyFractions contingency_fractions(const std::vector<ContingencyCounts>& per_turbine);

}  // namespace afc
